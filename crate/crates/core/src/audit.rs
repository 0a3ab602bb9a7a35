//! Sample-based audit of the structural assumptions on the model Hamiltonian.
//!
//! Momenta are drawn uniformly from the ball `|p| <= R` at uniformly chosen
//! grid nodes with a seeded ChaCha8 stream, so certificates are reproducible.
//! Every constant is the sampled supremum of the relevant quotient and is then
//! re-checked on the same samples (and on fresh random matrices where the
//! assumption quantifies over symmetric `M`).

use crate::hamiltonian::HamiltonianModel;
use crate::ops::{gradient_at, hessian_at};
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative slack allowed when re-checking sampled inequalities.
const RECHECK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditSpec {
    pub radius: f64,
    pub samples: usize,
    pub matrix_samples: usize,
    pub seed: u64,
    pub deltas: Vec<f64>,
    /// Coupling exponent, if known, for the A2/A4 certificate.
    pub alpha: Option<f64>,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self { radius: 20.0, samples: 10_000, matrix_samples: 8, seed: 0, deltas: vec![0.5], alpha: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertVerdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCertificate {
    pub assumption: String,
    pub constants: BTreeMap<String, f64>,
    pub samples: String,
    /// Largest violation `lhs - rhs` over the sample set; `<= 0` means every
    /// sampled inequality holds.
    pub residual: f64,
    pub verdict: CertVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AuditCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == CertVerdict::Pass
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }
}

/// Eigen-decomposition of a symmetric `d×d` row-major matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and column eigenvectors (row-major `V`).
pub fn sym_eigen(mat: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = mat.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _ in 0..64 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * d + j].powi(2)).sum();
        let diag: f64 = (0..d).map(|i| a[i * d + i].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

/// `Vᵀ A V` for row-major matrices.
fn rotate(a: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += v[k * d + i] * a[k * d + l] * v[l * d + j];
                }
            }
            out[i * d + j] = s;
        }
    }
    out
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            for j in 0..d {
                out[i * d + j] += a[i * d + k] * b[k * d + j];
            }
        }
    }
    out
}

fn trace(a: &[f64], d: usize) -> f64 {
    (0..d).map(|i| a[i * d + i]).sum()
}

fn frob_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Pointwise quantities of one `(x, p)` sample, all in `f64`.
struct Sample {
    node: usize,
    p: Vec<f64>,
    h: f64,
    l_hat: f64,
    dp_norm: f64,
    hpp: Vec<f64>,
    /// `D²_{x p} H` with row index `x_j` and column index `p_i`.
    hxp: Vec<f64>,
    dx_norm: f64,
    dxx_norm: f64,
}

fn sample_set<T: Real>(model: &HamiltonianModel<T>, spec: &AuditSpec) -> Vec<Sample> {
    let d = model.dim();
    let grid = *model.a().grid();
    let gamma = model.gamma().as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut da = vec![T::zero(); d];
    let mut dv = vec![T::zero(); d];
    let mut d2a = vec![T::zero(); d * d];
    let mut d2v = vec![T::zero(); d * d];
    let mut out = Vec::with_capacity(spec.samples);
    while out.len() < spec.samples {
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-spec.radius..=spec.radius)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() > spec.radius * spec.radius {
            continue;
        }
        let node = rng.gen_range(0..grid.len());
        let pt: Vec<T> = p.iter().map(|&x| T::lit(x)).collect();
        let b = 1.0 + p.iter().map(|x| x * x).sum::<f64>();
        gradient_at(model.a(), node, &mut da);
        gradient_at(model.v(), node, &mut dv);
        hessian_at(model.a(), node, &mut d2a);
        hessian_at(model.v(), node, &mut d2v);
        let bg = b.powf(gamma / 2.0);
        let dx_norm = (0..d).map(|j| (da[j].as_f64() * bg + dv[j].as_f64()).powi(2)).sum::<f64>().sqrt();
        let dxx_norm = (0..d * d).map(|k| (d2a[k].as_f64() * bg + d2v[k].as_f64()).powi(2)).sum::<f64>().sqrt();
        let coef = gamma * b.powf((gamma - 2.0) / 2.0);
        let mut hxp = vec![0.0; d * d];
        for j in 0..d {
            for i in 0..d {
                hxp[j * d + i] = da[j].as_f64() * coef * p[i];
            }
        }
        let dp: Vec<T> = model.dp_h(node, &pt);
        out.push(Sample {
            node,
            h: model.h_eval(node, &pt).as_f64(),
            l_hat: model.l_hat(node, &pt).as_f64(),
            dp_norm: dp.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt(),
            hpp: model.dpp_h(node, &pt).into_iter().map(|x| x.as_f64()).collect(),
            hxp,
            dx_norm,
            dxx_norm,
            p,
        });
    }
    out
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let x = rng.gen_range(-1.0..1.0);
            m[i * d + j] = x;
            m[j * d + i] = x;
        }
    }
    m
}

fn certificate(
    assumption: &str,
    constants: BTreeMap<String, f64>,
    samples: &str,
    residual: f64,
    scale: f64,
    extra_ok: bool,
    note: Option<String>,
) -> AuditCertificate {
    let finite = constants.values().all(|c| c.is_finite()) && residual.is_finite();
    let ok = finite && extra_ok && residual <= RECHECK_TOL * scale.max(1.0);
    AuditCertificate {
        assumption: assumption.into(),
        constants,
        samples: samples.into(),
        residual,
        verdict: if ok { CertVerdict::Pass } else { CertVerdict::Fail },
        note,
    }
}

fn a3_search(samples: &[Sample], gamma: f64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    let steps = 40;
    for k in 1..=steps {
        let c = (gamma - 1.0) * k as f64 / steps as f64;
        let big_c = samples.iter().map(|s| c * s.h - s.l_hat).fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let score = c / (1.0 + big_c);
        if score > best.2 {
            best = (c, big_c, score);
        }
    }
    (best.0, best.1)
}

/// `(c, C)` with `L̂ >= cH - C` on the sample set, `c` chosen by line search
/// over `(0, γ-1]` to maximize `c/(1+C)`.
pub fn a3_constants<T: Real>(model: &HamiltonianModel<T>, spec: &AuditSpec) -> (f64, f64) {
    let small = AuditSpec { samples: spec.samples.min(2000), ..spec.clone() };
    a3_search(&sample_set(model, &small), model.gamma().as_f64())
}

/// Certificates for A1 through A9.
pub fn audit_assumptions<T: Real>(model: &HamiltonianModel<T>, spec: &AuditSpec) -> Vec<AuditCertificate> {
    let d = model.dim();
    let gamma = model.gamma().as_f64();
    let samples = sample_set(model, spec);
    let desc = format!("{} samples, |p| <= {}, seed {}", samples.len(), spec.radius, spec.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut certs = Vec::new();
    let max_av = model.max_h_at_zero().as_f64();
    let min_av = -model.max_l_at_zero().as_f64();

    // A1: strict convexity and H >= 1
    let mut min_eig = f64::INFINITY;
    let mut c_hess = f64::INFINITY;
    for s in &samples {
        let (eig, _) = sym_eigen(&s.hpp, d);
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        min_eig = min_eig.min(lo);
        let b = 1.0 + s.p.iter().map(|x| x * x).sum::<f64>();
        c_hess = c_hess.min(lo / b.powf((gamma - 2.0) / 2.0));
    }
    let min_h = samples.iter().map(|s| s.h).fold(f64::INFINITY, f64::min);
    let consts = BTreeMap::from([
        ("min_eigenvalue".to_string(), min_eig),
        ("hessian_lower_c".to_string(), c_hess),
        ("min_a_plus_v".to_string(), min_av),
        ("min_h".to_string(), min_h),
    ]);
    certs.push(certificate(
        "A1",
        consts,
        &desc,
        (1.0 - min_h).max(-min_eig),
        1.0,
        min_eig > 0.0 && min_av >= 1.0,
        Some("H attains its minimum a(x)+V(x) at p = 0, so H >= 1 globally iff min(a+V) >= 1".into()),
    ));

    // A2/A4: g(m) = m^α
    let alpha_ok = spec.alpha.is_none_or(|a| a > 0.0);
    let consts = spec.alpha.map(|a| BTreeMap::from([("alpha".to_string(), a)])).unwrap_or_default();
    certs.push(certificate(
        "A2/A4",
        consts,
        "analytic",
        0.0,
        1.0,
        alpha_ok,
        Some("g(m) = m^alpha is nonnegative and increasing on [0, inf) for alpha > 0".into()),
    ));

    // A3
    let (c, big_c) = a3_search(&samples, gamma);
    let res = samples.iter().map(|s| c * s.h - big_c - s.l_hat).fold(f64::NEG_INFINITY, f64::max);
    let scale = samples.iter().map(|s| s.h).fold(0.0, f64::max);
    certs.push(certificate(
        "A3",
        BTreeMap::from([("c".to_string(), c), ("C".to_string(), big_c)]),
        &desc,
        res,
        scale,
        c > 0.0,
        Some(format!(
            "for c <= gamma-1, L_hat - cH >= -(1+c)(a+V) for every p, so C = {} works globally",
            (1.0 + c) * max_av
        )),
    ));

    // A5: derivative growth and the δ-inequality
    let c5 = samples.iter().map(|s| s.dx_norm.max(s.dxx_norm) / (s.h + 1.0)).fold(0.0, f64::max);
    let mut res5 = samples.iter().map(|s| s.dx_norm.max(s.dxx_norm) - c5 * (s.h + 1.0)).fold(f64::NEG_INFINITY, f64::max);
    let mut consts5 = BTreeMap::from([("C".to_string(), c5)]);
    for &delta in &spec.deltas {
        let mut c_delta = 0.0f64;
        let mut sups = Vec::with_capacity(samples.len());
        for s in &samples {
            // sup over symmetric M of Tr(A M) - δ Tr(P M²), with A = sym(D²_xp H)
            let mut sym = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    sym[i * d + j] = 0.5 * (s.hxp[i * d + j] + s.hxp[j * d + i]);
                }
            }
            let (eig, v) = sym_eigen(&s.hpp, d);
            let rot = rotate(&sym, &v, d);
            let mut sup = 0.0;
            for i in 0..d {
                for j in 0..d {
                    sup += rot[i * d + j].powi(2) / (2.0 * delta * (eig[i] + eig[j]));
                }
            }
            sups.push(sup);
            c_delta = c_delta.max(sup / s.h);
        }
        for (s, _) in samples.iter().zip(&sups).step_by((samples.len() / 500).max(1)) {
            for _ in 0..spec.matrix_samples {
                let m = random_symmetric(&mut rng, d);
                for scale in [1e-3, 1e-1, 1.0, 10.0, 1e3] {
                    let ms: Vec<f64> = m.iter().map(|x| x * scale).collect();
                    let lhs = trace(&matmul(&s.hxp, &ms, d), d);
                    let rhs = delta * trace(&matmul(&s.hpp, &matmul(&ms, &ms, d), d), d) + c_delta * s.h;
                    res5 = res5.max((lhs - rhs) / rhs.abs().max(1.0));
                }
            }
        }
        consts5.insert(format!("C_delta({delta})"), c_delta);
    }
    certs.push(certificate(
        "A5",
        consts5,
        &format!("{desc}, {} random symmetric M per checked sample", spec.matrix_samples),
        res5,
        scale,
        true,
        Some("D_xH and D2_xxH are (1+|p|^2)^(gamma/2) times derivatives of a plus derivatives of V, so the ratio to H is bounded for all p".into()),
    ));

    // A7: H <= C|p|^γ + C
    let q7 = |s: &Sample| s.h / (s.p.iter().map(|x| x * x).sum::<f64>().sqrt().powf(gamma) + 1.0);
    let c7 = samples.iter().map(q7).fold(0.0, f64::max);
    let res7 = samples
        .iter()
        .map(|s| s.h - c7 * (s.p.iter().map(|x| x * x).sum::<f64>().sqrt().powf(gamma) + 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let a_max = model.a().max().as_f64();
    let v_max = model.v().max().as_f64();
    certs.push(certificate(
        "A7",
        BTreeMap::from([("C".to_string(), c7)]),
        &desc,
        res7,
        scale,
        true,
        Some(format!(
            "for |p| >= 1, (1+|p|^2)^(gamma/2) <= 2^(gamma/2)|p|^gamma, so C = {} covers the tail",
            a_max * 2f64.powf(gamma / 2.0) + v_max
        )),
    ));

    // A8: |D_pH| <= C|p|^{γ-1} + C
    let grow8 = |s: &Sample| s.p.iter().map(|x| x * x).sum::<f64>().sqrt().powf(gamma - 1.0) + 1.0;
    let c8 = samples.iter().map(|s| s.dp_norm / grow8(s)).fold(0.0, f64::max);
    let res8 = samples.iter().map(|s| s.dp_norm - c8 * grow8(s)).fold(f64::NEG_INFINITY, f64::max);
    certs.push(certificate(
        "A8",
        BTreeMap::from([("C".to_string(), c8)]),
        &desc,
        res8,
        scale,
        true,
        Some(format!("|D_pH| <= a gamma |p|^(gamma-1) for every p, so C = {} covers the tail", a_max * gamma)),
    ));

    // A9: |D²_xp H|² <= C H and |P M|² <= C Tr(P M²)
    let c9a = samples.iter().map(|s| frob_sq(&s.hxp) / s.h).fold(0.0, f64::max);
    let mut c9b = 0.0f64;
    for s in &samples {
        let (eig, _) = sym_eigen(&s.hpp, d);
        for i in 0..d {
            for j in 0..d {
                c9b = c9b.max(2.0 * eig[i] * eig[i] / (eig[i] + eig[j]));
            }
        }
    }
    let mut res9 = samples.iter().map(|s| frob_sq(&s.hxp) - c9a * s.h).fold(f64::NEG_INFINITY, f64::max);
    for s in samples.iter().step_by((samples.len() / 500).max(1)) {
        for _ in 0..spec.matrix_samples {
            let m = random_symmetric(&mut rng, d);
            let lhs = frob_sq(&matmul(&s.hpp, &m, d));
            let rhs = c9b * trace(&matmul(&s.hpp, &matmul(&m, &m, d), d), d);
            res9 = res9.max((lhs - rhs) / rhs.abs().max(1e-300));
        }
    }
    certs.push(certificate(
        "A9",
        BTreeMap::from([("C_xp".to_string(), c9a), ("C_pp".to_string(), c9b)]),
        &format!("{desc}, {} random symmetric M per checked sample", spec.matrix_samples),
        res9,
        scale,
        true,
        Some("|D2_xpH|^2 grows like (1+|p|^2)^(gamma-1) and gamma-1 < gamma/2; D2_ppH has eigenvalues bounded by a gamma".into()),
    ));

    // every sampled node is used at least once on realistic sample counts
    debug_assert!(samples.iter().all(|s| s.node < model.a().len()));
    certs
}

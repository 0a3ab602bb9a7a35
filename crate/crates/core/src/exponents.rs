//! Exponent algebra for the Sobolev bootstrap and a numerical search for the
//! admissibility threshold of the coupling exponent.
//!
//! The constraint system links fourteen exponents through eight equalities and
//! a handful of strict inequalities. The searcher works on the reduced space
//! `(υ, θ, β₀, ζ)`: every other exponent, `p` included, follows in closed form.
//! [`witness_residuals`] re-checks a full witness from scratch and shares no
//! code with the searcher.

use crate::error::{MfgError, Result};
use crate::scalar::Real;
use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Equality residuals at or below this count as satisfied.
pub const EQUALITY_TOL: f64 = 1e-9;
/// Strict inequalities need at least this much slack.
pub const STRICT_SLACK: f64 = 1e-9;
/// Default search level: `2^level + 1` grid points per reduced axis.
pub const DEFAULT_BUDGET: u32 = 4;
/// Bisection stops once the bracket is this narrow.
pub const ALPHA_BRACKET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentWitness<T> {
    pub lambda: T,
    pub zeta: T,
    pub upsilon: T,
    pub a_upsilon: T,
    pub b_upsilon: T,
    pub r: T,
    pub r_tilde: T,
    pub p: T,
    pub p_tilde: T,
    pub theta: T,
    #[serde(rename = "F")]
    pub f_exp: T,
    #[serde(rename = "G")]
    pub g_exp: T,
    pub beta0: T,
    pub q: T,
}

/// Outcome of [`admissibility`] for one `(γ, d, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub gamma: f64,
    pub d: usize,
    pub alpha: f64,
    pub feasible: bool,
    pub witness: Option<ExponentWitness<f64>>,
    pub alpha_max: f64,
    pub formula: f64,
}

/// Result of a witness search. Infeasibility is a value, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum WitnessSearch {
    Feasible(ExponentWitness<f64>),
    /// Best candidate seen, with its smallest slack (negative or tiny).
    Infeasible {
        best: Option<ExponentWitness<f64>>,
        min_slack: f64,
    },
}

impl WitnessSearch {
    pub fn is_feasible(&self) -> bool {
        matches!(self, WitnessSearch::Feasible(_))
    }

    pub fn witness(&self) -> Option<&ExponentWitness<f64>> {
        match self {
            WitnessSearch::Feasible(w) => Some(w),
            WitnessSearch::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub value: f64,
    pub strict: bool,
}

impl Slack {
    pub fn holds(&self) -> bool {
        if self.strict {
            self.value > STRICT_SLACK
        } else {
            self.value >= 0.0
        }
    }
}

/// Named residual map produced by [`witness_residuals`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessResiduals {
    pub equalities: BTreeMap<String, f64>,
    pub slacks: BTreeMap<String, Slack>,
}

impl WitnessResiduals {
    pub fn feasible(&self) -> bool {
        self.equalities.values().all(|r| *r <= EQUALITY_TOL)
            && self.slacks.values().all(Slack::holds)
    }

    pub fn worst_equality(&self) -> f64 {
        self.equalities.values().fold(0.0, |acc, r| acc.max(*r))
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks
            .values()
            .fold(f64::INFINITY, |acc, s| acc.min(s.value))
    }

    /// Names of the violated constraints.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .equalities
            .iter()
            .filter(|(_, r)| **r > EQUALITY_TOL || r.is_nan())
            .map(|(k, _)| k.clone())
            .collect();
        out.extend(
            self.slacks
                .iter()
                .filter(|(_, s)| !s.holds())
                .map(|(k, _)| k.clone()),
        );
        out
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d <= 2 {
        return Err(MfgError::Domain(format!(
            "exponent algebra needs d > 2, got {d}"
        )));
    }
    Ok(())
}

/// `2*/2 = d/(d−2)`.
fn half_sobolev(d: usize) -> f64 {
    d as f64 / (d as f64 - 2.0)
}

/// Open window `(1 + 1/(d+1), 2)` for the growth exponent.
pub fn gamma_in_window(gamma: f64, d: usize) -> bool {
    gamma > 1.0 + 1.0 / (d as f64 + 1.0) && gamma < 2.0
}

fn check_inputs(gamma: f64, d: usize, alpha: f64) -> Result<()> {
    check_dim(d)?;
    if !gamma_in_window(gamma, d) {
        return Err(MfgError::Domain(format!(
            "gamma = {gamma} outside (1 + 1/(d+1), 2) for d = {d}"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(MfgError::Domain(format!("alpha = {alpha} must be positive")));
    }
    Ok(())
}

/// `κ = (d + 2q − dq) / (q((θ−1)d + 2))`, defined only where it is positive.
pub fn kappa<T: Real>(q: T, theta: T, d: usize) -> Result<T> {
    check_dim(d)?;
    let df = T::from_usize_lossy(d);
    let two = T::lit(2.0);
    if !(q > T::zero()) || !(theta > T::one()) {
        return Err(MfgError::Domain(format!(
            "kappa needs q > 0 and theta > 1, got q = {q}, theta = {theta}"
        )));
    }
    let num = df + two * q - df * q;
    if !(num > T::zero()) {
        return Err(MfgError::Domain(format!(
            "kappa <= 0: q = {q} is not below d/(d-2)"
        )));
    }
    Ok(num / (q * ((theta - T::one()) * df + two)))
}

/// `r_n = r(θ^n − 1)/(θ − 1)`.
pub fn r_n<T: Real>(r: T, theta: T, n: u32) -> T {
    let mut acc = T::zero();
    let mut pow = T::one();
    for _ in 0..n {
        acc = acc + pow;
        pow = pow * theta;
    }
    r * acc
}

/// `β_n = θ^n β₀`.
pub fn beta_n<T: Real>(beta0: T, theta: T, n: u32) -> T {
    beta0 * theta.powi(n as i32)
}

/// `(a_υ, b_υ)`; `υ = 1` gives `a_υ = +∞`.
pub fn ab_upsilon<T: Real>(alpha: T, beta0: T, theta: T, d: usize, upsilon: T) -> (T, T) {
    let df = T::from_usize_lossy(d);
    let one = T::one();
    let ap1 = alpha + one;
    let a = if upsilon >= one {
        T::infinity()
    } else {
        ap1 / (one - upsilon)
    };
    let b = df * ap1 * beta0 * theta
        / (ap1 * df * upsilon + theta * beta0 * (df - T::lit(2.0)) * (one - upsilon));
    (a, b)
}

/// `r = p(d(θ−1) + 2)/(2p − d)`.
pub fn r_of_p<T: Real>(p: T, theta: T, d: usize) -> Result<T> {
    let df = T::from_usize_lossy(d);
    let two = T::lit(2.0);
    if !(two * p > df) {
        return Err(MfgError::Domain(format!(
            "r_of_p needs p > d/2, got p = {p}"
        )));
    }
    Ok(p * (df * (theta - T::one()) + two) / (two * p - df))
}

/// Closed-form lower bound for the admissibility threshold.
pub fn alpha_formula<T: Real>(gamma: T, d: usize) -> T {
    let g = gamma;
    let df = T::from_usize_lossy(d);
    let c = T::lit;
    let num = -c(4.0) * (g - c(4.0)).powi(2) * (g - c(1.0)) * g * g
        + c(2.0)
            * df
            * (-c(4.0) + (g - c(2.0)) * g)
            * (-c(4.0) + (g - c(4.0)) * (g - c(2.0)) * g);
    let den = (df - c(2.0))
        * (g - c(4.0))
        * (g - c(1.0))
        * g
        * (-c(2.0) * (g - c(4.0)) * g + df * (-c(4.0) + (g - c(2.0)) * g));
    num / den
}

fn eq_gap(lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        0.0
    } else {
        (lhs - rhs).abs()
    }
}

/// Re-evaluates every constraint of the system for a complete witness.
///
/// Equalities are reported as `|LHS − RHS|`, inequalities as slack.
pub fn witness_residuals<T: Real>(
    w: &ExponentWitness<T>,
    gamma: f64,
    d: usize,
    alpha: f64,
) -> WitnessResiduals {
    let lam = w.lambda.as_f64();
    let zeta = w.zeta.as_f64();
    let ups = w.upsilon.as_f64();
    let a = w.a_upsilon.as_f64();
    let b = w.b_upsilon.as_f64();
    let r = w.r.as_f64();
    let rt = w.r_tilde.as_f64();
    let p = w.p.as_f64();
    let pt = w.p_tilde.as_f64();
    let theta = w.theta.as_f64();
    let big_f = w.f_exp.as_f64();
    let big_g = w.g_exp.as_f64();
    let beta0 = w.beta0.as_f64();
    let q = w.q.as_f64();
    let df = d as f64;
    let star = 2.0 * df / (df - 2.0);

    let mut eqs = BTreeMap::new();
    let a_rhs = if ups == 1.0 {
        f64::INFINITY
    } else {
        (alpha + 1.0) / (1.0 - ups)
    };
    eqs.insert("a_upsilon".into(), eq_gap(a, a_rhs));
    let b_den = (alpha + 1.0) * df * ups + theta * beta0 * (df - 2.0) * (1.0 - ups);
    eqs.insert(
        "b_upsilon".into(),
        eq_gap(b, df * (alpha + 1.0) * beta0 * theta / b_den),
    );
    eqs.insert(
        "r_of_p".into(),
        eq_gap(r * (2.0 * p - df), p * (df * (theta - 1.0) + 2.0)),
    );
    eqs.insert("q_conjugate".into(), eq_gap(1.0 / p + 1.0 / q, 1.0));
    let inv_pt = (1.0 - zeta) / ((1.0 + 1.0 / alpha) * star / 2.0) + zeta * alpha / b;
    eqs.insert("p_tilde".into(), eq_gap(1.0 / pt, inv_pt));
    let inv_rt = (1.0 - zeta) / (1.0 + 1.0 / alpha) + zeta * alpha / a;
    eqs.insert("r_tilde".into(), eq_gap(1.0 / rt, inv_rt));
    eqs.insert(
        "eq_f".into(),
        eq_gap(
            1.0 / (2.0 * (gamma - 1.0) * r),
            lam / gamma + (1.0 - lam) / big_f,
        ),
    );
    eqs.insert(
        "eq_g".into(),
        eq_gap(
            1.0 / (2.0 * (gamma - 1.0) * p),
            lam / gamma + (1.0 - lam) / big_g,
        ),
    );
    eqs.insert("f_scaling".into(), eq_gap(big_f / gamma, a / alpha));
    eqs.insert("g_scaling".into(), eq_gap(big_g / gamma, b / alpha));

    let mut sl = BTreeMap::new();
    let mut put = |name: &str, value: f64, strict: bool| {
        sl.insert(name.to_string(), Slack { value, strict });
    };
    put("upsilon_lo", ups, false);
    put("upsilon_hi", 1.0 - ups, false);
    put("theta", theta - 1.0, true);
    put("lambda_lo", lam, false);
    put("lambda_hi", 1.0 - lam, false);
    put("zeta_lo", zeta, false);
    put("zeta_hi", 1.0 - zeta, false);
    put("q_lo", q - 1.0, true);
    put("q_hi", df / (df - 2.0) - q, true);
    put("p", p - df / 2.0, true);
    put("beta0_lo", beta0 - 1.0, false);
    put("beta0_hi", star / 2.0 - beta0, true);
    let ratio = if a.is_infinite() {
        b / alpha
    } else {
        b / a * (a - alpha) / alpha
    };
    put("integrability", ratio - df / 2.0, true);
    put("interpolation", pt * (rt - 1.0) / rt - df / 2.0, true);
    let tail = r * ups * alpha * (1.0 - 1.0 / theta) / (beta0 * (theta - 1.0));
    let prod7 = (1.0 - lam) * (gamma - 1.0) * (4.0 * zeta - gamma * zeta) / (2.0 - gamma) * tail;
    let prod8 = (1.0 - lam) * (gamma - 1.0) * (2.0 + gamma * zeta) / gamma * tail;
    put("product_7", 1.0 - prod7, true);
    put("product_8", 1.0 - prod8, true);

    WitnessResiduals {
        equalities: eqs,
        slacks: sl,
    }
}

struct Problem {
    gamma: f64,
    d: usize,
    alpha: f64,
    lo: [f64; 4],
    hi: [f64; 4],
}

const UPSILON_MAX: f64 = 0.999;
const THETA_MIN: f64 = 1.0001;
const THETA_MAX: f64 = 30.0;

impl Problem {
    fn new(gamma: f64, d: usize, alpha: f64) -> Self {
        Self {
            gamma,
            d,
            alpha,
            lo: [0.0, 0.0, 1.0, 0.0],
            hi: [UPSILON_MAX, 1.0, half_sobolev(d) - 1e-6, 1.0],
        }
    }

    /// Maps unit-cube coordinates to `(υ, θ, β₀, ζ)`; θ is log-spaced in `θ−1`.
    fn physical(&self, u: &[f64]) -> [f64; 4] {
        let mut x = [0.0; 4];
        for k in 0..4 {
            let t = u[k].clamp(0.0, 1.0);
            x[k] = self.lo[k] + t * (self.hi[k] - self.lo[k]);
        }
        let (l0, l1) = ((THETA_MIN - 1.0).ln(), (THETA_MAX - 1.0).ln());
        x[1] = 1.0 + (l0 + u[1].clamp(0.0, 1.0) * (l1 - l0)).exp();
        x
    }

    /// Builds the witness determined by the reduced variables together with
    /// its smallest constraint slack.
    fn derive(&self, x: [f64; 4]) -> Option<(ExponentWitness<f64>, f64)> {
        let [ups, theta, beta0, zeta] = x;
        let (g, alpha) = (self.gamma, self.alpha);
        let df = self.d as f64;
        let (a, b) = ab_upsilon(alpha, beta0, theta, self.d, ups);
        let big_f = g * a / alpha;
        let big_g = g * b / alpha;
        let half = 1.0 / (2.0 * (g - 1.0));
        let dd = df * (theta - 1.0) + 2.0;
        let kf = 1.0 / g - 1.0 / big_f;
        let kg = 1.0 / g - 1.0 / big_g;
        // 1/p from eliminating λ between the two time-exponent equations.
        let s = ((1.0 / big_g - 1.0 / big_f) / g + 2.0 * half * kg / dd)
            / (half * (df * kg / dd + kf));
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        let p = 1.0 / s;
        let r = p * dd / (2.0 * p - df);
        let lam = (half / r - 1.0 / big_f) / kf;
        let q = p / (p - 1.0);
        let star_half = df / (df - 2.0);
        let pt = 1.0 / ((1.0 - zeta) / ((1.0 + 1.0 / alpha) * star_half) + zeta * alpha / b);
        let rt = 1.0 / ((1.0 - zeta) / (1.0 + 1.0 / alpha) + zeta * alpha / a);
        let common = r * ups * alpha * (1.0 - 1.0 / theta) / (beta0 * (theta - 1.0));
        let e7 = (1.0 - lam) * (g - 1.0) * (4.0 * zeta - g * zeta) / (2.0 - g) * common;
        let e8 = (1.0 - lam) * (g - 1.0) * (2.0 + g * zeta) / g * common;
        let slacks = [
            lam,
            1.0 - lam,
            b / a * (a - alpha) / alpha - df / 2.0,
            p - df / 2.0,
            if rt > 0.0 {
                pt * (rt - 1.0) / rt - df / 2.0
            } else {
                -1.0
            },
            1.0 - e7,
            1.0 - e8,
            star_half - beta0,
            rt - 1.0,
        ];
        let min = slacks.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if !min.is_finite() {
            return None;
        }
        let w = ExponentWitness {
            lambda: lam,
            zeta,
            upsilon: ups,
            a_upsilon: a,
            b_upsilon: b,
            r,
            r_tilde: rt,
            p,
            p_tilde: pt,
            theta,
            f_exp: big_f,
            g_exp: big_g,
            beta0,
            q,
        };
        Some((w, min))
    }

    fn score(&self, u: &[f64]) -> f64 {
        match self.derive(self.physical(u)) {
            Some((_, s)) => s,
            None => -1e6,
        }
    }
}

impl CostFunction for &Problem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, ArgminError> {
        Ok(-self.score(u))
    }
}

const REFINE_STARTS: usize = 6;
const REFINE_ITERS: u64 = 1500;

fn refine(problem: &Problem, start: [f64; 4], step: f64) -> [f64; 4] {
    let mut simplex = vec![start.to_vec()];
    for k in 0..4 {
        let mut v = start.to_vec();
        v[k] = if v[k] + step <= 1.0 { v[k] + step } else { v[k] - step };
        simplex.push(v);
    }
    let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-14) {
        Ok(s) => s,
        Err(_) => return start,
    };
    let run = Executor::new(problem, solver)
        .configure(|s| s.max_iters(REFINE_ITERS))
        .run();
    match run {
        Ok(res) => match &res.state().best_param {
            Some(p) => {
                let mut out = [0.0; 4];
                for k in 0..4 {
                    out[k] = p[k].clamp(0.0, 1.0);
                }
                out
            }
            None => start,
        },
        Err(_) => start,
    }
}

fn accept(problem: &Problem, u: &[f64; 4]) -> Option<(ExponentWitness<f64>, f64)> {
    problem.derive(problem.physical(u))
}

fn search_level(gamma: f64, d: usize, alpha: f64, level: u32) -> WitnessSearch {
    let problem = Problem::new(gamma, d, alpha);
    let k = (1usize << level.min(8)) + 1;
    let step = 1.0 / (k - 1) as f64;
    let mut top: Vec<(f64, [f64; 4])> = Vec::with_capacity(REFINE_STARTS + 1);
    for i0 in 0..k {
        for i1 in 0..k {
            for i2 in 0..k {
                for i3 in 0..k {
                    let u = [
                        i0 as f64 * step,
                        i1 as f64 * step,
                        i2 as f64 * step,
                        i3 as f64 * step,
                    ];
                    let s = problem.score(&u);
                    if top.len() < REFINE_STARTS || s > top[top.len() - 1].0 {
                        let pos = top.partition_point(|(v, _)| *v >= s);
                        top.insert(pos, (s, u));
                        top.truncate(REFINE_STARTS);
                    }
                }
            }
        }
    }

    let mut best: Option<(ExponentWitness<f64>, f64)> = None;
    for (_, start) in &top {
        let polished = refine(&problem, *start, step);
        for cand in [polished, *start] {
            if let Some((w, s)) = accept(&problem, &cand) {
                if s > STRICT_SLACK && witness_residuals(&w, gamma, d, alpha).feasible() {
                    return WitnessSearch::Feasible(w);
                }
                if best.as_ref().is_none_or(|(_, b)| s > *b) {
                    best = Some((w, s));
                }
            }
        }
    }
    match best {
        Some((w, s)) => WitnessSearch::Infeasible {
            best: Some(w),
            min_slack: s,
        },
        None => WitnessSearch::Infeasible {
            best: None,
            min_slack: f64::NEG_INFINITY,
        },
    }
}

/// Searches for a witness at search level `budget` (grid of `2^budget + 1`
/// points per reduced axis, then local refinement from the best nodes).
///
/// Lower levels are tried first; any returned witness passes
/// [`witness_residuals`].
pub fn find_witness(gamma: f64, d: usize, alpha: f64, budget: u32) -> Result<WitnessSearch> {
    check_inputs(gamma, d, alpha)?;
    let mut best = WitnessSearch::Infeasible {
        best: None,
        min_slack: f64::NEG_INFINITY,
    };
    for level in 1..=budget.max(1) {
        match search_level(gamma, d, alpha, level) {
            found @ WitnessSearch::Feasible(_) => return Ok(found),
            WitnessSearch::Infeasible { best: w, min_slack } => {
                if let WitnessSearch::Infeasible { min_slack: cur, .. } = best {
                    if min_slack > cur {
                        best = WitnessSearch::Infeasible { best: w, min_slack };
                    }
                }
            }
        }
    }
    Ok(best)
}

fn bisect_level(gamma: f64, d: usize, level: u32) -> Result<f64> {
    let feasible = |alpha: f64| search_level(gamma, d, alpha, level).is_feasible();
    let mut lo = 0.1;
    let mut halvings = 0;
    while !feasible(lo) {
        lo *= 0.5;
        halvings += 1;
        if halvings > 20 {
            return Err(MfgError::Bracket(format!(
                "no feasible alpha down to {lo:e} at gamma = {gamma}, d = {d}, level {level}"
            )));
        }
    }
    let mut hi = lo * 2.0;
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(MfgError::Bracket(format!(
                "alpha = {lo} still feasible at gamma = {gamma}, d = {d}, level {level}"
            )));
        }
    }
    while hi - lo > ALPHA_BRACKET {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest α found feasible, bracketed to within [`ALPHA_BRACKET`].
///
/// The value is the maximum over search levels `1..=budget`, so a larger
/// budget never lowers it.
pub fn alpha_max(gamma: f64, d: usize, budget: u32) -> Result<f64> {
    check_inputs(gamma, d, 1.0)?;
    let mut best: Option<f64> = None;
    let mut last_err = None;
    for level in 1..=budget.max(1) {
        match bisect_level(gamma, d, level) {
            Ok(a) => best = Some(best.map_or(a, |b: f64| b.max(a))),
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(a), _) => Ok(a),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one level is searched"),
    }
}

/// Feasibility of `α` together with the threshold estimate and the formula
/// lower bound.
pub fn admissibility(gamma: f64, d: usize, alpha: f64, budget: u32) -> Result<Admissibility> {
    let search = find_witness(gamma, d, alpha, budget)?;
    let amax = alpha_max(gamma, d, budget)?;
    Ok(Admissibility {
        gamma,
        d,
        alpha,
        feasible: search.is_feasible(),
        witness: search.witness().copied(),
        alpha_max: amax,
        formula: alpha_formula(gamma, d),
    })
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/support/mms.rs"]
mod mms;

use mfg_cli::commands::{self, SolveOutcome};
use mfg_cli::config::{load_config, Assembled};
use mfg_core::audit::audit_assumptions;
use mfg_core::driver::eps_continuation;
use mfg_core::estimates::{
    check_lax_hopf, check_lbeta_evolution, check_lower_bound, gn_frequency_invariance, refinement_decrease, EstimateReport,
};
use mfg_core::exponents::{admissibility, alpha_formula, alpha_max, witness_residuals, DEFAULT_BUDGET, EQUALITY_TOL};
use mfg_core::field::{Field, Trajectory, VectorField};
use mfg_core::grid::TorusGrid;
use mfg_core::hamiltonian::ZeroHamiltonian;
use mfg_core::norms::lp_norm;
use mfg_core::solvers::{drift_trajectory, hjb_step_backward, solve_fp, FpConfig, DEFAULT_CFL};
use mfg_core::spectral::heat_evolve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

const GAMMAS: [f64; 4] = [1.3, 1.5, 1.7, 1.9];
const DIMS: [usize; 3] = [3, 4, 5];

type Outcome = (bool, String);

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s of {limit_s}s"))
}

/// Solves a checked-in config through the CLI code path.
struct Run {
    asm: Assembled,
    out: SolveOutcome,
    elapsed: Duration,
}

fn solve_config(name: &str, scratch: &Path) -> Run {
    let asm = load_config(&repo_file(&format!("configs/{name}.toml"))).expect("config loads");
    let start = Instant::now();
    let out = commands::solve(&asm, &scratch.join(name), false).expect("solve succeeds");
    Run { asm, out, elapsed: start.elapsed() }
}

fn entry_residual(report: &EstimateReport, name: &str) -> f64 {
    let e = report.get(name).unwrap_or_else(|| panic!("missing entry {name}"));
    (e.lhs - e.rhs).abs()
}

fn c1_exponent_formula() -> Outcome {
    let start = Instant::now();
    // hand evaluation of the closed form at γ = 1.5, d = 3
    let hand: f64 = 32.4375 / 12.65625;
    let v: f64 = alpha_formula(1.5, 3);
    let mut ok = (v - 2.5630).abs() <= 5e-4 && (v - hand).abs() <= 1e-12;
    let mut worst = f64::INFINITY;
    for &d in &DIMS {
        for &g in &GAMMAS {
            let gap: f64 = alpha_formula(g, d) - 2.0 / (d as f64 - 2.0);
            worst = worst.min(gap);
            ok &= gap > 0.0;
        }
    }
    let (fast, t) = within(start.elapsed(), 1.0);
    (ok && fast, format!("alpha_formula(1.5,3) = {v:.6} (hand {hand:.6}); min margin over 2/(d-2) = {worst:.4}; {t}"))
}

fn c2_exponent_search() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (g, d) in [(1.5, 3), (1.7, 4)] {
        let formula = alpha_formula(g, d);
        let am = alpha_max(g, d, DEFAULT_BUDGET).expect("bisection runs");
        let adm = admissibility(g, d, formula - 1e-3, DEFAULT_BUDGET).expect("search runs");
        let recheck = adm.witness.as_ref().map(|w| witness_residuals(w, g, d, formula - 1e-3));
        let clean = recheck.as_ref().is_some_and(|r| r.feasible() && r.worst_equality() <= EQUALITY_TOL);
        ok &= am >= formula - 1e-3 && adm.feasible && clean;
        parts.push(format!(
            "({g},{d}): alpha_max {am:.5} vs formula {formula:.5}, witness residual {:.1e}",
            recheck.map(|r| r.worst_equality()).unwrap_or(f64::NAN)
        ));
    }
    let (fast, t) = within(start.elapsed(), 300.0);
    (ok && fast, format!("{}; {t}", parts.join("; ")))
}

fn c3_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let g = TorusGrid::new(1, 128, 0.25, 100).unwrap();
    let m0 = Field::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos() + 0.3 * (6.0 * PI * x[0]).sin());
    let drift = vec![VectorField::zeros(g); g.steps()];
    let fp = solve_fp(&FpConfig { initial: m0.clone(), cfl: DEFAULT_CFL, source: None }, &drift).unwrap();
    let exact = heat_evolve(&m0, 0.25).unwrap();
    let err = lp_norm(&fp.last().sub(&exact), 2.0).unwrap();
    let bound = 5.0 * g.dt() * lp_norm(&m0, 2.0).unwrap();

    let u_next = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin() + 0.2 * (10.0 * PI * x[0]).cos());
    let f = Field::from_fn(g, |x| 0.5 + (4.0 * PI * x[0]).cos());
    let stepped = hjb_step_backward(&u_next, &f, &ZeroHamiltonian { dim: 1 }, DEFAULT_CFL).unwrap();
    let spectral = heat_evolve(&u_next.add(&f.scale(g.dt())), g.dt()).unwrap();
    let hjb_gap = stepped.sup_distance(&spectral);
    let (fast, t) = within(start.elapsed(), 10.0);
    (
        err <= bound && hjb_gap <= 1e-12 && fast,
        format!("FP vs heat L2 {err:.3e} <= {bound:.3e}; zero-H HJB step gap {hjb_gap:.1e}; {t}"),
    )
}

fn c4_conservation(base: &Run) -> Outcome {
    let m = &base.out.solution.m;
    let drift = m.frames().iter().map(|f| (f.integral() - 1.0).abs()).fold(0.0, f64::max);
    let min = m.min();
    let (fast, t) = within(base.elapsed, 300.0);
    (drift <= 1e-10 && min >= -1e-12 && fast, format!("max |mass-1| {drift:.1e}, min m {min:.4}; {t}"))
}

fn c5_fixed_point(base: &Run, undamped: &Run) -> Outcome {
    let (a, b) = (&base.out.solution, &undamped.out.solution);
    let du = a.u.sup_distance(&b.u);
    let dm = a.m.sup_distance(&b.m);
    let ok = a.converged && a.iterations <= 200 && b.converged && du <= 1e-7 && dm <= 1e-7;
    let (fast, t) = within(base.elapsed + undamped.elapsed, 900.0);
    (
        ok && fast,
        format!(
            "omega 0.5: {} iterations (converged {}); omega 1: {} iterations; sup gaps u {du:.1e}, m {dm:.1e}; {t}",
            a.iterations, a.converged, b.iterations
        ),
    )
}

fn c6_integral_identity(ladder: &[&Run]) -> Outcome {
    let e = ladder[0].out.report.get("integral_identity").expect("entry present");
    let rel = (e.lhs - e.rhs).abs() / e.lhs.abs().max(e.rhs.abs());
    let r0 = entry_residual(&ladder[0].out.report, "integral_identity");
    let r1 = entry_residual(&ladder[1].out.report, "integral_identity");
    let dec = refinement_decrease("integral_identity", r0, r1, 1.7);
    (
        rel <= 0.02 && !dec.failed(),
        format!("relative gap {rel:.2e} <= 0.02; residual {r0:.3e} -> {r1:.3e} (x{:.2}, need 1.7)", r0 / r1),
    )
}

fn c7_inequalities(base: &Run) -> Outcome {
    let report = &base.out.report;
    let wanted = |n: &str| n == "lower_bound" || n.starts_with("lax_hopf") || n.starts_with("lbeta.");
    let entries: Vec<_> = report.entries.iter().filter(|e| wanted(&e.name)).collect();
    let mut ok = entries.iter().all(|e| !e.failed());
    for beta in ["1.5", "2", "3"] {
        ok &= entries.iter().any(|e| e.name.starts_with(&format!("lbeta.inequality.{beta}.")));
    }

    let p = &base.asm.problem;
    let sol = &base.out.solution;
    let mon = &base.asm.monitor;
    let mut controls = Vec::new();

    let mut u = sol.u.clone();
    u.frames_mut()[0].values_mut()[100] -= 1.0;
    controls.push(("lower_bound", check_lower_bound(&u, &p.model, mon.c1).failed()));

    let mut u = sol.u.clone();
    let lifted = u.frame(0).map(|v| v + 1.0);
    u.frames_mut()[0] = lifted;
    let lh = check_lax_hopf(&u, &sol.m, &p.model, &p.coupling, mon.c1).unwrap();
    controls.push(("lax_hopf", lh.iter().all(|e| e.failed())));

    let mut m: Trajectory<f64> = sol.m.clone();
    let modulated = Trajectory::from_fn(*m.grid(), |_, x| 1.0 + 0.2 * (2.0 * PI * x[0]).cos());
    m.frames_mut()[20] = m.frame(20).zip_map(modulated.frame(20), |a, b| a * b);
    let drift = drift_trajectory(&sol.u, &p.model);
    for &beta in &mon.betas {
        let (pp, q) = mon.pq[0];
        let es = check_lbeta_evolution(&m, &drift, beta, pp, q, mon.c3).unwrap();
        controls.push(("lbeta", es.iter().any(|e| e.failed())));
    }
    let controls_ok = controls.iter().all(|(_, f)| *f);
    let missed: Vec<&str> = controls.iter().filter(|(_, f)| !f).map(|(n, _)| *n).collect();
    (
        ok && controls_ok,
        format!(
            "{} entries pass on the baseline; {} negative controls fail as expected{}",
            entries.iter().filter(|e| !e.failed()).count(),
            controls.iter().filter(|(_, f)| *f).count(),
            if missed.is_empty() { String::new() } else { format!(", missed {missed:?}") }
        ),
    )
}

fn c8_hopf_cole(ladder: &[&Run]) -> Outcome {
    let r: Vec<f64> = ladder.iter().map(|run| run.out.report.get("hopf_cole").expect("entry present").lhs).collect();
    let ok = r.windows(2).all(|w| !refinement_decrease("hopf_cole", w[0], w[1], 1.3).failed());
    (ok, format!("residuals {:.3e}, {:.3e}, {:.3e}; ratios x{:.2}, x{:.2} (need 1.3)", r[0], r[1], r[2], r[0] / r[1], r[1] / r[2]))
}

fn c9_gagliardo_nirenberg() -> Outcome {
    let e = gn_frequency_invariance(256, &[1, 2, 4, 8], 2.0, 0.05).unwrap();
    (!e.failed(), format!("ratios {:?}, band 5%", e.series.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()))
}

fn c10_continuation(base: &Run) -> Outcome {
    let res = eps_continuation(&base.asm.problem, &base.asm.fixed_point).expect("ladder runs");
    let deltas: Vec<f64> = res.rungs.iter().filter_map(|r| r.delta_m).collect();
    let finite = res.error.is_none() && res.rungs.len() == base.asm.fixed_point.eps_ladder.len() && deltas.iter().all(|d| d.is_finite());
    let shrink = res.deltas_shrink();
    (
        finite,
        format!(
            "eps {:?}: m deltas {:?}, finite {finite}; last <= first {shrink} (soft)",
            base.asm.fixed_point.eps_ladder,
            deltas.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn c11_manufactured() -> Outcome {
    let start = Instant::now();
    let (space, _) = mms::space_orders();
    let (time, _) = mms::time_orders();
    let ok = space.iter().all(|&(u, m)| u >= 1.8 && m >= 1.8) && time.iter().all(|&(u, m)| u >= 0.9 && m >= 0.9);
    let (fast, t) = within(start.elapsed(), 600.0);
    let fmt = |v: &[(f64, f64)]| v.iter().map(|(u, m)| format!("u {u:.2}/m {m:.2}")).collect::<Vec<_>>().join(", ");
    (ok && fast, format!("space orders [{}] (need 1.8); time orders [{}] (need 0.9); {t}", fmt(&space), fmt(&time)))
}

fn c12_audit(base: &Run) -> Outcome {
    let spec = &base.asm.audit;
    let certs = audit_assumptions(&base.asm.problem.model, spec);
    let failed: Vec<&str> = certs.iter().filter(|c| !c.passed()).map(|c| c.assumption.as_str()).collect();

    // central differences of H against the analytic derivatives
    let model = &base.asm.problem.model;
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let step = 1e-4;
    for _ in 0..1000 {
        let node = rng.gen_range(0..base.asm.problem.grid.len());
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0) * spec.radius / (d as f64).sqrt()).collect();
        let grad = model.dp_h(node, &p);
        let hess = model.dpp_h(node, &p);
        let h_at = |q: &[f64]| model.h_eval(node, q);
        for i in 0..d {
            let mut pp = p.clone();
            pp[i] += step;
            let hp = h_at(&pp);
            pp[i] -= 2.0 * step;
            let hm = h_at(&pp);
            let fd = (hp - hm) / (2.0 * step);
            worst_g = worst_g.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
            for j in 0..d {
                let shifted = |si: f64, sj: f64| {
                    let mut q = p.clone();
                    q[i] += si;
                    q[j] += sj;
                    h_at(&q)
                };
                let fd2 = (shifted(step, step) - shifted(step, -step) - shifted(-step, step) + shifted(-step, -step)) / (4.0 * step * step);
                worst_h = worst_h.max((fd2 - hess[i * d + j]).abs() / hess[i * d + j].abs().max(1.0));
            }
        }
    }
    let ok = failed.is_empty() && spec.radius == 20.0 && spec.samples == 10_000 && worst_g <= 1e-6 && worst_h <= 1e-5;
    (
        ok,
        format!(
            "{} certificates, failed {failed:?}; R {} with {} samples; FD gradient {worst_g:.1e} <= 1e-6, Hessian {worst_h:.1e} <= 1e-5",
            certs.len(),
            spec.radius,
            spec.samples
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

/// Criterion numbers given on the command line, or all of them.
fn selection() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=12).collect()
    } else {
        picked
    }
}

fn main() {
    let selected = selection();
    let want = |k: usize| selected.contains(&k);
    let scratch = tempfile::tempdir().expect("scratch directory");
    let dir = scratch.path();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |k: usize, name: &'static str, o: Outcome| {
        println!("[{}] {k:>2} {name}: {}", if o.0 { "PASS" } else { "FAIL" }, o.1);
        results.push((k, name, o));
    };

    if want(1) {
        report(1, "exponent formula", guarded(c1_exponent_formula));
    }
    if want(2) {
        report(2, "exponent re-derivation", guarded(c2_exponent_search));
    }
    if want(3) {
        report(3, "oracle equivalence", guarded(c3_oracle_equivalence));
    }

    let solve = |name: &str, needed: bool| needed.then(|| catch_unwind(AssertUnwindSafe(|| solve_config(name, dir))).ok());
    let needs_base = [4, 5, 6, 7, 8, 10, 12].iter().any(|&k| want(k));
    let needs_ladder = want(6) || want(8);
    let base = solve("baseline", needs_base);
    let undamped = solve("baseline_omega1", want(5));
    let fine = solve("refine_128", needs_ladder);
    let finer = solve("refine_256", want(8));
    let failed_run = |what: &str| (false, format!("{what} solve failed"));

    let base = base.flatten();
    let fine = fine.flatten();
    if want(4) {
        report(4, "conservation and positivity", base.as_ref().map_or_else(|| failed_run("baseline"), |b| guarded(|| c4_conservation(b))));
    }
    if want(5) {
        let o = match (&base, undamped.flatten()) {
            (Some(b), Some(u)) => guarded(|| c5_fixed_point(b, &u)),
            _ => failed_run("baseline or undamped"),
        };
        report(5, "fixed point", o);
    }
    if want(6) {
        let o = match (&base, &fine) {
            (Some(b), Some(f)) => guarded(|| c6_integral_identity(&[b, f])),
            _ => failed_run("baseline or refinement"),
        };
        report(6, "integral identity", o);
    }
    if want(7) {
        report(7, "inequality suite", base.as_ref().map_or_else(|| failed_run("baseline"), |b| guarded(|| c7_inequalities(b))));
    }
    if want(8) {
        let o = match (&base, &fine, finer.flatten()) {
            (Some(b), Some(f1), Some(f2)) => guarded(|| c8_hopf_cole(&[b, f1, &f2])),
            _ => failed_run("baseline or refinement"),
        };
        report(8, "Hopf-Cole refinement", o);
    }
    if want(9) {
        report(9, "Gagliardo-Nirenberg invariance", guarded(c9_gagliardo_nirenberg));
    }
    if want(10) {
        report(10, "eps continuation", base.as_ref().map_or_else(|| failed_run("baseline"), |b| guarded(|| c10_continuation(b))));
    }
    if want(11) {
        report(11, "manufactured solution", guarded(c11_manufactured));
    }
    if want(12) {
        report(12, "Hamiltonian audit", base.as_ref().map_or_else(|| failed_run("baseline"), |b| guarded(|| c12_audit(b))));
    }

    let failed = results.iter().filter(|(_, _, o)| !o.0).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

use mfg_cli::config::{assemble, load_config, parse_config};
use mfg_cli::traj::{decode, encode, read_trajectory, write_trajectory};
use mfg_cli::{EXIT_CONFIG, EXIT_IO};
use mfg_core::field::{Field, Trajectory};
use mfg_core::grid::TorusGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn mfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn random_trajectories_round_trip_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    for case in 0..12 {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(4..=9);
        let steps = rng.gen_range(0..=5);
        let t = if steps == 0 { 0.0 } else { rng.gen_range(0.01..2.0) };
        let g = TorusGrid::new(d, n, t, steps).unwrap();
        let frames = (0..=steps)
            .map(|_| {
                let vals = (0..g.len()).map(|_| f64::from_bits(rng.gen::<u64>() & !(0x7ffu64 << 52)) * 1e300).collect();
                Field::from_values(g, vals).unwrap()
            })
            .collect();
        let traj = Trajectory::new(g, frames).unwrap();
        let path = dir.path().join(format!("t{case}.traj"));
        write_trajectory(&path, &traj).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back.grid(), traj.grid());
        assert_eq!(encode(&back), encode(&traj));
        for (a, b) in back.frames().iter().zip(traj.frames()) {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn truncated_file_is_a_format_error() {
    let g = TorusGrid::new(1, 8, 0.5, 4).unwrap();
    let bytes = encode(&Trajectory::from_fn(g, |t, x| t * x[0]));
    let err = decode(&bytes[..bytes.len() - 8]).unwrap_err().to_string();
    assert!(err.contains("expected 368 bytes, found 360"), "{err}");
}

#[test]
fn checked_in_configs_load() {
    for name in ["baseline", "baseline_omega1", "refine_128", "refine_256", "small_1d"] {
        let asm = load_config(&repo_file(&format!("configs/{name}.toml"))).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(asm.problem.grid.steps() > 0);
    }
    let base = load_config(&repo_file("configs/baseline.toml")).unwrap();
    let defaults = assemble(parse_config("").unwrap()).unwrap();
    let mut cfg = base.config.clone();
    cfg.output = defaults.config.output.clone();
    assert_eq!(cfg.grid.dt, Some(mfg_cli::config::DEFAULT_DT));
    cfg.grid.dt = None;
    assert_eq!(cfg, defaults.config);
    assert_eq!(base.problem.grid, defaults.problem.grid);
}

#[test]
fn solve_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/small_1d.toml");
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for out in &runs {
        let o = mfg(&["solve", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--plots"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("converged=true"), "{}", stdout(&o));
        for f in ["u.traj", "m.traj", "report.json", "report.csv", "summary.json", "run.log", "u.png", "m.png", "residuals.png"] {
            assert!(out.join(f).exists(), "missing {f}");
        }
    }
    let a = std::fs::read(runs[0].join("summary.json")).unwrap();
    let b = std::fs::read(runs[1].join("summary.json")).unwrap();
    assert_eq!(a, b);
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["checks"]["failed"], 0);
    assert_eq!(summary["grid"]["steps"], 80);
    let csv = std::fs::read_to_string(runs[0].join("report.csv")).unwrap();
    assert!(csv.starts_with("entry,lhs,rhs,slack,verdict,tol\n"));

    // monitor on the stored pair passes, then on a corrupted density fails
    let u = runs[0].join("u.traj");
    let m = runs[0].join("m.traj");
    let mon = dir.path().join("mon");
    let o = mfg(&["monitor", "--u", u.to_str().unwrap(), "--m", m.to_str().unwrap(), "-c", cfg.to_str().unwrap(), "-o", mon.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("checks failed: 0 of"), "{}", stdout(&o));

    let mut traj = read_trajectory(&m).unwrap();
    traj.frames_mut()[20].values_mut()[5] += 1e-3;
    let bad = dir.path().join("bad_m.traj");
    write_trajectory(&bad, &traj).unwrap();
    let o = mfg(&["monitor", "--u", u.to_str().unwrap(), "--m", bad.to_str().unwrap(), "-c", cfg.to_str().unwrap(), "-o", mon.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("FAIL mass"), "{text}");
    assert!(!text.contains("checks failed: 0 of"), "{text}");
}

#[test]
fn config_errors_exit_2_and_list_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[grid]\nn = 2\n[solver]\nomega = 3.0\n").unwrap();
    let o = mfg(&["solve", "-c", path.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid.n") && err.contains("solver.omega"), "{err}");

    std::fs::write(&path, "[grid\n").unwrap();
    let o = mfg(&["solve", "-c", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn unreadable_trajectory_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.traj");
    std::fs::write(&u, b"MFGTRAJ1 too short").unwrap();
    let cfg = repo_file("configs/small_1d.toml");
    let o = mfg(&["monitor", "--u", u.to_str().unwrap(), "--m", u.to_str().unwrap(), "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_IO));
}

#[test]
fn exponents_row_for_gamma_1_5_dim_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfg(&["exponents", "--gamma", "1.5", "--dim", "3", "--alpha", "2.5", "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("1.5,3,")).expect("table row");
    let alpha_max: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!(alpha_max >= 2.562, "{row}");
    assert!(dir.path().join("alpha_max.csv").exists());
    let witness: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("witness_g1.5_d3.json")).unwrap()).unwrap();
    assert_eq!(witness["feasible"], true);
}

#[test]
fn audit_writes_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/small_1d.toml");
    let o = mfg(&["audit", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("certificates failed: 0 of"), "{}", stdout(&o));
    assert!(dir.path().join("audit.json").exists());
}

#[test]
fn continuation_ladder_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/small_1d.toml");
    let o = mfg(&["continuation", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ladder.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

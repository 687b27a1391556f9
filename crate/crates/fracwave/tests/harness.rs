//! Harness behaviour: CSV determinism, zero data, snapshots, slope fits and
//! matrix dumps.

use std::f64::consts::PI;

use fracwave::config::{parse, ExperimentConfig};
use fracwave::harness::{
    dump_matrices, run_convergence, run_energy_audit, run_single, CONVERGENCE_HEADER, MATRIX_FILES,
};
use fracwave::output::read_triplets;
use fracwave_core::omega::l2_project;
use fracwave_core::study::fitted_slope;
use nalgebra::{DMatrix, DVector};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_raw(&parse(text).unwrap()).unwrap()
}

fn without_wall_time(csv: &str) -> String {
    let col = CONVERGENCE_HEADER
        .iter()
        .position(|h| *h == "wall_time_ms")
        .unwrap();
    csv.lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.remove(col);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn convergence_csv_is_deterministic() {
    let text =
        "problem = custom-modal\nseed = 11\ns = 0.4\nladder = 8, 16, 12\nT = 0.5\nY = 2\nM = 4";
    let a = run_convergence(&config(text)).unwrap().table().to_csv();
    let b = run_convergence(&config(text)).unwrap().table().to_csv();
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    let rows: Vec<&str> = a.lines().collect();
    assert_eq!(rows[0], CONVERGENCE_HEADER.join(","));
    // Ladder order is kept even when rungs run concurrently.
    let ns: Vec<&str> = rows[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(ns, ["8", "16", "12"]);
    // The rate column is blank only on the first row.
    let rate = CONVERGENCE_HEADER
        .iter()
        .position(|h| *h == "observed_rate")
        .unwrap();
    assert!(rows[1].split(',').nth(rate).unwrap().is_empty());
    assert!(!rows[2].split(',').nth(rate).unwrap().is_empty());
}

#[test]
fn zero_data_gives_roundoff_errors() {
    for (domain, scheme, metric) in [
        ("interval", "trapezoidal", "hs-final"),
        ("interval", "leapfrog", "l2-dt-staggered"),
        ("square", "leapfrog", "hs-final"),
        ("square", "trapezoidal", "l2-dt-staggered"),
    ] {
        let text = format!(
            "problem = custom-modal\ndomain = {domain}\ng =\nh =\nscheme = {scheme}\nmetric = {metric}\nladder = 4, 8\nT = 1"
        );
        let r = run_convergence(&config(&text)).unwrap();
        for row in &r.rows {
            assert!(row.error <= 1e-12, "{domain} {scheme}: {}", row.error);
        }
    }
}

#[test]
fn fitted_slope_matches_least_squares_solve() {
    let r = run_convergence(&config("problem = paper-1d\ns = 0.75\nladder = 8, 16, 32")).unwrap();
    let h: Vec<f64> = r.rows.iter().map(|row| row.h_t).collect();
    let e: Vec<f64> = r.rows.iter().map(|row| row.error).collect();
    let a = DMatrix::from_fn(h.len(), 2, |i, j| if j == 0 { 1.0 } else { h[i].ln() });
    let b = DVector::from_iterator(e.len(), e.iter().map(|v| v.ln()));
    let coef = a.svd(true, true).solve(&b, 1e-14).unwrap();
    assert!((r.slope.unwrap() - coef[1]).abs() < 1e-12);
    assert!((fitted_slope(&h, &e).unwrap() - coef[1]).abs() < 1e-12);
    for (i, row) in r.rows.iter().enumerate().skip(1) {
        let want = (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln();
        assert!((row.observed_rate.unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn leapfrog_ladder_aborts_on_cfl_violation() {
    let text = "problem = paper-1d\ns = 0.75\nscheme = leapfrog\ndt = 0.5\nladder = 8, 16\ncfl = classical";
    let err = run_convergence(&config(text)).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("CFL"));
}

#[test]
fn initial_snapshot_is_the_projection_of_g() {
    let cfg = config("problem = paper-2d\ns = 0.5\nn = 8\nsnapshots = 0");
    let run = run_single(&cfg).unwrap();
    let snap = &run.snapshots[0];
    assert_eq!(snap.step, 0);
    let disc = cfg.rung(8).discretize().unwrap();
    let pg = l2_project(&disc.mesh, disc.op.omega(), cfg.problem.initial_position()).unwrap();
    assert_eq!(snap.values, pg);
}

#[test]
fn snapshot_times_are_clamped() {
    let cfg = config("problem = paper-1d\ns = 0.5\nn = 8\nsnapshots = -1, 0.7, 99");
    let run = run_single(&cfg).unwrap();
    let s = &run.snapshots;
    assert!(s[0].clamped && s[0].step == 0 && s[0].time == 0.0);
    assert!(!s[1].clamped);
    assert!(s[2].clamped && s[2].time == cfg.t_final);
    let csv = run.table().to_csv();
    assert!(csv.starts_with("k,t,x,u_h,u_exact\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 7);
}

#[test]
fn fine_mesh_snapshot_tracks_the_exact_solution() {
    let cfg = config("problem = paper-1d\ns = 0.5\nn = 64\nT = pi/2");
    let run = run_single(&cfg).unwrap();
    let last = run.snapshots.last().unwrap();
    assert_eq!(last.time, PI / 2.0);
    let dev = run
        .points
        .iter()
        .zip(&last.values)
        .map(|(x, u)| (u - (PI * x[0]).sin()).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-2, "{dev}");
    assert!(last.max_deviation < 1e-2);
}

#[test]
fn energy_audit_flags_instability() {
    let stable = run_energy_audit(&config(
        "problem = paper-1d\ns = 0.5\nn = 16\nscheme = leapfrog\ncfl_factor = 0.9\nT = 20",
    ))
    .unwrap();
    assert!(!stable.unstable && stable.drift < 1e-10);
    let unstable = run_energy_audit(&config(
        "problem = paper-1d\ns = 0.5\nn = 16\nscheme = leapfrog\ncfl_factor = 1.05\nT = 100",
    ))
    .unwrap();
    assert!(unstable.unstable && unstable.amplification > 1e6);
    let t = unstable.table();
    assert_eq!(t.rows.len(), unstable.steps);
    let trap = run_energy_audit(&config(
        "problem = paper-1d\ns = 0.5\nn = 16\nscheme = trapezoidal\ndt = 0.3\nT = 30",
    ))
    .unwrap();
    assert!(!trap.unstable && trap.drift < 1e-10);
}

#[test]
fn matrix_dumps_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("problem = paper-2d\nn = 4\nY = 2\nM = 3");
    let paths = dump_matrices(&cfg, dir.path()).unwrap();
    assert_eq!(paths.len(), MATRIX_FILES.len());
    let disc = cfg.rung(4).discretize().unwrap();
    let by = read_triplets(&paths[0]).unwrap();
    for &(i, j, v) in &by {
        assert_eq!(v, disc.op.hp().mass()[(i, j)]);
    }
    let ao = read_triplets(&paths[3]).unwrap();
    assert!(ao.iter().all(|&(i, j, v)| ao.contains(&(j, i, v))));
    assert!(ao
        .iter()
        .all(|&(i, j, _)| i < disc.op.dim() && j < disc.op.dim()));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(
        &path,
        "# study\nproblem = paper-2d\ns = 0.25\nladder = 8, 16\n",
    )
    .unwrap();
    let raw = fracwave::config::read(&path).unwrap();
    let raw = fracwave::config::merge(raw, [("s".to_string(), "0.75".to_string())]).unwrap();
    let cfg = ExperimentConfig::from_raw(&raw).unwrap();
    assert_eq!(cfg.s, 0.75);
    assert_eq!(cfg.ladder, vec![8, 16]);
    assert!(
        fracwave::config::read(&dir.path().join("missing"))
            .unwrap_err()
            .exit_code()
            == 4
    );
}

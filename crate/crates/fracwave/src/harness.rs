//! Convergence sweeps, energy audits, single solves and matrix dumps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fracwave_core::dtn::DtnOperator;
use fracwave_core::linalg::SymmetricEigen;
use fracwave_core::spectral::{exact_solution, Domain};
use fracwave_core::study::{
    fitted_slope, measure_error, observed_rates, solve, CflPolicy, Discretization, RungSpec,
    SPECTRAL_BOUND_ITERATIONS,
};
use fracwave_core::time::{
    check_cfl, initial_data, integrate, step_energy, CflReport, EnergyReport, Forcing, Leapfrog,
    Recording, Scheme, TimeGrid, WaveState,
};
use fracwave_core::Error as CoreError;
use log::{debug, info, warn};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{optional, real, save_triplets, Table};

/// One rung of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h_t: f64,
    pub dt: f64,
    pub steps: usize,
    pub height: f64,
    pub elements: usize,
    /// `𝓜`
    pub dofs_y: usize,
    pub error: f64,
    /// Rate against the previous row; `None` on the first.
    pub observed_rate: Option<f64>,
    pub wall_time_ms: f64,
    pub energy_drift: f64,
    /// `1 − ½Δt²λ_max` (leapfrog only).
    pub cfl_margin: Option<f64>,
    pub truncation_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log h`, when defined.
    pub slope: Option<f64>,
}

pub const CONVERGENCE_HEADER: &[&str] = &[
    "n",
    "h_T",
    "dt",
    "K",
    "Y",
    "M",
    "dofs_y",
    "error",
    "observed_rate",
    "wall_time_ms",
    "energy_drift",
    "cfl_margin",
    "truncation_warning",
];

impl ConvergenceReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(CONVERGENCE_HEADER.to_vec());
        for r in &self.rows {
            t.push(vec![
                r.n.to_string(),
                real(r.h_t),
                real(r.dt),
                r.steps.to_string(),
                real(r.height),
                r.elements.to_string(),
                r.dofs_y.to_string(),
                real(r.error),
                optional(r.observed_rate),
                format!("{:.3}", r.wall_time_ms),
                real(r.energy_drift),
                optional(r.cfl_margin),
                u8::from(r.truncation_warning).to_string(),
            ]);
        }
        t
    }
}

struct Prepared {
    spec: RungSpec,
    disc: Discretization,
    lambda_max: Option<f64>,
    cfl: Option<CflReport>,
}

/// Discretizes one mesh, applies the CFL-derived step if configured and
/// evaluates the leapfrog stability check.
fn prepare(cfg: &ExperimentConfig, n: usize, enforce: bool) -> Result<Prepared> {
    let spec = cfg.rung(n);
    let mut disc = spec.discretize()?;
    log_conditioning(&disc);
    let need_bound = cfg.cfl_factor.is_some() || cfg.scheme == Scheme::Leapfrog;
    let lambda_max = if need_bound {
        Some(
            disc.op
                .estimate_spectral_bound(&disc.mesh, SPECTRAL_BOUND_ITERATIONS)?,
        )
    } else {
        None
    };
    if let (Some(factor), Some(l)) = (cfg.cfl_factor, lambda_max) {
        let target = factor * 2.0 / l.sqrt();
        let ratio = cfg.t_final / target;
        let steps = if factor > 1.0 {
            ratio.floor()
        } else {
            ratio.ceil()
        };
        disc.grid = TimeGrid::new(cfg.t_final, steps.max(2.0) as usize)?;
    }
    let cfl = match (cfg.scheme, lambda_max) {
        (Scheme::Leapfrog, Some(l)) => Some(check_cfl(l, disc.grid.dt(), cfg.cfl.theta())),
        _ => None,
    };
    if let Some(report) = cfl {
        let abort = enforce
            && match cfg.cfl {
                CflPolicy::Enforce { .. } => !report.passed,
                CflPolicy::Classical { .. } => !report.classically_stable,
                CflPolicy::Report { .. } => false,
            };
        if abort {
            return Err(CoreError::CflViolation {
                n,
                dt: disc.grid.dt(),
                margin: report.margin,
                max_dt: report.max_dt,
            }
            .into());
        }
        if !report.passed {
            warn!(
                "n = {n}: leapfrog margin {:.3e} below theta = {} (dt = {:.4e}, dt^2 lambda_max = {:.4})",
                report.margin,
                cfg.cfl.theta(),
                disc.grid.dt(),
                disc.grid.dt().powi(2) * lambda_max.unwrap_or(0.0)
            );
        }
    }
    Ok(Prepared {
        spec,
        disc,
        lambda_max,
        cfl,
    })
}

fn log_conditioning(disc: &Discretization) {
    if !log::log_enabled!(log::Level::Debug) {
        return;
    }
    let interior = disc.op.hp().mass().trailing_block();
    match SymmetricEigen::new(&interior) {
        Ok(e) => {
            let lo = e.values.first().copied().unwrap_or(f64::NAN);
            let hi = e.values.last().copied().unwrap_or(f64::NAN);
            debug!(
                "n = {}, Y = {:.4}, M = {}: cond(interior y-mass) = {:.3e}",
                disc.mesh.divisions(),
                disc.height,
                disc.elements,
                hi / lo
            );
        }
        Err(e) => debug!("conditioning estimate failed: {e}"),
    }
}

fn run_row(cfg: &ExperimentConfig, n: usize) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let p = prepare(cfg, n, true)?;
    let traj = solve(
        &p.spec,
        &p.disc,
        Recording {
            history: false,
            energy: true,
        },
    )?;
    let (error, truncation_warning) = measure_error(&p.spec, &p.disc, &traj)?;
    if truncation_warning {
        warn!("n = {n}: oracle expansion looks truncated; raise oracle_modes");
    }
    let row = ConvergenceRow {
        n,
        h_t: p.disc.mesh.h(),
        dt: p.disc.grid.dt(),
        steps: p.disc.grid.steps(),
        height: p.disc.height,
        elements: p.disc.elements,
        dofs_y: p.disc.op.hp().dim(),
        error,
        observed_rate: None,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        energy_drift: traj.energy.as_ref().map_or(0.0, |e| e.relative_drift()),
        cfl_margin: p.cfl.map(|c| c.margin),
        truncation_warning,
    };
    info!(
        "n = {n}: error = {:.6e} ({:.0} ms)",
        row.error, row.wall_time_ms
    );
    Ok(row)
}

/// Runs every ladder rung (concurrently, rows kept in ladder order) and fits
/// the convergence slope.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let mut rows = cfg
        .ladder
        .par_iter()
        .map(|&n| run_row(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = rows.iter().map(|r| r.h_t).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.error).collect();
    for (row, rate) in rows.iter_mut().zip(observed_rates(&h, &e)) {
        row.observed_rate = rate;
    }
    let slope = fitted_slope(&h, &e).ok();
    Ok(ConvergenceReport { rows, slope })
}

/// Energy history of an unforced run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    pub scheme: Scheme,
    pub n: usize,
    pub dt: f64,
    pub lambda_max: Option<f64>,
    pub cfl: Option<CflReport>,
    /// Completed steps; fewer than `K` when a diverging run was stopped.
    pub steps: usize,
    /// `E_k` or `𝓔_k` for `k = 1..=steps`.
    pub energies: Vec<f64>,
    /// `‖U_k‖_{L²}` for `k = 0..=steps`.
    pub norms: Vec<f64>,
    pub drift: f64,
    pub min_energy: f64,
    /// `max_k ‖U_k‖ / max(‖U_0‖, ‖U_1‖)`
    pub amplification: f64,
    /// Growth above [`INSTABILITY_GROWTH`] or a negative energy.
    pub unstable: bool,
}

pub const INSTABILITY_GROWTH: f64 = 1e3;

/// Growth at which an audited leapfrog run is stopped.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

/// Leapfrog energies and norms, stopped once the norm has grown by
/// [`DIVERGENCE_CUTOFF`].
fn leapfrog_audit(
    op: &DtnOperator,
    grid: TimeGrid,
    u0: Vec<f64>,
    u1: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = grid.dt();
    let om = op.omega();
    let mut norms = vec![om.l2_norm(&u0), om.l2_norm(&u1)];
    let start = norms[0].max(norms[1]);
    let mut state = WaveState::new(u0, u1, Scheme::Leapfrog)?;
    let lf = Leapfrog::new(op, dt)?;
    let mut l_prev = op.apply(&state.prev)?;
    let mut l_curr = op.apply(&state.curr)?;
    let mut energies = vec![step_energy(
        Scheme::Leapfrog,
        op,
        dt,
        &state.prev,
        &state.curr,
        &l_prev,
        &l_curr,
    )];
    let zero = vec![0.0; op.dim()];
    for _ in 1..grid.steps() {
        lf.step_with(&mut state, &l_curr, &zero)?;
        l_prev = std::mem::replace(&mut l_curr, op.apply(&state.curr)?);
        energies.push(step_energy(
            Scheme::Leapfrog,
            op,
            dt,
            &state.prev,
            &state.curr,
            &l_prev,
            &l_curr,
        ));
        let norm = om.l2_norm(&state.curr);
        norms.push(norm);
        if norm > DIVERGENCE_CUTOFF * start {
            break;
        }
    }
    Ok((energies, norms))
}

impl EnergyAudit {
    pub fn table(&self) -> Table {
        let mut t = Table::new(vec!["k", "t", "energy", "relative_deviation", "l2_norm"]);
        let e1 = self.energies.first().copied().unwrap_or(0.0);
        let scale = if e1 == 0.0 { 1.0 } else { e1.abs() };
        for (i, e) in self.energies.iter().enumerate() {
            let k = i + 1;
            t.push(vec![
                k.to_string(),
                real(k as f64 * self.dt),
                real(*e),
                real((e - e1) / scale),
                real(self.norms[k]),
            ]);
        }
        t
    }
}

/// Integrates the configured initial data with `f ≡ 0` on mesh `cfg.n`. The
/// leapfrog stability check is reported, never enforced.
pub fn run_energy_audit(cfg: &ExperimentConfig) -> Result<EnergyAudit> {
    let p = prepare(cfg, cfg.n, false)?;
    let (disc, problem) = (&p.disc, &p.spec.problem);
    let dt = disc.grid.dt();
    let forcing = Forcing::Zero;
    let (u0, u1) = initial_data(
        &disc.op,
        &disc.mesh,
        dt,
        problem.initial_position(),
        problem.initial_velocity(),
        &forcing,
    )?;
    let om = disc.op.omega();
    let (energies, norms) = match cfg.scheme {
        Scheme::Trapezoidal => {
            let traj = integrate(
                &disc.op,
                &disc.mesh,
                cfg.scheme,
                disc.grid,
                u0,
                u1,
                &forcing,
                Recording {
                    history: true,
                    energy: true,
                },
            )?;
            let history = traj.history.expect("history recorded");
            (
                traj.energy.expect("energy recorded").values,
                history.iter().map(|u| om.l2_norm(u)).collect(),
            )
        }
        Scheme::Leapfrog => leapfrog_audit(&disc.op, disc.grid, u0, u1)?,
    };
    let report = EnergyReport {
        scheme: cfg.scheme,
        values: energies,
    };
    let start = norms[0].max(norms[1]);
    let peak = norms.iter().copied().fold(0.0, f64::max);
    let amplification = if start > 0.0 { peak / start } else { 0.0 };
    let min_energy = report.min();
    let unstable = amplification > INSTABILITY_GROWTH || min_energy < 0.0 || !peak.is_finite();
    if unstable {
        warn!("energy audit: unstable run (amplification {amplification:.3e}, min energy {min_energy:.3e})");
    }
    let steps = report.values.len();
    if steps < disc.grid.steps() {
        warn!(
            "energy audit: stopped after {steps} of {} steps",
            disc.grid.steps()
        );
    }
    Ok(EnergyAudit {
        scheme: cfg.scheme,
        n: cfg.n,
        dt,
        steps,
        lambda_max: p.lambda_max,
        cfl: p.cfl,
        drift: report.relative_drift(),
        min_energy,
        energies: report.values,
        norms,
        amplification,
        unstable,
    })
}

/// Discrete and reference solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested: f64,
    pub clamped: bool,
    pub step: usize,
    pub time: f64,
    pub values: Vec<f64>,
    pub exact: Vec<f64>,
    /// `max_i |U_k(x_i) − u(x_i, t_k)|`
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub domain: Domain,
    pub points: Vec<[f64; 2]>,
    pub snapshots: Vec<Snapshot>,
    pub error: f64,
}

impl SingleRun {
    pub fn table(&self) -> Table {
        let header = match self.domain {
            Domain::UnitInterval => vec!["k", "t", "x", "u_h", "u_exact"],
            Domain::Square => vec!["k", "t", "x1", "x2", "u_h", "u_exact"],
        };
        let mut t = Table::new(header);
        for snap in &self.snapshots {
            for (i, x) in self.points.iter().enumerate() {
                let mut row = vec![snap.step.to_string(), real(snap.time), real(x[0])];
                if self.domain == Domain::Square {
                    row.push(real(x[1]));
                }
                row.push(real(snap.values[i]));
                row.push(real(snap.exact[i]));
                t.push(row);
            }
        }
        t
    }
}

/// One solve on mesh `cfg.n` with nodal snapshots at `cfg.snapshots`; times
/// outside `[0, T]` are clamped with a warning and others rounded to the
/// nearest time level.
pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleRun> {
    let p = prepare(cfg, cfg.n, true)?;
    let traj = solve(
        &p.spec,
        &p.disc,
        Recording {
            history: true,
            energy: false,
        },
    )?;
    let (error, _) = measure_error(&p.spec, &p.disc, &traj)?;
    let history = traj.history.expect("history recorded");
    let grid = p.disc.grid;
    let basis = p.spec.oracle_basis()?;
    let modal = p.spec.problem.modal_data(&basis, cfg.s)?;
    let points = p.disc.mesh.dof_points();
    let mut snapshots = Vec::with_capacity(cfg.snapshots.len());
    for &requested in &cfg.snapshots {
        let t = requested.clamp(0.0, grid.t_final());
        let clamped = t != requested || requested.is_nan();
        if clamped {
            warn!(
                "snapshot time {requested} outside [0, {}]; clamped to {t}",
                grid.t_final()
            );
        }
        let t = if t.is_nan() { 0.0 } else { t };
        let step = ((t / grid.dt()).round() as usize).min(grid.steps());
        let time = grid.time(step);
        let values = history[step].clone();
        let exact = exact_solution(&basis, &modal, cfg.s, time, &points)?;
        let max_deviation = values
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        snapshots.push(Snapshot {
            requested,
            clamped,
            step,
            time,
            values,
            exact,
            max_deviation,
        });
    }
    Ok(SingleRun {
        domain: p.spec.domain(),
        points,
        snapshots,
        error,
    })
}

/// File names written by [`dump_matrices`].
pub const MATRIX_FILES: [&str; 4] = [
    "mass_y.txt",
    "stiffness_y.txt",
    "mass_omega.txt",
    "stiffness_omega.txt",
];

/// Writes `B_Y`, `A_Y`, `B_Ω` and `A_Ω` of mesh `cfg.n` into `dir` as
/// `row col value` lines.
pub fn dump_matrices(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let disc = cfg.rung(cfg.n).discretize()?;
    log_conditioning(&disc);
    let hp = disc.op.hp();
    let om = disc.op.omega();
    let paths: Vec<PathBuf> = MATRIX_FILES.iter().map(|f| dir.join(f)).collect();
    save_triplets(&paths[0], hp.mass().triplets())?;
    save_triplets(&paths[1], hp.stiffness().triplets())?;
    save_triplets(&paths[2], om.mass().triplets())?;
    save_triplets(&paths[3], om.stiffness().triplets())?;
    Ok(paths)
}

//! Model problems and single convergence-study runs: discretize, integrate
//! and measure the error against the spectral reference solution.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::dtn::DtnOperator;
use crate::error::{invalid, Error, Result};
use crate::mesh_y::{default_elements, default_height, DegreeVector, GeometricMesh, HpSpaceY};
use crate::omega::{OmegaMatrices, OmegaMesh};
use crate::spectral::{
    decompose, hs_norm_of_coefficients, solution_coefficients, velocity_coefficients, Domain,
    FractionalOrder, ModalCoefficients, ModalForcing, SpectralBasis,
};
use crate::time::{
    check_cfl, initial_data, integrate, CflReport, Forcing, Recording, Scheme, TimeGrid, Trajectory,
};

/// Initial data and forcing.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// `Ω = (0,1)`, `g = 0`, `h = sin πx`, `f = (π^{2s} − 1) sin t sin πx`;
    /// exact solution `sin t sin πx`.
    Paper1d,
    /// `Ω = (−1,1)²`, `g = sin πx₁ sin πx₂`, `h = 0`, `f = 0`; exact solution
    /// `cos(2^{s/2} π^s t) sin πx₁ sin πx₂`.
    Paper2d,
    /// Finite eigenfunction sums `g = Σ a_k φ_k`, `h = Σ b_k φ_k`, `f = 0`.
    /// Modes are `(m, n)` index pairs (`n` ignored on the interval).
    CustomModal {
        domain: Domain,
        g: Vec<((usize, usize), f64)>,
        h: Vec<((usize, usize), f64)>,
    },
}

impl Problem {
    pub fn domain(&self) -> Domain {
        match self {
            Problem::Paper1d => Domain::UnitInterval,
            Problem::Paper2d => Domain::Square,
            Problem::CustomModal { domain, .. } => *domain,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Paper1d => "paper-1d",
            Problem::Paper2d => "paper-2d",
            Problem::CustomModal { .. } => "custom-modal",
        }
    }

    fn has_forcing(&self) -> bool {
        matches!(self, Problem::Paper1d)
    }

    fn spatial_forcing(&self, s: f64) -> impl Fn(&[f64]) -> f64 {
        let c = if self.has_forcing() {
            PI.powf(2.0 * s) - 1.0
        } else {
            0.0
        };
        move |x: &[f64]| c * (PI * x[0]).sin()
    }

    /// Initial position `g`.
    pub fn initial_position(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x: &[f64]| match self {
            Problem::Paper1d => 0.0,
            Problem::Paper2d => (PI * x[0]).sin() * (PI * x[1]).sin(),
            Problem::CustomModal { domain, g, .. } => modal_sum(*domain, g, x),
        }
    }

    /// Initial velocity `h`.
    pub fn initial_velocity(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x: &[f64]| match self {
            Problem::Paper1d => (PI * x[0]).sin(),
            Problem::Paper2d => 0.0,
            Problem::CustomModal { domain, h, .. } => modal_sum(*domain, h, x),
        }
    }

    /// Load source for the time steppers.
    pub fn forcing(&self, mesh: &OmegaMesh, s: f64) -> Result<Forcing> {
        if !self.has_forcing() {
            return Ok(Forcing::Zero);
        }
        Ok(Forcing::Separable {
            load: mesh.load_vector(self.spatial_forcing(s))?,
            amplitude: Arc::new(|t: f64| t.sin()),
        })
    }

    /// Modal data of the exact solution on `basis`.
    pub fn modal_data(&self, basis: &SpectralBasis, s: f64) -> Result<ModalCoefficients> {
        let g = decompose(basis, self.initial_position(), 5)?;
        let h = decompose(basis, self.initial_velocity(), 5)?;
        let f = if self.has_forcing() {
            decompose(basis, self.spatial_forcing(s), 5)?
                .into_iter()
                .map(|c| {
                    if c == 0.0 {
                        ModalForcing::Zero
                    } else {
                        ModalForcing::Sine(c)
                    }
                })
                .collect()
        } else {
            vec![ModalForcing::Zero; basis.len()]
        };
        ModalCoefficients::new(basis, g, h, f)
    }
}

fn modal_sum(domain: Domain, terms: &[((usize, usize), f64)], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|&((m, n), a)| match domain {
            Domain::UnitInterval => a * core::f64::consts::SQRT_2 * (m as f64 * PI * x[0]).sin(),
            Domain::Square => {
                a * (m as f64 * PI * (x[0] + 1.0) * 0.5).sin()
                    * (n as f64 * PI * (x[1] + 1.0) * 0.5).sin()
            }
        })
        .sum()
}

/// How `Δt` is derived from the meshwidth `h_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Explicit(f64),
    /// `(h/2)^{1/2}`
    HalfPower,
    /// `(h/2)^{max(1/2, s)}`
    SPower,
    /// `h/2`
    Linear,
}

impl StepRule {
    pub fn target(self, h: f64, s: f64) -> f64 {
        match self {
            StepRule::Explicit(dt) => dt,
            StepRule::HalfPower => (0.5 * h).sqrt(),
            StepRule::SPower => (0.5 * h).powf(s.max(0.5)),
            StepRule::Linear => 0.5 * h,
        }
    }

    pub fn name(self) -> String {
        match self {
            StepRule::Explicit(dt) => alloc::format!("{dt}"),
            StepRule::HalfPower => "half-power".into(),
            StepRule::SPower => "s-power".into(),
            StepRule::Linear => "linear".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorMetric {
    /// `‖U_K − u(T)‖_{H^s}`
    HsFinal,
    /// `‖𝔡U_K − ∂ₜu(t_{K−1/2})‖_{L²}`
    L2DtStaggered,
}

impl ErrorMetric {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMetric::HsFinal => "hs-final",
            ErrorMetric::L2DtStaggered => "l2-dt-staggered",
        }
    }
}

/// Extended-variable parameters; unset fields take the defaults
/// `Y = max(1, 3|log h|/√λ₁)` and `M = ⌈Y⌉·⌈1/(1−σ)⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedParams {
    pub height: Option<f64>,
    pub elements: Option<usize>,
    pub sigma: f64,
    pub slope: f64,
}

impl Default for ExtendedParams {
    fn default() -> Self {
        Self {
            height: None,
            elements: None,
            sigma: 0.5,
            slope: 1.0,
        }
    }
}

/// Leapfrog stability handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CflPolicy {
    /// Abort unless `1 − ½Δt²λ_max ≥ θ`.
    Enforce { theta: f64 },
    /// Abort only beyond the sharp bound `Δt²λ_max < 4`; the θ check is
    /// reported.
    Classical { theta: f64 },
    /// Never abort; still reported.
    Report { theta: f64 },
}

impl CflPolicy {
    pub fn theta(self) -> f64 {
        match self {
            CflPolicy::Enforce { theta }
            | CflPolicy::Classical { theta }
            | CflPolicy::Report { theta } => theta,
        }
    }
}

/// One rung of a convergence ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct RungSpec {
    pub problem: Problem,
    pub s: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    pub step: StepRule,
    pub n: usize,
    pub extended: ExtendedParams,
    pub metric: ErrorMetric,
    pub cfl: CflPolicy,
    /// Modes per axis used by the oracle; `None` picks `max(64, 4n)` on the
    /// interval and 32 on the square.
    pub oracle_modes: Option<usize>,
}

/// Fully assembled discretization of one rung.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub order: FractionalOrder,
    pub mesh: OmegaMesh,
    pub op: DtnOperator,
    pub grid: TimeGrid,
    pub height: f64,
    pub elements: usize,
}

impl RungSpec {
    pub fn domain(&self) -> Domain {
        self.problem.domain()
    }

    pub fn oracle_basis(&self) -> Result<SpectralBasis> {
        let k = self.oracle_modes.unwrap_or(match self.domain() {
            Domain::UnitInterval => (4 * self.n).max(64),
            Domain::Square => 32,
        });
        SpectralBasis::new(self.domain(), k)
    }

    pub fn discretize(&self) -> Result<Discretization> {
        let order = FractionalOrder::new(self.s)?;
        let domain = self.domain();
        let mesh = OmegaMesh::new(domain, self.n)?;
        let om = OmegaMatrices::assemble(&mesh)?;
        let ext = self.extended;
        let height = ext
            .height
            .unwrap_or_else(|| default_height(mesh.h(), domain.first_eigenvalue()));
        let elements = ext
            .elements
            .unwrap_or_else(|| default_elements(height, ext.sigma));
        let hp = HpSpaceY::assemble(
            GeometricMesh::new(height, elements, ext.sigma)?,
            DegreeVector::new(elements, ext.slope)?,
            order.alpha(),
        )?;
        let op = DtnOperator::build(order, hp, om)?;
        let grid = TimeGrid::with_max_step(self.t_final, self.step.target(mesh.h(), self.s))?;
        Ok(Discretization {
            order,
            mesh,
            op,
            grid,
            height,
            elements,
        })
    }
}

/// Result of [`run_rung`].
#[derive(Debug, Clone, PartialEq)]
pub struct RungResult {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub height: f64,
    pub elements: usize,
    /// `𝓜`
    pub dofs_y: usize,
    pub error: f64,
    pub energy_drift: f64,
    pub lambda_max: Option<f64>,
    pub cfl: Option<CflReport>,
    /// The oracle expansion of the error looked truncated.
    pub truncation_warning: bool,
}

/// Maximum power iterations for the spectral bound of `L_h^s`.
pub const SPECTRAL_BOUND_ITERATIONS: usize = 5_000;

/// Leapfrog stability report for a discretization.
pub fn stability(disc: &Discretization, theta: f64) -> Result<(f64, CflReport)> {
    let lmax = disc
        .op
        .estimate_spectral_bound(&disc.mesh, SPECTRAL_BOUND_ITERATIONS)?;
    Ok((lmax, check_cfl(lmax, disc.grid.dt(), theta)))
}

/// Integrates one rung from the computable initial data.
pub fn solve(spec: &RungSpec, disc: &Discretization, rec: Recording) -> Result<Trajectory> {
    let forcing = spec.problem.forcing(&disc.mesh, spec.s)?;
    let (u0, u1) = initial_data(
        &disc.op,
        &disc.mesh,
        disc.grid.dt(),
        spec.problem.initial_position(),
        spec.problem.initial_velocity(),
        &forcing,
    )?;
    integrate(
        &disc.op,
        &disc.mesh,
        spec.scheme,
        disc.grid,
        u0,
        u1,
        &forcing,
        rec,
    )
}

/// Error of the final state in the configured metric.
pub fn measure_error(
    spec: &RungSpec,
    disc: &Discretization,
    traj: &Trajectory,
) -> Result<(f64, bool)> {
    let basis = spec.oracle_basis()?;
    let modal = spec.problem.modal_data(&basis, spec.s)?;
    let grid = disc.grid;
    match spec.metric {
        ErrorMetric::HsFinal => {
            let exact = solution_coefficients(&basis, &modal, spec.s, grid.t_final())?;
            let uk = &traj.last.curr;
            let discrete = decompose(&basis, |x| disc.mesh.evaluate(uk, x), 5)?;
            let diff: Vec<f64> = discrete.iter().zip(&exact).map(|(a, b)| a - b).collect();
            Ok((
                hs_norm_of_coefficients(&basis, &diff, spec.s)?,
                modal.truncated(),
            ))
        }
        ErrorMetric::L2DtStaggered => {
            let dt = grid.dt();
            let t_half = grid.t_final() - 0.5 * dt;
            let vel = velocity_coefficients(&basis, &modal, spec.s, t_half)?;
            let active: Vec<(usize, f64)> = vel
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, c)| *c != 0.0)
                .collect();
            let d: Vec<f64> = traj
                .last
                .curr
                .iter()
                .zip(&traj.last.prev)
                .map(|(a, b)| (a - b) / dt)
                .collect();
            let err = disc.mesh.l2_error(&d, |x| {
                let p = [x[0], x.get(1).copied().unwrap_or(0.0)];
                active.iter().map(|(k, c)| c * basis.eval(*k, &p)).sum()
            })?;
            Ok((err, modal.truncated()))
        }
    }
}

/// Discretize, check stability (leapfrog), integrate and measure.
pub fn run_rung(spec: &RungSpec) -> Result<RungResult> {
    let disc = spec.discretize()?;
    let (lambda_max, cfl) = if spec.scheme == Scheme::Leapfrog {
        let (l, report) = stability(&disc, spec.cfl.theta())?;
        let abort = match spec.cfl {
            CflPolicy::Enforce { .. } => !report.passed,
            CflPolicy::Classical { .. } => !report.classically_stable,
            CflPolicy::Report { .. } => false,
        };
        if abort {
            return Err(Error::CflViolation {
                n: spec.n,
                dt: disc.grid.dt(),
                margin: report.margin,
                max_dt: report.max_dt,
            });
        }
        (Some(l), Some(report))
    } else {
        (None, None)
    };
    let traj = solve(
        spec,
        &disc,
        Recording {
            history: false,
            energy: true,
        },
    )?;
    let (error, truncation_warning) = measure_error(spec, &disc, &traj)?;
    let energy_drift = traj.energy.as_ref().map_or(0.0, |e| e.relative_drift());
    Ok(RungResult {
        n: spec.n,
        h: disc.mesh.h(),
        dt: disc.grid.dt(),
        steps: disc.grid.steps(),
        height: disc.height,
        elements: disc.elements,
        dofs_y: disc.op.hp().dim(),
        error,
        energy_drift,
        lambda_max,
        cfl,
        truncation_warning,
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_slope(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(invalid("slope fit needs at least two matching points"));
    }
    if h.iter().chain(e).any(|v| !(*v > 0.0)) {
        return Err(invalid("slope fit needs positive values"));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// `log(e_{i−1}/e_i) / log(h_{i−1}/h_i)`, `None` for the first entry.
pub fn observed_rates(h: &[f64], e: &[f64]) -> Vec<Option<f64>> {
    (0..e.len())
        .map(|i| {
            (i > 0 && e[i] > 0.0 && e[i - 1] > 0.0)
                .then(|| (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        assert!((fitted_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        let r = observed_rates(&h, &e);
        assert!(r[0].is_none());
        assert!((r[2].unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_slope(&h[..1], &e[..1]).is_err());
    }

    #[test]
    fn step_rules() {
        assert_eq!(StepRule::Linear.target(0.2, 0.3), 0.1);
        assert!((StepRule::SPower.target(0.5, 0.75) - 0.25f64.powf(0.75)).abs() < 1e-15);
        assert!((StepRule::SPower.target(0.5, 0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn paper_modal_data() {
        let b = SpectralBasis::new(Domain::UnitInterval, 8).unwrap();
        let m = Problem::Paper1d.modal_data(&b, 0.25).unwrap();
        assert!((m.h[0] - 1.0 / 2f64.sqrt()).abs() < 1e-13);
        assert!(m.g.iter().all(|v| v.abs() < 1e-14));
        let u = solution_coefficients(&b, &m, 0.25, PI / 2.0).unwrap();
        assert!((u[0] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_problem_has_zero_error() {
        let spec = RungSpec {
            problem: Problem::CustomModal {
                domain: Domain::UnitInterval,
                g: Vec::new(),
                h: Vec::new(),
            },
            s: 0.5,
            scheme: Scheme::Trapezoidal,
            t_final: 1.0,
            step: StepRule::HalfPower,
            n: 8,
            extended: ExtendedParams::default(),
            metric: ErrorMetric::HsFinal,
            cfl: CflPolicy::Enforce { theta: 0.5 },
            oracle_modes: None,
        };
        let r = run_rung(&spec).unwrap();
        assert!(r.error <= 1e-12);
    }
}

//! Leapfrog and trapezoidal time stepping on the trace space, computable
//! initial data, the CFL check and discrete energies.
//!
//! Both schemes keep every cylinder iterate discretely harmonic, so they can
//! be written purely in terms of the trace vectors `U_k` and the map
//! `L_h^s`:
//!
//! * leapfrog: `B_Ω 𝔡²U_k + L_h^s U_k = B_Ω f_k`;
//! * trapezoidal: `B_Ω 𝔡²U_k + L_h^s 𝔠U_k = B_Ω 𝔠f_k`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::dtn::DtnOperator;
use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{dot, BandedCholesky, DenseMatrix, GeneralizedEigen};
use crate::omega::{l2_project, OmegaMesh};

/// Uniform grid `t_k = kΔt`, `Δt = T/K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid(alloc::format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if steps < 2 {
            return Err(invalid(alloc::format!(
                "need at least 2 time steps, got {steps}"
            )));
        }
        Ok(Self { t_final, steps })
    }

    /// `K = ⌈T/Δt_target⌉` so that the realized step never exceeds the target.
    pub fn with_max_step(t_final: f64, dt_target: f64) -> Result<Self> {
        if !(dt_target > 0.0 && dt_target.is_finite()) {
            return Err(invalid(alloc::format!(
                "time step must be positive, got {dt_target}"
            )));
        }
        let k = (t_final / dt_target * (1.0 - 1e-12)).ceil().max(2.0) as usize;
        Self::new(t_final, k)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Leapfrog,
    Trapezoidal,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Leapfrog => "leapfrog",
            Scheme::Trapezoidal => "trapezoidal",
        }
    }
}

/// The rolling pair `(U_{k−1}, U_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub prev: Vec<f64>,
    pub curr: Vec<f64>,
    /// Index of `curr`.
    pub k: usize,
    pub scheme: Scheme,
}

impl WaveState {
    pub fn new(u0: Vec<f64>, u1: Vec<f64>, scheme: Scheme) -> Result<Self> {
        check_len(u0.len(), u1.len())?;
        Ok(Self {
            prev: u0,
            curr: u1,
            k: 1,
            scheme,
        })
    }

    fn advance(&mut self, next: Vec<f64>) -> Result<()> {
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: self.k + 1 });
        }
        self.prev = core::mem::replace(&mut self.curr, next);
        self.k += 1;
        Ok(())
    }
}

/// `𝔡w_{k+1} = (w_{k+1} − w_k)/Δt`
pub fn forward_difference(next: &[f64], curr: &[f64], dt: f64) -> Vec<f64> {
    next.iter().zip(curr).map(|(a, b)| (a - b) / dt).collect()
}

/// `w_{k+1/2} = (w_{k+1} + w_k)/2`
pub fn midpoint(next: &[f64], curr: &[f64]) -> Vec<f64> {
    next.iter().zip(curr).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// `𝔠w_k = (w_{k+1} + 2w_k + w_{k−1})/4`
pub fn average(next: &[f64], curr: &[f64], prev: &[f64]) -> Vec<f64> {
    next.iter()
        .zip(curr)
        .zip(prev)
        .map(|((a, b), c)| 0.25 * (a + 2.0 * b + c))
        .collect()
}

/// `𝔡²w_k = (w_{k+1} − 2w_k + w_{k−1})/Δt²`
pub fn second_difference(next: &[f64], curr: &[f64], prev: &[f64], dt: f64) -> Vec<f64> {
    next.iter()
        .zip(curr)
        .zip(prev)
        .map(|((a, b), c)| (a - 2.0 * b + c) / (dt * dt))
        .collect()
}

/// Right-hand side `f(·, t)` as a load vector `B_Ω f_k = ((f(t), φ_i))_i`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `f(x, t) = c(t) · q(x)` with the load vector of `q` precomputed.
    Separable {
        load: Vec<f64>,
        amplitude: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// Arbitrary `f(x, t)`, assembled at each requested time.
    Field(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Separable { load, .. } => write!(f, "Separable({} dofs)", load.len()),
            Forcing::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    pub fn load(&self, mesh: &OmegaMesh, t: f64) -> Result<Vec<f64>> {
        match self {
            Forcing::Zero => Ok(vec![0.0; mesh.dofs()]),
            Forcing::Separable { load, amplitude } => {
                let c = amplitude(t);
                Ok(load.iter().map(|v| c * v).collect())
            }
            Forcing::Field(f) => mesh.load_vector(|x| f(x, t)),
        }
    }
}

/// `U₀ = Πg`, `U₁ = U₀ + ΔtΠh + ½Δt² Z` with `B_Ω Z = −L_h^s U₀ + B_Ω Πf(0)`.
pub fn initial_data(
    op: &DtnOperator,
    mesh: &OmegaMesh,
    dt: f64,
    g: impl Fn(&[f64]) -> f64,
    h: impl Fn(&[f64]) -> f64,
    forcing: &Forcing,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(op.dim(), mesh.dofs())?;
    let om = op.omega();
    let u0 = l2_project(mesh, om, g)?;
    let ph = l2_project(mesh, om, h)?;
    let lu0 = op.apply(&u0)?;
    let f0 = forcing.load(mesh, 0.0)?;
    let rhs: Vec<f64> = f0.iter().zip(&lu0).map(|(f, l)| f - l).collect();
    let z = om.solve_mass(&rhs)?;
    let u1 = (0..u0.len())
        .map(|i| u0[i] + dt * ph[i] + 0.5 * dt * dt * z[i])
        .collect();
    Ok((u0, u1))
}

/// Explicit three-level scheme; one DtN application and one mass solve per
/// step.
#[derive(Debug, Clone, Copy)]
pub struct Leapfrog<'a> {
    op: &'a DtnOperator,
    dt: f64,
}

impl<'a> Leapfrog<'a> {
    pub fn new(op: &'a DtnOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(alloc::format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(Self { op, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` given `L_h^s U_k` and the load `B_Ω f_k`.
    pub fn step_with(&self, state: &mut WaveState, l_curr: &[f64], load: &[f64]) -> Result<()> {
        let n = self.op.dim();
        check_len(n, load.len())?;
        check_len(n, l_curr.len())?;
        let rhs: Vec<f64> = load.iter().zip(l_curr).map(|(f, l)| f - l).collect();
        let acc = self.op.omega().solve_mass(&rhs)?;
        let dt2 = self.dt * self.dt;
        let next = (0..n)
            .map(|i| 2.0 * state.curr[i] - state.prev[i] + dt2 * acc[i])
            .collect();
        state.advance(next)
    }

    pub fn step(&self, state: &mut WaveState, load: &[f64]) -> Result<()> {
        let l = self.op.apply(&state.curr)?;
        self.step_with(state, &l, load)
    }
}

/// Implicit three-level scheme. The coupled cylinder system
/// `(τ B_Y ⊗ A_Ω + (E₁ + τ A_Y) ⊗ B_Ω) W = (f̃; 0)`, `τ = Δt²/(4 d_s)`, is
/// diagonalized by the generalized eigenvectors `X_t` of
/// `(B_Y, E₁ + τ A_Y)`; only the trace row of `X_t` is needed, giving
/// `U_{k+1} = Σ_j (X_t)_{0j}² (τ ν_j A_Ω + B_Ω)⁻¹ f̃`.
#[derive(Debug, Clone)]
pub struct Trapezoidal<'a> {
    op: &'a DtnOperator,
    dt: f64,
    tau: f64,
    x: DenseMatrix,
    nu: Vec<f64>,
    factors: Vec<BandedCholesky>,
}

impl<'a> Trapezoidal<'a> {
    pub fn new(op: &'a DtnOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(alloc::format!(
                "time step must be positive, got {dt}"
            )));
        }
        let tau = dt * dt / (4.0 * op.order().d_s());
        let hp = op.hp();
        let m = hp.dim();
        let mut pencil = DenseMatrix::from_fn(m, m, |i, j| tau * hp.stiffness()[(i, j)]);
        pencil[(0, 0)] += 1.0;
        let eig = GeneralizedEigen::new(hp.mass(), &pencil, "B_Y", "E_1 + tau A_Y")?;
        let om = op.omega();
        let factors = eig
            .values
            .iter()
            .map(|&nu| {
                BandedCholesky::new(
                    &om.stiffness().combine(tau * nu, om.mass(), 1.0),
                    "tau nu_j A_Omega + B_Omega",
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            op,
            dt,
            tau,
            x: eig.vectors,
            nu: eig.values,
            factors,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.nu
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if dt == self.dt {
            Ok(())
        } else {
            Err(Error::StaleFactorization {
                built: self.dt,
                requested: dt,
            })
        }
    }

    /// Full solution `W = (U; Ṽ)` of the coupled system for right-hand side
    /// `(f̃; 0)`, as `𝓜` blocks of length `N`.
    pub fn solve_coupled(&self, ftilde: &[f64], dt: f64) -> Result<Vec<f64>> {
        self.check_dt(dt)?;
        let n = self.op.dim();
        check_len(n, ftilde.len())?;
        let m = self.nu.len();
        let mut w = vec![0.0; m * n];
        for (j, f) in self.factors.iter().enumerate() {
            let x0j = self.x[(0, j)];
            let mut what: Vec<f64> = ftilde.iter().map(|v| x0j * v).collect();
            f.solve_in_place(&mut what);
            for i in 0..m {
                let xij = self.x[(i, j)];
                for (wv, hv) in w[i * n..(i + 1) * n].iter_mut().zip(&what) {
                    *wv += xij * hv;
                }
            }
        }
        Ok(w)
    }

    /// Trace block only.
    fn solve_trace(&self, ftilde: &[f64]) -> Vec<f64> {
        let n = ftilde.len();
        let mut u = vec![0.0; n];
        for (j, f) in self.factors.iter().enumerate() {
            let x0j = self.x[(0, j)];
            let mut what: Vec<f64> = ftilde.iter().map(|v| x0j * v).collect();
            f.solve_in_place(&mut what);
            for (uv, hv) in u.iter_mut().zip(&what) {
                *uv += x0j * hv;
            }
        }
        u
    }

    /// `f̃_k = B_Ω(2U_k − U_{k−1}) − (Δt²/4) L_h^s(2U_k + U_{k−1}) + Δt² B_Ω𝔠f_k`
    /// given `L_h^s U_k`, `L_h^s U_{k−1}` and the averaged load.
    pub fn rhs(
        &self,
        state: &WaveState,
        l_curr: &[f64],
        l_prev: &[f64],
        load_avg: &[f64],
    ) -> Vec<f64> {
        let n = state.curr.len();
        let lin: Vec<f64> = (0..n)
            .map(|i| 2.0 * state.curr[i] - state.prev[i])
            .collect();
        let blin = self.op.omega().mass().matvec(&lin);
        let q = 0.25 * self.dt * self.dt;
        let dt2 = self.dt * self.dt;
        (0..n)
            .map(|i| blin[i] - q * (2.0 * l_curr[i] + l_prev[i]) + dt2 * load_avg[i])
            .collect()
    }

    pub fn step_with(
        &self,
        state: &mut WaveState,
        dt: f64,
        l_curr: &[f64],
        l_prev: &[f64],
        load_avg: &[f64],
    ) -> Result<()> {
        self.check_dt(dt)?;
        let n = self.op.dim();
        check_len(n, load_avg.len())?;
        let f = self.rhs(state, l_curr, l_prev, load_avg);
        let next = self.solve_trace(&f);
        state.advance(next)
    }

    /// One step with `load_avg = B_Ω 𝔠f_k`.
    pub fn step(&self, state: &mut WaveState, dt: f64, load_avg: &[f64]) -> Result<()> {
        let lc = self.op.apply(&state.curr)?;
        let lp = self.op.apply(&state.prev)?;
        self.step_with(state, dt, &lc, &lp, load_avg)
    }
}

/// Outcome of the leapfrog stability check `1 − ½Δt² λ_max ≥ θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub passed: bool,
    pub margin: f64,
    /// Largest `Δt` passing the check.
    pub max_dt: f64,
    /// Whether `Δt² λ_max < 4`, the sharp bound for the explicit recurrence.
    pub classically_stable: bool,
}

pub fn check_cfl(lambda_max: f64, dt: f64, theta: f64) -> CflReport {
    let margin = 1.0 - 0.5 * dt * dt * lambda_max;
    let valid_theta = theta > 0.0 && theta < 1.0;
    CflReport {
        passed: valid_theta && margin >= theta,
        margin,
        max_dt: (2.0 * (1.0 - theta.clamp(0.0, 1.0)) / lambda_max).sqrt(),
        classically_stable: dt * dt * lambda_max < 4.0,
    }
}

/// Per-step energies `E_k` (trapezoidal) or `𝓔_k` (leapfrog), `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub scheme: Scheme,
    pub values: Vec<f64>,
}

impl EnergyReport {
    /// `max_k |E_k − E_1| / |E_1|`
    pub fn relative_drift(&self) -> f64 {
        let Some(&e1) = self.values.first() else {
            return 0.0;
        };
        let dev = self
            .values
            .iter()
            .map(|e| (e - e1).abs())
            .fold(0.0, f64::max);
        if e1 == 0.0 {
            dev
        } else {
            dev / e1.abs()
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks `E_ℓ^{1/2} ≤ E_1^{1/2} + 2^{−1/2} Σ_{k=1}^{ℓ} Δt ‖Π𝔠f_k‖` for each
    /// `ℓ`, with `forcing_norms[k−1] = ‖Π𝔠f_k‖` and relative slack `slack`.
    pub fn satisfies_stability_bound(&self, forcing_norms: &[f64], dt: f64, slack: f64) -> bool {
        let Some(&e1) = self.values.first() else {
            return true;
        };
        let root1 = e1.max(0.0).sqrt();
        let mut sum = 0.0;
        for (l, e) in self.values.iter().enumerate() {
            if let Some(f) = forcing_norms.get(l) {
                sum += dt * f;
            }
            let bound = root1 + sum / core::f64::consts::SQRT_2;
            if e.max(0.0).sqrt() > bound * (1.0 + slack) + slack {
                return false;
            }
        }
        true
    }
}

/// Energy of one step from `(U_{k−1}, U_k)` and their images under `L_h^s`.
pub fn step_energy(
    scheme: Scheme,
    op: &DtnOperator,
    dt: f64,
    prev: &[f64],
    curr: &[f64],
    l_prev: &[f64],
    l_curr: &[f64],
) -> f64 {
    let d = forward_difference(curr, prev, dt);
    let kinetic = 0.5 * dot(&d, &op.omega().mass().matvec(&d));
    let potential = match scheme {
        Scheme::Trapezoidal => {
            let m = midpoint(curr, prev);
            let lm = midpoint(l_curr, l_prev);
            0.5 * dot(&m, &lm)
        }
        Scheme::Leapfrog => 0.5 * dot(curr, l_prev),
    };
    kinetic + potential
}

/// Energies of a stored trajectory `U_0, …, U_K`.
pub fn energy_trace(
    op: &DtnOperator,
    scheme: Scheme,
    dt: f64,
    trajectory: &[Vec<f64>],
) -> Result<EnergyReport> {
    let images = trajectory
        .iter()
        .map(|u| op.apply(u))
        .collect::<Result<Vec<_>>>()?;
    let values = (1..trajectory.len())
        .map(|k| {
            step_energy(
                scheme,
                op,
                dt,
                &trajectory[k - 1],
                &trajectory[k],
                &images[k - 1],
                &images[k],
            )
        })
        .collect();
    Ok(EnergyReport { scheme, values })
}

/// What [`integrate`] records besides the final pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recording {
    pub history: bool,
    pub energy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// `(U_{K−1}, U_K)`
    pub last: WaveState,
    /// `U_0..=U_K` when requested.
    pub history: Option<Vec<Vec<f64>>>,
    pub energy: Option<EnergyReport>,
    /// `max_k ‖U_k‖_{L²}`
    pub max_norm: f64,
    /// `‖Π𝔠f_k‖_{L²}` for `k = 1..K−1` (trapezoidal) or `‖Πf_k‖` (leapfrog).
    pub forcing_norms: Vec<f64>,
}

/// Runs `scheme` from `(U_0, U_1)` up to `t_K = T`.
pub fn integrate(
    op: &DtnOperator,
    mesh: &OmegaMesh,
    scheme: Scheme,
    grid: TimeGrid,
    u0: Vec<f64>,
    u1: Vec<f64>,
    forcing: &Forcing,
    rec: Recording,
) -> Result<Trajectory> {
    check_len(op.dim(), u0.len())?;
    let dt = grid.dt();
    let om = op.omega();
    let norm = |u: &[f64]| om.l2_norm(u);
    let mut max_norm = norm(&u0).max(norm(&u1));
    let mut history = rec.history.then(|| vec![u0.clone(), u1.clone()]);
    let mut state = WaveState::new(u0, u1, scheme)?;
    let mut l_prev = op.apply(&state.prev)?;
    let mut l_curr = op.apply(&state.curr)?;
    let mut energies = Vec::new();
    if rec.energy {
        energies.push(step_energy(
            scheme,
            op,
            dt,
            &state.prev,
            &state.curr,
            &l_prev,
            &l_curr,
        ));
    }
    let mut forcing_norms = Vec::new();
    let proj_norm = |load: &[f64]| -> Result<f64> {
        let p = om.solve_mass(load)?;
        Ok(dot(&p, load).max(0.0).sqrt())
    };
    let zero = vec![0.0; op.dim()];
    match scheme {
        Scheme::Leapfrog => {
            let lf = Leapfrog::new(op, dt)?;
            for k in 1..grid.steps() {
                let load = if forcing.is_zero() {
                    zero.clone()
                } else {
                    forcing.load(mesh, grid.time(k))?
                };
                if rec.energy {
                    forcing_norms.push(if forcing.is_zero() {
                        0.0
                    } else {
                        proj_norm(&load)?
                    });
                }
                lf.step_with(&mut state, &l_curr, &load)?;
                let l_next = op.apply(&state.curr)?;
                l_prev = core::mem::replace(&mut l_curr, l_next);
                max_norm = max_norm.max(norm(&state.curr));
                if let Some(h) = history.as_mut() {
                    h.push(state.curr.clone());
                }
                if rec.energy {
                    energies.push(step_energy(
                        scheme,
                        op,
                        dt,
                        &state.prev,
                        &state.curr,
                        &l_prev,
                        &l_curr,
                    ));
                }
            }
        }
        Scheme::Trapezoidal => {
            let tr = Trapezoidal::new(op, dt)?;
            let mut loads = if forcing.is_zero() {
                None
            } else {
                Some([
                    forcing.load(mesh, grid.time(0))?,
                    forcing.load(mesh, grid.time(1))?,
                ])
            };
            for k in 1..grid.steps() {
                let avg = match loads.as_mut() {
                    None => zero.clone(),
                    Some([lp, lc]) => {
                        let ln = forcing.load(mesh, grid.time(k + 1))?;
                        let avg = average(&ln, lc, lp);
                        *lp = core::mem::replace(lc, ln);
                        avg
                    }
                };
                if rec.energy {
                    forcing_norms.push(if loads.is_none() {
                        0.0
                    } else {
                        proj_norm(&avg)?
                    });
                }
                tr.step_with(&mut state, dt, &l_curr, &l_prev, &avg)?;
                let l_next = op.apply(&state.curr)?;
                l_prev = core::mem::replace(&mut l_curr, l_next);
                max_norm = max_norm.max(norm(&state.curr));
                if let Some(h) = history.as_mut() {
                    h.push(state.curr.clone());
                }
                if rec.energy {
                    energies.push(step_energy(
                        scheme,
                        op,
                        dt,
                        &state.prev,
                        &state.curr,
                        &l_prev,
                        &l_curr,
                    ));
                }
            }
        }
    }
    Ok(Trajectory {
        grid,
        last: state,
        history,
        energy: rec.energy.then_some(EnergyReport {
            scheme,
            values: energies,
        }),
        max_norm,
        forcing_norms,
    })
}

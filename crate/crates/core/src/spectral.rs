//! Semi-analytic reference solutions built from the Dirichlet eigenpairs of
//! `−Δ` on the unit interval or on the square `(−1, 1)²`.
//!
//! The exact solution of `∂ₜ²u + (−Δ)ˢu = f` is the expansion
//! `u(x, t) = Σ_k u_k(t) φ_k(x)` where each coefficient solves the scalar
//! oscillator `u_k'' + λ_k^s u_k = f_k`. The extension to the cylinder
//! multiplies each mode by the profile `ψ_k(y)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use core::fmt;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{check_len, invalid, Error, Result};
use crate::quadrature::{adaptive, composite_points, GaussRule};
use crate::special::{bessel_k_value, gamma, BesselOrder};

/// Spatial domain Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `(0, 1)`
    UnitInterval,
    /// `(−1, 1)²`
    Square,
}

impl Domain {
    pub fn dim(self) -> usize {
        match self {
            Domain::UnitInterval => 1,
            Domain::Square => 2,
        }
    }

    /// `(lo, hi)` along each coordinate axis.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Domain::UnitInterval => (0.0, 1.0),
            Domain::Square => (-1.0, 1.0),
        }
    }

    fn side(self) -> f64 {
        let (lo, hi) = self.bounds();
        hi - lo
    }

    /// Smallest Dirichlet eigenvalue of `−Δ`.
    pub fn first_eigenvalue(self) -> f64 {
        let l = self.side();
        self.dim() as f64 * (PI / l) * (PI / l)
    }
}

/// The fractional order `s` together with `α = 1 − 2s` and the
/// normalization `d_s = 2^α Γ(1−s) / Γ(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    s: f64,
    alpha: f64,
    d_s: f64,
}

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid(alloc::format!(
                "fractional order must lie in (0, 1), got {s}"
            )));
        }
        let alpha = 1.0 - 2.0 * s;
        let d_s = if s == 0.5 {
            1.0
        } else {
            libm::exp2(alpha) * gamma(1.0 - s)? / gamma(s)?
        };
        Ok(Self { s, alpha, d_s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d_s(&self) -> f64 {
        self.d_s
    }

    /// `c_s = 2^{1−s} / Γ(s)`, the constant making `ψ_k(0) = 1`.
    pub fn c_s(&self) -> f64 {
        libm::exp2(1.0 - self.s) / libm::tgamma(self.s)
    }
}

/// One retained eigenpair. For the interval only `index.0` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub index: (usize, usize),
    pub eigenvalue: f64,
}

/// Ordered eigenpairs of `−Δ` with homogeneous Dirichlet conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    domain: Domain,
    modes: Vec<Mode>,
    per_axis: usize,
}

impl SpectralBasis {
    /// Interval: modes `k = 1..=k_max`. Square: all `(m, n)` with
    /// `1 ≤ m, n ≤ k_max`, sorted by eigenvalue.
    pub fn new(domain: Domain, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(invalid("spectral basis needs at least one mode"));
        }
        let l = domain.side();
        let mut modes = Vec::new();
        match domain {
            Domain::UnitInterval => {
                for k in 1..=k_max {
                    let kf = k as f64;
                    modes.push(Mode {
                        index: (k, 0),
                        eigenvalue: (kf * PI / l) * (kf * PI / l),
                    });
                }
            }
            Domain::Square => {
                for m in 1..=k_max {
                    for n in 1..=k_max {
                        let (mf, nf) = (m as f64, n as f64);
                        modes.push(Mode {
                            index: (m, n),
                            eigenvalue: PI * PI * (mf * mf + nf * nf) / (l * l),
                        });
                    }
                }
                modes.sort_by(|a, b| {
                    a.eigenvalue
                        .partial_cmp(&b.eigenvalue)
                        .unwrap_or(core::cmp::Ordering::Equal)
                        .then(a.index.cmp(&b.index))
                });
            }
        }
        Ok(Self {
            domain,
            modes,
            per_axis: k_max,
        })
    }

    /// `K_max = 64` on the interval, `32 × 32` on the square.
    pub fn with_default_size(domain: Domain) -> Self {
        let k = match domain {
            Domain::UnitInterval => 64,
            Domain::Square => 32,
        };
        Self::new(domain, k).expect("default basis size is positive")
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Position of mode `index` in the ordering.
    pub fn position(&self, index: (usize, usize)) -> Option<usize> {
        self.modes.iter().position(|m| m.index == index)
    }

    /// `φ_k(x)` for the mode at position `k` in the ordering.
    pub fn eval(&self, k: usize, x: &[f64]) -> f64 {
        let mode = self.modes[k];
        match self.domain {
            Domain::UnitInterval => SQRT_2 * (mode.index.0 as f64 * PI * x[0]).sin(),
            Domain::Square => axis_sine(mode.index.0, x[0]) * axis_sine(mode.index.1, x[1]),
        }
    }
}

/// Normalized sine on `(−1, 1)`: `sin(mπ(x+1)/2)` has unit L² norm there.
fn axis_sine(m: usize, x: f64) -> f64 {
    (m as f64 * PI * (x + 1.0) * 0.5).sin()
}

/// Fills `out[m-1] = sin(m θ)` for `m = 1..=out.len()` by the three-term
/// recurrence.
fn sine_ladder(theta: f64, out: &mut [f64]) {
    let c2 = 2.0 * theta.cos();
    let mut prev = 0.0;
    let mut cur = theta.sin();
    for slot in out.iter_mut() {
        *slot = cur;
        let next = c2 * cur - prev;
        prev = cur;
        cur = next;
    }
}

/// Default number of composite Gauss panels per axis for [`decompose`].
pub fn default_panels(domain: Domain) -> usize {
    match domain {
        Domain::UnitInterval => 4096,
        Domain::Square => 256,
    }
}

/// `(func, φ_k)_{L²(Ω)}` for every retained mode, by composite Gauss
/// quadrature of `quadrature_order` points on the default panel grid.
pub fn decompose(
    basis: &SpectralBasis,
    func: impl Fn(&[f64]) -> f64,
    quadrature_order: usize,
) -> Result<Vec<f64>> {
    decompose_with_panels(basis, func, quadrature_order, default_panels(basis.domain))
}

pub fn decompose_with_panels(
    basis: &SpectralBasis,
    func: impl Fn(&[f64]) -> f64,
    quadrature_order: usize,
    panels: usize,
) -> Result<Vec<f64>> {
    if quadrature_order < 1 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    if panels == 0 {
        return Err(invalid("panel count must be positive"));
    }
    let rule = GaussRule::legendre(quadrature_order)?;
    let (lo, hi) = basis.domain.bounds();
    let (pts, wts) = composite_points(lo, hi, panels, &rule);
    let k = basis.per_axis;
    match basis.domain {
        Domain::UnitInterval => {
            let mut acc = vec![0.0; k];
            let mut ladder = vec![0.0; k];
            for (x, w) in pts.iter().zip(&wts) {
                let fx = func(&[*x]);
                if fx == 0.0 {
                    continue;
                }
                sine_ladder(PI * x, &mut ladder);
                for (a, s) in acc.iter_mut().zip(&ladder) {
                    *a += w * fx * s;
                }
            }
            Ok(basis
                .modes
                .iter()
                .map(|m| SQRT_2 * acc[m.index.0 - 1])
                .collect())
        }
        Domain::Square => {
            let p = pts.len();
            // sines[i * k + m] = w_i sin((m+1)π(x_i+1)/2)
            let mut sines = vec![0.0; p * k];
            for (i, (x, w)) in pts.iter().zip(&wts).enumerate() {
                let row = &mut sines[i * k..(i + 1) * k];
                sine_ladder(0.5 * PI * (x + 1.0), row);
                for v in row.iter_mut() {
                    *v *= w;
                }
            }
            // partial[j * k + m] = Σ_i f(x_i, y_j) sines[i, m]
            let mut partial = vec![0.0; p * k];
            for j in 0..p {
                let out = &mut partial[j * k..(j + 1) * k];
                for i in 0..p {
                    let f = func(&[pts[i], pts[j]]);
                    if f == 0.0 {
                        continue;
                    }
                    let srow = &sines[i * k..(i + 1) * k];
                    for (o, s) in out.iter_mut().zip(srow) {
                        *o += f * s;
                    }
                }
            }
            let mut full = vec![0.0; k * k];
            for j in 0..p {
                let srow = &sines[j * k..(j + 1) * k];
                let prow = &partial[j * k..(j + 1) * k];
                for (n, sn) in srow.iter().enumerate() {
                    for (m, pm) in prow.iter().enumerate() {
                        full[m * k + n] += pm * sn;
                    }
                }
            }
            Ok(basis
                .modes
                .iter()
                .map(|md| full[(md.index.0 - 1) * k + (md.index.1 - 1)])
                .collect())
        }
    }
}

/// Fraction of `Σ|c_k|²` carried by the last tenth of the retained modes.
pub fn tail_mass_fraction(coeffs: &[f64]) -> f64 {
    let total: f64 = coeffs.iter().map(|c| c * c).sum();
    if total == 0.0 {
        return 0.0;
    }
    let start = coeffs.len() - (coeffs.len() / 10).max(1);
    coeffs[start..].iter().map(|c| c * c).sum::<f64>() / total
}

/// Threshold above which [`tail_mass_fraction`] signals a truncated expansion.
pub const TAIL_WARNING: f64 = 1e-10;

/// `(Σ_k λ_k^r |c_k|²)^{1/2}` for already computed coefficients.
pub fn hs_norm_of_coefficients(basis: &SpectralBasis, coeffs: &[f64], r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid(alloc::format!(
            "Sobolev index must be nonnegative, got {r}"
        )));
    }
    check_len(basis.len(), coeffs.len())?;
    Ok(basis
        .modes
        .iter()
        .zip(coeffs)
        .map(|(m, c)| m.eigenvalue.powf(r) * c * c)
        .sum::<f64>()
        .sqrt())
}

/// `‖func‖_{H^r}` through the spectral coefficients of `func`.
pub fn hs_norm(basis: &SpectralBasis, func: impl Fn(&[f64]) -> f64, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid(alloc::format!(
            "Sobolev index must be nonnegative, got {r}"
        )));
    }
    let c = decompose(basis, func, 5)?;
    hs_norm_of_coefficients(basis, &c, r)
}

/// Time dependence of one forcing coefficient `f_k(t)`.
#[derive(Clone)]
pub enum ModalForcing {
    Zero,
    /// `c · sin t`
    Sine(f64),
    /// `c · cos t`
    Cosine(f64),
    /// Anything else, integrated numerically.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ModalForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModalForcing::Zero => write!(f, "Zero"),
            ModalForcing::Sine(c) => write!(f, "Sine({c})"),
            ModalForcing::Cosine(c) => write!(f, "Cosine({c})"),
            ModalForcing::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl ModalForcing {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ModalForcing::Zero => 0.0,
            ModalForcing::Sine(c) => c * t.sin(),
            ModalForcing::Cosine(c) => c * t.cos(),
            ModalForcing::Custom(f) => f(t),
        }
    }
}

/// Per-mode data `g_k`, `h_k`, `f_k(t)`.
#[derive(Debug, Clone)]
pub struct ModalCoefficients {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub f: Vec<ModalForcing>,
}

impl ModalCoefficients {
    pub fn new(
        basis: &SpectralBasis,
        g: Vec<f64>,
        h: Vec<f64>,
        f: Vec<ModalForcing>,
    ) -> Result<Self> {
        check_len(basis.len(), g.len())?;
        check_len(basis.len(), h.len())?;
        check_len(basis.len(), f.len())?;
        Ok(Self { g, h, f })
    }

    pub fn zeros(basis: &SpectralBasis) -> Self {
        let k = basis.len();
        Self {
            g: vec![0.0; k],
            h: vec![0.0; k],
            f: vec![ModalForcing::Zero; k],
        }
    }

    /// Whether any data series carries more than [`TAIL_WARNING`] of its mass
    /// in the last tenth of the retained modes. Custom forcings are not inspected.
    pub fn truncated(&self) -> bool {
        let amp: Vec<f64> = self
            .f
            .iter()
            .map(|f| match f {
                ModalForcing::Sine(c) | ModalForcing::Cosine(c) => *c,
                _ => 0.0,
            })
            .collect();
        [&self.g[..], &self.h[..], &amp[..]]
            .iter()
            .any(|c| tail_mass_fraction(c) > TAIL_WARNING)
    }
}

/// Below this distance from the resonance `λ^s = 1` the sinusoidal closed
/// forms lose digits and the quadrature route is taken instead.
const RESONANCE_GAP: f64 = 1e-4;
const DUHAMEL_TOL: f64 = 1e-12;

/// Duhamel term and its time derivative for `u'' + ω²u = f`, zero data.
fn duhamel(omega: f64, forcing: &ModalForcing, t: f64) -> (f64, f64) {
    let w2m1 = omega * omega - 1.0;
    match forcing {
        ModalForcing::Zero => (0.0, 0.0),
        ModalForcing::Sine(c) if (omega - 1.0).abs() > RESONANCE_GAP => {
            let u = (omega * t.sin() - (omega * t).sin()) / (omega * w2m1);
            let du = (t.cos() - (omega * t).cos()) / w2m1;
            (c * u, c * du)
        }
        ModalForcing::Cosine(c) if (omega - 1.0).abs() > RESONANCE_GAP => {
            let u = (t.cos() - (omega * t).cos()) / w2m1;
            let du = (omega * (omega * t).sin() - t.sin()) / w2m1;
            (c * u, c * du)
        }
        other => {
            let u = adaptive(0.0, t, DUHAMEL_TOL, 0.0, 4096, |r| {
                other.eval(r) * (omega * (t - r)).sin()
            }) / omega;
            let du = adaptive(0.0, t, DUHAMEL_TOL, 0.0, 4096, |r| {
                other.eval(r) * (omega * (t - r)).cos()
            });
            (u, du)
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid(alloc::format!("time must be nonnegative, got {t}")))
    }
}

/// `u_k(t)` for `u_k'' + λ^s u_k = f_k`, `u_k(0) = g`, `u_k'(0) = h`.
pub fn modal_solution(
    t: f64,
    s: f64,
    lambda: f64,
    g: f64,
    h: f64,
    f: &ModalForcing,
) -> Result<f64> {
    check_time(t)?;
    let omega = lambda.powf(0.5 * s);
    let (d, _) = duhamel(omega, f, t);
    Ok(g * (omega * t).cos() + h / omega * (omega * t).sin() + d)
}

/// `u_k'(t)`, differentiated in closed form.
pub fn modal_velocity(
    t: f64,
    s: f64,
    lambda: f64,
    g: f64,
    h: f64,
    f: &ModalForcing,
) -> Result<f64> {
    check_time(t)?;
    let omega = lambda.powf(0.5 * s);
    let (_, dd) = duhamel(omega, f, t);
    Ok(-g * omega * (omega * t).sin() + h * (omega * t).cos() + dd)
}

/// Modal coefficients of `u(t)`.
pub fn solution_coefficients(
    basis: &SpectralBasis,
    coeffs: &ModalCoefficients,
    s: f64,
    t: f64,
) -> Result<Vec<f64>> {
    basis
        .modes
        .iter()
        .enumerate()
        .map(|(k, m)| modal_solution(t, s, m.eigenvalue, coeffs.g[k], coeffs.h[k], &coeffs.f[k]))
        .collect()
}

/// Modal coefficients of `∂ₜu(t)`.
pub fn velocity_coefficients(
    basis: &SpectralBasis,
    coeffs: &ModalCoefficients,
    s: f64,
    t: f64,
) -> Result<Vec<f64>> {
    basis
        .modes
        .iter()
        .enumerate()
        .map(|(k, m)| modal_velocity(t, s, m.eigenvalue, coeffs.g[k], coeffs.h[k], &coeffs.f[k]))
        .collect()
}

fn synthesize(basis: &SpectralBasis, modal: &[f64], points: &[[f64; 2]]) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            modal
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, c)| c * basis.eval(k, p))
                .sum()
        })
        .collect()
}

/// `u(x, t)` at `points` (the second coordinate is ignored on the interval).
pub fn exact_solution(
    basis: &SpectralBasis,
    coeffs: &ModalCoefficients,
    s: f64,
    t: f64,
    points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    let modal = solution_coefficients(basis, coeffs, s, t)?;
    Ok(synthesize(basis, &modal, points))
}

/// `∂ₜu(x, t)` at `points`.
pub fn exact_velocity(
    basis: &SpectralBasis,
    coeffs: &ModalCoefficients,
    s: f64,
    t: f64,
    points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    let modal = velocity_coefficients(basis, coeffs, s, t)?;
    Ok(synthesize(basis, &modal, points))
}

/// Extended-variable profile `ψ_k(y) = c_s (√λ y)^s K_s(√λ y)`, with
/// `ψ_k(0) = 1`.
pub fn psi(y: f64, order: &FractionalOrder, lambda: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain(alloc::format!("ψ requires y ≥ 0, got {y}")));
    }
    let s = order.s();
    let z = lambda.sqrt() * y;
    if s == 0.5 {
        return Ok((-z).exp());
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let k = bessel_k_value(BesselOrder::new(s)?, z)?;
    Ok(order.c_s() * z.powf(s) * k)
}

/// `ψ_k'(y) = −c_s √λ (√λ y)^s K_{1−s}(√λ y)` for `y > 0`.
pub fn psi_derivative(y: f64, order: &FractionalOrder, lambda: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(alloc::format!("ψ' requires y > 0, got {y}")));
    }
    let s = order.s();
    let sq = lambda.sqrt();
    let z = sq * y;
    if s == 0.5 {
        return Ok(-sq * (-z).exp());
    }
    let k = bessel_k_value(BesselOrder::new(1.0 - s)?, z)?;
    Ok(-order.c_s() * sq * z.powf(s) * k)
}

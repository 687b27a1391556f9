//! Gamma function and the modified Bessel function of the second kind
//! `K_ν(z)` for real order `ν ∈ (0, 1)` and positive real argument.
//!
//! `K_ν` is evaluated by one of three routes depending on `z`:
//!
//! * `z < 2`: `K_ν = π/2 · (I_{-ν} − I_ν) / sin(νπ)` with ascending series
//!   for `I_{±ν}`;
//! * `2 ≤ z < 30`: Steed's continued fraction (Temme's CF2) for the
//!   scaled function `e^z K_ν(z)`;
//! * `z ≥ 30`: the large-argument asymptotic expansion
//!   `√(π/2z) e^{-z} Σ a_k(ν) / z^k`, truncated at the smallest term.
//!
//! `ν = 1/2` short-circuits to `√(π/2z) e^{-z}`.

use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Below this argument the ascending series is used.
pub const SERIES_LIMIT: f64 = 2.0;
/// At or above this argument the asymptotic expansion is used.
pub const ASYMPTOTIC_LIMIT: f64 = 30.0;
/// Beyond this argument `K_ν(z)` may fall below the smallest normal double.
pub const UNDERFLOW_LIMIT: f64 = 700.0;

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(alloc::format!(
            "gamma requires x > 0, got {x}"
        )));
    }
    Ok(libm::tgamma(x))
}

/// Order of `K_ν`, restricted to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(Self(s))
        } else {
            Err(Error::InvalidArgument(alloc::format!(
                "Bessel order must lie in (0, 1), got {s}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Whether the order lies in the range where `1e-10` relative accuracy
    /// is guaranteed. Outside `[0.05, 0.95]` the reflection formula loses
    /// digits as `sin(νπ) → 0`.
    pub fn is_well_conditioned(self) -> bool {
        (0.05..=0.95).contains(&self.0)
    }
}

/// Result of evaluating `K_ν(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselK {
    pub value: f64,
    /// The true value is below the smallest positive normal double and `value` was flushed to zero.
    pub underflow: bool,
}

/// `K_ν(z)` for `z > 0`.
pub fn bessel_k(order: BesselOrder, z: f64) -> Result<BesselK> {
    if !(z > 0.0) || z.is_nan() {
        return Err(Error::Domain(alloc::format!(
            "K_s(z) requires z > 0, got {z}"
        )));
    }
    let nu = order.0;
    let value = bessel_k_unchecked(nu, z);
    if z > UNDERFLOW_LIMIT && !(value >= f64::MIN_POSITIVE) {
        return Ok(BesselK {
            value: 0.0,
            underflow: true,
        });
    }
    Ok(BesselK {
        value,
        underflow: false,
    })
}

/// Convenience wrapper returning only the value of `K_ν(z)`.
pub fn bessel_k_value(order: BesselOrder, z: f64) -> Result<f64> {
    bessel_k(order, z).map(|k| k.value)
}

fn bessel_k_unchecked(nu: f64, z: f64) -> f64 {
    if nu == 0.5 {
        return (PI / (2.0 * z)).sqrt() * (-z).exp();
    }
    if z < SERIES_LIMIT {
        k_reflection_series(nu, z)
    } else if z < ASYMPTOTIC_LIMIT {
        k_scaled_continued_fraction(nu, z) * (-z).exp()
    } else {
        k_asymptotic(nu, z)
    }
}

/// `I_ν(z)` by its ascending series; `ν > -1`.
pub(crate) fn bessel_i_series(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (0.5 * z).powf(nu) / libm::tgamma(nu + 1.0);
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu));
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            return sum;
        }
    }
}

pub(crate) fn k_reflection_series(nu: f64, z: f64) -> f64 {
    let diff = bessel_i_series(-nu, z) - bessel_i_series(nu, z);
    0.5 * PI * diff / (nu * PI).sin()
}

/// Steed's algorithm for `e^z K_ν(z)`, `|ν| < 1`, `z ≳ 2`.
pub(crate) fn k_scaled_continued_fraction(nu: f64, z: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - nu * nu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 0.5 * f64::EPSILON {
            break;
        }
    }
    (PI / (2.0 * z)).sqrt() / s
}

/// Large-argument expansion, summed until the terms stop decreasing.
pub(crate) fn k_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * z);
        if next.abs() >= term.abs() || k > 200.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    (PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

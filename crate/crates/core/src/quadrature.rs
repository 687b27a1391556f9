//! Gauss rules on `[-1, 1]` with Jacobi weights, composite and adaptive
//! integration, and a triangle rule for the P1 load vectors.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::linalg::{DenseMatrix, SymmetricEigen};
use crate::special::gamma;

/// Nodes and weights of a one-dimensional Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule for `∫_{-1}^{1} (1-x)^a (1+x)^b f(x) dx`, exact for
    /// polynomials of degree `2n - 1`. Built from the eigen-decomposition of
    /// the Jacobi matrix of the monic recurrence.
    pub fn jacobi(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("quadrature order must be at least 1"));
        }
        if !(a > -1.0 && b > -1.0) {
            return Err(invalid("Jacobi exponents must exceed -1"));
        }
        let ab = a + b;
        let mu0 = libm::exp2(ab + 1.0) * gamma(a + 1.0)? * gamma(b + 1.0)? / gamma(ab + 2.0)?;
        let mut jm = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let kf = k as f64;
            let diag = if k == 0 {
                (b - a) / (ab + 2.0)
            } else {
                (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            jm[(k, k)] = diag;
            if k + 1 < n {
                let m = kf + 1.0;
                let beta = if k == 0 {
                    4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
                } else {
                    let t = 2.0 * m + ab;
                    4.0 * m * (m + a) * (m + b) * (m + ab) / (t * t * (t + 1.0) * (t - 1.0))
                };
                let off = beta.sqrt();
                jm[(k, k + 1)] = off;
                jm[(k + 1, k)] = off;
            }
        }
        let eig = SymmetricEigen::new(&jm)?;
        let nodes = eig.values.clone();
        let weights = (0..n)
            .map(|j| {
                let v = eig.vectors[(0, j)];
                mu0 * v * v
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    pub fn legendre(n: usize) -> Result<Self> {
        Self::jacobi(n, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[lo, hi]` with the affinely mapped rule
    /// (unweighted rules only).
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Composite Gauss–Legendre rule on `panels` equal panels of `[lo, hi]`,
/// flattened to `(point, weight)` pairs.
pub fn composite_points(lo: f64, hi: f64, panels: usize, rule: &GaussRule) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / panels as f64;
    let mut pts = Vec::with_capacity(panels * rule.len());
    let mut wts = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let mid = a + 0.5 * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            pts.push(mid + 0.5 * h * x);
            wts.push(0.5 * h * w);
        }
    }
    (pts, wts)
}

// 7-point Gauss / 15-point Kronrod pair.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15(lo: f64, hi: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod integration to relative tolerance `rel_tol`
/// (with an absolute floor `abs_tol`). Bisects the worst interval until
/// the summed error estimate meets the tolerance or `max_intervals` is hit.
pub fn adaptive(
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let (v, e) = kronrod15(lo, hi, &mut f);
    let mut parts: Vec<(f64, f64, f64, f64)> = alloc::vec![(lo, hi, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || parts.len() >= max_intervals {
            return total;
        }
        let (idx, _) =
            parts.iter().enumerate().fold(
                (0, -1.0),
                |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc },
            );
        let (a, b, _, _) = parts.swap_remove(idx);
        let m = 0.5 * (a + b);
        let (v1, e1) = kronrod15(a, m, &mut f);
        let (v2, e2) = kronrod15(m, b, &mut f);
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
}

/// Degree-5 seven-point rule on the reference triangle with vertices
/// (0,0), (1,0), (0,1); weights sum to the area 1/2. Entries are
/// `(ξ, η, weight)`.
pub fn triangle_rule() -> [(f64, f64, f64); 7] {
    let sq = 15.0f64.sqrt();
    let a1 = (6.0 - sq) / 21.0;
    let b1 = (9.0 + 2.0 * sq) / 21.0;
    let a2 = (6.0 + sq) / 21.0;
    let b2 = (9.0 - 2.0 * sq) / 21.0;
    let w0 = 9.0 / 80.0;
    let w1 = (155.0 - sq) / 2400.0;
    let w2 = (155.0 + sq) / 2400.0;
    [
        (1.0 / 3.0, 1.0 / 3.0, w0),
        (a1, a1, w1),
        (b1, a1, w1),
        (a1, b1, w1),
        (a2, a2, w2),
        (b2, a2, w2),
        (a2, b2, w2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = GaussRule::legendre(5).unwrap();
        for p in 0..10 {
            let got: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(p))
                .sum();
            let want = if p % 2 == 1 {
                0.0
            } else {
                2.0 / (p as f64 + 1.0)
            };
            assert!((got - want).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn jacobi_weight_moments() {
        // ∫_{-1}^{1} (1+x)^b x^0 dx = 2^{b+1}/(b+1)
        for &b in &[-0.5, 0.5, -0.9, 0.9] {
            let r = GaussRule::jacobi(6, 0.0, b).unwrap();
            let s: f64 = r.weights.iter().sum();
            let want = 2f64.powf(b + 1.0) / (b + 1.0);
            assert!((s - want).abs() < 1e-13 * want);
        }
    }

    #[test]
    fn rejects_zero_order() {
        assert!(GaussRule::legendre(0).is_err());
    }

    #[test]
    fn triangle_rule_degree_five() {
        // ∫_T ξ^i η^j = i! j! / (i+j+2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        for i in 0..=5u32 {
            for j in 0..=(5 - i) {
                let got: f64 = triangle_rule()
                    .iter()
                    .map(|(x, y, w)| w * x.powi(i as i32) * y.powi(j as i32))
                    .sum();
                let want = fact(i) * fact(j) / fact(i + j + 2);
                assert!((got - want).abs() < 1e-15, "{i} {j}");
            }
        }
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let v = adaptive(0.0, 10.0, 1e-12, 0.0, 2000, |x| (5.0 * x).sin() * x);
        let want = (5.0f64 * 10.0).sin() / 25.0 - 10.0 * (50.0f64).cos() / 5.0;
        assert!((v - want).abs() < 1e-11 * want.abs());
    }
}

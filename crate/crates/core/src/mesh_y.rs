//! hp finite elements in the extended variable `y ∈ (0, Y)`: geometric
//! meshes graded toward `y = 0`, linear degree vectors, and the
//! `y^α`-weighted mass and stiffness matrices.
//!
//! Shape functions are hat functions at the breakpoints `y_0 = 0, …,
//! y_{M−1}` (the breakpoint `y_M = Y` carries the Dirichlet condition) plus
//! integrated Legendre bubbles of degree `2..=r_m` on each element. Global
//! numbering: hats first (dof 0 is the hat at `y = 0`, the only function not
//! vanishing there), then bubbles element by element.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_10;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::linalg::DenseMatrix;
use crate::quadrature::GaussRule;

/// Breakpoints `0 = y_0 < y_1 < … < y_M = Y` with `y_m = Y σ^{M−m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMesh {
    height: f64,
    sigma: f64,
    breakpoints: Vec<f64>,
}

impl GeometricMesh {
    pub fn new(height: f64, elements: usize, sigma: f64) -> Result<Self> {
        if !(height > 0.0 && height.is_finite()) {
            return Err(invalid(alloc::format!(
                "truncation height must be positive, got {height}"
            )));
        }
        if elements == 0 {
            return Err(invalid("mesh needs at least one element"));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(invalid(alloc::format!(
                "grading factor must lie in (0, 1), got {sigma}"
            )));
        }
        let mut breakpoints = Vec::with_capacity(elements + 1);
        breakpoints.push(0.0);
        for m in 1..=elements {
            breakpoints.push(height * sigma.powi((elements - m) as i32));
        }
        Ok(Self {
            height,
            sigma,
            breakpoints,
        })
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Endpoints of element `m` (zero based).
    pub fn element(&self, m: usize) -> (f64, f64) {
        (self.breakpoints[m], self.breakpoints[m + 1])
    }
}

/// Polynomial degrees `r_m = max(1, ⌈𝔰 m⌉)`, `m = 1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    slope: f64,
    degrees: Vec<usize>,
}

impl DegreeVector {
    pub fn new(elements: usize, slope: f64) -> Result<Self> {
        if elements == 0 {
            return Err(invalid("degree vector needs at least one element"));
        }
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(invalid(alloc::format!(
                "degree slope must be positive, got {slope}"
            )));
        }
        let degrees = (1..=elements)
            .map(|m| ((slope * m as f64).ceil() as usize).max(1))
            .collect();
        Ok(Self { slope, degrees })
    }

    /// Uniform degree on every element.
    pub fn uniform(elements: usize, degree: usize) -> Result<Self> {
        if elements == 0 || degree == 0 {
            return Err(invalid(
                "uniform degree vector needs positive size and degree",
            ));
        }
        Ok(Self {
            slope: 0.0,
            degrees: vec![degree; elements],
        })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(1)
    }

    /// Dimension `𝓜 = Σ r_m` of the space vanishing at `y = Y`.
    pub fn total_dofs(&self) -> usize {
        self.degrees.iter().sum()
    }
}

/// Legendre polynomials `P_0..=P_n` at `x`.
fn legendre_values(n: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n == 0 {
        return;
    }
    out.push(x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// Values and reference derivatives of the local shape functions of degree
/// `r` at `ξ ∈ [−1, 1]`: left hat, right hat, bubbles `N_2..=N_r`.
fn shape_functions(r: usize, xi: f64, val: &mut Vec<f64>, der: &mut Vec<f64>, leg: &mut Vec<f64>) {
    val.clear();
    der.clear();
    val.push(0.5 * (1.0 - xi));
    der.push(-0.5);
    val.push(0.5 * (1.0 + xi));
    der.push(0.5);
    if r < 2 {
        return;
    }
    legendre_values(r, xi, leg);
    for p in 2..=r {
        let pf = p as f64;
        let scale = (2.0 * (2.0 * pf - 1.0)).sqrt();
        val.push((leg[p] - leg[p - 2]) / scale);
        der.push(((2.0 * pf - 1.0) / 2.0).sqrt() * leg[p - 1]);
    }
}

/// Decimal digits targeted when resolving the smooth weight `y^α` on
/// elements away from the origin.
const WEIGHT_DIGITS: f64 = 16.0;

/// Extra Gauss–Legendre points needed to integrate `y^α` on `[a, b]`,
/// `a > 0`, to about 1e-16. The weight is analytic inside the Bernstein
/// ellipse through the singularity `y = 0`; the quadrature error decays like
/// `ρ^{−2n}`.
pub fn weight_resolution_points(a: f64, b: f64) -> usize {
    let xi0 = (b + a) / (b - a);
    let rho = xi0 + (xi0 * xi0 - 1.0).sqrt();
    (WEIGHT_DIGITS * LN_10 / (2.0 * rho.ln())).ceil() as usize + 2
}

/// Quadrature rule on one element with the weight `y^α` folded into the
/// weights: `∫_{I_m} y^α f(y) dy ≈ Σ w_i f(y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRule {
    /// Reference coordinates in `[−1, 1]`.
    pub xi: Vec<f64>,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Rule used on element `m`: Gauss–Jacobi with weight `(1+ξ)^α` on the
/// element touching the origin, Gauss–Legendre with
/// [`weight_resolution_points`] extra points elsewhere. Either is exact (up
/// to the weight resolution) for polynomials of degree `2·(max_degree+1)+1`.
pub fn element_rule(
    mesh: &GeometricMesh,
    m: usize,
    alpha: f64,
    max_degree: usize,
) -> Result<ElementRule> {
    let (a, b) = mesh.element(m);
    let half = 0.5 * (b - a);
    let base = max_degree + 2;
    if m == 0 {
        let rule = GaussRule::jacobi(base, 0.0, alpha)?;
        let scale = half.powf(alpha + 1.0);
        let points = rule.nodes.iter().map(|x| half * (1.0 + x)).collect();
        let weights = rule.weights.iter().map(|w| w * scale).collect();
        Ok(ElementRule {
            xi: rule.nodes,
            points,
            weights,
        })
    } else {
        let n = base + weight_resolution_points(a, b);
        let rule = GaussRule::legendre(n)?;
        let mid = 0.5 * (a + b);
        let points: Vec<f64> = rule.nodes.iter().map(|x| mid + half * x).collect();
        let weights = rule
            .weights
            .iter()
            .zip(&points)
            .map(|(w, y)| w * half * y.powf(alpha))
            .collect();
        Ok(ElementRule {
            xi: rule.nodes,
            points,
            weights,
        })
    }
}

/// hp space on `[0, Y]` with its weighted matrices
/// `(B_Y)_{ij} = ∫ y^α φ_i φ_j`, `(A_Y)_{ij} = ∫ y^α φ_i' φ_j'`.
#[derive(Debug, Clone, PartialEq)]
pub struct HpSpaceY {
    mesh: GeometricMesh,
    degrees: DegreeVector,
    alpha: f64,
    /// Global dofs each local shape function contributes to, per element.
    dofs: Vec<Vec<Vec<usize>>>,
    mass: DenseMatrix,
    stiffness: DenseMatrix,
}

impl HpSpaceY {
    pub fn assemble(mesh: GeometricMesh, degrees: DegreeVector, alpha: f64) -> Result<Self> {
        if !(alpha > -1.0 && alpha < 1.0) {
            return Err(invalid(alloc::format!(
                "weight exponent must lie in (-1, 1), got {alpha}"
            )));
        }
        let elements = mesh.elements();
        if degrees.degrees().len() != elements {
            return Err(invalid(alloc::format!(
                "degree vector has {} entries for {} elements",
                degrees.degrees().len(),
                elements
            )));
        }
        let total = degrees.total_dofs();
        let mut dofs = Vec::with_capacity(elements);
        let mut next_bubble = elements;
        for (m, &r) in degrees.degrees().iter().enumerate() {
            // The trace function is the sum of all hats: 1 up to the last
            // element, so its stiffness does not grow with the grading.
            let node = |i: usize| -> Vec<usize> {
                match i {
                    0 => vec![0],
                    i if i < elements => vec![i, 0],
                    _ => Vec::new(),
                }
            };
            let mut local = Vec::with_capacity(r + 1);
            local.push(node(m));
            local.push(node(m + 1));
            for _ in 2..=r {
                local.push(vec![next_bubble]);
                next_bubble += 1;
            }
            dofs.push(local);
        }
        debug_assert_eq!(next_bubble, total);

        let mut mass = DenseMatrix::zeros(total, total);
        let mut stiffness = DenseMatrix::zeros(total, total);
        let rmax = degrees.max_degree();
        let (mut val, mut der, mut leg) = (Vec::new(), Vec::new(), Vec::new());
        for (m, local) in dofs.iter().enumerate() {
            let r = degrees.degrees()[m];
            let (a, b) = mesh.element(m);
            let jac = 2.0 / (b - a);
            let rule = element_rule(&mesh, m, alpha, rmax)?;
            for (xi, w) in rule.xi.iter().zip(&rule.weights) {
                shape_functions(r, *xi, &mut val, &mut der, &mut leg);
                for (i, gi) in local.iter().enumerate() {
                    for (j, gj) in local.iter().enumerate() {
                        let mv = w * val[i] * val[j];
                        let sv = w * jac * jac * der[i] * der[j];
                        for &p in gi {
                            for &q in gj {
                                mass[(p, q)] += mv;
                                stiffness[(p, q)] += sv;
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            mesh,
            degrees,
            alpha,
            dofs,
            mass,
            stiffness,
        })
    }

    pub fn mesh(&self) -> &GeometricMesh {
        &self.mesh
    }

    pub fn degrees(&self) -> &DegreeVector {
        &self.degrees
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `𝓜`
    pub fn dim(&self) -> usize {
        self.mass.rows()
    }

    /// Index of the basis function with value 1 at `y = 0`.
    pub fn trace_index(&self) -> usize {
        0
    }

    /// `B_Y`
    pub fn mass(&self) -> &DenseMatrix {
        &self.mass
    }

    /// `A_Y`
    pub fn stiffness(&self) -> &DenseMatrix {
        &self.stiffness
    }

    /// Values of all `𝓜` basis functions at `y`; zero outside `[0, Y]`.
    pub fn basis_values(&self, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let bp = self.mesh.breakpoints();
        if !(y >= 0.0 && y <= self.mesh.height()) {
            return out;
        }
        let m = match bp[1..].iter().position(|&b| y <= b) {
            Some(m) => m,
            None => return out,
        };
        let (a, b) = self.mesh.element(m);
        let xi = (2.0 * y - a - b) / (b - a);
        let (mut val, mut der, mut leg) = (Vec::new(), Vec::new(), Vec::new());
        shape_functions(self.degrees.degrees()[m], xi, &mut val, &mut der, &mut leg);
        for (g, v) in self.dofs[m].iter().zip(&val) {
            for &p in g {
                out[p] += *v;
            }
        }
        out
    }

    /// `∫_{I_m} y^α y^p dy` evaluated with the assembly rule of element `m`.
    pub fn weighted_moment(&self, m: usize, p: u32) -> Result<f64> {
        let rule = element_rule(&self.mesh, m, self.alpha, self.degrees.max_degree())?;
        Ok(rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(y, w)| w * y.powi(p as i32))
            .sum())
    }
}

/// Defaults for the extended-variable discretization given the meshwidth in
/// Ω and the smallest eigenvalue `λ₁`: `Y = max(1, 3|log h|/√λ₁)`,
/// `M = ⌈Y⌉·⌈1/(1−σ)⌉`.
pub fn default_height(h: f64, lambda1: f64) -> f64 {
    (3.0 / lambda1.sqrt() * h.ln().abs()).max(1.0)
}

pub fn default_elements(height: f64, sigma: f64) -> usize {
    (height.ceil() as usize) * ((1.0 / (1.0 - sigma)).ceil() as usize)
}

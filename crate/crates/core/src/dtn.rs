//! Discrete Dirichlet-to-Neumann map `L_h^s`.
//!
//! For a trace `U` the interior cylinder coefficients `Ṽ` solve
//! `(B̃_Y ⊗ A_Ω + Ã_Y ⊗ B_Ω) Ṽ = −(b̃_Y ⊗ A_Ω + ã_Y ⊗ B_Ω) U`, and
//! `L_h^s U = d_s⁻¹ [(b A_Ω + a B_Ω) U + (b̃_Yᵀ ⊗ A_Ω + ã_Yᵀ ⊗ B_Ω) Ṽ]`.
//! The generalized eigenvectors `X` of the pencil `(B̃_Y, Ã_Y)` decouple the
//! interior solve into `𝓜 − 1` independent systems `(μ_j A_Ω + B_Ω)`, each
//! factorized once at build time.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, BandedCholesky, DenseMatrix, GeneralizedEigen};
use crate::mesh_y::HpSpaceY;
use crate::omega::{OmegaMatrices, OmegaMesh};
use crate::spectral::{Domain, FractionalOrder};

/// Relative tolerance on the Rayleigh quotient in [`DtnOperator::estimate_spectral_bound`].
pub const SPECTRAL_BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DtnOperator {
    order: FractionalOrder,
    hp: HpSpaceY,
    omega: OmegaMatrices,
    b: f64,
    a: f64,
    b_tilde: Vec<f64>,
    a_tilde: Vec<f64>,
    x: DenseMatrix,
    mu: Vec<f64>,
    /// `Xᵀ b̃_Y`
    beta: Vec<f64>,
    /// `Xᵀ ã_Y`
    gamma: Vec<f64>,
    factors: Vec<BandedCholesky>,
}

impl DtnOperator {
    pub fn build(order: FractionalOrder, hp: HpSpaceY, omega: OmegaMatrices) -> Result<Self> {
        if (hp.alpha() - order.alpha()).abs() > 1e-14 {
            return Err(Error::InvalidArgument(alloc::format!(
                "extended space assembled for alpha = {}, operator needs {}",
                hp.alpha(),
                order.alpha()
            )));
        }
        let by = hp.mass();
        let ay = hp.stiffness();
        let m = hp.dim();
        let b = by[(0, 0)];
        let a = ay[(0, 0)];
        let b_tilde: Vec<f64> = (1..m).map(|i| by[(i, 0)]).collect();
        let a_tilde: Vec<f64> = (1..m).map(|i| ay[(i, 0)]).collect();
        let (x, mu) = if m > 1 {
            let eig = GeneralizedEigen::new(
                &by.trailing_block(),
                &ay.trailing_block(),
                "B_Y reduced",
                "A_Y reduced",
            )?;
            (eig.vectors, eig.values)
        } else {
            (DenseMatrix::zeros(0, 0), Vec::new())
        };
        let beta = x.matvec_transpose(&b_tilde);
        let gamma = x.matvec_transpose(&a_tilde);
        let factors = mu
            .iter()
            .map(|&mj| {
                BandedCholesky::new(
                    &omega.stiffness().combine(mj, omega.mass(), 1.0),
                    "mu_j A_Omega + B_Omega",
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            order,
            hp,
            omega,
            b,
            a,
            b_tilde,
            a_tilde,
            x,
            mu,
            beta,
            gamma,
            factors,
        })
    }

    pub fn order(&self) -> &FractionalOrder {
        &self.order
    }

    pub fn hp(&self) -> &HpSpaceY {
        &self.hp
    }

    pub fn omega(&self) -> &OmegaMatrices {
        &self.omega
    }

    /// Number of trace dofs `N`.
    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// Number of interior blocks `𝓜 − 1`.
    pub fn interior_blocks(&self) -> usize {
        self.mu.len()
    }

    /// Generalized eigenvalues `μ_j` of `(B̃_Y, Ã_Y)`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    /// Generalized eigenvectors `X` (columns), `XᵀÃ_Y X = I`.
    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.x
    }

    /// `(b, a) = ((B_Y)₁₁, (A_Y)₁₁)`
    pub fn trace_entries(&self) -> (f64, f64) {
        (self.b, self.a)
    }

    /// `(b̃_Y, ã_Y)`
    pub fn couplings(&self) -> (&[f64], &[f64]) {
        (&self.b_tilde, &self.a_tilde)
    }

    /// Transformed interior solution `V̂_j` for every mode.
    fn modal_interior(&self, au: &[f64], bu: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        self.factors
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let mut rhs = vec![0.0; n];
                for i in 0..n {
                    rhs[i] = -(self.beta[j] * au[i] + self.gamma[j] * bu[i]);
                }
                f.solve_in_place(&mut rhs);
                rhs
            })
            .collect()
    }

    /// Interior block `Ṽ`, stored as `𝓜 − 1` consecutive vectors of length `N`.
    pub fn solve_interior(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), u.len())?;
        let n = self.dim();
        let au = self.omega.stiffness().matvec(u);
        let bu = self.omega.mass().matvec(u);
        let vhat = self.modal_interior(&au, &bu);
        let m = self.interior_blocks();
        let mut v = vec![0.0; m * n];
        for i in 0..m {
            let block = &mut v[i * n..(i + 1) * n];
            for (j, vj) in vhat.iter().enumerate() {
                axpy(self.x[(i, j)], vj, block);
            }
        }
        Ok(v)
    }

    /// `L_h^s U`, never forming `L_h^s`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), u.len())?;
        let n = self.dim();
        let au = self.omega.stiffness().matvec(u);
        let bu = self.omega.mass().matvec(u);
        let vhat = self.modal_interior(&au, &bu);
        // (b̃ᵀ ⊗ I) Ṽ = Σ_j β_j V̂_j and likewise with ã, γ.
        let mut sb = vec![0.0; n];
        let mut sa = vec![0.0; n];
        for (j, vj) in vhat.iter().enumerate() {
            axpy(self.beta[j], vj, &mut sb);
            axpy(self.gamma[j], vj, &mut sa);
        }
        let asb = self.omega.stiffness().matvec(&sb);
        let bsa = self.omega.mass().matvec(&sa);
        let inv = 1.0 / self.order.d_s();
        Ok((0..n)
            .map(|i| inv * (self.b * au[i] + self.a * bu[i] + asb[i] + bsa[i]))
            .collect())
    }

    /// `(η, L_h^s U)` with `B_Ω η = L_h^s U`.
    pub fn apply_with_flux(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let lu = self.apply(u)?;
        let eta = self.omega.solve_mass(&lu)?;
        Ok((eta, lu))
    }

    /// Discrete harmonic extension: trace block `e` followed by `Ṽ`.
    pub fn harmonic_extension(&self, e: &[f64]) -> Result<Vec<f64>> {
        let v = self.solve_interior(e)?;
        let mut full = Vec::with_capacity(e.len() + v.len());
        full.extend_from_slice(e);
        full.extend_from_slice(&v);
        Ok(full)
    }

    /// `a_Y(V, W) = d_s⁻¹ Σ_{ij} [(B_Y)_{ij} V_iᵀA_Ω W_j + (A_Y)_{ij} V_iᵀB_Ω W_j]`
    /// for block vectors with `𝓜` blocks of length `N`.
    pub fn cylinder_form(&self, v: &[f64], w: &[f64]) -> Result<f64> {
        let n = self.dim();
        let m = self.hp.dim();
        check_len(n * m, v.len())?;
        check_len(n * m, w.len())?;
        let aw: Vec<Vec<f64>> = (0..m)
            .map(|j| self.omega.stiffness().matvec(&w[j * n..(j + 1) * n]))
            .collect();
        let bw: Vec<Vec<f64>> = (0..m)
            .map(|j| self.omega.mass().matvec(&w[j * n..(j + 1) * n]))
            .collect();
        let by = self.hp.mass();
        let ay = self.hp.stiffness();
        let mut total = 0.0;
        for i in 0..m {
            let vi = &v[i * n..(i + 1) * n];
            for j in 0..m {
                let (bij, aij) = (by[(i, j)], ay[(i, j)]);
                if bij != 0.0 {
                    total += bij * dot(vi, &aw[j]);
                }
                if aij != 0.0 {
                    total += aij * dot(vi, &bw[j]);
                }
            }
        }
        Ok(total / self.order.d_s())
    }

    /// `UᵀL_h^s U / UᵀB_Ω U`
    pub fn rayleigh_quotient(&self, u: &[f64]) -> Result<f64> {
        let lu = self.apply(u)?;
        let bu = self.omega.mass().matvec(u);
        Ok(dot(u, &lu) / dot(u, &bu))
    }

    /// Largest eigenvalue of `L_h^s x = λ B_Ω x` by power iteration on
    /// `B_Ω⁻¹ L_h^s`, started from the most oscillatory grid sine of `mesh`.
    pub fn estimate_spectral_bound(&self, mesh: &OmegaMesh, max_iterations: usize) -> Result<f64> {
        check_len(self.dim(), mesh.dofs())?;
        let n = mesh.divisions();
        let top = (n - 1) as f64;
        let (lo, hi) = mesh.domain().bounds();
        let len = hi - lo;
        let mut x: Vec<f64> = mesh
            .dof_points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s = match mesh.domain() {
                    Domain::UnitInterval => (top * PI * (p[0] - lo) / len).sin(),
                    Domain::Square => {
                        (top * PI * (p[0] - lo) / len).sin() * (top * PI * (p[1] - lo) / len).sin()
                    }
                };
                // Small deterministic perturbation keeps every eigenvector present.
                s + 1e-3 * ((i as f64 * 0.618_033_988_75).fract() - 0.5)
            })
            .collect();
        let mut last = 0.0;
        for _ in 0..max_iterations {
            let bx = self.omega.mass().matvec(&x);
            let norm = dot(&x, &bx).sqrt();
            for v in x.iter_mut() {
                *v /= norm;
            }
            let lx = self.apply(&x)?;
            let lambda = dot(&x, &lx);
            if (lambda - last).abs() <= SPECTRAL_BOUND_TOL * lambda.abs() {
                return Ok(lambda);
            }
            last = lambda;
            x = self.omega.solve_mass(&lx)?;
        }
        Err(Error::NonConvergence {
            iterations: max_iterations,
            last,
        })
    }
}

//! P1 finite elements on Ω: a uniform mesh of the unit interval or a
//! structured triangulation of `(−1, 1)²`, with mass and stiffness matrices
//! restricted to interior vertices and the L²(Ω) projection.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{check_len, invalid, Result};
use crate::linalg::{BandedCholesky, BandedSymmetric};
use crate::quadrature::{triangle_rule, GaussRule};
use crate::spectral::Domain;

/// Conforming simplicial mesh of Ω.
///
/// On the square each of the `n × n` cells is cut along the diagonal from
/// its lower-left to its upper-right corner. Vertices are numbered
/// lexicographically (x fastest); so are interior dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMesh {
    domain: Domain,
    divisions: usize,
    h: f64,
    vertices: Vec<[f64; 2]>,
    /// Vertex indices of each element; intervals use the first two slots.
    elements: Vec<[usize; 3]>,
    dof_of_vertex: Vec<Option<usize>>,
    vertex_of_dof: Vec<usize>,
}

impl OmegaMesh {
    pub fn new(domain: Domain, divisions: usize) -> Result<Self> {
        if divisions < 2 {
            return Err(invalid(alloc::format!(
                "need at least 2 divisions, got {divisions}"
            )));
        }
        let n = divisions;
        let (lo, hi) = domain.bounds();
        let step = (hi - lo) / n as f64;
        let mut vertices = Vec::new();
        let mut elements = Vec::new();
        let mut dof_of_vertex = Vec::new();
        let mut vertex_of_dof = Vec::new();
        let h;
        match domain {
            Domain::UnitInterval => {
                h = step;
                for i in 0..=n {
                    vertices.push([lo + i as f64 * step, 0.0]);
                    if i > 0 && i < n {
                        dof_of_vertex.push(Some(vertex_of_dof.len()));
                        vertex_of_dof.push(i);
                    } else {
                        dof_of_vertex.push(None);
                    }
                }
                for i in 0..n {
                    elements.push([i, i + 1, usize::MAX]);
                }
            }
            Domain::Square => {
                h = SQRT_2 * step;
                for j in 0..=n {
                    for i in 0..=n {
                        vertices.push([lo + i as f64 * step, lo + j as f64 * step]);
                        if i > 0 && i < n && j > 0 && j < n {
                            dof_of_vertex.push(Some(vertex_of_dof.len()));
                            vertex_of_dof.push(j * (n + 1) + i);
                        } else {
                            dof_of_vertex.push(None);
                        }
                    }
                }
                for j in 0..n {
                    for i in 0..n {
                        let v00 = j * (n + 1) + i;
                        let v10 = v00 + 1;
                        let v01 = v00 + n + 1;
                        let v11 = v01 + 1;
                        elements.push([v00, v10, v11]);
                        elements.push([v00, v11, v01]);
                    }
                }
            }
        }
        Ok(Self {
            domain,
            divisions,
            h,
            vertices,
            elements,
            dof_of_vertex,
            vertex_of_dof,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// Largest element diameter `h_T`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of interior dofs `N`.
    pub fn dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    /// Coordinates of the interior dofs in dof order.
    pub fn dof_points(&self) -> Vec<[f64; 2]> {
        self.vertex_of_dof
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    /// Nodal interpolant of `f` (interior values only).
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.vertex_of_dof
            .iter()
            .map(|&v| f(&self.vertices[v][..self.domain.dim()]))
            .collect()
    }

    fn bandwidth(&self) -> usize {
        match self.domain {
            Domain::UnitInterval => 1,
            Domain::Square => self.divisions,
        }
    }

    fn step(&self) -> f64 {
        let (lo, hi) = self.domain.bounds();
        (hi - lo) / self.divisions as f64
    }

    /// Element containing `x` and the barycentric weights of its vertices.
    fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 3])> {
        let (lo, hi) = self.domain.bounds();
        let n = self.divisions;
        let step = self.step();
        let cell = |c: f64| -> Option<(usize, f64)> {
            if !(c >= lo && c <= hi) {
                return None;
            }
            let t = (c - lo) / step;
            let i = (t.floor() as usize).min(n - 1);
            Some((i, t - i as f64))
        };
        match self.domain {
            Domain::UnitInterval => {
                let (i, t) = cell(x[0])?;
                Some((i, [1.0 - t, t, 0.0]))
            }
            Domain::Square => {
                let (i, xi) = cell(x[0])?;
                let (j, eta) = cell(x[1])?;
                let base = 2 * (j * n + i);
                if xi >= eta {
                    // (0,0), (1,0), (1,1)
                    Some((base, [1.0 - xi, xi - eta, eta]))
                } else {
                    // (0,0), (1,1), (0,1)
                    Some((base + 1, [1.0 - eta, xi, eta - xi]))
                }
            }
        }
    }

    /// Value at `x` of the P1 function with interior coefficients `coeffs`
    /// (zero on the boundary and outside Ω).
    pub fn evaluate(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        let Some((e, bary)) = self.locate(x) else {
            return 0.0;
        };
        let verts = self.elements[e];
        let nv = self.domain.dim() + 1;
        (0..nv)
            .filter_map(|a| self.dof_of_vertex[verts[a]].map(|d| bary[a] * coeffs[d]))
            .sum()
    }

    /// `∫_Ω F(x, w_h(x)) dx` for a P1 function `w_h`, by the load-vector
    /// quadrature on each element.
    pub fn integrate_with(&self, coeffs: &[f64], f: impl Fn(&[f64], f64) -> f64) -> Result<f64> {
        check_len(self.dofs(), coeffs.len())?;
        let mut total = 0.0;
        self.for_each_quadrature_point(|e, x, bary, w| {
            let verts = self.elements[e];
            let value: f64 = bary
                .iter()
                .zip(verts.iter())
                .filter_map(|(b, v)| {
                    self.dof_of_vertex
                        .get(*v)
                        .copied()
                        .flatten()
                        .map(|d| b * coeffs[d])
                })
                .sum();
            total += w * f(x, value);
        })?;
        Ok(total)
    }

    /// `‖w_h − u‖_{L²(Ω)}`.
    pub fn l2_error(&self, coeffs: &[f64], exact: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let sq = self.integrate_with(coeffs, |x, v| {
            let d = v - exact(x);
            d * d
        })?;
        Ok(sq.sqrt())
    }

    /// Visits every quadrature point as `(element, x, barycentric, weight)`.
    fn for_each_quadrature_point(
        &self,
        mut visit: impl FnMut(usize, &[f64], &[f64], f64),
    ) -> Result<()> {
        match self.domain {
            Domain::UnitInterval => {
                let rule = GaussRule::legendre(5)?;
                let h = self.step();
                for (e, verts) in self.elements.iter().enumerate() {
                    let a = self.vertices[verts[0]][0];
                    for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
                        let t = 0.5 * (1.0 + xi);
                        let x = [a + h * t];
                        visit(e, &x, &[1.0 - t, t], 0.5 * h * w);
                    }
                }
            }
            Domain::Square => {
                let tri = triangle_rule();
                for (e, verts) in self.elements.iter().enumerate() {
                    let p0 = self.vertices[verts[0]];
                    let p1 = self.vertices[verts[1]];
                    let p2 = self.vertices[verts[2]];
                    let det = ((p1[0] - p0[0]) * (p2[1] - p0[1])
                        - (p2[0] - p0[0]) * (p1[1] - p0[1]))
                        .abs();
                    for (xi, eta, w) in tri.iter() {
                        let b = [1.0 - xi - eta, *xi, *eta];
                        let x = [
                            b[0] * p0[0] + b[1] * p1[0] + b[2] * p2[0],
                            b[0] * p0[1] + b[1] * p1[1] + b[2] * p2[1],
                        ];
                        visit(e, &x, &b, w * det);
                    }
                }
            }
        }
        Ok(())
    }

    /// `(f, φ_i)_{L²(Ω)}` for every interior hat function.
    pub fn load_vector(&self, f: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let mut load = vec![0.0; self.dofs()];
        self.for_each_quadrature_point(|e, x, bary, w| {
            let fx = f(x);
            if fx == 0.0 {
                return;
            }
            for (b, v) in bary.iter().zip(self.elements[e].iter()) {
                if let Some(d) = self.dof_of_vertex[*v] {
                    load[d] += w * fx * b;
                }
            }
        })?;
        Ok(load)
    }
}

/// Mass `B_Ω` and stiffness `A_Ω` on the interior dofs, plus the Cholesky
/// factor of `B_Ω`.
#[derive(Debug, Clone)]
pub struct OmegaMatrices {
    mass: BandedSymmetric,
    stiffness: BandedSymmetric,
    mass_factor: BandedCholesky,
}

impl OmegaMatrices {
    pub fn assemble(mesh: &OmegaMesh) -> Result<Self> {
        let n = mesh.dofs();
        let bw = mesh.bandwidth();
        let mut mass = BandedSymmetric::zeros(n, bw);
        let mut stiffness = BandedSymmetric::zeros(n, bw);
        for verts in mesh.elements() {
            let (me, ke, nv) = element_matrices(mesh, verts);
            for a in 0..nv {
                let Some(da) = mesh.dof_of_vertex[verts[a]] else {
                    continue;
                };
                for b in 0..nv {
                    let Some(db) = mesh.dof_of_vertex[verts[b]] else {
                        continue;
                    };
                    if da <= db {
                        mass.add(da, db, me[a][b]);
                        stiffness.add(da, db, ke[a][b]);
                    }
                }
            }
        }
        let mass_factor = BandedCholesky::new(&mass, "B_Omega")?;
        Ok(Self {
            mass,
            stiffness,
            mass_factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// `B_Ω`
    pub fn mass(&self) -> &BandedSymmetric {
        &self.mass
    }

    /// `A_Ω`
    pub fn stiffness(&self) -> &BandedSymmetric {
        &self.stiffness
    }

    /// `B_Ω⁻¹ r`
    pub fn solve_mass(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.mass_factor.solve(rhs)
    }

    pub fn mass_factor(&self) -> &BandedCholesky {
        &self.mass_factor
    }

    /// `‖w_h‖_{L²}` through `B_Ω`.
    pub fn l2_norm(&self, coeffs: &[f64]) -> f64 {
        crate::linalg::dot(coeffs, &self.mass.matvec(coeffs))
            .max(0.0)
            .sqrt()
    }
}

/// Closed-form P1 element mass and stiffness matrices.
fn element_matrices(mesh: &OmegaMesh, verts: &[usize; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3], usize) {
    let mut me = [[0.0; 3]; 3];
    let mut ke = [[0.0; 3]; 3];
    match mesh.domain {
        Domain::UnitInterval => {
            let h = mesh.vertices[verts[1]][0] - mesh.vertices[verts[0]][0];
            me[0][0] = h / 3.0;
            me[1][1] = h / 3.0;
            me[0][1] = h / 6.0;
            me[1][0] = h / 6.0;
            ke[0][0] = 1.0 / h;
            ke[1][1] = 1.0 / h;
            ke[0][1] = -1.0 / h;
            ke[1][0] = -1.0 / h;
            (me, ke, 2)
        }
        Domain::Square => {
            let p = [
                mesh.vertices[verts[0]],
                mesh.vertices[verts[1]],
                mesh.vertices[verts[2]],
            ];
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = 0.5 * det.abs();
            // ∇λ_a = (y_b − y_c, x_c − x_b) / det for (a, b, c) cyclic.
            let mut grad = [[0.0; 2]; 3];
            for a in 0..3 {
                let b = (a + 1) % 3;
                let c = (a + 2) % 3;
                grad[a] = [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det];
            }
            for a in 0..3 {
                for b in 0..3 {
                    me[a][b] = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    ke[a][b] = area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                }
            }
            (me, ke, 3)
        }
    }
}

/// L²(Ω) projection onto the interior P1 space: solves `B_Ω c = (f, φ_i)`.
pub fn l2_project(
    mesh: &OmegaMesh,
    matrices: &OmegaMatrices,
    f: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    let load = mesh.load_vector(f)?;
    matrices.solve_mass(&load)
}

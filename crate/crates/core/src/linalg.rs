//! Small dense and banded symmetric linear algebra.
//!
//! Everything here is sized for the problems this crate solves: dense
//! matrices are the hp matrices in the extended variable (a few dozen rows),
//! banded matrices are the P1 mass and stiffness matrices in Ω.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{check_len, Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            axpy(*xi, self.row(i), &mut y);
        }
        y
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Principal submatrix with the leading row and column removed.
    pub fn trailing_block(&self) -> DenseMatrix {
        let n = self.rows;
        DenseMatrix::from_fn(n - 1, n - 1, |i, j| self[(i + 1, j + 1)])
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(k, v)| (k / self.cols, k % self.cols, *v))
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor of a dense SPD matrix.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DenseMatrix,
}

impl DenseCholesky {
    pub fn new(a: &DenseMatrix, name: &str) -> Result<Self> {
        let n = a.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    matrix: name.to_string(),
                });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.l.rows();
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[(i, k)] * b[k];
            }
            b[i] = v / self.l[(i, i)];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.l.rows();
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in i + 1..n {
                v -= self.l[(k, i)] * b[k];
            }
            b[i] = v / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }
}

/// Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi
/// rotations. Eigenvalues ascending; eigenvectors are the columns of
/// `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows();
        let mut m = a.clone();
        let mut v = DenseMatrix::identity(n);
        let frob = a
            .data
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        const MAX_SWEEPS: usize = 100;
        let mut converged = n < 2;
        for sweep in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..i {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
            if off == 0.0 || off.sqrt() <= 1e-300 * frob {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    // Drop entries that no longer change either diagonal value.
                    let g = 100.0 * apq.abs();
                    if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                        m[(p, q)] = 0.0;
                        m[(q, p)] = 0.0;
                        continue;
                    }
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: MAX_SWEEPS,
                last: f64::NAN,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            m[(i, i)]
                .partial_cmp(&m[(j, j)])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok(Self { values, vectors })
    }
}

/// Solution of the symmetric-definite pencil `K x = μ M x` normalized so
/// that `XᵀMX = I` and `XᵀKX = diag(μ)`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl GeneralizedEigen {
    /// `K` must be symmetric positive semidefinite and `M` positive
    /// definite. Eigenvalues below the roundoff level of the reduction are
    /// returned as zero rather than rejected.
    pub fn new(k: &DenseMatrix, m: &DenseMatrix, k_name: &str, m_name: &str) -> Result<Self> {
        let n = k.rows();
        // Symmetric diagonal scaling removes the grading of geometric meshes
        // from the condition number before the Cholesky reduction.
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            if !(m[(i, i)] > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    matrix: m_name.to_string(),
                });
            }
            d.push(1.0 / m[(i, i)].sqrt());
        }
        let ks = DenseMatrix::from_fn(n, n, |i, j| d[i] * k[(i, j)] * d[j]);
        let ms = DenseMatrix::from_fn(n, n, |i, j| d[i] * m[(i, j)] * d[j]);
        let chol = DenseCholesky::new(&ms, m_name)?;
        // C = L⁻¹ K L⁻ᵀ, built column by column.
        let mut tmp = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut col = ks.column(j);
            chol.forward(&mut col);
            for i in 0..n {
                tmp[(j, i)] = col[i];
            }
        }
        let mut c = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut col = tmp.column(j);
            chol.forward(&mut col);
            for i in 0..n {
                c[(i, j)] = col[i];
            }
        }
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = avg;
                c[(j, i)] = avg;
            }
        }
        let eig = SymmetricEigen::new(&c)?;
        let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = 64.0 * f64::EPSILON * n as f64 * top;
        if eig.values.iter().any(|&mu| !(mu >= -floor)) {
            return Err(Error::NotPositiveDefinite {
                matrix: k_name.to_string(),
            });
        }
        let values = eig.values.iter().map(|&mu| mu.max(0.0)).collect();
        let mut x = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut col = eig.vectors.column(j);
            chol.backward(&mut col);
            for i in 0..n {
                x[(i, j)] = d[i] * col[i];
            }
        }
        Ok(Self { values, vectors: x })
    }
}

/// Symmetric banded matrix storing the diagonal and `bandwidth`
/// sub-diagonals. Entry `(i, j)` with `0 <= i - j <= bandwidth` lives at
/// `band[i][i - j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetric {
    n: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandedSymmetric {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            band: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        (d <= self.bandwidth).then(|| i * (self.bandwidth + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.band[k])
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .expect("entry outside the band of a banded matrix");
        self.band[k] += v;
    }

    /// `alpha * self + beta * other`, same shape required.
    pub fn combine(&self, alpha: f64, other: &BandedSymmetric, beta: f64) -> BandedSymmetric {
        assert_eq!(self.n, other.n);
        assert_eq!(self.bandwidth, other.bandwidth);
        BandedSymmetric {
            n: self.n,
            bandwidth: self.bandwidth,
            band: self
                .band
                .iter()
                .zip(&other.band)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let w = self.bandwidth + 1;
        for v in y.iter_mut() {
            *v = 0.0;
        }
        for i in 0..self.n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for d in 1..=self.bandwidth.min(i) {
                let a = row[d];
                if a != 0.0 {
                    y[i] += a * x[i - d];
                    y[i - d] += a * x[i];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| i.abs_diff(j) <= self.bandwidth)
                .map(move |j| (i, j, self.get(i, j)))
                .filter(|t| t.2 != 0.0)
        })
    }
}

/// Banded Cholesky factor `L Lᵀ` with the same band layout.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn new(a: &BandedSymmetric, name: &str) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth;
        let w = bw + 1;
        let mut l = a.band.clone();
        for j in 0..n {
            // Diagonal.
            let mut d = l[j * w];
            for k in 1..=bw.min(j) {
                let v = l[j * w + k];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    matrix: name.to_string(),
                });
            }
            let d = d.sqrt();
            l[j * w] = d;
            // Column j below the diagonal: rows i = j+1 ..= j+bw.
            for i in j + 1..n.min(j + bw + 1) {
                let dij = i - j;
                let mut v = l[i * w + dij];
                // sum over k < j with both (i,k), (j,k) in band
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    v -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + dij] = v / d;
            }
        }
        Ok(Self {
            n,
            bandwidth: bw,
            band: l,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let w = self.bandwidth + 1;
        for i in 0..self.n {
            let mut v = b[i];
            for d in 1..=self.bandwidth.min(i) {
                v -= self.band[i * w + d] * b[i - d];
            }
            b[i] = v / self.band[i * w];
        }
        for i in (0..self.n).rev() {
            let mut v = b[i];
            for d in 1..=self.bandwidth.min(self.n - 1 - i) {
                v -= self.band[(i + d) * w + d] * b[i + d];
            }
            b[i] = v / self.band[i * w];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| {
            let d = (i as f64 - j as f64).abs();
            if i == j {
                4.0 + i as f64 * 0.1
            } else {
                1.0 / (1.0 + d * d)
            }
        })
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(6);
        let c = DenseCholesky::new(&a, "a").unwrap();
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let x = c.solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-13);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::identity(3);
        a[(2, 2)] = -1.0;
        let err = DenseCholesky::new(&a, "E").unwrap_err();
        assert_eq!(err, Error::NotPositiveDefinite { matrix: "E".into() });
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = spd(7);
        let e = SymmetricEigen::new(&a).unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let d = DenseMatrix::from_fn(7, 7, |i, j| if i == j { e.values[i] } else { 0.0 });
        let rec = e.vectors.matmul(&d).matmul(&e.vectors.transpose());
        for i in 0..7 {
            for j in 0..7 {
                assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn generalized_normalization() {
        let k = spd(5);
        let mut m = DenseMatrix::identity(5);
        m[(0, 1)] = 0.3;
        m[(1, 0)] = 0.3;
        let g = GeneralizedEigen::new(&k, &m, "k", "m").unwrap();
        let xt = g.vectors.transpose();
        let mm = xt.matmul(&m).matmul(&g.vectors);
        let kk = xt.matmul(&k).matmul(&g.vectors);
        for i in 0..5 {
            for j in 0..5 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((mm[(i, j)] - id).abs() < 1e-12);
                let dk = if i == j { g.values[i] } else { 0.0 };
                assert!((kk[(i, j)] - dk).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let mut a = BandedSymmetric::zeros(n, 3);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i >= 1 {
                a.add(i, i - 1, -1.0);
            }
            if i >= 3 {
                a.add(i, i - 3, -0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y1 = a.matvec(&x);
        let y2 = a.to_dense().matvec(&x);
        for (p, q) in y1.iter().zip(&y2) {
            assert!((p - q).abs() < 1e-14);
        }
        let c = BandedCholesky::new(&a, "a").unwrap();
        let z = c.solve(&y1).unwrap();
        for (p, q) in z.iter().zip(&x) {
            assert!((p - q).abs() < 1e-13);
        }
    }
}

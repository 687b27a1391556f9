//! The diagonalized operators against dense solves of the full Kronecker
//! system, and the pencil eigenvalues against an independent dense solver.

use fracwave_core::dtn::DtnOperator;
use fracwave_core::mesh_y::{DegreeVector, GeometricMesh, HpSpaceY};
use fracwave_core::omega::{OmegaMatrices, OmegaMesh};
use fracwave_core::spectral::{Domain, FractionalOrder};
use fracwave_core::time::{Scheme, Trapezoidal, WaveState};
use nalgebra::{DMatrix, DVector};

fn operator(domain: Domain, n: usize, s: f64, height: f64, elements: usize) -> DtnOperator {
    let order = FractionalOrder::new(s).unwrap();
    let mesh = OmegaMesh::new(domain, n).unwrap();
    let omega = OmegaMatrices::assemble(&mesh).unwrap();
    let hp = HpSpaceY::assemble(
        GeometricMesh::new(height, elements, 0.5).unwrap(),
        DegreeVector::new(elements, 1.0).unwrap(),
        order.alpha(),
    )
    .unwrap();
    DtnOperator::build(order, hp, omega).unwrap()
}

struct Dense {
    by: DMatrix<f64>,
    ay: DMatrix<f64>,
    bo: DMatrix<f64>,
    ao: DMatrix<f64>,
}

fn dense(op: &DtnOperator) -> Dense {
    let m = op.hp().dim();
    let n = op.dim();
    Dense {
        by: DMatrix::from_fn(m, m, |i, j| op.hp().mass()[(i, j)]),
        ay: DMatrix::from_fn(m, m, |i, j| op.hp().stiffness()[(i, j)]),
        bo: DMatrix::from_fn(n, n, |i, j| op.omega().mass().get(i, j)),
        ao: DMatrix::from_fn(n, n, |i, j| op.omega().stiffness().get(i, j)),
    }
}

/// Flux of the dense discrete harmonic extension of `u`.
fn dense_dtn(op: &DtnOperator, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = dense(op);
    let n = op.dim();
    let total = n * op.hp().dim();
    let full = (d.ay.kronecker(&d.bo) + d.by.kronecker(&d.ao)) / op.order().d_s();
    let interior: Vec<usize> = (n..total).collect();
    let trace: Vec<usize> = (0..n).collect();
    let kii = full.select_rows(&interior).select_columns(&interior);
    let kit = full.select_rows(&interior).select_columns(&trace);
    let ut = DVector::from_column_slice(u);
    let ui = -kii.lu().solve(&(&kit * &ut)).unwrap();
    let mut w = DVector::zeros(total);
    w.rows_mut(0, n).copy_from(&ut);
    w.rows_mut(n, total - n).copy_from(&ui);
    let flux = (&full * &w).rows(0, n).into_owned();
    (flux.as_slice().to_vec(), ui.as_slice().to_vec())
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn generic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((i + 1) as f64 * 0.731).sin() + 0.3 * ((i * i) as f64 * 0.17).cos())
        .collect()
}

const CONFIGS: &[(Domain, usize, f64, f64, usize)] = &[
    (Domain::UnitInterval, 16, 0.5, 3.0, 8),
    (Domain::UnitInterval, 32, 0.25, 2.5, 6),
    (Domain::UnitInterval, 64, 0.75, 3.5, 5),
    (Domain::UnitInterval, 8, 0.1, 2.0, 12),
    (Domain::Square, 8, 0.5, 2.0, 4),
    (Domain::Square, 10, 0.9, 2.5, 5),
];

#[test]
fn dtn_matches_dense_schur_complement() {
    for &(domain, n, s, y, m) in CONFIGS {
        let op = operator(domain, n, s, y, m);
        assert!(op.dim() * op.interior_blocks() <= 2000);
        let u = generic(op.dim());
        let (want, interior) = dense_dtn(&op, &u);
        let got = op.apply(&u).unwrap();
        assert!(
            rel(&got, &want) < 1e-9,
            "{domain:?} n={n} s={s}: {:e}",
            rel(&got, &want)
        );
        let v = op.solve_interior(&u).unwrap();
        assert!(rel(&v, &interior) < 1e-9);
    }
}

#[test]
fn trapezoidal_coupled_step_matches_dense_solve() {
    for &(domain, n, s, y, m) in CONFIGS {
        let op = operator(domain, n, s, y, m);
        let dt = 0.05;
        let tr = Trapezoidal::new(&op, dt).unwrap();
        let d = dense(&op);
        let q = 0.25 * dt * dt / op.order().d_s();
        let mut e1 = DMatrix::zeros(d.by.nrows(), d.by.ncols());
        e1[(0, 0)] = 1.0;
        let system = (&d.by * q).kronecker(&d.ao) + (e1 + &d.ay * q).kronecker(&d.bo);
        let f = generic(op.dim());
        let mut rhs = DVector::zeros(system.nrows());
        rhs.rows_mut(0, op.dim()).copy_from_slice(&f);
        let want = system.clone().lu().solve(&rhs).unwrap();
        let got = tr.solve_coupled(&f, dt).unwrap();
        assert!(rel(&got, want.as_slice()) < 1e-9, "{domain:?} n={n} s={s}");
        let residual = &system * DVector::from_column_slice(&got) - &rhs;
        assert!(residual.norm() / rhs.norm() < 1e-9);
    }
}

#[test]
fn trapezoidal_step_solves_the_trace_equation() {
    let op = operator(Domain::UnitInterval, 24, 0.4, 3.0, 6);
    let dt = 0.07;
    let tr = Trapezoidal::new(&op, dt).unwrap();
    let n = op.dim();
    let u0 = generic(n);
    let u1: Vec<f64> = u0.iter().map(|v| 0.9 * v).collect();
    let load = vec![0.01; n];
    let mut state = WaveState::new(u0.clone(), u1.clone(), Scheme::Trapezoidal).unwrap();
    tr.step(&mut state, dt, &load).unwrap();
    // (B + Δt²/4 L) U_2 = B(2U_1 − U_0) − Δt²/4 L(2U_1 + U_0) + Δt² load
    let l2 = op.apply(&state.curr).unwrap();
    let l1 = op.apply(&u1).unwrap();
    let l0 = op.apply(&u0).unwrap();
    let b = |v: &[f64]| op.omega().mass().matvec(v);
    let bu2 = b(&state.curr);
    let lin: Vec<f64> = (0..n).map(|i| 2.0 * u1[i] - u0[i]).collect();
    let blin = b(&lin);
    let q = 0.25 * dt * dt;
    let lhs: Vec<f64> = (0..n).map(|i| bu2[i] + q * l2[i]).collect();
    let rhs: Vec<f64> = (0..n)
        .map(|i| blin[i] - q * (2.0 * l1[i] + l0[i]) + dt * dt * load[i])
        .collect();
    assert!(rel(&lhs, &rhs) < 1e-11);
}

/// Ascending eigenvalues of `K x = μ M x` through nalgebra's Cholesky and
/// symmetric QL.
fn dense_pencil(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let l = m.clone().cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let c = &li * k * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut v: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn reduced_pencil_eigenvalues_match_dense_solver() {
    let op = operator(Domain::UnitInterval, 16, 0.5, 3.0, 9);
    let d = dense(&op);
    let m = d.by.nrows();
    let bt = d.by.view((1, 1), (m - 1, m - 1)).into_owned();
    let at = d.ay.view((1, 1), (m - 1, m - 1)).into_owned();
    let want = dense_pencil(&bt, &at);
    let got = op.eigenvalues();
    let top = want[want.len() - 1];
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-10 * top, "{g} vs {w}");
    }
    for pair in got.windows(2) {
        assert!(pair[0] <= pair[1]);
    }
}

#[test]
fn trapezoidal_pencil_eigenvalues_match_dense_solver() {
    let op = operator(Domain::Square, 8, 0.3, 2.0, 5);
    let d = dense(&op);
    let dt = 0.1;
    let tr = Trapezoidal::new(&op, dt).unwrap();
    let mut p = &d.ay * tr.tau();
    p[(0, 0)] += 1.0;
    let want = dense_pencil(&d.by, &p);
    let top = want[want.len() - 1];
    for (g, w) in tr.eigenvalues().iter().zip(&want) {
        assert!((g - w).abs() <= 1e-10 * top);
    }
}

#[test]
fn graded_meshes_stay_accurate_at_many_elements() {
    // Tiny first elements make A_Y badly conditioned; the reduction must not
    // lose the trace flux to cancellation.
    for m in [16, 24, 32] {
        let op = operator(Domain::UnitInterval, 4, 0.75, 2.0, m);
        let u = generic(op.dim());
        let (want, _) = dense_dtn(&op, &u);
        let got = op.apply(&u).unwrap();
        assert!(rel(&got, &want) < 1e-9, "M={m}: {:e}", rel(&got, &want));
    }
}

//! Leapfrog and trapezoidal schemes: exact single-mode recurrences, energy
//! conservation, stability bounds and the explicit scheme's instability
//! beyond its step limit.

use std::f64::consts::PI;
use std::sync::Arc;

use fracwave_core::dtn::DtnOperator;
use fracwave_core::linalg::dot;
use fracwave_core::mesh_y::{DegreeVector, GeometricMesh, HpSpaceY};
use fracwave_core::omega::{OmegaMatrices, OmegaMesh};
use fracwave_core::spectral::{Domain, FractionalOrder};
use fracwave_core::time::{
    check_cfl, initial_data, integrate, Forcing, Leapfrog, Recording, Scheme, TimeGrid, WaveState,
};

fn setup(domain: Domain, n: usize, s: f64) -> (OmegaMesh, DtnOperator) {
    let order = FractionalOrder::new(s).unwrap();
    let mesh = OmegaMesh::new(domain, n).unwrap();
    let omega = OmegaMatrices::assemble(&mesh).unwrap();
    let hp = HpSpaceY::assemble(
        GeometricMesh::new(3.0, 8, 0.5).unwrap(),
        DegreeVector::new(8, 1.0).unwrap(),
        order.alpha(),
    )
    .unwrap();
    (mesh, DtnOperator::build(order, hp, omega).unwrap())
}

fn grid_sine(mesh: &OmegaMesh, k: usize) -> Vec<f64> {
    mesh.dof_points()
        .iter()
        .map(|p| (k as f64 * PI * p[0]).sin())
        .collect()
}

#[test]
fn leapfrog_follows_the_scalar_recurrence_on_a_discrete_mode() {
    let (mesh, op) = setup(Domain::UnitInterval, 20, 0.6);
    let phi = grid_sine(&mesh, 3);
    let rho = op.rayleigh_quotient(&phi).unwrap();
    let dt = 0.05;
    let lf = Leapfrog::new(&op, dt).unwrap();
    let (mut a0, mut a1) = (1.0, 0.97);
    let scaled = |a: f64| phi.iter().map(|v| a * v).collect::<Vec<_>>();
    let mut state = WaveState::new(scaled(a0), scaled(a1), Scheme::Leapfrog).unwrap();
    for _ in 0..200 {
        lf.step(&mut state, &vec![0.0; phi.len()]).unwrap();
        let a2 = (2.0 - dt * dt * rho) * a1 - a0;
        a0 = a1;
        a1 = a2;
        for (u, p) in state.curr.iter().zip(&phi) {
            assert!((u - a1 * p).abs() < 1e-10);
        }
    }
}

#[test]
fn trapezoidal_follows_the_scalar_recurrence_on_a_discrete_mode() {
    let (mesh, op) = setup(Domain::UnitInterval, 20, 0.3);
    let phi = grid_sine(&mesh, 2);
    let rho = op.rayleigh_quotient(&phi).unwrap();
    let dt = 0.2;
    let grid = TimeGrid::new(40.0 * dt, 40).unwrap();
    let u1: Vec<f64> = phi.iter().map(|v| 0.9 * v).collect();
    let traj = integrate(
        &op,
        &mesh,
        Scheme::Trapezoidal,
        grid,
        phi.clone(),
        u1,
        &Forcing::Zero,
        Recording::default(),
    )
    .unwrap();
    // (1 + q) a_{k+1} = (2 − 2q) a_k − (1 + q) a_{k−1}, q = Δt²ρ/4
    let q = 0.25 * dt * dt * rho;
    let (mut a0, mut a1) = (1.0, 0.9);
    for _ in 1..40 {
        let a2 = ((2.0 - 2.0 * q) * a1 - (1.0 + q) * a0) / (1.0 + q);
        a0 = a1;
        a1 = a2;
    }
    for (u, p) in traj.last.curr.iter().zip(&phi) {
        assert!((u - a1 * p).abs() < 1e-10);
    }
}

fn generic(mesh: &OmegaMesh) -> Vec<f64> {
    mesh.dof_points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (3.0 * p[0]).sin() * (1.0 - p[0]) + 0.1 * ((i as f64 * 0.618_033_988_75).fract() - 0.5)
        })
        .collect()
}

#[test]
fn energies_are_conserved_over_long_unforced_runs() {
    for scheme in [Scheme::Trapezoidal, Scheme::Leapfrog] {
        for (domain, n) in [(Domain::UnitInterval, 32), (Domain::Square, 8)] {
            let (mesh, op) = setup(domain, n, 0.5);
            let lmax = op.estimate_spectral_bound(&mesh, 5000).unwrap();
            let dt = 0.9 * (1.0 / lmax).sqrt();
            assert!(check_cfl(lmax, dt, 0.5).passed);
            let grid = TimeGrid::new(600.0 * dt, 600).unwrap();
            let u0 = generic(&mesh);
            let u1: Vec<f64> = u0.iter().map(|v| 0.999 * v).collect();
            let rec = Recording {
                history: false,
                energy: true,
            };
            let traj = integrate(&op, &mesh, scheme, grid, u0, u1, &Forcing::Zero, rec).unwrap();
            let energy = traj.energy.unwrap();
            assert_eq!(energy.values.len(), 600);
            assert!(
                energy.relative_drift() < 1e-10,
                "{scheme:?} {domain:?}: {:e}",
                energy.relative_drift()
            );
            assert!(energy.min() >= 0.0);
        }
    }
}

#[test]
fn forced_energy_obeys_the_stability_bound() {
    let (mesh, op) = setup(Domain::UnitInterval, 24, 0.4);
    let lmax = op.estimate_spectral_bound(&mesh, 5000).unwrap();
    let dt = 0.8 * (1.0 / lmax).sqrt();
    let load = mesh
        .load_vector(|x| x[0] * (1.0 - x[0]) * (5.0 * x[0]).cos())
        .unwrap();
    let forcing = Forcing::Separable {
        load,
        amplitude: Arc::new(|t: f64| (2.0 * t).sin() + 0.5),
    };
    for scheme in [Scheme::Trapezoidal, Scheme::Leapfrog] {
        let grid = TimeGrid::new(300.0 * dt, 300).unwrap();
        let (u0, u1) =
            initial_data(&op, &mesh, dt, |x| (PI * x[0]).sin(), |_| 0.0, &forcing).unwrap();
        let rec = Recording {
            history: false,
            energy: true,
        };
        let traj = integrate(&op, &mesh, scheme, grid, u0, u1, &forcing, rec).unwrap();
        let energy = traj.energy.unwrap();
        assert!(
            energy.satisfies_stability_bound(&traj.forcing_norms, dt, 1e-9),
            "{scheme:?}"
        );
        // the forcing actually does work
        assert!(energy.relative_drift() > 1e-3);
    }
}

#[test]
fn leapfrog_diverges_just_beyond_its_step_limit() {
    let (mesh, op) = setup(Domain::UnitInterval, 32, 0.75);
    let lmax = op.estimate_spectral_bound(&mesh, 5000).unwrap();
    let zero = vec![0.0; op.dim()];
    let run = |dt: f64| -> f64 {
        let lf = Leapfrog::new(&op, dt).unwrap();
        let u0 = generic(&mesh);
        let start = op.omega().l2_norm(&u0);
        let mut state = WaveState::new(u0.clone(), u0, Scheme::Leapfrog).unwrap();
        let mut peak: f64 = 1.0;
        for _ in 0..2000 {
            if lf.step(&mut state, &zero).is_err() {
                return f64::INFINITY;
            }
            peak = peak.max(op.omega().l2_norm(&state.curr) / start);
            if peak > 1e6 {
                break;
            }
        }
        peak
    };
    let limit = 2.0 / lmax.sqrt();
    assert!(run(1.05 * limit) > 1e6);
    assert!(run(0.95 * limit) < 1e2);
}

#[test]
fn computable_initial_data_reduce_to_the_simple_start() {
    // g = 0 and f(·, 0) = 0 give U₀ = 0 and U₁ = ΔtΠh.
    let (mesh, op) = setup(Domain::UnitInterval, 16, 0.25);
    let s = op.order().s();
    let load = mesh.load_vector(|x| (PI * x[0]).sin()).unwrap();
    let forcing = Forcing::Separable {
        load,
        amplitude: Arc::new(move |t: f64| (PI.powf(2.0 * s) - 1.0) * t.sin()),
    };
    let dt = 0.1;
    let (u0, u1) = initial_data(&op, &mesh, dt, |_| 0.0, |x| (PI * x[0]).sin(), &forcing).unwrap();
    assert!(u0.iter().all(|v| *v == 0.0));
    let ph = fracwave_core::omega::l2_project(&mesh, op.omega(), |x| (PI * x[0]).sin()).unwrap();
    for (a, b) in u1.iter().zip(&ph) {
        assert!((a - dt * b).abs() < 1e-15);
    }
    assert!(dot(&u1, &u1) > 0.0);
}

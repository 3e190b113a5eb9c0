mod common;

use common::{fixture_disc, rel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapeforge::adjoint::*;
use shapeforge::discretization::Discretization;
use shapeforge::extension::{extension_matrix, ControlState};
use shapeforge::fem::{dissipation, FieldVector, NsParams, TransformState};
use shapeforge::flow::{flow_jacobian, solve_state, FlowSolverConfig, InflowSpec};
use shapeforge::linalg::{dot, lu_solve, norm_inf};
use shapeforge::objective::*;

fn control(disc: &Discretization) -> ControlState {
    ControlState::new(disc, 0.5, 0.0, 1.0, 1e-2, 1e-3).unwrap()
}

fn random_control(disc: &Discretization, seed: u64) -> ControlState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = control(disc);
    c.u.iter_mut().for_each(|u| *u = rng.gen_range(-0.05..0.05));
    c.eta.iter_mut().for_each(|e| *e = rng.gen_range(0.2..0.8));
    c
}

fn still() -> InflowSpec {
    InflowSpec { scale: 0.0, ..Default::default() }
}

#[test]
fn adjoint_flow_of_rest_is_zero() {
    let disc = fixture_disc(0);
    let tr = TransformState::identity(disc.fine_mesh());
    let s = solve_state(&disc, &tr, 0.1, &still(), None, &FlowSolverConfig::default()).unwrap();
    let adj = solve_adjoint_flow(&disc, &s, &tr, 0.1, &ChainConfig::default().adjoint_flow).unwrap();
    assert!(adj.lambda.values.iter().all(|&v| v == 0.0));
}

#[test]
fn adjoint_flow_consistent_with_forcing_fd() {
    let disc = fixture_disc(0);
    let tr = TransformState::identity(disc.fine_mesh());
    let nu = 0.1;
    let s = solve_state(&disc, &tr, nu, &InflowSpec::default(), None, &FlowSolverConfig::default()).unwrap();
    let cfg = ChainConfig::default().tightened(1e-12);
    let adj = solve_adjoint_flow(&disc, &s, &tr, nu, &cfg.adjoint_flow).unwrap();
    let fine = disc.fine();
    for (l, &f) in adj.lambda.values.iter().zip(&fine.flow_fixed) {
        if f {
            assert_eq!(*l, 0.0);
        }
    }
    // j of the state solving r(x) + ε e_i = 0
    let par = NsParams::navier_stokes(nu);
    let solve_forced = |i: usize, eps: f64| {
        let mut x = s.state.values.clone();
        for _ in 0..8 {
            let (a, mut r) = flow_jacobian(&disc, 0, &tr, &x, &par);
            for (k, rk) in r.iter_mut().enumerate() {
                if fine.flow_fixed[k] {
                    *rk = 0.0;
                }
            }
            r[i] += eps;
            let d = lu_solve(&a, &r).unwrap();
            x.iter_mut().zip(&d).for_each(|(x, d)| *x -= d);
        }
        dissipation(disc.fine_mesh(), &fine.geom, &fine.mixed, &tr, &x, nu)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let free: Vec<usize> = (0..fine.mixed.pressure_offset()).filter(|&i| !fine.flow_fixed[i]).collect();
    let big = free.iter().map(|&i| adj.lambda.values[i].abs()).fold(0.0, f64::max);
    let cand: Vec<usize> = free.into_iter().filter(|&i| adj.lambda.values[i].abs() >= 1e-2 * big).collect();
    for _ in 0..3 {
        let i = cand[rng.gen_range(0..cand.len())];
        let h = 1e-5;
        let fd = (solve_forced(i, h) - solve_forced(i, -h)) / (2.0 * h);
        let an = adj.lambda.values[i];
        assert!(rel(an, fd) <= 1e-5, "dof {i}: {an} vs {fd}");
    }
}

#[test]
fn r_vanishes_in_trivial_state() {
    let disc = fixture_disc(0);
    let tr = TransformState::identity(disc.fine_mesh());
    let n = disc.fine().mixed.n_dofs;
    let mult = MultiplierState { lambda_g: [0.0; 3], ..Default::default() };
    let r = assemble_r(&disc, &vec![0.0; n], &vec![0.0; n], &tr, &ObjectiveParams::default(), &mult, &[0.0; 3], LagrangianTerms::ALL);
    assert!(r.iter().all(|&v| v == 0.0));
}

#[test]
fn penalty_only_r_nonzero_and_matches_fd() {
    let disc = fixture_disc(0);
    let c = random_control(&disc, 5);
    let params = ObjectiveParams { nu: 0.1, det_lower_bound: 1.5, ..Default::default() };
    let problem = Problem::new(&disc, params, InflowSpec::default(), ChainConfig::default());
    let fwd = forward_solve(&problem, &c, None).unwrap();
    let n = disc.fine().mixed.n_dofs;
    let (x, lam) = (vec![0.0; n], vec![0.0; n]);
    let mult = MultiplierState::default();
    let terms = LagrangianTerms { penalty: true, ..LagrangianTerms::NONE };
    let r = assemble_r(&disc, &x, &lam, fwd.transform(), &params, &mult, &fwd.g_def, terms);
    assert!(r.iter().any(|&v| v != 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dw: Vec<f64> = disc.fine().ext_fixed.iter().map(|&f| if f { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let fd = lagrangian_fd(&disc, &x, &lam, &fwd.transform().w.values, &dw, &params, &mult, &problem.g0, terms, 1e-6).unwrap();
    assert!(rel(dot(&r, &dw), fd) <= 1e-5);
}

#[test]
fn adjoint_displacement_cases() {
    let disc = fixture_disc(0);
    let n = disc.fine().p1v.n_dofs;
    let cfg = ChainConfig::default().adjoint_displacement;
    let eta0 = vec![0.0; disc.fine().p1.nv];
    let zero = solve_adjoint_displacement(&disc, &vec![0.0; n], &eta0, &vec![0.0; n], &cfg).unwrap();
    assert!(zero.lambda_w.values.iter().all(|&v| v == 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let adj = solve_adjoint_displacement(&disc, &r, &eta0, &vec![0.0; n], &cfg).unwrap();
    let fixed = &disc.fine().ext_fixed;
    assert!(adj.lambda_w.values.iter().zip(fixed).all(|(&v, &f)| !f || v == 0.0));
    let (a, _) = extension_matrix(&disc, 0, &vec![0.0; n], &eta0);
    let rhs: Vec<f64> = r.iter().zip(fixed).map(|(v, &f)| if f { 0.0 } else { -v }).collect();
    let x = lu_solve(&a, &rhs).unwrap();
    let d: Vec<f64> = x.iter().zip(&adj.lambda_w.values).map(|(a, b)| a - b).collect();
    assert!(norm_inf(&d) <= 1e-10 * norm_inf(&x));
}

#[test]
fn reduced_gradient_trivial_cases() {
    let disc = fixture_disc(0);
    let n = disc.fine().p1v.n_dofs;
    let c = control(&disc);
    let adj = AdjointDisplacement { lambda_w: FieldVector::zeros(&disc.fine().p1v), linear_iterations: 0 };
    let g = reduced_gradient(&disc, &adj, &c, &vec![0.0; n]).unwrap();
    assert!(g.gamma.iter().all(|&v| v == 0.0));
    assert!(g.kappa.iter().all(|&v| v == 0.0));
}

#[test]
fn still_flow_has_zero_gradient() {
    let disc = fixture_disc(0);
    let problem = Problem::new(&disc, ObjectiveParams::default(), still(), ChainConfig::default());
    let ev = compute_reduced_gradients(&problem, &control(&disc), &MultiplierState::default(), None).unwrap();
    assert!(ev.forward.extension.w.values.iter().all(|&v| v == 0.0));
    assert!(ev.gradient.gamma.iter().all(|&v| v == 0.0));
    assert!(ev.gradient.kappa.iter().all(|&v| v == 0.0));
}

#[test]
fn fixture_gradient_nonzero_and_deterministic() {
    let disc = fixture_disc(0);
    let problem = Problem::new(&disc, ObjectiveParams::default(), InflowSpec::default(), ChainConfig::default());
    let mult = MultiplierState::default();
    let a = compute_reduced_gradients(&problem, &control(&disc), &mult, None).unwrap();
    assert!(a.gradient.gamma.iter().chain(&a.gradient.kappa).all(|v| v.is_finite()));
    assert!(a.gradient.gamma.iter().any(|&v| v != 0.0));
    let b = compute_reduced_gradients(&problem, &control(&disc), &mult, None).unwrap();
    assert_eq!(a.gradient, b.gradient);
}

#[test]
fn fd_oracle_trivial_and_quadratic() {
    let disc = fixture_disc(0);
    let problem = Problem::new(&disc, ObjectiveParams::default(), still(), ChainConfig::default().tightened(1e-12));
    let mult = MultiplierState { tau: 1e-300, ..Default::default() };
    let mut c = control(&disc);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    c.u.iter_mut().for_each(|u| *u = rng.gen_range(-0.01..0.01));
    let du: Vec<f64> = c.u.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let de = vec![0.0; c.eta.len()];
    let zero_u = vec![0.0; c.u.len()];
    assert_eq!(fd_gradient_oracle(&problem, &c, &mult, (&zero_u, &de), 1e-4, None).unwrap(), 0.0);
    let fd = fd_gradient_oracle(&problem, &c, &mult, (&du, &de), 1e-4, None).unwrap();
    let exact = c.alpha * dot(&c.u, &disc.mass_gamma.mul_vec(&du));
    assert!((fd - exact).abs() <= 1e-8 * exact.abs().max(1e-12), "{fd} vs {exact}");
}

#[test]
fn fd_oracle_second_order() {
    let disc = fixture_disc(0);
    let params = ObjectiveParams { nu: 0.1, ..Default::default() };
    let problem = Problem::new(&disc, params, InflowSpec::default(), ChainConfig::default().tightened(1e-12));
    let c = random_control(&disc, 9);
    let mult = MultiplierState::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let du: Vec<f64> = c.u.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let de = vec![0.0; c.eta.len()];
    let d: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| fd_gradient_oracle(&problem, &c, &mult, (&du, &de), h, None).unwrap())
        .collect();
    let ratio = (d[0] - d[1]) / (d[1] - d[2]);
    assert!((3.0..=5.0).contains(&ratio), "Richardson ratio {ratio}");
}

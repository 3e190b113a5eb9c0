mod common;

use common::fixture_disc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapeforge::extension::*;
use shapeforge::linalg::{lu_solve, norm_inf};

fn control(disc: &shapeforge::discretization::Discretization, eta: f64) -> ControlState {
    ControlState::new(disc, eta, 0.0, 1.0, 1e-2, 1e-3).unwrap()
}

#[test]
fn zero_control_zero_displacement() {
    let disc = fixture_disc(0);
    let mut c = control(&disc, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.eta.iter_mut().for_each(|e| *e = rng.gen_range(0.0..1.0));
    let s = solve_extension(&disc, &c, None, &ExtensionConfig::default()).unwrap();
    assert!(s.w.values.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_extension_matches_lu() {
    let disc = fixture_disc(0);
    let mut c = control(&disc, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.u.iter_mut().for_each(|u| *u = rng.gen_range(-0.1..0.1));
    let s = solve_extension(&disc, &c, None, &ExtensionConfig::default()).unwrap();
    assert!(s.newton_iterations <= 1, "linear problem took {} Newton steps", s.newton_iterations);
    let n = disc.fine().p1v.n_dofs;
    let (a, _) = extension_matrix(&disc, 0, &vec![0.0; n], &c.eta);
    let fixed = &disc.fine().ext_fixed;
    let b: Vec<f64> = disc.b_gamma.mul_vec(&c.u).iter().zip(fixed).map(|(v, &f)| if f { 0.0 } else { *v }).collect();
    let x = lu_solve(&a, &b).unwrap();
    let d: Vec<f64> = x.iter().zip(&s.w.values).map(|(a, b)| a - b).collect();
    assert!(norm_inf(&d) <= 1e-10 * norm_inf(&x));
}

#[test]
fn default_setting_keeps_mesh_valid() {
    let disc = fixture_disc(1);
    let mut c = control(&disc, 0.5);
    let mesh = disc.fine_mesh();
    for (k, &v) in disc.trace.vertices.iter().enumerate() {
        let p = mesh.vertices[v];
        c.u[k] = 0.3 * (std::f64::consts::PI * p[0]).cos() * p[0].signum();
    }
    let s = solve_extension(&disc, &c, None, &ExtensionConfig::default()).unwrap();
    assert!(s.transform.min_det() > 0.0);
    assert!(s.w.values.iter().any(|&v| v != 0.0));
    assert!(s.w.values.iter().zip(&disc.fine().ext_fixed).all(|(&v, &f)| !f || v == 0.0));
}

#[test]
fn project_eta_clamps() {
    let disc = fixture_disc(0);
    let mut c = control(&disc, 0.5);
    c.eta.iter_mut().for_each(|e| *e = 2.0);
    project_eta(&mut c);
    assert!(c.eta.iter().all(|&e| e == 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inside: Vec<f64> = c.eta.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
    c.eta = inside.clone();
    project_eta(&mut c);
    assert_eq!(c.eta, inside);
    let mixed: Vec<f64> = c.eta.iter().map(|_| rng.gen_range(-1.0..2.0)).collect();
    c.eta = mixed.clone();
    project_eta(&mut c);
    for (p, m) in c.eta.iter().zip(&mixed) {
        let oracle = if *m < 0.0 { 0.0 } else if *m > 1.0 { 1.0 } else { *m };
        assert_eq!(*p, oracle);
    }
}

#[test]
fn empty_bounds_rejected() {
    let disc = fixture_disc(0);
    assert!(ControlState::new(&disc, 0.5, 1.0, 0.0, 1e-2, 1e-3).is_err());
}

mod common;

use common::{fixture, fixture_disc, unit_square};
use shapeforge::discretization::Discretization;
use shapeforge::fem::*;
use shapeforge::flow::*;
use shapeforge::linalg::lu_solve;
use shapeforge::mesh::{GridHierarchy, Marker, MeshLevel};
use shapeforge::newton::{newton_loop, NewtonConfig, NewtonProblem};

fn identity(disc: &Discretization) -> TransformState {
    TransformState::identity(disc.fine_mesh())
}

#[test]
fn zero_inflow_gives_rest() {
    let disc = fixture_disc(0);
    let inflow = InflowSpec { scale: 0.0, ..Default::default() };
    let s = solve_state(&disc, &identity(&disc), 0.03, &inflow, None, &FlowSolverConfig::default()).unwrap();
    assert!(s.state.values.iter().all(|&v| v == 0.0));
    assert!(s.newton_iterations <= 1);
}

#[test]
fn fixture_flow_converges_with_positive_dissipation() {
    let disc = fixture_disc(0);
    let tr = identity(&disc);
    let s = solve_state(&disc, &tr, 0.03, &InflowSpec::default(), None, &FlowSolverConfig::default()).unwrap();
    assert!(s.converged);
    let j = dissipation(disc.fine_mesh(), &disc.fine().geom, &disc.fine().mixed, &tr, &s.state.values, 0.03);
    assert!(j > 0.0);
}

#[test]
fn inflow_flux_and_mass_balance() {
    let disc = fixture_disc(1);
    let inflow = InflowSpec::default();
    assert!((inflow.analytic_flux() - 12.0 / std::f64::consts::PI).abs() <= 1e-14);
    let s = solve_state(&disc, &identity(&disc), 0.1, &inflow, None, &FlowSolverConfig::default()).unwrap();
    let l = disc.finest_index();
    let fin = boundary_flux(&disc, l, &s.state.values, Marker::Inflow);
    let fout = boundary_flux(&disc, l, &s.state.values, Marker::Outflow);
    // quadratic interpolation of the cosine profile on 0.25-long edges
    assert!((-fin - inflow.analytic_flux()).abs() <= 1e-3 * inflow.analytic_flux(), "{fin}");
    assert!((fout + fin).abs() <= 1e-8 * inflow.scale, "{fout} {fin}");
}

#[test]
fn translated_frame_same_dissipation() {
    let j = |base: MeshLevel, inflow: InflowSpec| {
        let disc = Discretization::new(GridHierarchy::new(base));
        let tr = identity(&disc);
        let s = solve_state(&disc, &tr, 0.05, &inflow, None, &FlowSolverConfig::default()).unwrap();
        dissipation(disc.fine_mesh(), &disc.fine().geom, &disc.fine().mixed, &tr, &s.state.values, 0.05)
    };
    let off = [3.25, -1.5];
    let j0 = j(fixture(), InflowSpec::default());
    let j1 = j(fixture().translated(off), InflowSpec { center: off[1], ..Default::default() });
    assert!((j0 - j1).abs() <= 1e-10 * j0, "{j0} vs {j1}");
}

/// Stokes solution with v = curl(x³y³), p = xy − 1/4 on the unit square,
/// Dirichlet velocity on the whole boundary, one pressure dof pinned.
fn stokes_error(n: usize, nu: f64) -> f64 {
    let m = unit_square(n);
    let geom = mesh_geometry(&m);
    let dm = DofMap::new(&m, SpaceKind::Mixed);
    let v = |p: [f64; 2]| [3.0 * p[0].powi(3) * p[1].powi(2), -3.0 * p[0].powi(2) * p[1].powi(3)];
    let pex = |p: [f64; 2]| p[0] * p[1] - 0.25;
    let f = |p: [f64; 2]| {
        let (x, y) = (p[0], p[1]);
        [-nu * (18.0 * x * y * y + 6.0 * x.powi(3)) + y, nu * (6.0 * y.powi(3) + 18.0 * x * x * y) + x]
    };
    let par = NsParams::stokes(nu);
    let x0 = vec![0.0; dm.n_dofs];
    let (mut a, r0) = ns_jacobian(&m, &geom, &dm, &TransformState::identity(&m), &x0, &par, &element_pattern(&m, &dm));
    let mut rhs: Vec<f64> = r0.iter().map(|v| -v).collect();
    for (t, tri) in m.triangles.iter().enumerate() {
        let nodes = DofMap::p2_nodes(&m, t);
        for (lam, w) in TRI_Q4 {
            let p = [0, 1].map(|k| (0..3).map(|i| lam[i] * m.vertices[tri[i]][k]).sum::<f64>());
            let phi = p2_basis(lam);
            let fv = f(p);
            for a_ in 0..6 {
                for c in 0..2 {
                    rhs[2 * nodes[a_] + c] += w * geom[t].area * fv[c] * phi[a_];
                }
            }
        }
    }
    let nv = m.num_vertices();
    let node_pos = |k: usize| if k < nv { m.vertices[k] } else { m.edge_midpoint(k - nv) };
    let mut bc = Vec::new();
    for e in &m.boundary_edges {
        for k in [e.vertices[0], e.vertices[1], nv + e.edge] {
            let val = v(node_pos(k));
            bc.push((2 * k, val[0]));
            bc.push((2 * k + 1, val[1]));
        }
    }
    bc.push((dm.pressure_offset(), pex(m.vertices[0])));
    apply_dirichlet(&mut a, &mut rhs, &DirichletBc::from_pairs(bc).unwrap()).unwrap();
    let x = lu_solve(&a, &rhs).unwrap();
    (0..dm.num_p2_nodes())
        .map(|k| {
            let e = v(node_pos(k));
            (x[2 * k] - e[0]).abs().max((x[2 * k + 1] - e[1]).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn stokes_manufactured_second_order() {
    let (e1, e2) = (stokes_error(4, 0.5), stokes_error(8, 0.5));
    println!("Stokes velocity errors {e1:e} {e2:e}, ratio {}", e1 / e2);
    assert!(e2 < 1e-2);
    assert!(e1 / e2 >= 3.5, "{e1} {e2}");
}

struct Quadratic;

impl NewtonProblem for Quadratic {
    fn residual(&mut self, x: &[f64]) -> shapeforge::Result<Vec<f64>> {
        Ok(vec![x[0] * x[0] - 4.0])
    }
    fn solve_linearized(&mut self, x: &[f64], r: &[f64]) -> shapeforge::Result<(Vec<f64>, usize)> {
        Ok((vec![r[0] / (2.0 * x[0])], 0))
    }
}

#[test]
fn newton_scalar_quadratic() {
    let out = newton_loop(&mut Quadratic, vec![3.0], &NewtonConfig::default()).unwrap();
    assert!((out.x[0] - 2.0).abs() <= 1e-8);
    assert!(out.iterations <= 6);
    assert!(out.residual_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn invalid_viscosity_rejected() {
    let disc = fixture_disc(0);
    let r = solve_state(&disc, &identity(&disc), 0.0, &InflowSpec::default(), None, &FlowSolverConfig::default());
    assert!(matches!(r, Err(shapeforge::Error::InvalidArgument(_))));
}

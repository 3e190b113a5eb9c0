//! Adjoint chain for the reduced gradient and the finite-difference oracle.

use crate::discretization::Discretization;
use crate::error::{Error, Result, Stage};
use crate::extension::{solve_extension_linear, ControlState};
use crate::fem::{
    compute_transform, det_penalty, dissipation, dissipation_gradient, eta_coupling, flow_points, gather_mixed,
    geometric_constraints, ns_residual, FieldVector, Mat2, NsParams, TransformState,
};
use crate::flow::{flow_jacobian, flow_jacobian_levels, FlowSolution};
use crate::linalg::dot;
use crate::objective::{
    forward_solve, objective_at, ForwardState, MultiplierState, ObjectiveBreakdown, ObjectiveParams, Problem,
};
use crate::solve::{solve_leveled, LinearSolverConfig};

/// Flow multipliers (λ_v, λ_p) in the mixed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointFlow {
    pub lambda: FieldVector,
    pub linear_iterations: usize,
}

impl AdjointFlow {
    pub fn lambda_v<'a>(&'a self, disc: &Discretization) -> &'a [f64] {
        &self.lambda.values[..disc.fine().mixed.pressure_offset()]
    }

    pub fn lambda_p<'a>(&'a self, disc: &Discretization) -> &'a [f64] {
        &self.lambda.values[disc.fine().mixed.pressure_offset()..]
    }
}

/// J_xᵀ λ = −∂j/∂x with λ = 0 on the Dirichlet dofs.
pub fn solve_adjoint_flow(
    disc: &Discretization,
    state: &FlowSolution,
    tr: &TransformState,
    nu: f64,
    cfg: &LinearSolverConfig,
) -> Result<AdjointFlow> {
    let top = disc.finest_index();
    let fine = disc.fine();
    let x = &state.state.values;
    let mut rhs = dissipation_gradient(disc.fine_mesh(), &fine.geom, &fine.mixed, tr, x, nu);
    for (r, &f) in rhs.iter_mut().zip(&fine.flow_fixed) {
        *r = if f { 0.0 } else { -*r };
    }
    let par = NsParams::navier_stokes(nu);
    let (a, _) = flow_jacobian(disc, top, tr, x, &par);
    let fine_level = (a, fine.flow_fixed.clone());
    let mut levels = if cfg.use_direct(rhs.len()) || top == 0 {
        vec![fine_level]
    } else {
        flow_jacobian_levels(disc, fine_level, tr, x, &par)?
    };
    levels.iter_mut().for_each(|(a, _)| *a = a.transpose());
    let (mut lam, it) = solve_leveled(levels, disc.flow_transfers(), cfg, &rhs)?;
    for (l, &f) in lam.iter_mut().zip(&fine.flow_fixed) {
        if f {
            *l = 0.0;
        }
    }
    Ok(AdjointFlow {
        lambda: FieldVector::new(&fine.mixed, lam)?,
        linear_iterations: it,
    })
}

/// Term groups of the Lagrangian entering R.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagrangianTerms {
    /// Dissipation j.
    pub objective: bool,
    /// λ · N(x, w) with N the flow residual.
    pub flow_constraint: bool,
    /// β-term on det DF.
    pub penalty: bool,
    /// λ_g·g_def + τ‖g_def‖².
    pub multiplier: bool,
}

impl LagrangianTerms {
    pub const ALL: LagrangianTerms = LagrangianTerms {
        objective: true,
        flow_constraint: true,
        penalty: true,
        multiplier: true,
    };
    pub const NONE: LagrangianTerms = LagrangianTerms {
        objective: false,
        flow_constraint: false,
        penalty: false,
        multiplier: false,
    };
}

/// w-dependent part of the Lagrangian at fixed (x, λ); the quantity R
/// differentiates.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_value(
    disc: &Discretization,
    x: &[f64],
    lambda: &[f64],
    tr: &TransformState,
    params: &ObjectiveParams,
    mult: &MultiplierState,
    g0: &[f64; 3],
    terms: LagrangianTerms,
) -> f64 {
    let (mesh, fine) = (disc.fine_mesh(), disc.fine());
    let mut l = 0.0;
    if terms.objective {
        l += dissipation(mesh, &fine.geom, &fine.mixed, tr, x, params.nu);
    }
    if terms.flow_constraint {
        let r = ns_residual(mesh, &fine.geom, &fine.mixed, tr, x, &NsParams::navier_stokes(params.nu));
        l += dot(lambda, &r);
    }
    if terms.penalty {
        l += det_penalty(&fine.geom, tr, params.det_lower_bound, params.beta);
    }
    if terms.multiplier {
        let g = geometric_constraints(mesh, &fine.geom, tr);
        let gd: [f64; 3] = std::array::from_fn(|k| g[k] - g0[k]);
        l += dot(&mult.lambda_g, &gd) + mult.tau * dot(&gd, &gd);
    }
    l
}

fn mt(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

fn frob(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// R = ∂L/∂w on the finest level, zero on the fixed displacement dofs.
#[allow(clippy::too_many_arguments)]
pub fn assemble_r(
    disc: &Discretization,
    x: &[f64],
    lambda: &[f64],
    tr: &TransformState,
    params: &ObjectiveParams,
    mult: &MultiplierState,
    g_def: &[f64; 3],
    terms: LagrangianTerms,
) -> Vec<f64> {
    let (mesh, fine) = (disc.fine_mesh(), disc.fine());
    let nu = params.nu;
    let mu = mult.constraint_weight(g_def);
    let w = &tr.w.values;
    let mut r = vec![0.0; fine.p1v.n_dofs];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = &fine.geom[t];
        let m = &tr.df_inv[t];
        let d = tr.det[t];
        let mtr = mt(m);
        let area = geo.area;
        // ∂f/∂DF = −Mᵀ A Mᵀ + f_d d Mᵀ with A = ∂f/∂M; Mᵀ A Mᵀ is split into
        // left·Mᵀ and direct, f_d is summed in fd.
        let mut left = [[0.0; 2]; 2];
        let mut direct = [[0.0; 2]; 2];
        let mut fd = 0.0;
        if terms.objective || terms.flow_constraint {
            let (_, xl) = gather_mixed(mesh, &fine.mixed, t, x);
            let (_, ll) = gather_mixed(mesh, &fine.mixed, t, lambda);
            for (q, ql) in flow_points(geo, m, &xl).zip(flow_points(geo, m, &ll)) {
                let om = q.omega;
                let (xv, yv) = (&q.gv, &ql.gv);
                let (xt, yt) = (mt(xv), mt(yv));
                if terms.objective {
                    let xx = matmul(&xt, xv);
                    for i in 0..2 {
                        for j in 0..2 {
                            left[i][j] += om * 2.0 * nu * d * xx[i][j];
                        }
                    }
                    fd += om * nu * frob(xv, xv);
                }
                if terms.flow_constraint {
                    let (xy, yx) = (matmul(&xt, yv), matmul(&yt, xv));
                    for i in 0..2 {
                        for j in 0..2 {
                            left[i][j] += om
                                * (nu * (xy[i][j] + yx[i][j]) - q.p * d * yt[i][j] - ql.p * d * xt[i][j]);
                        }
                    }
                    let xtl = [
                        xv[0][0] * ql.v[0] + xv[1][0] * ql.v[1],
                        xv[0][1] * ql.v[0] + xv[1][1] * ql.v[1],
                    ];
                    let mvv = [m[0][0] * q.v[0] + m[0][1] * q.v[1], m[1][0] * q.v[0] + m[1][1] * q.v[1]];
                    for i in 0..2 {
                        for j in 0..2 {
                            direct[i][j] += om * xtl[i] * mvv[j];
                        }
                    }
                    fd -= om * (q.p * (yv[0][0] + yv[1][1]) + ql.p * (xv[0][0] + xv[1][1]));
                }
            }
        }
        if terms.penalty {
            fd -= params.beta * area * (params.det_lower_bound - d).max(0.0);
        }
        let mut wbar = [0.0; 2];
        if terms.multiplier {
            for (i, wb) in wbar.iter_mut().enumerate() {
                *wb = (w[2 * tri[0] + i] + w[2 * tri[1] + i] + w[2 * tri[2] + i]) / 3.0;
            }
            fd += mu[0] * area;
            for i in 0..2 {
                fd += mu[1 + i] * area * (geo.centroid[i] + wbar[i]);
            }
        }
        let mut core = left;
        for (i, row) in core.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = -*c + if i == j { fd * d } else { 0.0 };
            }
        }
        let mut ge = matmul(&core, &mtr);
        for i in 0..2 {
            for j in 0..2 {
                ge[i][j] -= direct[i][j];
            }
        }
        let gl = &geo.grad_lambda;
        for a in 0..3 {
            for i in 0..2 {
                let mut s = ge[i][0] * gl[a][0] + ge[i][1] * gl[a][1];
                if terms.multiplier {
                    s += mu[1 + i] * d * area / 3.0;
                }
                r[2 * tri[a] + i] += s;
            }
        }
    }
    for (ri, &f) in r.iter_mut().zip(&fine.ext_fixed) {
        if f {
            *ri = 0.0;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointDisplacement {
    pub lambda_w: FieldVector,
    pub linear_iterations: usize,
}

/// E_wᵀ λ_w = −R with λ_w = 0 on the fixed dofs.
pub fn solve_adjoint_displacement(
    disc: &Discretization,
    r: &[f64],
    eta: &[f64],
    w: &[f64],
    cfg: &LinearSolverConfig,
) -> Result<AdjointDisplacement> {
    let fine = disc.fine();
    if r.len() != fine.p1v.n_dofs {
        return Err(Error::SpaceMismatch(format!("R has {} entries, expected {}", r.len(), fine.p1v.n_dofs)));
    }
    let rhs: Vec<f64> = r.iter().zip(&fine.ext_fixed).map(|(v, &f)| if f { 0.0 } else { -v }).collect();
    let (mut lam, it) = solve_extension_linear(disc, w, eta, &rhs, true, cfg)?;
    for (l, &f) in lam.iter_mut().zip(&fine.ext_fixed) {
        if f {
            *l = 0.0;
        }
    }
    Ok(AdjointDisplacement {
        lambda_w: FieldVector::new(&fine.p1v, lam)?,
        linear_iterations: it,
    })
}

/// Gradient pair in the L² Riesz representation together with the dual
/// (derivative) vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGradient {
    /// Trace gradient on Γ_obs.
    pub gamma: Vec<f64>,
    /// Nodal gradient in η.
    pub kappa: Vec<f64>,
    /// dJ/du as a dual vector: αM_Γu − Bᵀλ_w.
    pub dual_u: Vec<f64>,
    /// dJ/dη as a dual vector.
    pub dual_eta: Vec<f64>,
}

pub fn reduced_gradient(
    disc: &Discretization,
    adj: &AdjointDisplacement,
    control: &ControlState,
    w: &[f64],
) -> Result<ReducedGradient> {
    let lam = &adj.lambda_w.values;
    let mu = disc.mass_gamma.mul_vec(&control.u);
    let bt = disc.b_gamma.mul_vec_transpose(lam);
    let dual_u: Vec<f64> = mu.iter().zip(&bt).map(|(m, b)| control.alpha * m - b).collect();
    let mid = control.eta_mid();
    let shifted: Vec<f64> = control.eta.iter().map(|e| e - mid).collect();
    let me = disc.mass_omega.mul_vec(&shifted);
    let coupling = eta_coupling(disc.fine_mesh(), &disc.fine().geom, w, lam);
    let dual_eta: Vec<f64> = me.iter().zip(&coupling).map(|(m, c)| control.theta * m + c).collect();
    let (sg, so) = disc.mass_solvers()?;
    Ok(ReducedGradient {
        gamma: sg.solve(&dual_u)?,
        kappa: so.solve(&dual_eta)?,
        dual_u,
        dual_eta,
    })
}

/// Everything one gradient evaluation produces.
#[derive(Debug, Clone)]
pub struct GradientEvaluation {
    pub forward: ForwardState,
    pub objective: ObjectiveBreakdown,
    pub adjoint_flow: AdjointFlow,
    pub adjoint_displacement: AdjointDisplacement,
    pub gradient: ReducedGradient,
}

/// Adjoint steps after a forward solve.
pub fn gradient_from_forward(
    problem: &Problem<'_>,
    control: &ControlState,
    mult: &MultiplierState,
    forward: ForwardState,
) -> Result<GradientEvaluation> {
    let disc = problem.disc;
    let tr = forward.transform();
    let objective = objective_at(problem, control, &forward, mult);
    let adjoint_flow = solve_adjoint_flow(disc, &forward.flow, tr, problem.params.nu, &problem.solvers.adjoint_flow)
        .map_err(|e| e.at_stage(Stage::AdjointFlow))?;
    let r = assemble_r(
        disc,
        &forward.flow.state.values,
        &adjoint_flow.lambda.values,
        tr,
        &problem.params,
        mult,
        &forward.g_def,
        LagrangianTerms::ALL,
    );
    let w = &tr.w.values;
    let adjoint_displacement =
        solve_adjoint_displacement(disc, &r, &control.eta, w, &problem.solvers.adjoint_displacement)
            .map_err(|e| e.at_stage(Stage::AdjointDisplacement))?;
    let gradient =
        reduced_gradient(disc, &adjoint_displacement, control, w).map_err(|e| e.at_stage(Stage::ReducedGradient))?;
    Ok(GradientEvaluation {
        forward,
        objective,
        adjoint_flow,
        adjoint_displacement,
        gradient,
    })
}

/// u → w → (v, p) → λ → λ_w → (γ, κ).
pub fn compute_reduced_gradients(
    problem: &Problem<'_>,
    control: &ControlState,
    mult: &MultiplierState,
    warm: Option<&ForwardState>,
) -> Result<GradientEvaluation> {
    let forward = forward_solve(problem, control, warm)?;
    gradient_from_forward(problem, control, mult, forward)
}

/// J_aug after a full forward chain.
pub fn reduced_objective(
    problem: &Problem<'_>,
    control: &ControlState,
    mult: &MultiplierState,
    warm: Option<&ForwardState>,
) -> Result<f64> {
    let fwd = forward_solve(problem, control, warm)?;
    Ok(objective_at(problem, control, &fwd, mult).total())
}

/// Central difference of J_aug along (du, dη). η is not projected.
pub fn fd_gradient_oracle(
    problem: &Problem<'_>,
    control: &ControlState,
    mult: &MultiplierState,
    direction: (&[f64], &[f64]),
    h: f64,
    warm: Option<&ForwardState>,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("FD step must be positive, got {h}")));
    }
    let (du, de) = direction;
    if du.len() != control.u.len() || de.len() != control.eta.len() {
        return Err(Error::SpaceMismatch("direction does not match the control sizes".into()));
    }
    if du.iter().chain(de).all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let shifted = |s: f64| {
        let mut c = control.clone();
        c.u.iter_mut().zip(du).for_each(|(u, d)| *u += s * d);
        c.eta.iter_mut().zip(de).for_each(|(e, d)| *e += s * d);
        c
    };
    let jp = reduced_objective(problem, &shifted(h), mult, warm)?;
    let jm = reduced_objective(problem, &shifted(-h), mult, warm)?;
    Ok((jp - jm) / (2.0 * h))
}

/// Directional derivative ⟨dual, direction⟩ from a gradient evaluation.
pub fn directional_derivative(grad: &ReducedGradient, direction: (&[f64], &[f64])) -> f64 {
    dot(&grad.dual_u, direction.0) + dot(&grad.dual_eta, direction.1)
}

/// FD of the Lagrangian in w along `dw` at fixed (x, λ), for checking R.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_fd(
    disc: &Discretization,
    x: &[f64],
    lambda: &[f64],
    w: &[f64],
    dw: &[f64],
    params: &ObjectiveParams,
    mult: &MultiplierState,
    g0: &[f64; 3],
    terms: LagrangianTerms,
    h: f64,
) -> Result<f64> {
    let (mesh, fine) = (disc.fine_mesh(), disc.fine());
    let at = |s: f64| -> Result<f64> {
        let ws: Vec<f64> = w.iter().zip(dw).map(|(a, b)| a + s * b).collect();
        let tr = compute_transform(mesh, &fine.geom, &FieldVector::new(&fine.p1v, ws)?)?;
        Ok(lagrangian_value(disc, x, lambda, &tr, params, mult, g0, terms))
    };
    Ok((at(h)? - at(-h)?) / (2.0 * h))
}

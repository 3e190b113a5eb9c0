//! Augmented objective, geometric defect and the forward solve chain.

use crate::discretization::Discretization;
use crate::error::{Error, Result, Stage};
use crate::extension::{solve_extension, ControlState, ExtensionConfig, ExtensionSolution};
use crate::fem::{
    control_regularization, det_penalty, dissipation, eta_regularization, geometric_constraints, TransformState,
};
use crate::flow::{solve_state, FlowSolution, FlowSolverConfig, InflowSpec};
use crate::linalg::{dot, SparseMatrix};
use crate::solve::LinearSolverConfig;

/// Multipliers and penalty of the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierState {
    /// (volume, barycenter x, barycenter y)
    pub lambda_g: [f64; 3],
    pub tau: f64,
    pub lambda_inc: f64,
    pub tau_inc: f64,
    pub eps_g: f64,
}

impl Default for MultiplierState {
    fn default() -> Self {
        MultiplierState {
            lambda_g: [0.0; 3],
            tau: 1.0,
            lambda_inc: 1.0,
            tau_inc: 2.0,
            eps_g: 1e-3,
        }
    }
}

impl MultiplierState {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.lambda_inc > 0.0 && self.tau_inc > 1.0 && self.eps_g > 0.0) {
            return Err(Error::Config(
                "multipliers: need tau > 0, lambda_inc > 0, tau_inc > 1, eps_g > 0".into(),
            ));
        }
        Ok(())
    }

    /// λ_g + 2τ g_def: the weight of ∂g/∂w in the derivative of the
    /// multiplier terms.
    pub fn constraint_weight(&self, g_def: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.lambda_g[k] + 2.0 * self.tau * g_def[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub nu: f64,
    pub beta: f64,
    /// Lower bound b on det DF.
    pub det_lower_bound: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams {
            nu: 0.03,
            beta: 100.0,
            det_lower_bound: 0.001,
        }
    }
}

/// Individual contributions to J_aug.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveBreakdown {
    pub dissipation: f64,
    pub control_reg: f64,
    pub eta_reg: f64,
    pub det_penalty: f64,
    /// λ_g·g_def
    pub multiplier: f64,
    /// τ‖g_def‖²
    pub augmentation: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.dissipation + self.control_reg + self.eta_reg + self.det_penalty + self.multiplier + self.augmentation
    }
}

pub fn geometric_defect(disc: &Discretization, g0: &[f64; 3], tr: &TransformState) -> [f64; 3] {
    let g = geometric_constraints(disc.fine_mesh(), &disc.fine().geom, tr);
    std::array::from_fn(|k| g[k] - g0[k])
}

/// g(0) of the finest level.
pub fn reference_constraints(disc: &Discretization) -> [f64; 3] {
    let tr = TransformState::identity(disc.fine_mesh());
    geometric_constraints(disc.fine_mesh(), &disc.fine().geom, &tr)
}

pub fn evaluate_augmented_objective(
    disc: &Discretization,
    x: &[f64],
    control: &ControlState,
    tr: &TransformState,
    params: &ObjectiveParams,
    mult: &MultiplierState,
    g_def: &[f64; 3],
) -> ObjectiveBreakdown {
    let fine = disc.fine();
    ObjectiveBreakdown {
        dissipation: dissipation(disc.fine_mesh(), &fine.geom, &fine.mixed, tr, x, params.nu),
        control_reg: control_regularization(&disc.mass_gamma, &control.u, control.alpha),
        eta_reg: eta_regularization(&disc.mass_omega, &control.eta, control.eta_mid(), control.theta),
        det_penalty: det_penalty(&fine.geom, tr, params.det_lower_bound, params.beta),
        multiplier: dot(&mult.lambda_g, g_def),
        augmentation: mult.tau * dot(g_def, g_def),
    }
}

/// Solver settings of the whole gradient chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub extension: ExtensionConfig,
    pub flow: FlowSolverConfig,
    pub adjoint_flow: LinearSolverConfig,
    pub adjoint_displacement: LinearSolverConfig,
}

impl Default for ChainConfig {
    fn default() -> Self {
        let flow = FlowSolverConfig::default();
        ChainConfig {
            extension: ExtensionConfig::default(),
            flow,
            adjoint_flow: flow.linear,
            adjoint_displacement: LinearSolverConfig {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                ..LinearSolverConfig::default()
            },
        }
    }
}

impl ChainConfig {
    /// Every nonlinear and linear relative tolerance set to `tol`.
    pub fn tightened(mut self, tol: f64) -> ChainConfig {
        for n in [&mut self.extension.newton, &mut self.flow.newton] {
            n.rel_tol = tol;
            n.abs_tol = n.abs_tol.min(tol * 1e-2);
        }
        for l in [
            &mut self.extension.linear,
            &mut self.flow.linear,
            &mut self.adjoint_flow,
            &mut self.adjoint_displacement,
        ] {
            l.rel_tol = l.rel_tol.min(tol);
            l.abs_tol = l.abs_tol.min(tol * 1e-2);
        }
        self
    }
}

/// Fixed data of one optimization problem.
#[derive(Debug)]
pub struct Problem<'d> {
    pub disc: &'d Discretization,
    pub params: ObjectiveParams,
    pub inflow: InflowSpec,
    pub solvers: ChainConfig,
    /// g(0) on the finest level.
    pub g0: [f64; 3],
}

impl<'d> Problem<'d> {
    pub fn new(disc: &'d Discretization, params: ObjectiveParams, inflow: InflowSpec, solvers: ChainConfig) -> Problem<'d> {
        Problem {
            disc,
            params,
            inflow,
            solvers,
            g0: reference_constraints(disc),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pub extension: ExtensionSolution,
    pub flow: FlowSolution,
    pub g_def: [f64; 3],
}

impl ForwardState {
    pub fn transform(&self) -> &TransformState {
        &self.extension.transform
    }
}

/// u, η → w → (v, p). `warm` supplies Newton initial guesses.
pub fn forward_solve(problem: &Problem<'_>, control: &ControlState, warm: Option<&ForwardState>) -> Result<ForwardState> {
    let extension = solve_extension(problem.disc, control, warm.map(|f| &f.extension.w), &problem.solvers.extension)
        .map_err(|e| e.at_stage(Stage::Extension))?;
    let flow = solve_state(
        problem.disc,
        &extension.transform,
        problem.params.nu,
        &problem.inflow,
        warm.map(|f| &f.flow),
        &problem.solvers.flow,
    )
    .map_err(|e| e.at_stage(Stage::State))?;
    let g_def = geometric_defect(problem.disc, &problem.g0, &extension.transform);
    Ok(ForwardState { extension, flow, g_def })
}

/// J_aug after a forward solve.
pub fn objective_at(problem: &Problem<'_>, control: &ControlState, fwd: &ForwardState, mult: &MultiplierState) -> ObjectiveBreakdown {
    evaluate_augmented_objective(
        problem.disc,
        &fwd.flow.state.values,
        control,
        fwd.transform(),
        &problem.params,
        mult,
        &fwd.g_def,
    )
}

/// ‖u‖ in L²(Γ_obs).
pub fn trace_norm(mass_gamma: &SparseMatrix, u: &[f64]) -> f64 {
    dot(u, &mass_gamma.mul_vec(u)).max(0.0).sqrt()
}

//! Augmented-Lagrange outer loop and box-constrained limited-memory BFGS.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::adjoint::{gradient_from_forward, GradientEvaluation, ReducedGradient};
use crate::error::{Error, Result, Stage};
use crate::extension::{project_eta, ControlState};
use crate::linalg::{dot, norm2, SparseMatrix};
use crate::objective::{forward_solve, objective_at, trace_norm, ForwardState, MultiplierState, Problem};

/// (s, z, ρ) pairs of the limited-memory update in a flat control layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsMemory {
    pub m: usize,
    pub s: VecDeque<Vec<f64>>,
    pub z: VecDeque<Vec<f64>>,
    pub rho: VecDeque<f64>,
    /// Probe step of the active-set indicator.
    pub sigma: f64,
}

impl LbfgsMemory {
    pub fn new(m: usize, sigma: f64) -> LbfgsMemory {
        LbfgsMemory {
            m,
            s: VecDeque::new(),
            z: VecDeque::new(),
            rho: VecDeque::new(),
            sigma,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn clear(&mut self) {
        self.s.clear();
        self.z.clear();
        self.rho.clear();
    }

    /// Stores (s, z); returns false (pair dropped) when (s, z) ≤ 0.
    pub fn push(&mut self, s: Vec<f64>, z: Vec<f64>, ip: &dyn Fn(&[f64], &[f64]) -> f64) -> bool {
        if self.m == 0 {
            return true;
        }
        let sz = ip(&s, &z);
        if !(sz > 0.0) || !sz.is_finite() {
            log::warn!("lBFGS curvature pair skipped: (s, z) = {sz:e}");
            return false;
        }
        if self.s.len() == self.m {
            self.s.pop_front();
            self.z.pop_front();
            self.rho.pop_front();
        }
        self.s.push_back(s);
        self.z.push_back(z);
        self.rho.push_back(1.0 / sz);
        true
    }

    /// Two-loop recursion applied to `q0`, newest pair first.
    pub fn apply(&self, q0: &[f64], ip: &dyn Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
        let mut q = q0.to_vec();
        let k = self.s.len();
        if k == 0 {
            return q;
        }
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * ip(&self.s[i], &q);
            axpy(-alpha[i], &self.z[i], &mut q);
        }
        let (sl, zl) = (&self.s[k - 1], &self.z[k - 1]);
        let zz = ip(zl, zl);
        if zz > 0.0 {
            let g = ip(sl, zl) / zz;
            q.iter_mut().for_each(|v| *v *= g);
        }
        for i in 0..k {
            let b = self.rho[i] * ip(&self.z[i], &q);
            axpy(alpha[i] - b, &self.s[i], &mut q);
        }
        q
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// χ_η: 1 where η − σ∇η stays inside the bounds.
pub fn eta_indicator(eta: &[f64], kappa: &[f64], sigma: f64, lb: f64, ub: f64) -> Vec<bool> {
    eta.iter()
        .zip(kappa)
        .map(|(&e, &k)| {
            let t = e - sigma * k;
            lb <= t && t <= ub
        })
        .collect()
}

/// (·,·)_X̂ on flat vectors [u; η]: L²(Γ_obs) plus L²(Ω) restricted to the
/// inactive η-dofs.
pub struct ControlInnerProduct<'a> {
    pub mass_u: &'a SparseMatrix,
    pub mass_eta: &'a SparseMatrix,
    pub chi: Option<&'a [bool]>,
}

impl ControlInnerProduct<'_> {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let nu = self.mass_u.nrows;
        let (au, ae) = a.split_at(nu);
        let (bu, be) = b.split_at(nu);
        let mut s = dot(au, &self.mass_u.mul_vec(bu));
        match self.chi {
            None => s += dot(ae, &self.mass_eta.mul_vec(be)),
            Some(chi) => {
                let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(chi).map(|(x, &c)| if c { *x } else { 0.0 }).collect() };
                s += dot(&mask(ae), &self.mass_eta.mul_vec(&mask(be)));
            }
        }
        s
    }
}

pub fn flatten(u: &[f64], eta: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(u.len() + eta.len());
    v.extend_from_slice(u);
    v.extend_from_slice(eta);
    v
}

/// Step of Alg. 2 with the memory as given: q from −(γ, κ) through the
/// two-loop recursion, then (u + q₁, P(η + q₂)). Returns the new control
/// and q.
pub fn lbfgs_b_step(
    memory: &LbfgsMemory,
    control: &ControlState,
    grad: &ReducedGradient,
    mass_u: &SparseMatrix,
    mass_eta: &SparseMatrix,
) -> (ControlState, Vec<f64>) {
    let chi = eta_indicator(&control.eta, &grad.kappa, memory.sigma, control.eta_lb, control.eta_ub);
    let ip = ControlInnerProduct {
        mass_u,
        mass_eta,
        chi: Some(&chi),
    };
    let neg: Vec<f64> = flatten(&grad.gamma, &grad.kappa).iter().map(|v| -v).collect();
    let q = memory.apply(&neg, &|a, b| ip.eval(a, b));
    (apply_step(control, &q, 1.0), q)
}

/// (u + t q₁, P(η + t q₂))
pub fn apply_step(control: &ControlState, q: &[f64], t: f64) -> ControlState {
    let mut c = control.clone();
    let nu = c.u.len();
    c.u.iter_mut().zip(&q[..nu]).for_each(|(u, d)| *u += t * d);
    c.eta.iter_mut().zip(&q[nu..]).for_each(|(e, d)| *e += t * d);
    project_eta(&mut c);
    c
}

/// ‖(γ, P(η − κ) − η)‖_X
pub fn projected_gradient_norm(control: &ControlState, grad: &ReducedGradient, mass_u: &SparseMatrix, mass_eta: &SparseMatrix) -> f64 {
    let pe: Vec<f64> = control
        .eta
        .iter()
        .zip(&grad.kappa)
        .map(|(&e, &k)| (e - k).clamp(control.eta_lb, control.eta_ub) - e)
        .collect();
    let v = flatten(&grad.gamma, &pe);
    let ip = ControlInnerProduct {
        mass_u,
        mass_eta,
        chi: None,
    };
    ip.eval(&v, &v).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// ‖g_def‖ < ε_g: τ ← τ_inc τ.
    Penalty,
    /// otherwise: λ_g ← λ_g + λ_inc g_def.
    Multiplier,
}

/// Outer update applied after inner loop `outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterUpdate {
    pub outer: usize,
    pub step: usize,
    pub g_def: [f64; 3],
    pub branch: Branch,
    pub before: MultiplierState,
    pub after: MultiplierState,
}

/// Alg. 1 lines 9–12.
pub fn update_multipliers(mult: &MultiplierState, g_def: &[f64; 3]) -> (MultiplierState, Branch) {
    let mut m = *mult;
    if norm2(g_def) < mult.eps_g {
        m.tau *= mult.tau_inc;
        (m, Branch::Penalty)
    } else {
        for k in 0..3 {
            m.lambda_g[k] += mult.lambda_inc * g_def[k];
        }
        (m, Branch::Multiplier)
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub step: usize,
    pub j_aug: f64,
    pub j: f64,
    pub g_def_norm: f64,
    pub lambda_norm: f64,
    pub tau: f64,
    pub min_det: f64,
    pub grad_norm: f64,
    pub event: String,
}

pub const CSV_HEADER: &str = "step,J_aug,j,g_def_norm,lambda_norm,tau,min_detDF,grad_norm,event";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceRecord {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.step, r.j_aug, r.j, r.g_def_norm, r.lambda_norm, r.tau, r.min_det, r.grad_norm, r.event
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub m: usize,
    pub sigma: f64,
    pub eps_inner: f64,
    pub eps_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Budget on inner steps over the whole run.
    pub max_steps: usize,
    /// Step halvings of the safeguard.
    pub max_halvings: usize,
    /// Safeguard also rejects steps that increase J_aug.
    pub require_decrease: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            m: 10,
            sigma: 1e-8,
            eps_inner: 1e-4,
            eps_outer: 1e-5,
            max_inner: 20,
            max_outer: 50,
            max_steps: 100,
            max_halvings: 5,
            require_decrease: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.eps_inner > 0.0 && self.eps_outer > 0.0) {
            return Err(Error::Config("optimizer: sigma, eps_inner and eps_outer must be positive".into()));
        }
        Ok(())
    }
}

/// Current iterate with its forward solution and gradient.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub control: ControlState,
    pub eval: GradientEvaluation,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub iterate: Iterate,
    pub steps: usize,
    pub converged: bool,
    /// Stage failure that ended the loop early.
    pub failure: Option<String>,
    /// Ended by `no_admissible_step`.
    pub stalled: bool,
}

fn record_row(step: usize, it: &Iterate, mult: &MultiplierState, grad_norm: f64) -> ConvergenceRow {
    let f = &it.eval.forward;
    ConvergenceRow {
        step,
        j_aug: it.eval.objective.total(),
        j: it.eval.objective.dissipation,
        g_def_norm: norm2(&f.g_def),
        lambda_norm: norm2(&mult.lambda_g),
        tau: mult.tau,
        min_det: f.transform().min_det(),
        grad_norm,
        event: String::new(),
    }
}

/// Forward solve of a candidate; None if it fails, inverts an element or
/// gives a non-finite objective.
fn try_candidate(
    problem: &Problem<'_>,
    control: &ControlState,
    mult: &MultiplierState,
    warm: &ForwardState,
) -> Option<(ForwardState, f64)> {
    let fwd = forward_solve(problem, control, Some(warm)).ok()?;
    if fwd.transform().inverted_count() > 0 {
        return None;
    }
    let j = objective_at(problem, control, &fwd, mult).total();
    j.is_finite().then_some((fwd, j))
}

pub fn initial_iterate(problem: &Problem<'_>, control: ControlState, mult: &MultiplierState) -> Result<Iterate> {
    let fwd = forward_solve(problem, &control, None)?;
    let eval = gradient_from_forward(problem, &control, mult, fwd)?;
    Ok(Iterate { control, eval })
}

/// Inner iterations of Alg. 1 at fixed multipliers. Rows are appended to
/// `record`, steps numbered from `first_step`. `gradient_step` is the first
/// trial length of steps taken without curvature memory; it is updated to
/// twice the last accepted one (at most 1).
#[allow(clippy::too_many_arguments)]
pub fn inner_loop(
    problem: &Problem<'_>,
    start: Iterate,
    mult: &MultiplierState,
    cfg: &OptimizerConfig,
    max_inner: usize,
    first_step: usize,
    record: &mut ConvergenceRecord,
    gradient_step: &mut f64,
    observer: &mut dyn FnMut(usize, &Iterate),
) -> InnerOutcome {
    let (mg, mo) = (&problem.disc.mass_gamma, &problem.disc.mass_omega);
    let mut memory = LbfgsMemory::new(cfg.m, cfg.sigma);
    let mut it = start;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut steps = 0;
    while steps < max_inner {
        let grad = &it.eval.gradient;
        let gnorm = projected_gradient_norm(&it.control, grad, mg, mo);
        let xk = flatten(&it.control.u, &it.control.eta);
        let gk = flatten(&grad.gamma, &grad.kappa);
        if let Some((xp, gp)) = prev.take() {
            let chi = eta_indicator(&it.control.eta, &grad.kappa, cfg.sigma, it.control.eta_lb, it.control.eta_ub);
            let ip = ControlInnerProduct {
                mass_u: mg,
                mass_eta: mo,
                chi: Some(&chi),
            };
            let s: Vec<f64> = xk.iter().zip(&xp).map(|(a, b)| a - b).collect();
            let z: Vec<f64> = gk.iter().zip(&gp).map(|(a, b)| a - b).collect();
            memory.push(s, z, &|a, b| ip.eval(a, b));
        }
        let mut row = record_row(first_step + steps, &it, mult, gnorm);
        if gnorm < cfg.eps_inner {
            row.event = "inner_converged".into();
            record.rows.push(row);
            return InnerOutcome {
                iterate: it,
                steps: steps + 1,
                converged: true,
                failure: None,
                stalled: false,
            };
        }
        let j_cur = it.eval.objective.total();
        let mut accepted = None;
        let mut tag = String::new();
        for attempt in 0..2 {
            if attempt == 1 {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
                tag = "memory_reset|".into();
            }
            let (_, q) = lbfgs_b_step(&memory, &it.control, grad, mg, mo);
            let plain = memory.is_empty();
            let mut t = if plain { *gradient_step } else { 1.0 };
            let halvings = if plain { 2 * cfg.max_halvings } else { cfg.max_halvings };
            for h in 0..=halvings {
                let cand = apply_step(&it.control, &q, t);
                if let Some((fwd, j)) = try_candidate(problem, &cand, mult, &it.eval.forward) {
                    if !cfg.require_decrease || j <= j_cur {
                        if h > 0 {
                            tag.push_str(&format!("safeguard:{h}"));
                        }
                        if plain {
                            *gradient_step = (2.0 * t).min(1.0);
                        }
                        accepted = Some((cand, fwd));
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        row.event = tag.trim_end_matches('|').to_string();
        record.rows.push(row);
        steps += 1;
        let Some((cand, fwd)) = accepted else {
            let last = record.rows.last_mut().expect("row pushed");
            last.event = "no_admissible_step".into();
            return InnerOutcome {
                iterate: it,
                steps,
                converged: false,
                failure: None,
                stalled: true,
            };
        };
        match gradient_from_forward(problem, &cand, mult, fwd) {
            Ok(eval) => {
                prev = Some((xk, gk));
                it = Iterate { control: cand, eval };
                observer(first_step + steps, &it);
            }
            Err(e) => {
                return InnerOutcome {
                    iterate: it,
                    steps,
                    converged: false,
                    failure: Some(e.to_string()),
                    stalled: false,
                };
            }
        }
    }
    InnerOutcome {
        iterate: it,
        steps,
        converged: false,
        failure: None,
        stalled: false,
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub iterate: Iterate,
    pub multipliers: MultiplierState,
    pub record: ConvergenceRecord,
    pub updates: Vec<OuterUpdate>,
    pub outer_iterations: usize,
    pub steps: usize,
    pub converged: bool,
    pub failure: Option<String>,
}

/// Alg. 1.
pub fn outer_loop(
    problem: &Problem<'_>,
    control: ControlState,
    mult: MultiplierState,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    outer_loop_observed(problem, control, mult, cfg, &mut |_, _| {})
}

/// [`outer_loop`] calling `observer(step, iterate)` after every accepted step.
pub fn outer_loop_observed(
    problem: &Problem<'_>,
    control: ControlState,
    mult: MultiplierState,
    cfg: &OptimizerConfig,
    observer: &mut dyn FnMut(usize, &Iterate),
) -> Result<OptimizationResult> {
    cfg.validate()?;
    mult.validate()?;
    let mut mult = mult;
    let mut iterate = initial_iterate(problem, control, &mult).map_err(|e| e.at_stage(Stage::Optimizer))?;
    let mut record = ConvergenceRecord::default();
    let mut updates = Vec::new();
    let mut steps = 0;
    let mut k = 0;
    let mut converged = false;
    let mut failure = None;
    let mut gradient_step = 1.0;
    while k < cfg.max_outer && steps < cfg.max_steps {
        let u_prev = iterate.control.u.clone();
        let budget = cfg.max_inner.min(cfg.max_steps - steps);
        let out = inner_loop(problem, iterate, &mult, cfg, budget, steps, &mut record, &mut gradient_step, observer);
        let stalled = out.stalled;
        steps += out.steps;
        iterate = out.iterate;
        if let Some(f) = out.failure {
            failure = Some(f);
            break;
        }
        let g_def = iterate.eval.forward.g_def;
        let (next, branch) = update_multipliers(&mult, &g_def);
        updates.push(OuterUpdate {
            outer: k,
            step: steps,
            g_def,
            branch,
            before: mult,
            after: next,
        });
        if let Some(last) = record.rows.last_mut() {
            let tag = match branch {
                Branch::Penalty => "tau_update",
                Branch::Multiplier => "lambda_update",
            };
            last.event = if last.event.is_empty() { tag.into() } else { format!("{}|{tag}", last.event) };
        }
        mult = next;
        k += 1;
        let du: Vec<f64> = iterate.control.u.iter().zip(&u_prev).map(|(a, b)| a - b).collect();
        if trace_norm(&problem.disc.mass_gamma, &du) < cfg.eps_outer {
            converged = !stalled;
            break;
        }
        if steps < cfg.max_steps {
            // objective changed with the multipliers
            iterate.eval = gradient_from_forward(problem, &iterate.control, &mult, iterate.eval.forward.clone())
                .map_err(|e| e.at_stage(Stage::Optimizer))?;
        }
    }
    Ok(OptimizationResult {
        iterate,
        multipliers: mult,
        record,
        updates,
        outer_iterations: k,
        steps,
        converged,
        failure,
    })
}

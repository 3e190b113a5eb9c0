//! Run configuration: flat `key = value` text with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::InflowSpec;
use crate::linalg::SmootherKind;
use crate::newton::NewtonConfig;
use crate::objective::{ChainConfig, MultiplierState, ObjectiveParams};
use crate::optimizer::OptimizerConfig;
use crate::solve::{LinearMethod, LinearSolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Generated tunnel with the given number of coarse triangles.
    Fixture { elements: usize },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub refinements: usize,
    pub nu: f64,
    pub inflow: InflowSpec,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub det_lower_bound: f64,
    pub eta_lb: f64,
    pub eta_ub: f64,
    pub eta_init: f64,
    pub multipliers: MultiplierState,
    pub optimizer: OptimizerConfig,
    pub solvers: ChainConfig,
    pub output_dir: PathBuf,
    /// Snapshot every n accepted steps, 0 for final output only.
    pub vtk_every: usize,
    pub csv_name: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Fixture { elements: 412 },
            refinements: 2,
            nu: 0.03,
            inflow: InflowSpec::default(),
            alpha: 1e-2,
            beta: 100.0,
            theta: 1e-3,
            det_lower_bound: 0.001,
            eta_lb: 0.0,
            eta_ub: 1.0,
            eta_init: 0.5,
            multipliers: MultiplierState::default(),
            optimizer: OptimizerConfig::default(),
            solvers: ChainConfig::default(),
            output_dir: PathBuf::from("output"),
            vtk_every: 0,
            csv_name: "convergence.csv".into(),
            seed: 0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn parse_method(key: &str, v: &str) -> Result<LinearMethod> {
    match v {
        "auto" => Ok(LinearMethod::Auto),
        "direct" => Ok(LinearMethod::Direct),
        "multigrid" | "mg" => Ok(LinearMethod::Multigrid),
        _ => Err(Error::Config(format!("{key}: expected auto, direct or multigrid, got {v:?}"))),
    }
}

fn method_name(m: LinearMethod) -> &'static str {
    match m {
        LinearMethod::Auto => "auto",
        LinearMethod::Direct => "direct",
        LinearMethod::Multigrid => "multigrid",
    }
}

fn parse_smoother(key: &str, v: &str, omega: f64) -> Result<SmootherKind> {
    match v {
        "jacobi" => Ok(SmootherKind::Jacobi { omega }),
        "ilu0" | "ilu" => Ok(SmootherKind::Ilu0),
        _ => Err(Error::Config(format!("{key}: expected jacobi or ilu0, got {v:?}"))),
    }
}

fn smoother_text(s: SmootherKind) -> (String, f64) {
    match s {
        SmootherKind::Jacobi { omega } => ("jacobi".into(), omega),
        SmootherKind::Ilu0 => ("ilu0".into(), 0.66),
    }
}

fn set_linear(l: &mut LinearSolverConfig, field: &str, key: &str, v: &str) -> Result<bool> {
    match field {
        "method" => l.method = parse_method(key, v)?,
        "rel_tol" => l.rel_tol = parse_f64(key, v)?,
        "abs_tol" => l.abs_tol = parse_f64(key, v)?,
        "max_iter" => l.max_iter = parse_usize(key, v)?,
        "direct_threshold" => l.direct_threshold = parse_usize(key, v)?,
        "pre_smooth" => l.multigrid.pre_smooth = parse_usize(key, v)?,
        "post_smooth" => l.multigrid.post_smooth = parse_usize(key, v)?,
        "smoother" => {
            let omega = match l.multigrid.smoother {
                SmootherKind::Jacobi { omega } => omega,
                SmootherKind::Ilu0 => 0.66,
            };
            l.multigrid.smoother = parse_smoother(key, v, omega)?;
        }
        "jacobi_omega" => {
            let omega = parse_f64(key, v)?;
            if let SmootherKind::Jacobi { omega: o } = &mut l.multigrid.smoother {
                *o = omega;
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn set_newton(n: &mut NewtonConfig, field: &str, key: &str, v: &str) -> Result<bool> {
    match field {
        "abs_tol" => n.abs_tol = parse_f64(key, v)?,
        "rel_tol" => n.rel_tol = parse_f64(key, v)?,
        "max_iter" => n.max_iter = parse_usize(key, v)?,
        "max_halvings" => n.max_halvings = parse_usize(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, &path.display().to_string(), base)
    }

    /// Parses `text`; relative file paths resolve against `base`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: i + 1,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if let Some(prev) = seen.insert(k.to_string(), i + 1) {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: i + 1,
                    msg: format!("{k} already set on line {prev}"),
                });
            }
            cfg.set(k, v, base).map_err(|e| match e {
                Error::Config(msg) => Error::Parse {
                    path: origin.into(),
                    line: i + 1,
                    msg,
                },
                e => e,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let f = |v: &str| parse_f64(key, v);
        let u = |v: &str| parse_usize(key, v);
        match key {
            "mesh.source" => {
                self.mesh = match (v, &self.mesh) {
                    ("fixture", MeshSource::Fixture { .. }) => self.mesh.clone(),
                    ("fixture", MeshSource::File(_)) => MeshSource::Fixture { elements: 412 },
                    ("file", MeshSource::File(p)) => MeshSource::File(p.clone()),
                    ("file", MeshSource::Fixture { .. }) => MeshSource::File(PathBuf::new()),
                    _ => return Err(Error::Config(format!("{key}: expected fixture or file, got {v:?}"))),
                }
            }
            "mesh.path" => match &self.mesh {
                MeshSource::File(_) => self.mesh = MeshSource::File(base.join(v)),
                MeshSource::Fixture { .. } => {
                    return Err(Error::Config(format!("{key}: set mesh.source = file first")));
                }
            },
            "mesh.fixture_elements" => match self.mesh {
                MeshSource::Fixture { .. } => self.mesh = MeshSource::Fixture { elements: u(v)? },
                MeshSource::File(_) => {
                    return Err(Error::Config(format!("{key}: only valid with mesh.source = fixture")));
                }
            },
            "mesh.refinements" => self.refinements = u(v)?,
            "physics.nu" => self.nu = f(v)?,
            "physics.inflow.delta" => self.inflow.delta = f(v)?,
            "physics.inflow.scale" => self.inflow.scale = f(v)?,
            "physics.inflow.center" => self.inflow.center = f(v)?,
            "penalty.alpha" => self.alpha = f(v)?,
            "penalty.beta" => self.beta = f(v)?,
            "penalty.theta" => self.theta = f(v)?,
            "penalty.b" => self.det_lower_bound = f(v)?,
            "penalty.eta_lb" => self.eta_lb = f(v)?,
            "penalty.eta_ub" => self.eta_ub = f(v)?,
            "penalty.eta_init" => self.eta_init = f(v)?,
            "outer.tau0" => self.multipliers.tau = f(v)?,
            "outer.tau_inc" => self.multipliers.tau_inc = f(v)?,
            "outer.lambda_inc" => self.multipliers.lambda_inc = f(v)?,
            "outer.eps_g" => self.multipliers.eps_g = f(v)?,
            "outer.eps_inner" => self.optimizer.eps_inner = f(v)?,
            "outer.eps_outer" => self.optimizer.eps_outer = f(v)?,
            "outer.max_inner" => self.optimizer.max_inner = u(v)?,
            "outer.max_outer" => self.optimizer.max_outer = u(v)?,
            "outer.max_steps" => self.optimizer.max_steps = u(v)?,
            "outer.memory" => self.optimizer.m = u(v)?,
            "outer.sigma" => self.optimizer.sigma = f(v)?,
            "outer.max_halvings" => self.optimizer.max_halvings = u(v)?,
            "outer.require_decrease" => self.optimizer.require_decrease = parse_bool(key, v)?,
            "solver.extension.newton.line_search" => self.solvers.extension.newton.line_search = parse_bool(key, v)?,
            "solver.flow.line_search_below_nu" => self.solvers.flow.line_search_below_nu = f(v)?,
            "solver.flow.chord_contraction" => self.solvers.flow.chord_contraction = f(v)?,
            "output.dir" => self.output_dir = base.join(v),
            "output.vtk_every" => self.vtk_every = u(v)?,
            "output.csv" => self.csv_name = v.to_string(),
            "seed" => self.seed = v.parse().map_err(|_| Error::Config(format!("{key}: expected an integer")))?,
            _ => {
                let handled = if let Some(rest) = key.strip_prefix("solver.extension.newton.") {
                    set_newton(&mut self.solvers.extension.newton, rest, key, v)?
                } else if let Some(rest) = key.strip_prefix("solver.flow.newton.") {
                    set_newton(&mut self.solvers.flow.newton, rest, key, v)?
                } else if let Some(rest) = key.strip_prefix("solver.extension.linear.") {
                    set_linear(&mut self.solvers.extension.linear, rest, key, v)?
                } else if let Some(rest) = key.strip_prefix("solver.flow.linear.") {
                    set_linear(&mut self.solvers.flow.linear, rest, key, v)?
                } else if let Some(rest) = key.strip_prefix("solver.adjoint_flow.") {
                    set_linear(&mut self.solvers.adjoint_flow, rest, key, v)?
                } else if let Some(rest) = key.strip_prefix("solver.adjoint_displacement.") {
                    set_linear(&mut self.solvers.adjoint_displacement, rest, key, v)?
                } else {
                    false
                };
                if !handled {
                    return Err(Error::Config(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("physics.nu", self.nu),
            ("physics.inflow.delta", self.inflow.delta),
            ("penalty.b", self.det_lower_bound),
            ("outer.eps_g", self.multipliers.eps_g),
            ("outer.eps_inner", self.optimizer.eps_inner),
            ("outer.eps_outer", self.optimizer.eps_outer),
            ("outer.sigma", self.optimizer.sigma),
            ("outer.tau0", self.multipliers.tau),
            ("outer.lambda_inc", self.multipliers.lambda_inc),
        ];
        for (k, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("penalty.alpha", self.alpha),
            ("penalty.beta", self.beta),
            ("penalty.theta", self.theta),
        ];
        for (k, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{k} must be non-negative, got {v}")));
            }
        }
        let chord = self.solvers.flow.chord_contraction;
        if !(0.0..1.0).contains(&chord) {
            return Err(Error::Config(format!("solver.flow.chord_contraction must lie in [0, 1), got {chord}")));
        }
        if !(self.multipliers.tau_inc > 1.0) {
            return Err(Error::Config(format!("outer.tau_inc must exceed 1, got {}", self.multipliers.tau_inc)));
        }
        if !(self.eta_lb <= self.eta_init && self.eta_init <= self.eta_ub) {
            return Err(Error::Config(format!(
                "penalty.eta_init: need eta_lb <= eta_init <= eta_ub, got {} <= {} <= {}",
                self.eta_lb, self.eta_init, self.eta_ub
            )));
        }
        match &self.mesh {
            MeshSource::Fixture { elements } if *elements < 64 => {
                return Err(Error::Config(format!("mesh.fixture_elements must be at least 64, got {elements}")));
            }
            MeshSource::File(p) if p.as_os_str().is_empty() => {
                return Err(Error::Config("mesh.path is required with mesh.source = file".into()));
            }
            _ => {}
        }
        let lin = [
            ("solver.extension.linear", &self.solvers.extension.linear),
            ("solver.flow.linear", &self.solvers.flow.linear),
            ("solver.adjoint_flow", &self.solvers.adjoint_flow),
            ("solver.adjoint_displacement", &self.solvers.adjoint_displacement),
        ];
        for (k, l) in lin {
            l.validate(k)?;
        }
        for (k, n) in [
            ("solver.extension.newton", &self.solvers.extension.newton),
            ("solver.flow.newton", &self.solvers.flow.newton),
        ] {
            if !(n.abs_tol > 0.0 && n.rel_tol > 0.0) || n.max_iter == 0 {
                return Err(Error::Config(format!("{k}: tolerances and max_iter must be positive")));
            }
        }
        Ok(())
    }

    pub fn objective_params(&self) -> ObjectiveParams {
        ObjectiveParams {
            nu: self.nu,
            beta: self.beta,
            det_lower_bound: self.det_lower_bound,
        }
    }

    /// Every setting in `key = value` form, parseable by [`RunConfig::parse`]
    /// (paths are written as given).
    pub fn to_text(&self) -> String {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        match &self.mesh {
            MeshSource::Fixture { elements } => {
                put("mesh.source", "fixture".into());
                put("mesh.fixture_elements", elements.to_string());
            }
            MeshSource::File(p) => {
                put("mesh.source", "file".into());
                put("mesh.path", p.display().to_string());
            }
        }
        put("mesh.refinements", self.refinements.to_string());
        put("physics.nu", format!("{:e}", self.nu));
        put("physics.inflow.delta", format!("{:e}", self.inflow.delta));
        put("physics.inflow.scale", format!("{:e}", self.inflow.scale));
        put("physics.inflow.center", format!("{:e}", self.inflow.center));
        put("penalty.alpha", format!("{:e}", self.alpha));
        put("penalty.beta", format!("{:e}", self.beta));
        put("penalty.theta", format!("{:e}", self.theta));
        put("penalty.b", format!("{:e}", self.det_lower_bound));
        put("penalty.eta_lb", format!("{:e}", self.eta_lb));
        put("penalty.eta_ub", format!("{:e}", self.eta_ub));
        put("penalty.eta_init", format!("{:e}", self.eta_init));
        let m = &self.multipliers;
        put("outer.tau0", format!("{:e}", m.tau));
        put("outer.tau_inc", format!("{:e}", m.tau_inc));
        put("outer.lambda_inc", format!("{:e}", m.lambda_inc));
        put("outer.eps_g", format!("{:e}", m.eps_g));
        let o = &self.optimizer;
        put("outer.eps_inner", format!("{:e}", o.eps_inner));
        put("outer.eps_outer", format!("{:e}", o.eps_outer));
        put("outer.max_inner", o.max_inner.to_string());
        put("outer.max_outer", o.max_outer.to_string());
        put("outer.max_steps", o.max_steps.to_string());
        put("outer.memory", o.m.to_string());
        put("outer.sigma", format!("{:e}", o.sigma));
        put("outer.max_halvings", o.max_halvings.to_string());
        put("outer.require_decrease", o.require_decrease.to_string());
        let s = &self.solvers;
        for (p, n) in [("solver.extension.newton", &s.extension.newton), ("solver.flow.newton", &s.flow.newton)] {
            put(&format!("{p}.abs_tol"), format!("{:e}", n.abs_tol));
            put(&format!("{p}.rel_tol"), format!("{:e}", n.rel_tol));
            put(&format!("{p}.max_iter"), n.max_iter.to_string());
            put(&format!("{p}.max_halvings"), n.max_halvings.to_string());
        }
        put("solver.extension.newton.line_search", s.extension.newton.line_search.to_string());
        put("solver.flow.line_search_below_nu", format!("{:e}", s.flow.line_search_below_nu));
        put("solver.flow.chord_contraction", format!("{:e}", s.flow.chord_contraction));
        for (p, l) in [
            ("solver.extension.linear", &s.extension.linear),
            ("solver.flow.linear", &s.flow.linear),
            ("solver.adjoint_flow", &s.adjoint_flow),
            ("solver.adjoint_displacement", &s.adjoint_displacement),
        ] {
            put(&format!("{p}.method"), method_name(l.method).into());
            put(&format!("{p}.rel_tol"), format!("{:e}", l.rel_tol));
            put(&format!("{p}.abs_tol"), format!("{:e}", l.abs_tol));
            put(&format!("{p}.max_iter"), l.max_iter.to_string());
            put(&format!("{p}.direct_threshold"), l.direct_threshold.to_string());
            put(&format!("{p}.pre_smooth"), l.multigrid.pre_smooth.to_string());
            put(&format!("{p}.post_smooth"), l.multigrid.post_smooth.to_string());
            let (name, omega) = smoother_text(l.multigrid.smoother);
            put(&format!("{p}.smoother"), name);
            put(&format!("{p}.jacobi_omega"), format!("{omega:e}"));
        }
        put("output.dir", self.output_dir.display().to_string());
        put("output.vtk_every", self.vtk_every.to_string());
        put("output.csv", self.csv_name.clone());
        put("seed", self.seed.to_string());
        out.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

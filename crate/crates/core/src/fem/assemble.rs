//! Uniform entry point over the individual assembly routines.

use super::element::mesh_geometry;
use super::forms::{
    boundary_coupling, element_pattern, extension_jacobian, ns_jacobian, obstacle_mass, p1_laplacian, p1_mass,
    NsParams,
};
use super::functionals::{
    control_regularization, det_penalty, dissipation, dissipation_gradient, eta_regularization,
    geometric_constraints,
};
use super::space::{DofMap, FieldVector, SpaceKind, TraceSpace};
use super::transform::TransformState;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::MeshLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormId {
    /// (Jacobian, residual) of the pulled-back flow equations.
    NavierStokes,
    /// (Jacobian, volume residual − B u) of the extension equation.
    Extension,
    /// (Jacobianᵀ, −∂j/∂x) of the flow equations.
    AdjointNavierStokes,
    /// (extension Jacobianᵀ, 0); the right side R is assembled separately.
    AdjointExtension,
    /// (M_Γ, 0) on the obstacle trace space.
    ControlMass,
    /// (M_Ω, 0) for linear scalars.
    DomainMass,
    /// (∫∇φ·∇ψ, 0) for linear scalars.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionalId {
    Dissipation,
    DetPenalty { b: f64, beta: f64 },
    EtaRegularization { theta: f64, mid: f64 },
    ControlRegularization { alpha: f64 },
    /// Component 0 = volume, 1..=2 = barycenter moments, of g(w) − g(0).
    GeometricDefect(usize),
}

/// Coefficients for [`assemble_form`] and [`evaluate_functional`]; forms
/// check that what they need is present and lives in the right space.
#[derive(Debug, Clone, Copy)]
pub struct FormInputs<'a> {
    pub mesh: &'a MeshLevel,
    pub transform: Option<&'a TransformState>,
    pub state: Option<&'a FieldVector>,
    pub eta: Option<&'a FieldVector>,
    pub u: Option<&'a [f64]>,
    pub ns: NsParams,
}

impl<'a> FormInputs<'a> {
    pub fn new(mesh: &'a MeshLevel) -> FormInputs<'a> {
        FormInputs {
            mesh,
            transform: None,
            state: None,
            eta: None,
            u: None,
            ns: NsParams::navier_stokes(1.0),
        }
    }

    fn transform(&self) -> Result<TransformState> {
        match self.transform {
            Some(t) => {
                if t.det.len() != self.mesh.num_triangles() {
                    return Err(Error::SpaceMismatch("transform does not match the mesh".into()));
                }
                Ok(t.clone())
            }
            None => Ok(TransformState::identity(self.mesh)),
        }
    }

    fn field(&self, f: Option<&'a FieldVector>, kind: SpaceKind, name: &str) -> Result<&'a [f64]> {
        let f = f.ok_or_else(|| Error::SpaceMismatch(format!("form needs {name}")))?;
        f.check(&DofMap::new(self.mesh, kind))?;
        Ok(&f.values)
    }
}

pub fn assemble_form(form: FormId, inp: &FormInputs<'_>) -> Result<(SparseMatrix, Vec<f64>)> {
    let mesh = inp.mesh;
    let geom = mesh_geometry(mesh);
    match form {
        FormId::NavierStokes | FormId::AdjointNavierStokes => {
            let tr = inp.transform()?;
            let x = inp.field(inp.state, SpaceKind::Mixed, "a mixed flow state")?;
            let dm = DofMap::new(mesh, SpaceKind::Mixed);
            let pat = element_pattern(mesh, &dm);
            let (a, r) = ns_jacobian(mesh, &geom, &dm, &tr, x, &inp.ns, &pat);
            if form == FormId::NavierStokes {
                Ok((a, r))
            } else {
                let g = dissipation_gradient(mesh, &geom, &dm, &tr, x, inp.ns.nu);
                Ok((a.transpose(), g.iter().map(|v| -v).collect()))
            }
        }
        FormId::Extension | FormId::AdjointExtension => {
            let tr = inp.transform()?;
            let eta = inp.field(inp.eta, SpaceKind::P1Scalar, "η")?;
            let dm = DofMap::new(mesh, SpaceKind::P1Vector);
            let pat = element_pattern(mesh, &dm);
            let (a, mut r) = extension_jacobian(mesh, &geom, &tr.w.values, eta, &pat);
            if form == FormId::AdjointExtension {
                return Ok((a.transpose(), vec![0.0; dm.n_dofs]));
            }
            if let Some(u) = inp.u {
                let trace = TraceSpace::obstacle(mesh);
                if u.len() != trace.len() {
                    return Err(Error::SpaceMismatch(format!(
                        "control has {} entries for {} obstacle dofs",
                        u.len(),
                        trace.len()
                    )));
                }
                let bu = boundary_coupling(mesh, &trace).mul_vec(u);
                r.iter_mut().zip(&bu).for_each(|(ri, bi)| *ri -= bi);
            }
            Ok((a, r))
        }
        FormId::ControlMass => {
            let trace = TraceSpace::obstacle(mesh);
            Ok((obstacle_mass(mesh, &trace), vec![0.0; trace.len()]))
        }
        FormId::DomainMass => Ok((p1_mass(mesh, &geom), vec![0.0; mesh.num_vertices()])),
        FormId::Poisson => Ok((p1_laplacian(mesh, &geom), vec![0.0; mesh.num_vertices()])),
    }
}

pub fn evaluate_functional(f: FunctionalId, inp: &FormInputs<'_>) -> Result<f64> {
    let mesh = inp.mesh;
    let geom = mesh_geometry(mesh);
    match f {
        FunctionalId::Dissipation => {
            let tr = inp.transform()?;
            let x = inp.field(inp.state, SpaceKind::Mixed, "a mixed flow state")?;
            let dm = DofMap::new(mesh, SpaceKind::Mixed);
            Ok(dissipation(mesh, &geom, &dm, &tr, x, inp.ns.nu))
        }
        FunctionalId::DetPenalty { b, beta } => Ok(det_penalty(&geom, &inp.transform()?, b, beta)),
        FunctionalId::EtaRegularization { theta, mid } => {
            let eta = inp.field(inp.eta, SpaceKind::P1Scalar, "η")?;
            Ok(eta_regularization(&p1_mass(mesh, &geom), eta, mid, theta))
        }
        FunctionalId::ControlRegularization { alpha } => {
            let u = inp.u.ok_or_else(|| Error::SpaceMismatch("functional needs u".into()))?;
            let trace = TraceSpace::obstacle(mesh);
            if u.len() != trace.len() {
                return Err(Error::SpaceMismatch("control length does not match the trace space".into()));
            }
            Ok(control_regularization(&obstacle_mass(mesh, &trace), u, alpha))
        }
        FunctionalId::GeometricDefect(k) => {
            if k > 2 {
                return Err(Error::InvalidArgument(format!("geometric component {k} out of range")));
            }
            let g = geometric_constraints(mesh, &geom, &inp.transform()?);
            let g0 = geometric_constraints(mesh, &geom, &TransformState::identity(mesh));
            Ok(g[k] - g0[k])
        }
    }
}

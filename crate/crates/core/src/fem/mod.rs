//! Finite element spaces, quadrature, pulled-back element kernels, assembly
//! and boundary conditions.

mod assemble;
mod dirichlet;
mod element;
mod forms;
mod functionals;
mod quadrature;
mod space;
mod transform;

pub use assemble::{assemble_form, evaluate_functional, FormId, FormInputs, FunctionalId};
pub use dirichlet::{apply_dirichlet, constrain_homogeneous, DirichletBc};
pub use element::{mesh_geometry, p2_basis, p2_gradients, ElementGeometry};
pub use forms::{
    boundary_coupling, edge_integral, element_pattern, eta_coupling, extension_element, extension_jacobian,
    extension_residual, flow_points, gather_mixed, ns_element, ns_jacobian, ns_residual, obstacle_mass,
    obstacle_normal, p1_laplacian, p1_mass, pulled, FlowPoint, NsParams, EXT_LOCAL, NS_LOCAL,
};
pub use functionals::{
    control_regularization, det_penalty, dissipation, dissipation_gradient, eta_regularization,
    geometric_constraints,
};
pub use quadrature::{EDGE_G3, TRI_Q4};
pub use space::{DofMap, FieldVector, SpaceKind, TraceSpace};
pub use transform::{compute_transform, det2, element_dw, inv2, Mat2, TransformState};

//! Biquadratic (Q2) Lagrange finite elements on a uniform rectangle.
//!
//! The submodules provide, in order of dependency:
//!
//! * [`mesh`] — the tensor-product node layout, element connectivity, and
//!   point location / interpolation of nodal fields;
//! * [`sparse`] — a fixed-pattern CSR matrix, a banded LDLᵀ direct solver
//!   sized to the Q2 bandwidth, and a Jacobi-preconditioned conjugate
//!   gradient fallback;
//! * [`assemble`] — Gauss-quadrature assembly of mass, reaction, stiffness,
//!   and the fused Crank-Nicolson left-hand-side operator.

pub mod assemble;
pub mod mesh;
pub mod sparse;

pub use assemble::{
    assemble_lhs, assemble_lhs_into, assemble_mass, assemble_reaction, assemble_stiffness,
    ElementRule,
};
pub use mesh::{FemMesh, FieldVector, MeshEdge};
pub use sparse::{solve_cg, BandLdlt, LinearSolver, SparseOperator};

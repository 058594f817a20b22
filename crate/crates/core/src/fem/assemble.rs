//! Sparse assembly of the Q2 bilinear forms.
//!
//! All element integrals use the 3×3 tensor Gauss rule, which integrates the
//! Q2 mass matrix exactly on the affine elements of the uniform mesh.
//! Element loops are serial and visit elements in index order, so assembled
//! values are bit-reproducible run to run.

use crate::fem::mesh::{dshape1, shape1, FemMesh};
use crate::fem::sparse::SparseOperator;
use crate::localization::{SymMatrix2, TransformedDomain, GAUSS3};

/// Per-quadrature-point evaluation of the Q2 basis on one element: values
/// and physical-frame gradients for the nine local functions, plus the
/// quadrature weight times the element Jacobian.
#[derive(Debug, Clone)]
pub struct ElementRule {
    /// (ξ, η) Gauss offsets relative to the element origin, in physical
    /// lengths.
    pub offsets: Vec<[f64; 2]>,
    /// Shape values per point: `phi[q][l]`.
    pub phi: Vec<[f64; 9]>,
    /// Physical gradients per point: `grad[q][l] = [∂ₓN_l, ∂_yN_l]`.
    pub grad: Vec<[[f64; 2]; 9]>,
    /// Quadrature weight × Jacobian per point.
    pub wj: Vec<f64>,
}

impl ElementRule {
    /// Precomputes the rule for a uniform mesh (identical on every element).
    pub fn for_mesh(mesh: &FemMesh) -> Self {
        let hx = mesh.hx();
        let hy = mesh.hy();
        let jac = hx * hy / 4.0;
        let jx = 2.0 / hx;
        let jy = 2.0 / hy;
        let mut offsets = Vec::with_capacity(9);
        let mut phi = Vec::with_capacity(9);
        let mut grad = Vec::with_capacity(9);
        let mut wj = Vec::with_capacity(9);
        for (eta, wy) in GAUSS3 {
            for (xi, wx) in GAUSS3 {
                let sx = shape1(xi);
                let sy = shape1(eta);
                let dx = dshape1(xi);
                let dy = dshape1(eta);
                let mut p = [0.0; 9];
                let mut g = [[0.0; 2]; 9];
                for ly in 0..3 {
                    for lx in 0..3 {
                        let l = 3 * ly + lx;
                        p[l] = sx[lx] * sy[ly];
                        g[l] = [dx[lx] * sy[ly] * jx, sx[lx] * dy[ly] * jy];
                    }
                }
                offsets.push([(xi + 1.0) * hx / 2.0, (eta + 1.0) * hy / 2.0]);
                phi.push(p);
                grad.push(g);
                wj.push(wx * wy * jac);
            }
        }
        Self {
            offsets,
            phi,
            grad,
            wj,
        }
    }
}

/// Assembles the mass matrix `M_ij = ∫ ψ_j ψ_i`.
pub fn assemble_mass(mesh: &FemMesh) -> SparseOperator {
    assemble_reaction(mesh, |_| 1.0)
}

/// Assembles a weighted mass (reaction) matrix `R_ij = ∫ c(x) ψ_j ψ_i`.
pub fn assemble_reaction(mesh: &FemMesh, coeff: impl Fn([f64; 2]) -> f64) -> SparseOperator {
    let mut op = SparseOperator::q2_pattern(mesh);
    let rule = ElementRule::for_mesh(mesh);
    let mut local;
    for e in 0..mesh.n_elements() {
        let origin = mesh.element_origin(e);
        local = [[0.0f64; 9]; 9];
        for q in 0..rule.wj.len() {
            let x = [
                origin[0] + rule.offsets[q][0],
                origin[1] + rule.offsets[q][1],
            ];
            let w = rule.wj[q] * coeff(x);
            let phi = &rule.phi[q];
            for i in 0..9 {
                for j in 0..9 {
                    // Parenthesised so (i,j) and (j,i) round identically.
                    local[i][j] += w * (phi[i] * phi[j]);
                }
            }
        }
        scatter(&mut op, mesh, e, &local);
    }
    op
}

/// Assembles the stiffness matrix `K_ij = ∫ (A(x) ∇ψ_j)·∇ψ_i` for a
/// symmetric coefficient field. The integrand is evaluated through the
/// explicitly symmetric expression
/// `A₁₁·∂₁ψ_i∂₁ψ_j + A₁₂(∂₁ψ_i∂₂ψ_j + ∂₂ψ_i∂₁ψ_j) + A₂₂·∂₂ψ_i∂₂ψ_j`,
/// so the assembled matrix is symmetric to the last bit.
pub fn assemble_stiffness(
    mesh: &FemMesh,
    coeff: impl Fn([f64; 2]) -> SymMatrix2,
) -> SparseOperator {
    let mut op = SparseOperator::q2_pattern(mesh);
    let rule = ElementRule::for_mesh(mesh);
    let mut local;
    for e in 0..mesh.n_elements() {
        let origin = mesh.element_origin(e);
        local = [[0.0f64; 9]; 9];
        for q in 0..rule.wj.len() {
            let x = [
                origin[0] + rule.offsets[q][0],
                origin[1] + rule.offsets[q][1],
            ];
            let a = coeff(x);
            let w = rule.wj[q];
            let g = &rule.grad[q];
            for i in 0..9 {
                for j in 0..9 {
                    // Each product is parenthesised over the (i,j) pair so the
                    // (j,i) entry rounds to the identical value.
                    local[i][j] += w
                        * (a.a11 * (g[i][0] * g[j][0])
                            + a.a12 * (g[i][0] * g[j][1] + g[i][1] * g[j][0])
                            + a.a22 * (g[i][1] * g[j][1]));
                }
            }
        }
        scatter(&mut op, mesh, e, &local);
    }
    op
}

/// Assembles the implicit Crank-Nicolson operator
///
/// ```text
/// LHS = M/Δτ + ½·K(τ_next) + ½·R(τ_next)
/// ```
///
/// with the diffusion and reaction coefficients frozen at the new time
/// level, in a single fused element loop. The result is symmetric positive
/// definite: `M/Δτ` dominates the (possibly mildly negative) reaction.
pub fn assemble_lhs(
    tau_next: f64,
    dt: f64,
    d: &TransformedDomain,
    mesh: &FemMesh,
) -> SparseOperator {
    let mut op = SparseOperator::q2_pattern(mesh);
    assemble_lhs_into(&mut op, &ElementRule::for_mesh(mesh), tau_next, dt, d, mesh);
    op
}

/// Pattern-reusing worker behind [`assemble_lhs`].
pub fn assemble_lhs_into(
    op: &mut SparseOperator,
    rule: &ElementRule,
    tau_next: f64,
    dt: f64,
    d: &TransformedDomain,
    mesh: &FemMesh,
) {
    assert!(dt > 0.0, "assemble_lhs: dt must be > 0 (got {dt})");
    op.zero_values();
    let inv_dt = 1.0 / dt;
    let mut local;
    for e in 0..mesh.n_elements() {
        let origin = mesh.element_origin(e);
        local = [[0.0f64; 9]; 9];
        for q in 0..rule.wj.len() {
            let x = [
                origin[0] + rule.offsets[q][0],
                origin[1] + rule.offsets[q][1],
            ];
            let a = d.diffusion(tau_next, x[0]);
            let l = d.reaction(tau_next, x[0], x[1]);
            let w = rule.wj[q];
            let phi = &rule.phi[q];
            let g = &rule.grad[q];
            let mass_coef = w * (inv_dt + 0.5 * l);
            let wk = 0.5 * w;
            for i in 0..9 {
                for j in 0..9 {
                    // Parenthesised over the (i,j) pair so the assembled
                    // operator is symmetric to the last bit.
                    local[i][j] += mass_coef * (phi[i] * phi[j])
                        + wk * (a.a11 * (g[i][0] * g[j][0])
                            + a.a12 * (g[i][0] * g[j][1] + g[i][1] * g[j][0])
                            + a.a22 * (g[i][1] * g[j][1]));
                }
            }
        }
        scatter(op, mesh, e, &local);
    }
}

/// Adds a 9×9 element matrix into the global operator.
#[inline]
fn scatter(op: &mut SparseOperator, mesh: &FemMesh, e: usize, local: &[[f64; 9]; 9]) {
    let nodes = mesh.element_nodes(e);
    for i in 0..9 {
        for j in 0..9 {
            op.add(nodes[i], nodes[j], local[i][j]);
        }
    }
}

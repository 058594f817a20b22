//! Structured Q2 meshes of the computational rectangle.
//!
//! The rectangle `[0, x₁^∞] × [0, x₂^∞]` is divided into `nx × ny` uniform
//! quadrilaterals carrying biquadratic (Q2) Lagrange elements: nine nodes per
//! element on the tensor grid of element corners, edge midpoints, and
//! centers, `(2nx+1)·(2ny+1)` nodes in total. Node numbering is row-major
//! with the x₁ index fastest, which keeps the assembled operators tightly
//! banded.

use crate::error::{Error, Result};
use crate::localization::TransformedDomain;

/// One-dimensional quadratic Lagrange shape functions on [−1, 1] associated
/// with the nodes ξ ∈ {−1, 0, +1}.
#[inline]
pub fn shape1(xi: f64) -> [f64; 3] {
    [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)]
}

/// Derivatives of [`shape1`] with respect to ξ.
#[inline]
pub fn dshape1(xi: f64) -> [f64; 3] {
    [xi - 0.5, -2.0 * xi, xi + 0.5]
}

/// The four edges of the rectangle (used for boundary tagging).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshEdge {
    /// x₁ = 0 (Γ₁⁻).
    X1Min,
    /// x₁ = x₁^∞ (Γ₁⁺).
    X1Max,
    /// x₂ = 0 (Γ₂⁻).
    X2Min,
    /// x₂ = x₂^∞ (Γ₂⁺).
    X2Max,
}

/// Uniform tensor-product Q2 mesh of `[0, x1_max] × [0, x2_max]`.
#[derive(Debug, Clone)]
pub struct FemMesh {
    /// Element count along x₁.
    pub nx: usize,
    /// Element count along x₂.
    pub ny: usize,
    /// Domain width along x₁.
    pub x1_max: f64,
    /// Domain width along x₂.
    pub x2_max: f64,
    /// Node abscissae along x₁ (length `2nx+1`, strictly increasing).
    pub coords_x1: Vec<f64>,
    /// Node ordinates along x₂ (length `2ny+1`, strictly increasing).
    pub coords_x2: Vec<f64>,
}

/// Nodal coefficient vector over a [`FemMesh`] (one entry per node).
pub type FieldVector = Vec<f64>;

impl FemMesh {
    /// Builds the uniform mesh; errors if an element count is zero or an
    /// extent is not positive.
    pub fn new(nx: usize, ny: usize, x1_max: f64, x2_max: f64) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(Error::Size(format!(
                "element counts must be ≥ 1 (got nx = {nx}, ny = {ny})"
            )));
        }
        if !(x1_max > 0.0 && x2_max > 0.0) {
            return Err(Error::Size(format!(
                "domain extents must be > 0 (got {x1_max} × {x2_max})"
            )));
        }
        let coords = |n: usize, len: f64| -> Vec<f64> {
            (0..=2 * n).map(|i| len * i as f64 / (2 * n) as f64).collect()
        };
        Ok(Self {
            nx,
            ny,
            x1_max,
            x2_max,
            coords_x1: coords(nx, x1_max),
            coords_x2: coords(ny, x2_max),
        })
    }

    /// Mesh of a [`TransformedDomain`] (Table-style "Mesh n" means
    /// `build_mesh(n, n, d)`).
    pub fn build(nx: usize, ny: usize, d: &TransformedDomain) -> Result<Self> {
        Self::new(nx, ny, d.x1_max, d.x2_max)
    }

    /// Number of elements `nx·ny`.
    #[inline]
    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of nodes `(2nx+1)(2ny+1)`.
    #[inline]
    pub fn n_nodes(&self) -> usize {
        (2 * self.nx + 1) * (2 * self.ny + 1)
    }

    /// Nodes per grid row (x₁ index range).
    #[inline]
    pub fn nodes_x(&self) -> usize {
        2 * self.nx + 1
    }

    /// Nodes per grid column (x₂ index range).
    #[inline]
    pub fn nodes_y(&self) -> usize {
        2 * self.ny + 1
    }

    /// Element width along x₁.
    #[inline]
    pub fn hx(&self) -> f64 {
        self.x1_max / self.nx as f64
    }

    /// Element width along x₂.
    #[inline]
    pub fn hy(&self) -> f64 {
        self.x2_max / self.ny as f64
    }

    /// Grid indices `(ix, iy)` of a node.
    #[inline]
    pub fn node_grid(&self, node: usize) -> (usize, usize) {
        (node % self.nodes_x(), node / self.nodes_x())
    }

    /// Node index from grid indices.
    #[inline]
    pub fn node_at(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_x() + ix
    }

    /// Coordinates of a node.
    #[inline]
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (ix, iy) = self.node_grid(node);
        [self.coords_x1[ix], self.coords_x2[iy]]
    }

    /// The nine global node indices of element `e = ey·nx + ex`, ordered
    /// row-major in the local (ξ, η) frame: local `l = 3·dy + dx` maps to
    /// grid node `(2ex + dx, 2ey + dy)`.
    #[inline]
    pub fn element_nodes(&self, e: usize) -> [usize; 9] {
        let ex = e % self.nx;
        let ey = e / self.nx;
        let ix0 = 2 * ex;
        let iy0 = 2 * ey;
        let mut out = [0usize; 9];
        for dy in 0..3 {
            for dx in 0..3 {
                out[3 * dy + dx] = self.node_at(ix0 + dx, iy0 + dy);
            }
        }
        out
    }

    /// Lower-left corner coordinates of element `e`.
    #[inline]
    pub fn element_origin(&self, e: usize) -> [f64; 2] {
        let ex = e % self.nx;
        let ey = e / self.nx;
        [ex as f64 * self.hx(), ey as f64 * self.hy()]
    }

    /// Whether a node lies on the given boundary edge.
    #[inline]
    pub fn node_on_edge(&self, node: usize, edge: MeshEdge) -> bool {
        let (ix, iy) = self.node_grid(node);
        match edge {
            MeshEdge::X1Min => ix == 0,
            MeshEdge::X1Max => ix == 2 * self.nx,
            MeshEdge::X2Min => iy == 0,
            MeshEdge::X2Max => iy == 2 * self.ny,
        }
    }

    /// All node indices on the given edge, ascending.
    pub fn nodes_on_edge(&self, edge: MeshEdge) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.node_on_edge(n, edge))
            .collect()
    }

    /// Locates a point: returns the element index and the local coordinates
    /// `(ξ, η) ∈ [−1,1]²` reproducing the point through the (affine) element
    /// geometry map. Points within `1e-12` outside the closed rectangle are
    /// clamped onto it; anything farther out is an error.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 2])> {
        const TOL: f64 = 1e-12;
        let [x, y] = p;
        if x < -TOL || x > self.x1_max + TOL || y < -TOL || y > self.x2_max + TOL {
            return Err(Error::OutOfDomain(format!(
                "point ({x}, {y}) outside [0, {}] × [0, {}]",
                self.x1_max, self.x2_max
            )));
        }
        let x = x.clamp(0.0, self.x1_max);
        let y = y.clamp(0.0, self.x2_max);
        let hx = self.hx();
        let hy = self.hy();
        let ex = ((x / hx) as usize).min(self.nx - 1);
        let ey = ((y / hy) as usize).min(self.ny - 1);
        let xi = (2.0 * (x - ex as f64 * hx) / hx - 1.0).clamp(-1.0, 1.0);
        let eta = (2.0 * (y - ey as f64 * hy) / hy - 1.0).clamp(-1.0, 1.0);
        Ok((ey * self.nx + ex, [xi, eta]))
    }

    /// Q2 interpolation of a nodal field at a point.
    pub fn interpolate(&self, u: &[f64], p: [f64; 2]) -> Result<f64> {
        debug_assert_eq!(u.len(), self.n_nodes());
        let (e, [xi, eta]) = self.locate(p)?;
        let nodes = self.element_nodes(e);
        let sx = shape1(xi);
        let sy = shape1(eta);
        let mut val = 0.0;
        for dy in 0..3 {
            for dx in 0..3 {
                val += u[nodes[3 * dy + dx]] * sx[dx] * sy[dy];
            }
        }
        Ok(val)
    }

    /// Q2 interpolation of the gradient of a nodal field at a point.
    pub fn interpolate_grad(&self, u: &[f64], p: [f64; 2]) -> Result<[f64; 2]> {
        debug_assert_eq!(u.len(), self.n_nodes());
        let (e, [xi, eta]) = self.locate(p)?;
        let nodes = self.element_nodes(e);
        let sx = shape1(xi);
        let sy = shape1(eta);
        let dx_ = dshape1(xi);
        let dy_ = dshape1(eta);
        // d/dx = (2/hx)·d/dξ on the affine map.
        let jx = 2.0 / self.hx();
        let jy = 2.0 / self.hy();
        let mut gx = 0.0;
        let mut gy = 0.0;
        for dy in 0..3 {
            for dx in 0..3 {
                let c = u[nodes[3 * dy + dx]];
                gx += c * dx_[dx] * sy[dy];
                gy += c * sx[dx] * dy_[dy];
            }
        }
        Ok([gx * jx, gy * jy])
    }

    /// Nodal interpolant of a scalar function.
    pub fn project_nodal(&self, f: impl Fn([f64; 2]) -> f64) -> FieldVector {
        (0..self.n_nodes()).map(|n| f(self.node_coords(n))).collect()
    }
}

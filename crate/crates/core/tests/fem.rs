//! Q2 mesh bookkeeping, exactness of the assembled bilinear forms on
//! polynomial fields, and the two linear solvers.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use defbond::fem::{
    assemble_lhs, assemble_mass, assemble_reaction, assemble_stiffness, solve_cg, BandLdlt,
    FemMesh, MeshEdge, SparseOperator,
};
use defbond::localization::SymMatrix2;
use defbond::{EquityParams, MarketState, RateParams, TransformedDomain, TruncationConfig};
use proptest::prelude::*;

fn unit_box(n: usize) -> FemMesh {
    FemMesh::new(n, n, 1.0, 1.0).unwrap()
}

fn identity() -> impl Fn([f64; 2]) -> SymMatrix2 {
    |_| SymMatrix2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    }
}

fn ubs_domain() -> TransformedDomain {
    TransformedDomain::new(
        EquityParams::new(0.0337851, 0.0523625, 0.0026639, 0.0027968, 0.0435673, -0.268496)
            .unwrap(),
        RateParams::new(
            0.04520533766268042,
            0.10334921942765922,
            0.02146900332086033,
        )
        .unwrap(),
        MarketState::new(1.0, -0.009159871729892612, 0.0).unwrap(),
        TruncationConfig::new(10.0, 0.7).unwrap(),
        5.0,
    )
    .unwrap()
}

// --- mesh bookkeeping -----------------------------------------------------------

#[test]
fn element_and_node_counts_across_the_refinement_ladder() {
    for (n, elems, nodes) in [(4, 16, 81), (8, 64, 289), (16, 256, 1089), (32, 1024, 4225)] {
        let mesh = unit_box(n);
        assert_eq!(mesh.n_elements(), elems);
        assert_eq!(mesh.n_nodes(), nodes);
        assert_eq!(mesh.nodes_x(), 2 * n + 1);
        assert_eq!(mesh.nodes_y(), 2 * n + 1);
    }
}

#[test]
fn node_indexing_round_trips_and_coordinates_are_uniform() {
    let mesh = FemMesh::new(3, 5, 1.5, 2.5).unwrap();
    assert_abs_diff_eq!(mesh.hx(), 0.5);
    assert_abs_diff_eq!(mesh.hy(), 0.5);
    for node in 0..mesh.n_nodes() {
        let (ix, iy) = mesh.node_grid(node);
        assert_eq!(mesh.node_at(ix, iy), node);
        let p = mesh.node_coords(node);
        assert_abs_diff_eq!(p[0], ix as f64 * mesh.hx() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], iy as f64 * mesh.hy() / 2.0, epsilon = 1e-14);
    }
}

#[test]
fn edge_node_sets_have_the_right_sizes_and_membership() {
    let mesh = FemMesh::new(4, 6, 1.0, 1.0).unwrap();
    let (nx, ny) = (mesh.nodes_x(), mesh.nodes_y());
    assert_eq!(mesh.nodes_on_edge(MeshEdge::X1Min).len(), ny);
    assert_eq!(mesh.nodes_on_edge(MeshEdge::X1Max).len(), ny);
    assert_eq!(mesh.nodes_on_edge(MeshEdge::X2Min).len(), nx);
    assert_eq!(mesh.nodes_on_edge(MeshEdge::X2Max).len(), nx);
    for &node in &mesh.nodes_on_edge(MeshEdge::X1Max) {
        assert!(mesh.node_on_edge(node, MeshEdge::X1Max));
        let (ix, _) = mesh.node_grid(node);
        assert_eq!(ix, nx - 1);
    }
}

#[test]
fn element_connectivity_tiles_the_mesh() {
    let mesh = unit_box(4);
    let mut touched = vec![0usize; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        for node in mesh.element_nodes(e) {
            touched[node] += 1;
        }
    }
    // Corner vertices belong to 1 element, interior vertices to 4, edge
    // midpoints to 2 or 1, cell centers to exactly 1.
    assert!(touched.iter().all(|&c| (1..=4).contains(&c)));
    assert_eq!(touched.iter().sum::<usize>(), 9 * mesh.n_elements());
}

// --- interpolation --------------------------------------------------------------

proptest! {
    /// Q2 interpolation reproduces biquadratic fields to rounding.
    #[test]
    fn interpolation_is_exact_on_biquadratics(
        px in 0.0f64..1.0,
        py in 0.0f64..1.0,
    ) {
        let mesh = unit_box(5);
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1]
            + 0.5 * p[0] * p[0] - 1.5 * p[1] * p[1]
            + p[0] * p[0] * p[1] * p[1];
        let u = mesh.project_nodal(f);
        let got = mesh.interpolate(&u, [px, py]).unwrap();
        prop_assert!((got - f([px, py])).abs() < 1e-12);

        let grad = mesh.interpolate_grad(&u, [px, py]).unwrap();
        let gx = 2.0 + 3.0 * py + px + 2.0 * px * py * py;
        let gy = -1.0 + 3.0 * px - 3.0 * py + 2.0 * px * px * py;
        prop_assert!((grad[0] - gx).abs() < 1e-11);
        prop_assert!((grad[1] - gy).abs() < 1e-11);
    }
}

#[test]
fn locate_rejects_points_outside_the_mesh() {
    let mesh = unit_box(4);
    assert!(mesh.locate([1.2, 0.5]).is_err());
    assert!(mesh.locate([0.5, -0.1]).is_err());
    // Boundary points are inside.
    assert!(mesh.locate([1.0, 1.0]).is_ok());
    assert!(mesh.locate([0.0, 0.0]).is_ok());
}

// --- assembled forms -------------------------------------------------------------

#[test]
fn mass_matrix_integrates_the_domain_area() {
    let mesh = FemMesh::new(4, 3, 1.5, 2.0).unwrap();
    let m = assemble_mass(&mesh);
    let ones = vec![1.0; mesh.n_nodes()];
    let mut mv = vec![0.0; mesh.n_nodes()];
    m.matvec(&ones, &mut mv);
    let total: f64 = mv.iter().sum();
    assert_relative_eq!(total, 1.5 * 2.0, max_relative = 1e-13);
}

#[test]
fn mass_energy_is_exact_on_a_bilinear_field() {
    // ∫ (x y)² over [0,1]² = 1/9; degree 4 per direction is inside the
    // 3-point Gauss exactness window.
    let mesh = unit_box(3);
    let m = assemble_mass(&mesh);
    let u = mesh.project_nodal(|p| p[0] * p[1]);
    let mut mv = vec![0.0; u.len()];
    m.matvec(&u, &mut mv);
    let energy: f64 = u.iter().zip(&mv).map(|(a, b)| a * b).sum();
    assert_relative_eq!(energy, 1.0 / 9.0, max_relative = 1e-13);
}

#[test]
fn stiffness_annihilates_constants() {
    let d = ubs_domain();
    let mesh = FemMesh::build(8, 8, &d).unwrap();
    let k = assemble_stiffness(&mesh, |x| d.diffusion(0.5 * d.t1, x[0]));
    let ones = vec![1.0; mesh.n_nodes()];
    let mut kv = vec![0.0; mesh.n_nodes()];
    k.matvec(&ones, &mut kv);
    let scale = (0..mesh.n_nodes()).map(|i| k.get(i, i)).fold(0.0, f64::max);
    for (i, v) in kv.iter().enumerate() {
        assert!(
            v.abs() <= 1e-12 * scale,
            "row {i} of K applied to constants: {v:e}"
        );
    }
}

#[test]
fn stiffness_energy_is_the_dirichlet_integral() {
    // uᵀKu = ∫ |∇u|² for A = I. With u = x₁x₂ on [0,1]²: ∫ (x₂² + x₁²) = 2/3.
    let mesh = unit_box(4);
    let k = assemble_stiffness(&mesh, identity());
    let u = mesh.project_nodal(|p| p[0] * p[1]);
    let mut kv = vec![0.0; u.len()];
    k.matvec(&u, &mut kv);
    let energy: f64 = u.iter().zip(&kv).map(|(a, b)| a * b).sum();
    assert_relative_eq!(energy, 2.0 / 3.0, max_relative = 1e-13);
}

#[test]
fn reaction_with_unit_coefficient_is_the_mass_matrix() {
    let mesh = unit_box(3);
    let m = assemble_mass(&mesh);
    let r = assemble_reaction(&mesh, |_| 1.0);
    for i in 0..mesh.n_nodes() {
        for j in 0..mesh.n_nodes() {
            assert_abs_diff_eq!(r.get(i, j), m.get(i, j), epsilon = 1e-15);
        }
    }
}

#[test]
fn implicit_operator_is_symmetric_positive_definite() {
    let d = ubs_domain();
    let mesh = FemMesh::build(6, 6, &d).unwrap();
    let lhs = assemble_lhs(d.t1, 1.0 / 90.0, &d, &mesh);
    // Symmetry to the last bit by construction.
    for i in 0..mesh.n_nodes() {
        for j in i..mesh.n_nodes() {
            assert_eq!(lhs.get(i, j), lhs.get(j, i), "asymmetry at ({i},{j})");
        }
    }
    // Positive definiteness on a few deterministic probe vectors.
    let n = mesh.n_nodes();
    for probe in 0..5u64 {
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let z = (i as u64)
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(probe * 1442695040888963407);
                (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let mut ax = vec![0.0; n];
        lhs.matvec(&x, &mut ax);
        let quad: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!(quad > 0.0, "xᵀAx = {quad:e} on probe {probe}");
    }
}

// --- sparse storage and solvers ---------------------------------------------------

#[test]
fn sparse_pattern_lookup_and_matvec_agree_with_dense_arithmetic() {
    let mesh = unit_box(2);
    let mut op = SparseOperator::q2_pattern(&mesh);
    let n = mesh.n_nodes();
    // Neighbouring nodes share an element; distant ones are outside the
    // pattern.
    assert!(op.index_of(0, 1).is_some());
    assert!(op.index_of(0, n - 1).is_none());
    op.add(0, 1, 2.5);
    op.add(0, 1, 0.5);
    assert_eq!(op.get(0, 1), 3.0);
    assert_eq!(op.get(0, n - 1), 0.0);

    let m = assemble_mass(&mesh);
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut y = vec![0.0; n];
    m.matvec(&x, &mut y);
    for i in 0..n {
        let dense: f64 = (0..n).map(|j| m.get(i, j) * x[j]).sum();
        assert_relative_eq!(y[i], dense, max_relative = 1e-12, epsilon = 1e-16);
    }
}

#[test]
fn band_factorization_and_cg_solve_the_same_system() {
    let d = ubs_domain();
    let mesh = FemMesh::build(6, 6, &d).unwrap();
    let lhs = assemble_lhs(0.7 * d.t1, 1.0 / 90.0, &d, &mesh);
    let n = mesh.n_nodes();
    let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 23) as f64 - 11.0) / 17.0).collect();

    let mut direct = b.clone();
    let mut band = BandLdlt::new(n, lhs.lower_bandwidth());
    band.fill_from(&lhs);
    band.factor().unwrap();
    band.solve(&mut direct);

    let mut iterative = vec![0.0; n];
    let iters = solve_cg(&lhs, &b, &mut iterative, 1e-12, 10 * n).unwrap();
    assert!(iters > 0 && iters < 10 * n);

    for i in 0..n {
        assert_abs_diff_eq!(direct[i], iterative[i], epsilon = 1e-8);
    }

    // Both are true solutions: residual check for the direct path.
    let mut ax = vec![0.0; n];
    lhs.matvec(&direct, &mut ax);
    let res: f64 = ax
        .iter()
        .zip(&b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm_b: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(res <= 1e-10 * norm_b, "direct residual {res:e}");
}

#[test]
fn cg_on_the_zero_right_hand_side_returns_zero() {
    let mesh = unit_box(2);
    let m = assemble_mass(&mesh);
    let b = vec![0.0; mesh.n_nodes()];
    let mut x = vec![1.0; mesh.n_nodes()];
    let iters = solve_cg(&m, &b, &mut x, 1e-12, 100).unwrap();
    assert_eq!(iters, 0);
    assert!(x.iter().all(|&v| v == 0.0));
}

#[test]
fn mesh_construction_rejects_degenerate_inputs() {
    assert!(FemMesh::new(0, 4, 1.0, 1.0).is_err());
    assert!(FemMesh::new(4, 4, 0.0, 1.0).is_err());
    assert!(FemMesh::new(4, 4, 1.0, -2.0).is_err());
}

use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use smtlab_core::geometry::{norm, triangle_weighted_measure};
use smtlab_core::mesh::FLAG_OUTER;
use smtlab_core::quadrature::half_ball_weighted_measure;
use smtlab_core::*;

fn rule(mesh: &Mesh, beta: f64) -> QuadratureRule {
    QuadratureRule::build(mesh, beta, QuadratureOptions::default()).unwrap()
}

#[test]
fn coarse_ungraded_half_disc_has_the_right_area() {
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 0).with_grading(1.0)).unwrap();
    mesh.check().unwrap();
    assert_eq!(mesh.vertices[mesh.origin_vertex], [0.0, 0.0]);
    assert!((mesh.area() - FRAC_PI_2).abs() < 0.05 * FRAC_PI_2);
}

#[test]
fn rectangle_area_is_exact() {
    let mesh = build_mesh(&DomainSpec::rectangle(2.0, 1.0, 3)).unwrap();
    mesh.check().unwrap();
    assert!((mesh.area() - 2.0).abs() < 1e-13, "{}", mesh.area());
}

#[test]
fn level_six_half_disc_area() {
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 6)).unwrap();
    mesh.check().unwrap();
    assert!((mesh.area() - FRAC_PI_2).abs() < 1e-3 * FRAC_PI_2);
}

#[test]
fn area_within_tolerance_from_level_four() {
    for shape in [Shape::HalfDisc { radius: 0.7 }, Shape::Rectangle { width: 3.0, height: 0.5 }] {
        let spec = DomainSpec::new(shape, 4);
        let mesh = build_mesh(&spec).unwrap();
        let rel = (mesh.area() - spec.exact_area()).abs() / spec.exact_area();
        assert!(rel < 1e-3, "{shape:?}: {rel}");
    }
}

#[test]
fn meshing_is_deterministic() {
    let spec = DomainSpec::half_disc(1.0, 3);
    let a = build_mesh(&spec).unwrap();
    let b = build_mesh(&spec).unwrap();
    assert_eq!(a.vertices, b.vertices);
    assert_eq!(a.triangles, b.triangles);
    assert_eq!(a.boundary_edges, b.boundary_edges);
}

#[test]
fn node_budget_is_enforced() {
    let spec = DomainSpec::half_disc(1.0, 6).with_node_budget(1000);
    match build_mesh(&spec) {
        Err(SmtError::ResourceLimit { budget, .. }) => assert_eq!(budget, 1000),
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(build_mesh(&DomainSpec::half_disc(-1.0, 2)).is_err());
    assert!(build_mesh(&DomainSpec::rectangle(1.0, 0.0, 2)).is_err());
    assert!(build_mesh(&DomainSpec::half_disc(1.0, 2).with_grading(0.5)).is_err());
}

#[test]
fn vertex_density_grades_toward_the_origin() {
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 4)).unwrap();
    let h_origin = mesh.origin_mesh_size();
    assert!(h_origin < 1e-6, "{h_origin}");
    assert!(mesh.max_edge_length() > 1e3 * h_origin);
    assert!((mesh.clearance() - 1.0).abs() < 1e-12);
}

#[test]
fn ascii_round_trip() {
    let mesh = build_mesh(&DomainSpec::rectangle(2.0, 1.0, 2)).unwrap();
    let mut buf = Vec::new();
    mesh.write_ascii(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let head: Vec<usize> = text.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(head, vec![mesh.num_vertices(), mesh.num_triangles(), mesh.boundary_edges.len()]);
    let back = Mesh::read_ascii(&buf[..]).unwrap();
    assert_eq!(back.vertices, mesh.vertices);
    assert_eq!(back.triangles, mesh.triangles);
    assert_eq!(back.boundary_edges, mesh.boundary_edges);
    assert_eq!(back.origin_vertex, mesh.origin_vertex);
}

#[test]
fn ascii_reader_rejects_broken_input() {
    assert!(Mesh::read_ascii("3 1".as_bytes()).is_err());
    let no_origin = "3 1 3\n1 0 2\n1 1 2\n2 1 2\n0 1 2\n0 1 2\n1 2 2\n2 0 2\n";
    assert!(Mesh::read_ascii(no_origin.as_bytes()).is_err());
    let clockwise = "3 1 3\n0 0 1\n0 1 2\n1 0 1\n0 1 2\n0 1 2\n1 2 2\n2 0 1\n";
    assert!(matches!(
        Mesh::read_ascii(clockwise.as_bytes()),
        Err(SmtError::MeshQuality { .. })
    ));
}

#[test]
fn stiffness_and_mass_on_linear_fields() {
    let mesh = std::sync::Arc::new(build_mesh(&DomainSpec::half_disc(1.0, 5)).unwrap());
    let ops = assemble_operators(&mesh).unwrap();
    let n = mesh.num_vertices();
    let one = vec![1.0; n];
    assert!(ops.stiffness.form(&one, &one).abs() < 1e-12);
    assert!((ops.load_one.iter().sum::<f64>() - mesh.area()).abs() < 1e-13);
    let x1: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
    assert!((ops.stiffness.form(&x1, &x1) - FRAC_PI_2).abs() < 1e-3);
    // Piecewise-linear fields are integrated exactly: ∫ x₁ dx over the polygon is 0 by symmetry.
    let ix: f64 = x1.iter().zip(&ops.load_one).map(|(a, b)| a * b).sum();
    assert!(ix.abs() < 1e-13);
}

#[test]
fn stiffness_kernel_is_the_constants() {
    let mesh = build_mesh(&DomainSpec::rectangle(2.0, 1.0, 1)).unwrap();
    let ops = assemble_operators(&mesh).unwrap();
    let n = mesh.num_vertices();
    let k1 = ops.stiffness.matvec(&vec![1.0; n]);
    assert!(k1.iter().all(|v| v.abs() < 1e-12));
    // Each nodal basis function has positive energy, so no other basis direction is in the kernel.
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        assert!(ops.stiffness.form(&e, &e) > 0.0);
    }
}

#[test]
fn degenerate_triangles_are_reported() {
    let mut mesh = build_mesh(&DomainSpec::rectangle(2.0, 1.0, 1)).unwrap();
    let t = mesh.triangles[3];
    mesh.vertices[t[2]] = mesh.vertices[t[0]];
    match assemble_operators(&mesh) {
        Err(SmtError::MeshQuality { .. }) => {}
        other => panic!("expected a mesh-quality error, got {other:?}"),
    }
}

#[test]
fn weighted_measure_of_half_balls() {
    // B_1⁺ is the same set inside any half-disc of radius ≥ 1; radius 2 keeps it off the polygonal arc.
    let mesh = build_mesh(&DomainSpec::half_disc(2.0, 3)).unwrap();
    let r = rule(&mesh, 0.5);
    let v = weighted_measure(&mesh, &r, Region::Ball(1.0)).unwrap();
    assert!((v - PI).abs() < 1e-6 * PI, "{v}");
    // On the unit half-disc the ball reaches the polygonal arc and sees its area defect.
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 5)).unwrap();
    let r = rule(&mesh, 0.5);
    let v = weighted_measure(&mesh, &r, Region::Ball(1.0)).unwrap();
    assert!((v - PI).abs() < 1e-4 * PI, "{v}");
    let r = rule(&mesh, 0.25);
    let v = weighted_measure(&mesh, &r, Region::Ball(0.1)).unwrap();
    let exact = 2.0 * PI / 3.0 * 0.1f64.powf(1.5);
    assert!((exact - 0.066231).abs() < 1e-6);
    assert!((v - exact).abs() < 1e-5 * exact, "{v} vs {exact}");
}

#[test]
fn weighted_measure_small_beta_gives_area() {
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 5)).unwrap();
    let r = rule(&mesh, 1e-6);
    let v = weighted_measure(&mesh, &r, Region::Whole).unwrap();
    assert!((v - FRAC_PI_2).abs() < 1e-4, "{v}");
}

#[test]
fn weighted_measure_rejects_bad_beta() {
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 1)).unwrap();
    assert!(QuadratureRule::build(&mesh, 1.0, QuadratureOptions::default()).is_err());
    assert!(QuadratureRule::build(&mesh, 0.0, QuadratureOptions::default()).is_err());
}

#[test]
fn weighted_measure_is_additive_over_a_partition() {
    let mesh = build_mesh(&DomainSpec::half_disc(1.0, 4)).unwrap();
    let r = rule(&mesh, 0.6);
    let whole = weighted_measure(&mesh, &r, Region::Whole).unwrap();
    let left = weighted_measure(&mesh, &r, Region::Where(&|p| p[0] < 0.0)).unwrap();
    let right = weighted_measure(&mesh, &r, Region::Where(&|p| p[0] >= 0.0)).unwrap();
    assert!((left + right - whole).abs() < 1e-12 * whole);
    let per_triangle: f64 = (0..mesh.num_triangles()).map(|t| r.triangle_weight(t)).sum();
    assert!((per_triangle - whole).abs() < 1e-12 * whole);
}

#[test]
fn weighted_measure_converges_with_refinement() {
    let beta = 0.5;
    let exact = half_ball_weighted_measure(beta, 1.0);
    let errors: Vec<f64> = (2..=6)
        .map(|level| {
            let mesh = build_mesh(&DomainSpec::half_disc(1.0, level)).unwrap();
            let r = rule(&mesh, beta);
            (weighted_measure(&mesh, &r, Region::Whole).unwrap() - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
}

#[test]
fn singular_quadrature_matches_reference_values() {
    let opts = QuadratureOptions::default();
    // Away from the origin: compare against a 24-point tensor rule on a 64×64 split.
    let tri = [[0.4, 0.1], [0.9, 0.3], [0.5, 0.7]];
    let got = singular_quadrature(&tri, 0.5, |_| 1.0, &opts).unwrap();
    let reference = dense_reference(&tri, 0.5);
    assert!((got.value - reference).abs() < 1e-8 * reference);
    assert!(got.warning.is_none());
    let zero = singular_quadrature(&tri, 0.5, |_| 0.0, &opts).unwrap();
    assert_eq!(zero.value, 0.0);
    for beta in [0.1, 0.5, 0.9] {
        let tri = [[0.0, 0.0], [0.3, 0.05], [0.1, 0.2]];
        let got = singular_quadrature(&tri, beta, |_| 1.0, &opts).unwrap();
        let exact = triangle_weighted_measure(&tri, beta);
        assert!((got.value - exact).abs() < 1e-8 * exact, "β={beta}");
    }
}

#[test]
fn shallow_depth_is_flagged() {
    let opts = QuadratureOptions { depth: 2, ..QuadratureOptions::default() };
    let tri = [[0.0, 0.0], [0.3, 0.05], [0.1, 0.2]];
    let got = singular_quadrature(&tri, 0.5, |p| norm(p).sqrt(), &opts).unwrap();
    assert!(got.warning.is_some());
}

#[test]
fn rule_sum_matches_whole_measure() {
    let mesh = build_mesh(&DomainSpec::rectangle(2.0, 1.0, 3)).unwrap();
    let r = rule(&mesh, 0.3);
    let opts = QuadratureOptions::default();
    let sum: f64 = (0..mesh.num_triangles())
        .map(|t| singular_quadrature(&mesh.triangle_points(t), 0.3, |_| 1.0, &opts).unwrap().value)
        .sum();
    let whole = weighted_measure(&mesh, &r, Region::Whole).unwrap();
    assert!((sum - whole).abs() < 1e-12 * whole);
    assert!(r.points.iter().all(|p| p.weight > 0.0));
    assert!(r.singular.iter().filter(|&&s| s).count() >= 1);
    assert!(mesh.vertex_flags.contains(&FLAG_OUTER));
}

/// Tensor Gauss-Legendre on a uniform split, adequate for triangles far from the origin.
fn dense_reference(tri: &[[f64; 2]; 3], beta: f64) -> f64 {
    let gl = smtlab_core::quadrature::gauss_legendre(24);
    let n = 64;
    let area = smtlab_core::geometry::signed_area(tri[0], tri[1], tri[2]).abs();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for (xa, wa) in gl.0.iter().zip(&gl.1) {
                for (xb, wb) in gl.0.iter().zip(&gl.1) {
                    let s = (i as f64 + 0.5 * (xa + 1.0)) / n as f64;
                    let t = (j as f64 + 0.5 * (xb + 1.0)) / n as f64;
                    // Square to triangle: (s, t) ↦ (s, t(1 - s)), Jacobian 1 - s.
                    let (a, b) = (s, t * (1.0 - s));
                    let p = [
                        tri[0][0] + a * (tri[1][0] - tri[0][0]) + b * (tri[2][0] - tri[0][0]),
                        tri[0][1] + a * (tri[1][1] - tri[0][1]) + b * (tri[2][1] - tri[0][1]),
                    ];
                    total += wa * wb * (1.0 - s) * norm(p).powf(-2.0 * beta);
                }
            }
        }
    }
    total * 2.0 * area / (4.0 * (n * n) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clipped_half_ball_measure_is_exact(beta in 0.05f64..0.95, l in 0.01f64..0.99) {
        let mesh = build_mesh(&DomainSpec::half_disc(1.0, 2)).unwrap();
        let r = QuadratureRule::build_unchecked(&mesh, beta, QuadratureOptions { depth: 4, ..Default::default() });
        let v = weighted_measure(&mesh, &r, Region::Ball(l)).unwrap();
        let exact = half_ball_weighted_measure(beta, l);
        prop_assert!((v - exact).abs() < 1e-9 * exact, "{} vs {}", v, exact);
    }

    #[test]
    fn generated_meshes_are_conforming(level in 0u32..4, g in 1.0f64..3.0, w in 0.5f64..3.0, h in 0.3f64..2.0) {
        for spec in [DomainSpec::half_disc(w, level).with_grading(g), DomainSpec::rectangle(w, h, level).with_grading(g)] {
            let mesh = build_mesh(&spec).unwrap();
            prop_assert!(mesh.check().is_ok());
            prop_assert!(mesh.origin_vertex < mesh.num_vertices());
        }
    }
}

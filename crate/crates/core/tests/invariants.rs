use std::sync::Arc;

use proptest::prelude::*;
use statsol::mesh::{
    classify_faces, generate_graded_channel_mesh, generate_uniform_quad_mesh, generate_uniform_tri_mesh,
    uniform_refine, BoundarySpec, Rect,
};
use statsol::observables::{element_average, emd, hungarian, transport_min_cost_flow, Atoms};
use statsol::par::Exec;
use statsol::spaces::{FieldCoefficients, VelocitySpace};

fn rect() -> impl Strategy<Value = Rect> {
    (-2.0..2.0f64, 0.1..3.0f64, -2.0..2.0f64, 0.1..3.0f64)
        .prop_map(|(x0, w, y0, h)| Rect::new(x0, x0 + w, y0, y0 + h).unwrap())
}

fn point_cloud(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), n)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_meshes_tile_the_domain(d in rect(), nx in 1usize..9, ny in 1usize..9, tri in any::<bool>()) {
        let mesh = if tri {
            generate_uniform_tri_mesh(nx, ny, d).unwrap()
        } else {
            generate_uniform_quad_mesh(nx, ny, d).unwrap()
        };
        prop_assert!(mesh.validate().is_ok());
        prop_assert!(mesh.element_areas().iter().all(|&a| a > 0.0));
        prop_assert!(close(mesh.total_area(), d.area(), 1e-12));
        prop_assert_eq!(mesh.n_elements(), nx * ny * if tri { 2 } else { 1 });
        let b = mesh.bounding_box();
        prop_assert!(close(b.x0, d.x0, 1e-12) && close(b.x1, d.x1, 1e-12));
        prop_assert!(close(b.y0, d.y0, 1e-12) && close(b.y1, d.y1, 1e-12));
    }

    #[test]
    fn refinement_splits_every_element_in_four(d in rect(), n in 1usize..5, tri in any::<bool>()) {
        let coarse = if tri {
            generate_uniform_tri_mesh(n, n, d).unwrap()
        } else {
            generate_uniform_quad_mesh(n, n, d).unwrap()
        };
        let fine = uniform_refine(&coarse).unwrap();
        prop_assert_eq!(fine.n_elements(), 4 * coarse.n_elements());
        prop_assert!(close(fine.total_area(), coarse.total_area(), 1e-12));
        prop_assert!(fine.mesh_size() < coarse.mesh_size());
        // Each boundary face splits in two.
        let boundary = fine.boundary_faces().count();
        prop_assert_eq!(2 * coarse.boundary_faces().count(), boundary);
    }

    #[test]
    fn graded_channel_respects_spacing(h_min in 0.02..0.06f64, ratio in 1.5..4.0f64, growth in 1.05..1.6f64) {
        let d = Rect::new(0.0, 1.5, 0.0, 0.5).unwrap();
        let h_max = h_min * ratio;
        let mesh = generate_graded_channel_mesh(d, h_min, h_max, growth).unwrap();
        prop_assert!(close(mesh.total_area(), d.area(), 1e-12));
        let mut ys: Vec<f64> = mesh.vertices().iter().map(|v| v[1]).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for w in ys.windows(2) {
            prop_assert!(w[1] - w[0] <= h_max * (1.0 + 1e-9));
        }
    }

    #[test]
    fn emd_is_a_metric_on_uniform_measures(
        (a, b, c) in (1usize..5, 1usize..5, 1usize..5, 1usize..4)
            .prop_flat_map(|(n, m, k, dim)| (point_cloud(n, dim), point_cloud(m, dim), point_cloud(k, dim))),
        p in prop::sample::select(vec![1.0, 2.0]),
    ) {
        let dim = a[0].len();
        let (a, b, c) = (
            Atoms::uniform(dim, &a).unwrap(),
            Atoms::uniform(dim, &b).unwrap(),
            Atoms::uniform(dim, &c).unwrap(),
        );
        let ab = emd(&a, &b, p).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!(close(ab, emd(&b, &a, p).unwrap(), 1e-10));
        prop_assert!(emd(&a, &a, p).unwrap() <= 1e-12);
        let ac = emd(&a, &c, p).unwrap();
        let bc = emd(&b, &c, p).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
    }

    #[test]
    fn emd_never_exceeds_the_identity_pairing(pts in (1usize..6, 1usize..4).prop_flat_map(|(n, dim)| (point_cloud(n, dim), point_cloud(n, dim)))) {
        let (a, b) = pts;
        let dim = a[0].len();
        let pairing = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
            .sum::<f64>()
            / a.len() as f64;
        let d = emd(&Atoms::uniform(dim, &a).unwrap(), &Atoms::uniform(dim, &b).unwrap(), 1.0).unwrap();
        prop_assert!(d <= pairing + 1e-12);
    }

    #[test]
    fn assignment_and_flow_agree(n in 1usize..7, costs in prop::collection::vec(0.0..10.0f64, 36)) {
        let cost: Vec<f64> = costs[..n * n].to_vec();
        let (total, cols) = hungarian(&cost, n);
        let mut seen = cols.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let assigned: f64 = cols.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        prop_assert!(close(total, assigned, 1e-12));
        let w = vec![1.0 / n as f64; n];
        prop_assert!(close(transport_min_cost_flow(&cost, &w, &w), total / n as f64, 1e-10));
    }

    #[test]
    fn element_average_reproduces_linear_fields(n in 1usize..6, tri in any::<bool>(), k in 0usize..2, c in prop::array::uniform4(-2.0..2.0f64)) {
        let d = Rect::unit();
        let mesh = Arc::new(if tri {
            generate_uniform_tri_mesh(n, n, d).unwrap()
        } else {
            generate_uniform_quad_mesh(n, n, d).unwrap()
        });
        let sets = classify_faces(&mesh, &BoundarySpec::all_dirichlet(d)).unwrap();
        let space = VelocitySpace::new(mesh.clone(), k, sets).unwrap();
        // Divergence-free and linear for k = 1, constant for k = 0, so it lies
        // in RT_k.
        let c = if k == 0 { [c[0], c[1], 0.0, 0.0] } else { c };
        let u = move |x: [f64; 2]| [c[0] + c[2] * x[0] + c[3] * x[1], c[1] + c[3] * x[0] - c[2] * x[1]];
        let field = FieldCoefficients::new(space.tag(), space.interpolate(&u), 0.0);
        let avg = element_average(&space, &field).unwrap();
        prop_assert!(space.max_divergence(&field.coeffs).unwrap() <= 1e-10);
        for (e, a) in avg.iter().enumerate() {
            let want = u(mesh.centroid(e));
            prop_assert!(close(a[0], want[0], 1e-10) && close(a[1], want[1], 1e-10));
        }
    }

    #[test]
    fn sequential_and_parallel_maps_agree(n in 0usize..200, workers in 0usize..4) {
        let f = |i: usize| (i as f64).sqrt().sin();
        let seq = Exec::Sequential.map(n, f);
        let par = Exec::Parallel(workers).map(n, f);
        prop_assert_eq!(seq, par);
    }
}

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use super::*;
use crate::mesh::{classify_faces, BoundarySpec, FaceSets, Mesh2D, SegmentRule, Side};
use crate::quadrature::{cell_rule, gauss_legendre};
use crate::spaces::geometry::ElementMap;
use crate::sparse::dot;
use crate::testing::*;

fn assembler(mesh: &Arc<Mesh2D>, k: usize) -> Assembler {
    Assembler::new(Arc::new(dirichlet_space(mesh, k))).unwrap()
}

fn two_triangles() -> Arc<Mesh2D> {
    Arc::new(
        Mesh2D::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![vec![0, 1, 2], vec![0, 2, 3]],
        )
        .unwrap(),
    )
}

/// Curl of a polynomial bubble vanishing with its gradient on the unit square.
fn bubble_curl(x: [f64; 2]) -> [f64; 2] {
    let b = |t: f64| t * t * (1.0 - t) * (1.0 - t);
    let db = |t: f64| 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    [b(x[0]) * db(x[1]), -db(x[0]) * b(x[1])]
}

/// Curl of sin^2(pi x) sin^2(pi y) and its gradient.
fn trig_curl(x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (sx, cx) = ((PI * x[0]).sin(), (PI * x[0]).cos());
    let (sy, cy) = ((PI * x[1]).sin(), (PI * x[1]).cos());
    let c2y = (2.0 * PI * x[1]).cos();
    let c2x = (2.0 * PI * x[0]).cos();
    let u = [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sy * sy * sx * cx];
    let g = [
        [2.0 * PI * PI * 2.0 * sx * cx * sy * cy, 2.0 * PI * PI * sx * sx * c2y],
        [-2.0 * PI * PI * sy * sy * c2x, -2.0 * PI * PI * 2.0 * sy * cy * sx * cx],
    ];
    (u, g)
}

#[test]
fn mass_is_spd_and_symmetric() {
    for mesh in [tri_mesh(3), distorted_quad_mesh(3)] {
        for k in 0..=1 {
            let a = assembler(&mesh, k);
            let m = a.mass();
            assert_eq!(m.max_abs_diff(&m.transpose()), 0.0);
            for seed in 0..100 {
                let v = random_vec(m.nrows, seed);
                assert!(dot(&v, &m.mul_vec(&v)) > 0.0);
            }
        }
    }
}

#[test]
fn mass_matches_direct_quadrature() {
    let mesh = distorted_tri_mesh(3);
    for k in 0..=1 {
        let a = assembler(&mesh, k);
        let s = a.space().clone();
        let c = random_vec(s.n_dofs(), 5);
        // Oracle: point evaluation on a finer rule than the assembler's.
        let mut exact = 0.0;
        for e in 0..mesh.n_elements() {
            let map = ElementMap::new(&mesh, e);
            let rule = cell_rule(map.kind, 9);
            exact += rule.integrate(|xi| {
                let v = s.point_value(&c, e, map.map(xi)).unwrap();
                map.jacobian(xi).det * (v[0] * v[0] + v[1] * v[1])
            });
        }
        let got = dot(&c, &a.mass().mul_vec(&c));
        assert!((got - exact).abs() <= 1e-12 * exact, "{got} vs {exact}");
    }
}

#[test]
fn parallel_mass_is_bit_identical() {
    let a = assembler(&distorted_quad_mesh(6), 1);
    let seq = a.mass_with(Exec::Sequential);
    let par = a.mass_with(Exec::Parallel(3));
    assert_eq!(seq.values, par.values);
    assert!(seq.max_abs_diff(&a.mass()) <= 1e-13 * seq.max_abs());
}

#[test]
fn convection_vanishes_for_zero_wind_and_scales_with_it() {
    let a = assembler(&distorted_tri_mesh(3), 1);
    let n = a.space().n_dofs();
    assert_eq!(a.convection(&vec![0.0; n]).unwrap().max_abs(), 0.0);
    let w1 = random_vec(n, 1);
    let w2 = random_vec(n, 2);
    let scale = |w: &[f64], c: f64| w.iter().map(|v| c * v).collect::<Vec<_>>();
    let c1 = a.convection(&w1).unwrap();
    let c1x = a.convection(&scale(&w1, 2.5)).unwrap();
    assert!(c1x.max_abs_diff(&c1.linear_combination(2.5, &c1, 0.0).unwrap()) <= 1e-12 * c1x.max_abs());
    // |w.n| makes the upwind term even in w; the odd part is linear.
    let odd = |w: &[f64]| {
        let plus = a.convection(w).unwrap();
        let minus = a.convection(&scale(w, -1.0)).unwrap();
        plus.linear_combination(0.5, &minus, -0.5).unwrap()
    };
    let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    let lhs = odd(&sum);
    let rhs = odd(&w1).linear_combination(2.0, &odd(&w2), -3.0).unwrap();
    assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * lhs.max_abs());
    assert!(a.convection(&w1[1..]).is_err());
}

#[test]
fn convection_matches_hand_integration_on_two_triangles() {
    let mesh = two_triangles();
    let a = assembler(&mesh, 0);
    let s = a.space().clone();
    let n = s.n_dofs();
    let w = random_vec(n, 9);
    let c = a.convection(&w).unwrap();

    // Lowest-order fields are affine on triangles, so central differences
    // give exact gradients up to rounding.
    let grad = |coef: &[f64], e: usize, x: [f64; 2]| {
        let h = 1e-3;
        let mut g = [[0.0; 2]; 2];
        for b in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[b] += h;
            xm[b] -= h;
            let p = s.point_value(coef, e, xp).unwrap();
            let m = s.point_value(coef, e, xm).unwrap();
            for a in 0..2 {
                g[a][b] = (p[a] - m[a]) / (2.0 * h);
            }
        }
        g
    };
    let unit = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    let (gs, gw) = gauss_legendre(8);
    for i in 0..n {
        for j in 0..n {
            let (phi_i, phi_j) = (unit(i), unit(j));
            let mut expected = 0.0;
            for e in 0..2 {
                let map = ElementMap::new(&mesh, e);
                expected += cell_rule(map.kind, 6).integrate(|xi| {
                    let x = map.map(xi);
                    let wv = s.point_value(&w, e, x).unwrap();
                    let gu = grad(&phi_j, e, x);
                    let v = s.point_value(&phi_i, e, x).unwrap();
                    let wgu = [
                        wv[0] * gu[0][0] + wv[1] * gu[0][1],
                        wv[0] * gu[1][0] + wv[1] * gu[1][1],
                    ];
                    map.jacobian(xi).det * (wgu[0] * v[0] + wgu[1] * v[1])
                });
            }
            let f = mesh.interior_faces().next().unwrap();
            let face = mesh.face(f);
            let (k1, k2) = (face.elements.0, face.elements.1.unwrap());
            let pa = mesh.vertices()[face.vertices[0]];
            let pb = mesh.vertices()[face.vertices[1]];
            for (&t, &wt) in gs.iter().zip(&gw) {
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let wv = s.point_value(&w, k1, x).unwrap();
                let wn = wv[0] * face.normal[0] + wv[1] * face.normal[1];
                let side = |coef: &[f64]| (s.point_value(coef, k1, x).unwrap(), s.point_value(coef, k2, x).unwrap());
                let (u1, u2) = side(&phi_j);
                let (v1, v2) = side(&phi_i);
                let ju = [u1[0] - u2[0], u1[1] - u2[1]];
                let jv = [v1[0] - v2[0], v1[1] - v2[1]];
                let av = [0.5 * (v1[0] + v2[0]), 0.5 * (v1[1] + v2[1])];
                let term = -wn * (ju[0] * av[0] + ju[1] * av[1]) + wn.abs() * (ju[0] * jv[0] + ju[1] * jv[1]);
                expected += wt * face.size * term;
            }
            let got = c.get(i, j);
            assert!((got - expected).abs() < 1e-9, "({i},{j}): {got} vs {expected}");
        }
    }
}

#[test]
fn convection_is_nonnegative_for_solenoidal_wind() {
    for mesh in [tri_mesh(4), distorted_tri_mesh(4), quad_mesh(4)] {
        for k in 0..=1 {
            let a = assembler(&mesh, k);
            let w = a.space().interpolate(&|x| trig_curl(x).0);
            let c = a.convection(&w).unwrap();
            for seed in 0..20 {
                let v = random_vec(c.nrows, seed);
                let q = dot(&v, &c.mul_vec(&v));
                assert!(q >= -1e-10 * dot(&v, &v), "k={k}: {q}");
            }
        }
    }
}

#[test]
fn convection_annihilates_constant_fields() {
    for mesh in [two_triangles(), distorted_quad_mesh(3)] {
        for k in 0..=1 {
            let a = assembler(&mesh, k);
            let u = a.space().interpolate(&|_| [0.7, -1.3]);
            let w = random_vec(u.len(), 3);
            let cu = a.convection(&w).unwrap().mul_vec(&u);
            assert!(cu.iter().all(|v| v.abs() < 1e-12), "{cu:?}");
        }
    }
}

#[test]
fn diffusion_is_symmetric() {
    for mesh in [distorted_tri_mesh(3), distorted_quad_mesh(3)] {
        for k in 0..=1 {
            let a = assembler(&mesh, k).diffusion(default_sigma(k));
            assert!(a.max_abs_diff(&a.transpose()) <= 1e-13 * a.max_abs().max(1.0));
        }
    }
}

#[test]
fn diffusion_is_semidefinite_on_free_dofs() {
    for (mesh, k) in [(tri_mesh(2), 0), (tri_mesh(2), 1), (quad_mesh(2), 1), (distorted_quad_mesh(3), 0)] {
        let a = assembler(&mesh, k);
        let free = a.space().free_dofs().to_vec();
        assert!(free.len() <= 100, "{}", free.len());
        let d = a.diffusion(default_sigma(k)).submatrix(&free, &free).to_dense();
        let min = SymmetricEigen::new(d).eigenvalues.min();
        assert!(min >= -1e-10, "k={k}: {min}");
    }
}

#[test]
fn diffusion_energy_approximates_gradient_norm() {
    let exact = {
        let rule = cell_rule(crate::mesh::CellKind::Quadrilateral, 16);
        rule.integrate(|x| {
            let g = trig_curl(x).1;
            g.iter().flatten().map(|v| v * v).sum()
        })
    };
    let mut errors = Vec::new();
    for n in [4, 8, 16] {
        let a = assembler(&quad_mesh(n), 1);
        let v = a.space().interpolate(&|x| trig_curl(x).0);
        let energy = dot(&v, &a.diffusion(default_sigma(1)).mul_vec(&v));
        errors.push((energy - exact).abs() / exact);
    }
    assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
    assert!(errors[2] < 0.05, "{errors:?}");
}

#[test]
fn penalty_alone_scales_with_sigma() {
    let a = assembler(&distorted_tri_mesh(3), 1);
    let s = 7.0;
    let diff = a.diffusion(2.0 * s).linear_combination(1.0, &a.diffusion(s), -1.0).unwrap();
    let pen = a
        .diffusion_parts(s, false, true)
        .linear_combination(1.0, &a.diffusion_parts(s, false, false), -1.0)
        .unwrap();
    assert!(diff.max_abs_diff(&pen) <= 1e-12 * pen.max_abs());
    let rest_a = a.diffusion_parts(s, true, false);
    let rest_b = a.diffusion_parts(3.0 * s, true, false);
    assert_eq!(rest_a.values, rest_b.values);
}

#[test]
fn consistency_terms_vanish_for_continuous_fields() {
    // Outflow everywhere leaves only interior faces in the face sums.
    let mesh = distorted_tri_mesh(3);
    let domain = mesh.bounding_box();
    let rules: Vec<SegmentRule> = [Side::Left, Side::Right, Side::Bottom, Side::Top]
        .into_iter()
        .map(|side| BoundarySpec::whole_side(domain, side, BoundaryKind::Outflow))
        .collect();
    let sets = classify_faces(&mesh, &BoundarySpec { domain, rules }).unwrap();
    let space = Arc::new(VelocitySpace::new(mesh.clone(), 1, sets).unwrap());
    let a = Assembler::new(space.clone()).unwrap();
    let u = space.interpolate(&|x| [x[0] + 2.0 * x[1], 3.0 * x[0] - x[1]]);
    let with = a.diffusion_parts(1.0, true, false);
    let without = a.diffusion_parts(1.0, false, false);
    let cons = with.linear_combination(1.0, &without, -1.0).unwrap();
    let q = dot(&u, &cons.mul_vec(&u));
    assert!(q.abs() < 1e-12, "{q}");
}

#[test]
fn divergence_kills_solenoidal_fields() {
    for mesh in [tri_mesh(3), quad_mesh(3), distorted_tri_mesh(3)] {
        for k in 0..=1 {
            let a = assembler(&mesh, k);
            let p = pressure_space(&mesh, k);
            let b = a.divergence(&p).unwrap();
            assert_eq!(b.shape(), (p.n_dofs(), a.space().n_dofs()));
            let u = a.space().interpolate(&bubble_curl);
            let bu = b.mul_vec(&u);
            assert!(bu.iter().all(|v| v.abs() < 1e-12), "k={k}");
        }
    }
}

#[test]
fn divergence_of_position_field_on_reference_triangle() {
    let mesh = Arc::new(Mesh2D::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![vec![0, 1, 2]]).unwrap());
    for k in 0..=1 {
        let space = Arc::new(VelocitySpace::new(mesh.clone(), k, FaceSets::all_dirichlet(&mesh)).unwrap());
        let a = Assembler::new(space.clone()).unwrap();
        let p = PressureSpace::new(mesh.clone(), k, false).unwrap();
        let u = space.interpolate(&|x| x);
        let bu = a.divergence(&p).unwrap().mul_vec(&u);
        for (got, int) in bu.iter().zip(p.integrals()) {
            assert!((got - 2.0 * int).abs() < 1e-13, "{got} vs {}", 2.0 * int);
        }
    }
}

#[test]
fn divergence_rejects_other_meshes() {
    let a = assembler(&quad_mesh(2), 0);
    assert!(a.divergence(&pressure_space(&quad_mesh(3), 0)).is_err());
}

fn lid(x: [f64; 2], _t: f64) -> [f64; 2] {
    if x[1] > 1.0 - 1e-12 {
        [1.0, 0.0]
    } else {
        [0.0, 0.0]
    }
}

#[test]
fn rhs_of_zero_data_is_zero() {
    let a = assembler(&distorted_tri_mesh(3), 1);
    let ctx = FormContext::homogeneous(0.01, 40.0).unwrap();
    assert!(a.rhs(&ctx, 0.0).iter().all(|&v| v == 0.0));
}

#[test]
fn lid_data_touches_only_top_elements() {
    let mesh = quad_mesh(4);
    let a = assembler(&mesh, 1);
    let ctx = FormContext::new(0.01, 40.0, Arc::new(lid), zero_field()).unwrap();
    let r = a.rhs(&ctx, 0.0);
    let mut top = vec![false; r.len()];
    for e in 0..mesh.n_elements() {
        if mesh.element_vertices(e).iter().any(|v| v[1] > 1.0 - 1e-12) {
            for &d in a.space().element_dofs(e) {
                top[d] = true;
            }
        }
    }
    assert!(r.iter().zip(&top).all(|(&v, &t)| t || v == 0.0));
    assert!(r.iter().any(|v| v.abs() > 1e-3));
}

#[test]
fn doubling_sigma_isolates_the_penalty_term() {
    let a = assembler(&distorted_quad_mesh(3), 1);
    let g: VectorField = Arc::new(|x, t| [x[1] + t, x[0] * x[0]]);
    let f: VectorField = Arc::new(|x, _| [x[0].sin(), x[1]]);
    let ctx = FormContext::new(0.05, 20.0, g.clone(), f.clone()).unwrap();
    let ctx2 = FormContext::new(0.05, 40.0, g, f).unwrap();
    let l1 = a.rhs(&ctx, 0.5);
    let l2 = a.rhs(&ctx2, 0.5);
    let pen = a.rhs_parts(&ctx, 0.5, false, false, true);
    for i in 0..l1.len() {
        assert!((l2[i] - l1[i] - pen[i]).abs() < 1e-12, "{i}");
    }
    let src = a.rhs_parts(&ctx, 0.5, true, false, false);
    let cons = a.rhs_parts(&ctx, 0.5, false, true, false);
    for i in 0..l1.len() {
        assert!((l1[i] - src[i] - cons[i] - pen[i]).abs() < 1e-12);
    }
}

#[test]
fn form_context_rejects_bad_coefficients() {
    assert!(FormContext::homogeneous(0.0, 1.0).is_err());
    assert!(FormContext::homogeneous(1.0, -1.0).is_err());
    assert!(FormContext::homogeneous(f64::NAN, 1.0).is_err());
}

#[test]
fn convection_checks_field_space() {
    let space = dirichlet_space(&quad_mesh(2), 0);
    let other = dirichlet_space(&quad_mesh(2), 1);
    assert!(assemble_convection_upwind(&space, &other.zero_field(0.0)).is_err());
    assert!(assemble_convection_upwind(&space, &space.zero_field(0.0)).is_ok());
}

#[test]
fn matrices_round_trip_through_matrix_market() {
    let a = assembler(&tri_mesh(2), 1);
    let m = a.diffusion(default_sigma(1));
    let back = Csr::parse_matrix_market(&m.to_matrix_market(), Path::new("inline")).unwrap();
    assert_eq!(back.shape(), m.shape());
    assert!(back.max_abs_diff(&m) <= 1e-15 * m.max_abs());
}

#[test]
fn gradient_block_is_the_transpose() {
    let mesh = quad_mesh(3);
    let b = assembler(&mesh, 1).divergence(&pressure_space(&mesh, 1)).unwrap();
    let bt = b.transpose();
    let x = random_vec(b.ncols, 1);
    let y = random_vec(b.nrows, 2);
    let lhs = dot(&y, &b.mul_vec(&x));
    let rhs = dot(&x, &bt.mul_vec(&y));
    assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0));
}

#[test]
fn pressure_mass_inverse() {
    for mesh in [distorted_tri_mesh(2), distorted_quad_mesh(2)] {
        let p = pressure_space(&mesh, 1);
        let (m, inv) = assemble_pressure_mass(&p).unwrap();
        let c = p.constant_vector();
        // M c = b, the vector of basis integrals.
        for (a, b) in m.mul_vec(&c).iter().zip(p.integrals()) {
            assert!((a - b).abs() < 1e-14);
        }
        let x = random_vec(p.n_dofs(), 3);
        let back = inv.mul_vec(&m.mul_vec(&x));
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

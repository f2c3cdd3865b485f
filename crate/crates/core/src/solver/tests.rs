use std::f64::consts::PI;

use nalgebra::DVector;

use super::*;
use crate::assembly::{zero_field, VectorField};
use crate::mesh::{classify_faces, generate_uniform_quad_mesh, BoundarySpec, Rect};
use crate::sparse::norm;
use crate::testing::*;

fn lid(x: [f64; 2], _t: f64) -> [f64; 2] {
    if x[1] > 1.0 - 1e-12 {
        [1.0, 0.0]
    } else {
        [0.0, 0.0]
    }
}

fn cavity(n: usize, k: usize, nu: f64, cfg: SolverConfig) -> NavierStokes {
    let mesh = quad_mesh(n);
    let v = Arc::new(dirichlet_space(&mesh, k));
    let p = Arc::new(pressure_space(&mesh, k));
    let ctx = FormContext::new(nu, crate::assembly::default_sigma(k), Arc::new(lid), zero_field()).unwrap();
    NavierStokes::new(v, p, ctx, cfg).unwrap()
}

fn inflow(x: [f64; 2], _t: f64) -> [f64; 2] {
    if x[0] < 1e-12 {
        [4.0 * x[1] * (1.0 - x[1]), 0.0]
    } else {
        [0.0, 0.0]
    }
}

fn channel(n: usize, k: usize, mut cfg: SolverConfig) -> NavierStokes {
    cfg.zero_mean_pressure = false;
    let mesh = Arc::new(generate_uniform_quad_mesh(2 * n, n, Rect::new(0.0, 2.0, 0.0, 1.0).unwrap()).unwrap());
    let sets = classify_faces(&mesh, &BoundarySpec::channel(mesh.bounding_box())).unwrap();
    let v = Arc::new(VelocitySpace::new(mesh.clone(), k, sets).unwrap());
    let p = Arc::new(PressureSpace::new(mesh, k, false).unwrap());
    let ctx = FormContext::new(0.05, crate::assembly::default_sigma(k), Arc::new(inflow), zero_field()).unwrap();
    NavierStokes::new(v, p, ctx, cfg).unwrap()
}

fn cfg(t_end: f64, steps: usize) -> SolverConfig {
    SolverConfig::new(t_end, steps).unwrap()
}

/// Discretely divergence-free field from a few random stream-function modes.
fn random_solenoidal(space: &VelocitySpace, seed: u64) -> FieldCoefficients {
    let a = random_vec(4, seed);
    let u = move |x: [f64; 2]| {
        let mut v = [0.0; 2];
        for (m, am) in a.iter().enumerate() {
            let f = (m + 1) as f64 * PI;
            // psi = sin^2(pi x) sin^2(pi y) sin(f (x + y))
            let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
            let (dsx, dsy) = (PI * (2.0 * PI * x[0]).sin(), PI * (2.0 * PI * x[1]).sin());
            let w = (f * (x[0] + x[1])).sin();
            let dw = f * (f * (x[0] + x[1])).cos();
            let psi_x = dsx * sy * sy * w + sx * sx * sy * sy * dw;
            let psi_y = sx * sx * dsy * w + sx * sx * sy * sy * dw;
            v[0] += am * psi_y;
            v[1] -= am * psi_x;
        }
        v
    };
    FieldCoefficients::new(space.tag(), space.interpolate(&u), 0.0)
}

#[test]
fn config_validation() {
    assert!(SolverConfig::new(1.0, 0).is_err());
    assert!(SolverConfig::new(-1.0, 4).is_err());
    let mut c = cfg(1.0, 4);
    assert_eq!(c.dt, 0.25);
    c.gmres.tol = 1.5;
    assert!(c.validate().is_err());
}

#[test]
fn velocity_block_limits() {
    let ns = cavity(3, 1, 0.1, cfg(1e-20, 1));
    let space = ns.velocity_space().clone();
    let free = space.free_dofs().to_vec();
    let m_ff = ns.mass().submatrix(&free, &free);
    let u = random_solenoidal(&space, 1);
    let sys = ns.build_saddle_system(&ns.initial_state(u).unwrap()).unwrap();
    assert!(sys.velocity_block.max_abs_diff(&m_ff) <= 1e-12 * m_ff.max_abs());
    assert_eq!(sys.shape(), (space.n_free() + ns.pressure_space().n_dofs(), space.n_free() + ns.pressure_space().n_dofs()));

    let ns = cavity(3, 1, 0.1, cfg(0.5, 1));
    let sys = ns.build_saddle_system(&ns.initial_state(space.zero_field(0.0)).unwrap()).unwrap();
    let a = crate::assembly::Assembler::new(space.clone()).unwrap().diffusion(ns.context().sigma);
    let expected = m_ff.linear_combination(1.0, &a.submatrix(&free, &free), 0.5 * 0.1).unwrap();
    assert!(sys.velocity_block.max_abs_diff(&expected) <= 1e-13 * expected.max_abs());
}

#[test]
fn gmres_matches_dense_solve() {
    let ns = channel(2, 0, cfg(0.1, 1));
    let space = ns.velocity_space().clone();
    let state = ns.initial_state(random_solenoidal(&space, 3)).unwrap();
    let sys = ns.build_saddle_system(&state).unwrap();
    assert!(sys.dim() <= 200, "{}", sys.dim());
    let dense = sys.to_dense().lu().solve(&DVector::from_column_slice(&sys.rhs)).unwrap();
    for pre in [true, false] {
        let mut c = ns.config().clone();
        c.preconditioned = pre;
        let ns2 = NavierStokes::new(space.clone(), ns.pressure_space().clone(), ns.context().clone(), c).unwrap();
        let mut x = vec![0.0; sys.dim()];
        ns2.solve_system(&sys, &mut x).unwrap();
        let err: f64 = x.iter().zip(dense.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * dense.norm(), "{err}");
    }
}

#[test]
fn preconditioner_is_linear() {
    let ns = cavity(3, 1, 0.01, cfg(0.1, 1));
    let state = ns.initial_state(random_solenoidal(ns.velocity_space(), 2)).unwrap();
    let sys = ns.build_saddle_system(&state).unwrap();
    let pre = ns.preconditioner(&sys).unwrap();
    let x = random_vec(sys.dim(), 4);
    let ax: Vec<f64> = x.iter().map(|v| -3.5 * v).collect();
    let mut y1 = vec![0.0; sys.dim()];
    let mut y2 = vec![0.0; sys.dim()];
    pre.apply(&x, &mut y1);
    pre.apply(&ax, &mut y2);
    for (a, b) in y1.iter().zip(&y2) {
        assert!((-3.5 * a - b).abs() <= 1e-13 * norm(&y2));
    }
}

#[test]
fn exact_blocks_converge_in_at_most_three() {
    let mut c = cfg(0.05, 1);
    c.schur = SchurApprox::Exact;
    let ns = cavity(2, 1, 0.01, c.clone());
    let sys = ns.build_saddle_system(&ns.initial_state(random_solenoidal(ns.velocity_space(), 5)).unwrap()).unwrap();
    let mut x = vec![0.0; sys.dim()];
    let stats = ns.solve_system(&sys, &mut x).unwrap();
    assert!(stats.iterations <= 3, "{}", stats.iterations);

    c.zero_mean_pressure = false;
    let ns = channel(2, 1, c);
    let sys = ns.build_saddle_system(&ns.initial_state(ns.velocity_space().zero_field(0.0)).unwrap()).unwrap();
    let mut x = vec![0.0; sys.dim()];
    let stats = ns.solve_system(&sys, &mut x).unwrap();
    assert!(stats.iterations <= 3, "{}", stats.iterations);
}

#[test]
fn preconditioning_reduces_iterations() {
    for schur in [SchurApprox::ScaledMass, SchurApprox::CahouetChabard] {
        let mut c = cfg(1.0 / 25.0, 1);
        c.schur = schur;
        let pre = cavity(8, 1, 1.0 / 3200.0, c.clone());
        c.preconditioned = false;
        let plain = cavity(8, 1, 1.0 / 3200.0, c);
        let u0 = pre.velocity_space().zero_field(0.0);
        let a = pre.step(&pre.initial_state(u0.clone()).unwrap()).unwrap();
        let b = plain.step(&plain.initial_state(u0).unwrap()).unwrap();
        assert!(a.last_iterations < b.last_iterations, "{schur:?}: {} vs {}", a.last_iterations, b.last_iterations);
    }
}

#[test]
fn velocity_block_approximations_agree() {
    let mut c = cfg(0.1, 2);
    c.velocity = VelocityApprox::Lu;
    let exact = cavity(6, 1, 1.0 / 400.0, c.clone());
    c.velocity = VelocityApprox::Ilu0;
    let incomplete = cavity(6, 1, 1.0 / 400.0, c);
    let u0 = random_solenoidal(exact.velocity_space(), 3);
    let a = exact.evolve(u0.clone()).unwrap();
    let b = incomplete.evolve(u0).unwrap();
    let diff = a.velocity.coeffs.iter().zip(&b.velocity.coeffs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.velocity.coeffs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8 * scale, "{diff} vs {scale}");
}

#[test]
fn mean_projector_properties() {
    let mesh = distorted_quad_mesh(3);
    let p = pressure_space(&mesh, 1);
    let sets = classify_faces(&mesh, &BoundarySpec::all_dirichlet(mesh.bounding_box())).unwrap();
    let proj = MeanProjector::new(&p, &sets).unwrap();
    let mut c: Vec<f64> = p.constant_vector().iter().map(|v| 2.5 * v).collect();
    proj.apply(&mut c);
    assert!(c.iter().all(|v| v.abs() < 1e-12));
    let mut q = random_vec(p.n_dofs(), 8);
    proj.apply(&mut q);
    assert!(proj.mean(&q).abs() < 1e-10);
    let mut q2 = q.clone();
    proj.apply(&mut q2);
    assert!(q.iter().zip(&q2).all(|(a, b)| (a - b).abs() < 1e-12));

    let channel_sets = classify_faces(&mesh, &BoundarySpec::channel(mesh.bounding_box())).unwrap();
    assert!(matches!(MeanProjector::new(&p, &channel_sets), Err(Error::Contract(_))));
}

#[test]
fn zero_state_is_a_fixed_point() {
    let mesh = quad_mesh(3);
    let v = Arc::new(dirichlet_space(&mesh, 1));
    let p = Arc::new(pressure_space(&mesh, 1));
    let ctx = FormContext::homogeneous(0.01, 40.0).unwrap();
    let ns = NavierStokes::new(v.clone(), p, ctx, cfg(0.1, 3)).unwrap();
    let end = ns.evolve(v.zero_field(0.0)).unwrap();
    assert!(end.velocity.coeffs.iter().all(|&c| c == 0.0));
    assert_eq!(end.step, 3);
}

#[test]
fn energy_decays_without_forcing() {
    let mesh = distorted_quad_mesh(4);
    let v = Arc::new(dirichlet_space(&mesh, 1));
    let p = Arc::new(pressure_space(&mesh, 1));
    let ctx = FormContext::homogeneous(1e-3, 40.0).unwrap();
    let ns = NavierStokes::new(v.clone(), p, ctx, cfg(0.4, 20)).unwrap();
    let mut prev = v.l2_norm(&random_solenoidal(&v, 6).coeffs).unwrap();
    ns.evolve_with(random_solenoidal(&v, 6), |s| {
        let now = v.l2_norm(&s.velocity.coeffs)?;
        assert!(now <= prev * (1.0 + 1e-10), "{now} > {prev}");
        prev = now;
        Ok(())
    })
    .unwrap();
}

#[test]
fn steps_keep_the_velocity_divergence_free() {
    let ns = cavity(4, 1, 1e-3, cfg(0.2, 5));
    let space = ns.velocity_space().clone();
    ns.evolve_with(space.zero_field(0.0), |s| {
        let d = ns.diagnostics(s)?;
        assert!(d.max_divergence <= 1e-8 * d.l2_norm, "{d:?}");
        assert!(ns.projector().unwrap().mean(&s.pressure.coeffs).abs() < 1e-10);
        Ok(())
    })
    .unwrap();
}

#[test]
fn single_step_evolve_equals_step() {
    let ns = cavity(3, 0, 0.01, cfg(0.1, 1));
    let u0 = random_solenoidal(ns.velocity_space(), 4);
    let a = ns.evolve(u0.clone()).unwrap();
    let b = ns.step(&ns.initial_state(u0).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn evolve_is_deterministic() {
    let ns = cavity(4, 1, 1e-3, cfg(0.1, 4));
    let u0 = random_solenoidal(ns.velocity_space(), 9);
    let a = ns.evolve(u0.clone()).unwrap();
    let b = ns.clone().evolve(u0).unwrap();
    assert_eq!(a.velocity.coeffs, b.velocity.coeffs);
    assert_eq!(a.pressure.coeffs, b.pressure.coeffs);
}

#[test]
fn rescaled_pressure_matches_unscaled_system() {
    let dt = 0.05;
    let mut c = cfg(dt, 1);
    c.zero_mean_pressure = false;
    let ns = channel(2, 1, c);
    let space = ns.velocity_space().clone();
    let u0 = random_solenoidal(&space, 12);
    let state = ns.initial_state(u0).unwrap();
    let next = ns.step(&state).unwrap();
    let p = next.physical_pressure(dt);

    // Unscaled system: (K / dt) u + B^T p = rhs / dt, B u = rhs_p.
    let sys = ns.build_saddle_system(&state).unwrap();
    assert!(sys.dim() <= 200 * 2);
    let nv = sys.n_velocity();
    let mut d = sys.to_dense();
    d.view_mut((0, 0), (nv, nv)).scale_mut(1.0 / dt);
    let mut rhs = DVector::from_column_slice(&sys.rhs);
    rhs.rows_mut(0, nv).scale_mut(1.0 / dt);
    let direct = d.lu().solve(&rhs).unwrap();
    let pd: Vec<f64> = direct.rows(nv, sys.n_pressure()).iter().copied().collect();
    let err: f64 = p.iter().zip(&pd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 1e-8 * norm(&pd), "{err} vs {}", norm(&pd));
}

#[test]
fn failing_step_is_annotated() {
    let mut c = cfg(0.1, 2);
    c.gmres.max_iter = 1;
    c.preconditioned = false;
    let ns = cavity(3, 1, 0.01, c);
    let err = ns.evolve(ns.velocity_space().zero_field(0.0)).unwrap_err();
    assert!(matches!(err, Error::Step { step: 1, .. }), "{err}");
}

#[test]
fn with_context_shares_matrices_but_checks_coefficients() {
    let ns = cavity(2, 0, 0.01, cfg(0.1, 1));
    let g: VectorField = Arc::new(|_, _| [0.0, 0.0]);
    let other = FormContext::new(0.01, ns.context().sigma, g.clone(), zero_field()).unwrap();
    assert!(ns.with_context(other).is_ok());
    let bad = FormContext::new(0.02, ns.context().sigma, g, zero_field()).unwrap();
    assert!(ns.with_context(bad).is_err());
}

#[test]
fn diagnostics_csv_has_one_row_per_step() {
    let ns = cavity(2, 0, 0.01, cfg(0.1, 3));
    let mut rows = Vec::new();
    ns.evolve_with(ns.velocity_space().zero_field(0.0), |s| {
        rows.push(ns.diagnostics(s)?);
        Ok(())
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diag.csv");
    write_diagnostics_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("step,time,l2_norm,max_divergence,gmres_iterations"));
}


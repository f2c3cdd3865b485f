use super::*;
use crate::assembly::default_sigma;
use crate::mesh::{classify_faces, generate_uniform_quad_mesh, BoundarySpec, Rect};
use crate::solver::SolverConfig;
use crate::spaces::PressureSpace;
use crate::testing::*;

fn cavity_solver(n: usize, steps: usize) -> NavierStokes {
    let mesh = quad_mesh(n);
    let v = Arc::new(dirichlet_space(&mesh, 1));
    let p = Arc::new(pressure_space(&mesh, 1));
    let ctx = FormContext::homogeneous(1.0 / 3200.0, default_sigma(1)).unwrap();
    let cfg = SolverConfig::new(0.02 * steps as f64, steps).unwrap();
    NavierStokes::new(v, p, ctx, cfg).unwrap()
}

fn channel_solver(steps: usize) -> NavierStokes {
    let domain = Rect::new(0.0, 1.5, 0.0, 0.5).unwrap();
    let mesh = Arc::new(generate_uniform_quad_mesh(6, 2, domain).unwrap());
    let sets = classify_faces(&mesh, &BoundarySpec::channel(domain)).unwrap();
    let v = Arc::new(VelocitySpace::new(mesh.clone(), 1, sets).unwrap());
    let p = Arc::new(PressureSpace::new(mesh, 1, false).unwrap());
    let ctx = FormContext::homogeneous(0.5 / 1600.0, default_sigma(1)).unwrap();
    let mut cfg = SolverConfig::new(0.01 * steps as f64, steps).unwrap();
    cfg.zero_mean_pressure = false;
    NavierStokes::new(v, p, ctx, cfg).unwrap()
}

fn ks_distance_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = ((x + 1.0) / 2.0).clamp(0.0, 1.0);
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn seeds_are_distinct_and_reproducible() {
    let mut seeds: Vec<u64> = (0..10_000).map(|m| sample_seed(42, m)).collect();
    assert_eq!(sample_seed(42, 17), seeds[17]);
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 10_000);
    assert_ne!(sample_seed(1, 0), sample_seed(2, 0));
}

#[test]
fn variables_are_uniform_and_independent() {
    let spec = RandomFieldSpec::lid_driven(2024);
    let n = 10_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|m| sample_variables(&spec, m)).collect();
    for j in 0..spec.n_variables() {
        let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        assert!(col.iter().all(|y| (-1.0..=1.0).contains(y)));
        let ks = ks_distance_uniform(col);
        assert!(ks <= 0.02, "Y_{j}: KS distance {ks}");
    }
    let y0: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let y1: Vec<f64> = draws.iter().map(|d| d[1]).collect();
    assert!(correlation(&y0[..n - 1], &y0[1..]).abs() <= 0.05);
    assert!(correlation(&y0, &y1).abs() <= 0.05);
}

#[test]
fn variables_do_not_depend_on_draw_order() {
    let spec = RandomFieldSpec::channel(9);
    let forward: Vec<Vec<f64>> = (0..20).map(|m| sample_variables(&spec, m)).collect();
    let backward: Vec<Vec<f64>> = (0..20).rev().map(|m| sample_variables(&spec, m)).collect();
    for (m, v) in backward.iter().rev().enumerate() {
        assert_eq!(v, &forward[m]);
    }
    assert_eq!(forward[0].len(), 12);
}

#[test]
fn mode_parity_is_checked() {
    let mut spec = RandomFieldSpec::lid_driven(0);
    spec.modes = 10;
    assert!(matches!(SampleDraw::new(&spec, 0), Err(Error::InvalidArgument(_))));
    let mut spec = RandomFieldSpec::channel(0);
    spec.modes = 11;
    assert!(draw_sample_channel(&spec, 0).is_err());
    assert!(draw_sample_lid_driven(&RandomFieldSpec::channel(0), 0).is_err());
    assert!(draw_sample_channel(&RandomFieldSpec::lid_driven(0), 0).is_err());
}

#[test]
fn unperturbed_cavity_is_the_rigid_rotation() {
    let mut spec = RandomFieldSpec::lid_driven(5);
    spec.gamma1 = 0.0;
    spec.gamma2 = 0.0;
    let (u0, g) = draw_sample_lid_driven(&spec, 3).unwrap();
    for x in [[0.1, 0.9], [0.5, 0.5], [0.73, 0.2]] {
        assert_eq!(u0(x), [x[1] - 0.5, -(x[0] - 0.5)]);
    }
    assert_eq!(g([0.3, 1.0], 0.0), [1.0, 0.0]);
    assert_eq!(g([0.0, 0.3], 0.0), [0.0, 0.0]);

    let zeros = SampleDraw::with_variables(&RandomFieldSpec::lid_driven(5), 0, vec![0.0; 12]).unwrap();
    let x = [0.31, 0.77];
    assert_eq!(zeros.cavity_map(x), x);
    assert_eq!(zeros.initial_velocity(x), [x[1] - 0.5, -(x[0] - 0.5)]);
}

#[test]
fn cavity_draws_stay_near_the_base_field() {
    let spec = RandomFieldSpec::lid_driven(77);
    let bound = spec.gamma1 * ((spec.modes - 1) / 2 + 1) as f64;
    for m in 0..200 {
        let d = SampleDraw::new(&spec, m).unwrap();
        let lid = d.lid_speed();
        assert!((0.99..=1.01).contains(&lid), "lid speed {lid}");
        for x in [[0.2, 0.4], [0.9, 0.1]] {
            let f = d.cavity_map(x);
            assert!((f[0] - x[0]).abs() <= bound && (f[1] - x[1]).abs() <= bound);
        }
    }
}

#[test]
fn unperturbed_channel_is_the_parabola() {
    let mut spec = RandomFieldSpec::channel(1);
    spec.gamma1 = 0.0;
    spec.gamma2 = 0.0;
    let (u0, g) = draw_sample_channel(&spec, 0).unwrap();
    let peak = u0([0.7, 0.25]);
    assert!((peak[0] - 1.5).abs() < 1e-14 && peak[1] == 0.0);
    let x = [0.0, 0.1];
    assert!((u0(x)[0] - 4.0 * 1.5 * 0.1 * 0.4 / 0.25).abs() < 1e-14);
    assert_eq!(g(x, 0.3), u0(x));
}

#[test]
fn channel_draws_vanish_on_walls_and_obey_the_bound() {
    let spec = RandomFieldSpec::channel(31);
    let bound = spec.gamma1 * (spec.modes / 2 + 1) as f64 * spec.u_max;
    for m in 0..100 {
        let d = SampleDraw::new(&spec, m).unwrap();
        for x1 in [0.0, 0.4, 1.5] {
            assert_eq!(d.initial_velocity([x1, 0.0]), [0.0, 0.0]);
            assert!(d.initial_velocity([x1, 0.5]).iter().all(|v| v.abs() < 1e-15));
        }
        for i in 1..50 {
            let x2 = 0.5 * i as f64 / 50.0;
            let parabola = 4.0 * spec.u_max * x2 * (0.5 - x2) / 0.25;
            let u = d.initial_velocity([0.3, x2]);
            assert!((u[0] - parabola).abs() <= bound + 1e-15);
        }
    }
}

#[test]
fn single_sample_matches_a_direct_solve() {
    let solver = cavity_solver(4, 2);
    let spec = RandomFieldSpec::lid_driven(11);
    let ens = run_monte_carlo(&solver, &spec, 1, Exec::Sequential).unwrap();
    assert_eq!(ens.len(), 1);

    let draw = SampleDraw::new(&spec, 0).unwrap();
    let ctx = FormContext::new(solver.context().nu, solver.context().sigma, draw.boundary_field(), zero_field()).unwrap();
    let direct = solver.with_context(ctx).unwrap();
    let u0 = l2_project_velocity_with(
        &|x| draw.initial_velocity(x),
        &|x| draw.boundary_velocity(x),
        direct.velocity_space(),
        direct.mass(),
    )
    .unwrap();
    let expected = direct.evolve(u0).unwrap();
    assert_eq!(ens.members[0].field, expected.velocity);
    assert_eq!(ens.members[0].seed, draw.seed);
    assert_eq!(ens.time, 0.04);
}

#[test]
fn ensemble_is_schedule_independent() {
    let solver = cavity_solver(3, 2);
    let spec = RandomFieldSpec::lid_driven(3);
    let a = run_monte_carlo(&solver, &spec, 4, Exec::Sequential).unwrap();
    let b = run_monte_carlo(&solver, &spec, 4, Exec::Parallel(3)).unwrap();
    assert_eq!(a.members, b.members);
    assert_eq!(a.members.iter().map(|m| m.m).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert_ne!(a.members[0].field, a.members[1].field);
}

#[test]
fn channel_samples_run() {
    let solver = channel_solver(2);
    let ens = run_monte_carlo(&solver, &RandomFieldSpec::channel(8), 2, Exec::Sequential).unwrap();
    let space = &ens.space;
    for f in ens.fields() {
        let div = space.max_divergence(&f.coeffs).unwrap();
        let norm = space.l2_norm(&f.coeffs).unwrap();
        assert!(div <= 1e-8 * norm, "{div} vs {norm}");
    }
}

#[test]
fn solver_failure_names_sample_and_step() {
    let mut solver = cavity_solver(3, 2);
    let mut cfg = solver.config().clone();
    cfg.gmres.max_iter = 1;
    cfg.preconditioned = false;
    solver = NavierStokes::new(
        solver.velocity_space().clone(),
        solver.pressure_space().clone(),
        solver.context().clone(),
        cfg,
    )
    .unwrap();
    let err = run_monte_carlo(&solver, &RandomFieldSpec::lid_driven(0), 2, Exec::Parallel(2)).unwrap_err();
    assert!(matches!(err, Error::Sample { sample: 0, step: 1, .. }), "{err}");
    assert!(run_monte_carlo(&solver, &RandomFieldSpec::lid_driven(0), 0, Exec::Sequential).is_err());
}

#[test]
fn manifest_round_trip() {
    let solver = cavity_solver(3, 1);
    let ens = run_monte_carlo(&solver, &RandomFieldSpec::lid_driven(5), 3, Exec::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = ens.write(dir.path()).unwrap();
    assert_eq!(written.len(), 4);
    let manifest = written.last().unwrap();
    let text = std::fs::read_to_string(manifest).unwrap();
    assert!(text.starts_with("m,seed,field_file,time,mesh_checksum\n"));
    let back = Ensemble::read(manifest, ens.space.clone()).unwrap();
    assert_eq!(back.members, ens.members);
    assert_eq!(back.time, ens.time);

    let other = Arc::new(dirichlet_space(&quad_mesh(4), 1));
    assert!(matches!(Ensemble::read(manifest, other), Err(Error::Contract(_))));
}

#[test]
fn manifest_parse_errors_carry_line_numbers() {
    let p = Path::new("m.csv");
    assert!(matches!(parse_manifest("", p), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(parse_manifest("a,b\n", p), Err(Error::Parse { line: 1, .. })));
    let bad = "m,seed,field_file,time,mesh_checksum\n0,1,f.csv,1e0,abc\nx,1,f.csv,1e0,abc\n";
    assert!(matches!(parse_manifest(bad, p), Err(Error::Parse { line: 3, .. })));
    let short = "m,seed,field_file,time,mesh_checksum\n0,1,f.csv\n";
    assert!(matches!(parse_manifest(short, p), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn ensemble_rejects_duplicate_seeds_and_mixed_times() {
    let space = Arc::new(dirichlet_space(&quad_mesh(2), 0));
    let f = space.zero_field(1.0);
    let mem = |m, seed, field: FieldCoefficients| Member { m, seed, field };
    assert!(Ensemble::new(space.clone(), 1.0, vec![mem(0, 1, f.clone()), mem(1, 1, f.clone())]).is_err());
    assert!(Ensemble::new(space.clone(), 1.0, vec![mem(0, 1, f.clone()), mem(1, 2, space.zero_field(0.5))]).is_err());
    assert!(Ensemble::new(space.clone(), 1.0, vec![]).is_err());
    assert_eq!(Ensemble::new(space, 1.0, vec![mem(0, 1, f)]).unwrap().len(), 1);
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rotset_core::flow::random_state;
use rotset_core::rotation::{hull_loops, tracking_base};
use rotset_core::solver::solve_loop;
use rotset_core::square::{orbit_polyline, winding_trace};
use rotset_core::*;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn hull_of(m: usize, r: f64, max_norm: Option<f64>, max_len: usize) -> RotationSetEstimate {
    let cfg = Config::torus(m, r).unwrap();
    let g = build_torus_graph(&cfg, max_norm).unwrap();
    estimate_admissible_hull(&g, &cfg, max_len, usize::MAX, &opts()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hull_is_centrally_symmetric(r in 0.08f64..0.34, max_len in 2usize..=3) {
        let est = hull_of(2, r, Some(4.0), max_len);
        prop_assert!(est.failures.is_empty());
        for p in &est.points {
            let mirrored = est.points.iter().any(|q| {
                q.rotation_vector.iter().zip(&p.rotation_vector).all(|(a, b)| (a + b).abs() < 1e-9)
            });
            prop_assert!(mirrored, "no partner for loop {}", p.loop_id);
        }
        prop_assert!(est.inscribed_radius > 0.0);
        prop_assert!(est.max_norm() < 1.0);
    }

    #[test]
    fn reversed_trajectory_winds_backwards(seed in any::<u64>(), r in 0.05f64..0.34, t in 5.0f64..200.0) {
        let cfg = Config::square(r, [0.0, 0.0]).unwrap();
        let s = random_state(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let rec = simulate(&cfg, &s, t).unwrap();
        let z = cfg.obstacle_center(&cfg.origin());
        let pts = rec.polyline();
        let mut back = pts.clone();
        back.reverse();
        let fw = winding_trace(&pts, &z, &cfg).unwrap().winding();
        let bw = winding_trace(&back, &z, &cfg).unwrap().winding();
        prop_assert!((fw + bw).abs() < 1e-12, "{fw} vs {bw}");
    }

    #[test]
    fn closed_orbit_winding_is_an_integer_independent_of_z(
        idx in 0usize..10_000,
        rho in 0.0f64..0.95,
        phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let cfg = Config::square(0.1, [0.05, -0.03]).unwrap();
        let g = build_square_graph(&cfg, Some(4.0)).unwrap();
        let loops = g.enumerate_loops(2, usize::MAX).unwrap();
        let l = &loops[idx % loops.len()];
        let o = solve_loop(l, &cfg, &opts()).unwrap();
        let pts = orbit_polyline(&o);
        let c = cfg.obstacle_center(&cfg.origin());
        let z = Vector::new(vec![c[0] + rho * 0.1 * phi.cos(), c[1] + rho * 0.1 * phi.sin()]);
        let wc = winding_trace(&pts, &c, &cfg).unwrap().winding();
        let wz = winding_trace(&pts, &z, &cfg).unwrap().winding();
        prop_assert!((wc - wc.round()).abs() < 1e-9, "winding {wc}");
        prop_assert!((wc - wz).abs() < 1e-9, "{wc} vs {wz}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn tracking_reaches_interior_targets(rho in 0.0f64..0.8, phi in 0.0f64..std::f64::consts::TAU) {
        let cfg = Config::torus(2, 0.2).unwrap();
        let g = build_torus_graph(&cfg, None).unwrap();
        let est = estimate_admissible_hull(&g, &cfg, 2, usize::MAX, &opts()).unwrap();
        let base = tracking_base(&g, &cfg, &hull_loops(&est).unwrap(), 3, &opts()).unwrap();
        let rot: Vec<Vector> = base.iter().map(|o| o.rotation_vector.clone()).collect();
        let s = rho * convex_hull(&rot).unwrap().inscribed_radius();
        let u = [s * phi.cos(), s * phi.sin()];
        let t = 1000.0;
        let run = generate_tracking_path(&Vector::from_f64s(&u), &base, t, &cfg).unwrap();
        prop_assert!(run.bound_holds());
        let w = run.empirical_rotation();
        let err = ((w[0] - u[0]).powi(2) + (w[1] - u[1]).powi(2)).sqrt();
        prop_assert!(err <= 2.0 * run.m / t, "{err} > {}", 2.0 * run.m / t);
    }
}

#[test]
fn inscribed_radius_grows_with_loop_length() {
    for r in [0.1, 0.2] {
        let radii: Vec<f64> = (2..=4).map(|l| hull_of(2, r, Some(4.0), l).inscribed_radius).collect();
        for w in radii.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "r={r}: {radii:?}");
        }
    }
}

#[test]
fn lower_bounds_sit_inside_the_estimate() {
    for (m, max_norm) in [(2, None), (3, Some(2.0))] {
        for r in [0.1, 0.2] {
            let est = hull_of(m, r, max_norm, 2);
            assert!(est.failures.is_empty());
            let b = &est.bounds;
            assert!(b.best <= est.inscribed_radius, "m={m} r={r}: {} > {}", b.best, est.inscribed_radius);
            assert!(b.dim_bound <= b.best && b.st10 <= b.best);
        }
    }
}

#[test]
fn inscribed_radius_grows_as_the_obstacle_shrinks() {
    let radii: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&r| hull_of(2, r, None, 2).inscribed_radius).collect();
    assert!(radii[0] < radii[1] && radii[1] < radii[2], "{radii:?}");
}

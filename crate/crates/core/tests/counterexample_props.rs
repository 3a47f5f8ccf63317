use rand::Rng;

use nsdyn_core::counterexample::{
    cross_function, cross_update, doubling_check, escape_experiment, monotone_drift_check,
    EscapeConfig, DEFAULT_STEP_SIZES,
};
use nsdyn_core::rng::{sample_ball, stream_rng};
use nsdyn_core::{run, step, Error, RunOptions, SelectionPolicy, Vector};

#[test]
fn doubling_holds_on_precondition_region() {
    let mut rng = stream_rng(99, 0);
    for i in 0..10_000 {
        let alpha = DEFAULT_STEP_SIZES[i % 4];
        let x1 = rng.random_range(0.5..=1.5);
        let x2 = (1.0 - rng.random::<f64>()) * alpha * alpha / 32.0;
        let x2 = if i % 2 == 0 { x2 } else { -x2 };
        assert!(
            doubling_check(&Vector::from([x1, x2]), alpha).unwrap(),
            "({x1}, {x2}) alpha {alpha}"
        );
    }
}

#[test]
fn doubling_boundary_and_preconditions() {
    let x = Vector::from([1.0, 3.125e-4]);
    assert!(doubling_check(&x, 0.1).unwrap());
    let next = cross_update(&x, 0.1).unwrap();
    assert!((next[1].abs() - 2.3391e-3).abs() < 1e-7, "{}", next[1]);
    assert!(doubling_check(&Vector::from([0.5, 1e-6]), 0.1).unwrap());
    for bad in [[1.0, 0.0], [0.4, 1e-6], [1.0, 1e-3]] {
        assert!(matches!(
            doubling_check(&Vector::from(bad), 0.1),
            Err(Error::PreconditionViolated(_))
        ));
    }
}

#[test]
fn explicit_update_agrees_with_engine() {
    let f = cross_function();
    let mut rng = stream_rng(3, 0);
    for i in 0..10_000 {
        let alpha = DEFAULT_STEP_SIZES[i % 4];
        let x = Vector::from([rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let (generic, _) = step(&f, &x, alpha, SelectionPolicy::MinimalNorm, &mut rng).unwrap();
        let explicit = cross_update(&x, alpha).unwrap();
        for j in 0..2 {
            assert!(
                (explicit[j] - generic[j]).abs() <= 1e-15 * generic[j].abs(),
                "{x:?}"
            );
        }
    }
    assert!(matches!(
        cross_update(&Vector::from([0.0, 1.0]), 0.1),
        Err(Error::OnNullSet(_))
    ));
}

/// Once |x₂| is below α²/32 with x₁ ≥ ½ inside the ball, it keeps growing.
#[test]
fn small_x2_grows_along_escaping_runs() {
    let f = cross_function();
    let center = Vector::from([1.0, 0.0]);
    for (i, alpha) in [0.1, 0.3].into_iter().enumerate() {
        let small = alpha * alpha / 32.0;
        let mut rng = stream_rng(17, i as u64);
        for _ in 0..100 {
            let x0 = sample_ball(&mut rng, &center, 0.25);
            let traj = run(
                &f,
                &x0,
                &RunOptions::new(alpha, 100_000)
                    .stop(nsdyn_core::Ball::new(center.clone(), 0.25).unwrap()),
            )
            .unwrap();
            assert!(
                traj.first_exit(&center, 0.25).is_some(),
                "{x0:?} alpha {alpha}"
            );
            for w in traj.points.windows(2) {
                let (p, q) = (&w[0], &w[1]);
                if p[0] >= 0.5 && p[1].abs() <= small && p.distance(&center) <= 0.25 {
                    assert!(q[1].abs() > p[1].abs(), "{p:?} -> {q:?}");
                }
            }
        }
    }
}

#[test]
fn x1_drifts_monotonically() {
    let f = cross_function();
    let traj = run(&f, &Vector::from([1.0, 0.1]), &RunOptions::new(0.1, 100)).unwrap();
    assert!(monotone_drift_check(&traj).unwrap());
    let stuck = run(&f, &Vector::from([1.0, 0.0]), &RunOptions::new(0.1, 10)).unwrap();
    assert!(matches!(
        monotone_drift_check(&stuck),
        Err(Error::PreconditionViolated(_))
    ));
    let negative = run(&f, &Vector::from([-1.0, 0.1]), &RunOptions::new(0.1, 10)).unwrap();
    assert!(matches!(
        monotone_drift_check(&negative),
        Err(Error::PreconditionViolated(_))
    ));
}

#[test]
fn every_generic_start_escapes_at_alpha_one_tenth() {
    let stats = escape_experiment(&EscapeConfig::new(0.25, 0.1, 1000, 100_000, 7)).unwrap();
    assert_eq!(stats.escaped_count, 1000);
    assert_eq!(stats.stuck_on_s_count, 0);
    assert!(stats.non_escaping.is_empty());
    assert!(stats
        .outcomes
        .iter()
        .all(|o| o.doubling_held && !o.hit_null_set));
    assert_eq!(
        escape_experiment(&EscapeConfig::new(0.25, 0.1, 1000, 100_000, 7)).unwrap(),
        stats
    );
}

#[test]
fn start_on_null_set_is_counted_not_run() {
    let mut cfg = EscapeConfig::new(0.25, 0.1, 1, 100_000, 7);
    cfg.initial_points = Some(vec![Vector::from([1.0, 0.0])]);
    let stats = escape_experiment(&cfg).unwrap();
    assert_eq!((stats.escaped_count, stats.stuck_on_s_count), (0, 1));
    assert_eq!(stats.max_exit_index, None);
}

#[test]
fn experiment_rejects_bad_radius() {
    for eps in [0.0, 0.6, f64::NAN] {
        assert!(escape_experiment(&EscapeConfig::new(eps, 0.1, 10, 10, 0)).is_err());
    }
}

/// Full-size run at the larger radius; takes minutes in an optimised build.
#[test]
#[ignore]
fn wide_ball_small_step_baseline() {
    let stats = escape_experiment(&EscapeConfig::new(0.5, 0.05, 1000, 1_000_000, 7)).unwrap();
    println!(
        "escaped {} max exit {:?}",
        stats.escaped_count, stats.max_exit_index
    );
    assert_eq!(stats.escaped_count, 1000);
}

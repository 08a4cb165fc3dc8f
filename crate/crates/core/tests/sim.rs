use barrier_compose::certificates::TeamParams;
use barrier_compose::scenario::Scenario;
use barrier_compose::sim::{metrics, run, step, StepStatus};
use barrier_compose::state::EnsembleState;

fn scenario(name: &str) -> Scenario {
    Scenario::load(format!("{}/scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn step_is_exact_for_constant_acceleration() {
    let p = TeamParams::new(2, 2.0, 10.0, 0.15, 0.6).unwrap();
    let mut x = EnsembleState::new(vec![[0.0, 0.0], [5.0, 5.0]], vec![[0.1, -0.2], [0.0, 0.0]]).unwrap();
    let u = [0.5, 0.25, 0.0, 0.0];
    for _ in 0..100 {
        x = step(&x, &u, 0.01, &p).unwrap();
    }
    // after 1 s: p = v t + a t² / 2
    assert!((x.positions[0][0] - 0.35).abs() < 1e-12);
    assert!((x.positions[0][1] - (-0.075)).abs() < 1e-12);
    assert!((x.velocities[0][0] - 0.6).abs() < 1e-12);
    assert!((x.t - 1.0).abs() < 1e-12);
}

#[test]
fn step_caps_speed_along_the_velocity_direction() {
    let p = TeamParams::new(2, 2.0, 0.5, 0.15, 0.6).unwrap();
    let x = EnsembleState::new(vec![[0.0, 0.0], [5.0, 5.0]], vec![[0.3, 0.4], [0.0, 0.0]]).unwrap();
    let next = step(&x, &[2.0, 2.0, 0.0, 0.0], 0.1, &p).unwrap();
    let v = next.velocities[0];
    assert!(v[0].hypot(v[1]) <= 0.5);
    assert!((v[1] / v[0] - 0.6 / 0.5).abs() < 1e-12);
}

#[test]
fn zero_duration_records_only_the_initial_state() {
    let mut config = scenario("pair_safety").config;
    config.duration = 0.0;
    let log = run(&config).unwrap();
    assert_eq!(log.records.len(), 1);
    assert_eq!(log.records[0].state, config.initial);
}

#[test]
fn record_count_and_distances_match_the_states() {
    let config = scenario("dynamic_switch").config;
    let log = run(&config).unwrap();
    assert_eq!(log.records.len(), config.step_count() + 1);
    for r in &log.records {
        assert_eq!(r.distances, r.state.pairwise_distances());
        assert!((0..3).all(|i| r.state.speed(i) <= config.params.max_speed));
        assert!(r.control.iter().all(|u| u.abs() <= config.params.max_accel));
        assert!(r.log_b.is_some_and(|b| b.is_finite()));
    }
    assert_eq!(log.fallback_count(), 0);
}

#[test]
fn safety_run_stays_safe_and_baseline_does_not() {
    let safe = scenario("exp1_safety");
    let m = metrics(&run(&safe.config).unwrap(), &safe.config).unwrap();
    assert!(m.min_pair_distance >= safe.config.params.safety_distance);
    assert!(m.certified_pass());

    let base = scenario("exp1_baseline");
    let log = run(&base.config).unwrap();
    assert!(log.records.iter().all(|r| r.status == StepStatus::Unfiltered && r.log_b.is_none()));
    let m = metrics(&log, &base.config).unwrap();
    assert!(m.min_pair_distance < base.config.params.safety_distance);
    assert!(m.certified_pass());
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut config = scenario("pair_safety").config;
    config.initial.velocities[0] = [1.0, 0.0];
    assert!(run(&config).is_err());
    let mut config = scenario("pair_safety").config;
    config.dt = -0.01;
    assert!(run(&config).is_err());
}

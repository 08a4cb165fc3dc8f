use barrier_compose::controller::SafetyFilter;
use barrier_compose::scenario::Scenario;
use barrier_compose::sim::{run, SimConfig, StepStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(name: &str) -> Scenario {
    Scenario::load(format!("{}/scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[test]
fn filtered_controls_are_minimal_against_random_feasible_controls() {
    let s = scenario("exp2_safety_connectivity");
    let mut config = s.config.clone();
    config.duration = 20.0;
    let log = run(&config).unwrap();
    let tree = config.certificate.build(&config.params).unwrap().unwrap();
    let filter = SafetyFilter::new(tree, config.alpha, config.params.clone(), config.gains);
    let bound = config.params.max_accel;

    let corrected: Vec<_> = log.records.iter().filter(|r| r.status == StepStatus::Corrected).collect();
    assert!(corrected.len() > 10, "only {} corrected steps", corrected.len());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut probes = 0;
    for r in corrected.iter().step_by(corrected.len() / 10) {
        let (u, diag) = filter.safe_control(&r.state, &r.nominal).unwrap();
        assert_eq!(u, r.control);
        let c = diag.constraint.unwrap();
        assert!(c.evaluate(&u) >= -1e-9);
        let best = sq_dist(&u, &r.nominal);
        for k in 0..1000 {
            // half uniform over the box, half close to the optimum
            let spread = if k % 2 == 0 { bound } else { 0.05 };
            let centre = if k % 2 == 0 { vec![0.0; u.len()] } else { u.clone() };
            let v: Vec<f64> = centre.iter().map(|c| (c + rng.gen_range(-spread..spread)).clamp(-bound, bound)).collect();
            if c.is_satisfied(&v) {
                probes += 1;
                assert!(sq_dist(&v, &r.nominal) >= best - 1e-9);
            }
        }
    }
    assert!(probes > 1000);
}

fn transformed(config: &SimConfig, f: impl Fn([f64; 2]) -> [f64; 2], linear: bool) -> SimConfig {
    let mut c = config.clone();
    for p in &mut c.initial.positions {
        *p = f(*p);
    }
    if linear {
        for v in &mut c.initial.velocities {
            *v = f(*v);
        }
    }
    for w in c.plan.waypoints.iter_mut().flatten() {
        *w = f(*w);
    }
    c
}

fn assert_equivariant(base: &SimConfig, pos: impl Fn([f64; 2]) -> [f64; 2], vel: impl Fn([f64; 2]) -> [f64; 2], moved: &SimConfig) {
    let (a, b) = (run(base).unwrap(), run(moved).unwrap());
    assert_eq!(a.records.len(), b.records.len());
    for (ra, rb) in a.records.iter().zip(&b.records) {
        for (pa, pb) in ra.state.positions.iter().zip(&rb.state.positions) {
            let want = pos(*pa);
            assert!((want[0] - pb[0]).abs() < 1e-6 && (want[1] - pb[1]).abs() < 1e-6, "t={} {want:?} vs {pb:?}", ra.t);
        }
        for (ua, ub) in ra.control.chunks(2).zip(rb.control.chunks(2)) {
            let want = vel([ua[0], ua[1]]);
            assert!((want[0] - ub[0]).abs() < 1e-6 && (want[1] - ub[1]).abs() < 1e-6);
        }
        for (da, db) in ra.distances.iter().zip(&rb.distances) {
            assert!((da - db).abs() < 1e-6);
        }
    }
    assert_eq!(a.waypoints_visited, b.waypoints_visited);
}

#[test]
fn runs_are_translation_equivariant() {
    let mut config = scenario("exp2_safety_connectivity").config;
    config.duration = 10.0;
    let shift = |p: [f64; 2]| [p[0] + 3.0, p[1] - 1.25];
    let moved = transformed(&config, shift, false);
    assert_equivariant(&config, shift, |v| v, &moved);
}

#[test]
fn runs_are_equivariant_under_quarter_turns() {
    let mut config = scenario("exp1_safety").config;
    config.duration = 10.0;
    let turn = |p: [f64; 2]| [-p[1], p[0]];
    let moved = transformed(&config, turn, true);
    assert_equivariant(&config, turn, turn, &moved);
}

#[test]
fn unfiltered_nominal_passes_through_when_admissible() {
    let s = scenario("pair_safety");
    let log = run(&s.config).unwrap();
    for r in &log.records {
        if r.status == StepStatus::Unfiltered || r.status == StepStatus::Slack {
            assert_eq!(r.control, r.nominal);
        }
    }
    assert!(log.records.iter().any(|r| r.status == StepStatus::Corrected));
}

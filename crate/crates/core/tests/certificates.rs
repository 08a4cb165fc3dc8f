use barrier_compose::barrier::{AffineAtom, BarrierTree};
use barrier_compose::certificates::{
    build_dynamic_certificate, build_safety_certificate, connectivity_h, safety_h, AllowableGraphSet, Arena,
    ArenaSampler, ConnectivityGraph, StateSampler, TeamParams,
};
use barrier_compose::selftest::{reference_params, reference_tree};
use barrier_compose::state::EnsembleState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(n: usize) -> TeamParams {
    TeamParams::new(n, 2.0, 0.5, 0.15, 0.6).unwrap()
}

/// Pair value computed directly from positions and velocities.
fn pair_h(x: &EnsembleState, i: usize, j: usize, p: &TeamParams, connectivity: bool) -> f64 {
    let dp = [x.positions[i][0] - x.positions[j][0], x.positions[i][1] - x.positions[j][1]];
    let dv = [x.velocities[i][0] - x.velocities[j][0], x.velocities[i][1] - x.velocities[j][1]];
    let d = dp[0].hypot(dp[1]);
    let s = (dp[0] * dv[0] + dp[1] * dv[1]) / d;
    let arg = if connectivity { p.connectivity_distance - d } else { d - p.safety_distance };
    if arg < 0.0 {
        return f64::NEG_INFINITY;
    }
    let root = 2.0 * (p.max_accel * arg).sqrt();
    if connectivity { root - s } else { root + s }
}

fn random_state(rng: &mut ChaCha8Rng, n: usize, half: f64) -> EnsembleState {
    let positions = (0..n).map(|_| [rng.gen_range(-half..half), rng.gen_range(-half..half)]).collect();
    let velocities = (0..n).map(|_| [rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35)]).collect();
    EnsembleState::new(positions, velocities).unwrap()
}

#[test]
fn pair_values_match_direct_formula_and_are_symmetric() {
    let p = params(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let x = random_state(&mut rng, 3, 0.5);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let hs = safety_h(&x, i, j, &p).unwrap().0;
            let hc = connectivity_h(&x, i, j, &p).unwrap().0;
            assert_eq!(hs, safety_h(&x, j, i, &p).unwrap().0);
            assert_eq!(hc, connectivity_h(&x, j, i, &p).unwrap().0);
            for (got, want) in [(hs, pair_h(&x, i, j, &p, false)), (hc, pair_h(&x, i, j, &p, true))] {
                if want.is_finite() {
                    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
                } else {
                    assert_eq!(got, f64::NEG_INFINITY);
                }
            }
        }
    }
}

#[test]
fn safety_value_invariant_under_robot_relabeling() {
    let p = params(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tree = build_safety_certificate(&p).unwrap();
    for _ in 0..200 {
        let x = random_state(&mut rng, 3, 0.5);
        let swapped = EnsembleState::new(
            vec![x.positions[2], x.positions[0], x.positions[1]],
            vec![x.velocities[2], x.velocities[0], x.velocities[1]],
        )
        .unwrap();
        let (a, b) = (tree.eval_value(&x).unwrap(), tree.eval_value(&swapped).unwrap());
        assert_eq!(a.is_member(), b.is_member());
        if a.is_member() {
            assert!((a.log_value - b.log_value).abs() < 1e-12);
        }
    }
}

#[test]
fn three_robot_safety_is_product_of_three_pairs() {
    let p = params(3);
    let tree = build_safety_certificate(&p).unwrap();
    assert_eq!(tree.to_string(), "B12*B13*B23");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let x = random_state(&mut rng, 3, 0.6);
        let product: f64 = [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| pair_h(&x, i, j, &p, false).max(0.0)).product();
        let v = tree.eval_value(&x).unwrap().value;
        assert!((v - product).abs() <= 1e-12 * product.max(1.0), "{v} vs {product}");
    }
}

#[test]
fn relay_team_structure_and_truth_table() {
    let p = reference_params();
    let tree = reference_tree(&p).unwrap();
    assert_eq!(tree.to_string(), "B12*B13*B14*B23*B24*B34*Bc23*(Bc12+Bc13)*(Bc24+Bc34)");

    // same shape with the five connectivity atoms replaced by constants of chosen sign
    let dim = 16;
    let constant = |name: &str, on: bool| {
        BarrierTree::atom(AffineAtom::new(name, vec![0.0; dim], if on { 0.5 } else { -0.5 }))
    };
    let x = EnsembleState::at_rest(vec![[0.0; 2]; 4]);
    for pattern in 0u32..32 {
        let on = |k: u32| pattern & (1 << k) != 0;
        let t = BarrierTree::compose_and(vec![
            constant("Bc23", on(0)),
            BarrierTree::compose_or(vec![constant("Bc12", on(1)), constant("Bc13", on(2))]).unwrap(),
            BarrierTree::compose_or(vec![constant("Bc24", on(3)), constant("Bc34", on(4))]).unwrap(),
        ])
        .unwrap();
        let expected = on(0) && (on(1) || on(2)) && (on(3) || on(4));
        assert_eq!(t.membership(&x).unwrap(), expected, "pattern {pattern:05b}");
    }
}

#[test]
fn relay_team_membership_matches_formula_on_samples() {
    let p = reference_params();
    let tree = reference_tree(&p).unwrap();
    let mut sampler = ArenaSampler::new(&p, Arena::square(0.4), 8);
    let (mut inside, mut total) = (0, 0);
    for _ in 0..5000 {
        let x = sampler.sample().unwrap();
        let s = |i, j| pair_h(&x, i, j, &p, false) > 0.0;
        let c = |i, j| pair_h(&x, i, j, &p, true) > 0.0;
        let safe = p.pairs().into_iter().all(|(i, j)| s(i, j));
        let expected = safe && c(1, 2) && (c(0, 1) || c(0, 2)) && (c(1, 3) || c(2, 3));
        assert_eq!(tree.membership(&x).unwrap(), expected);
        inside += expected as usize;
        total += 1;
    }
    assert!(inside > 0 && inside < total);
}

#[test]
fn dynamic_membership_matches_brute_force_over_graphs() {
    let p = params(3);
    let graphs = AllowableGraphSet::new(vec![
        ConnectivityGraph::new(3, [(0, 1), (0, 2)]).unwrap(),
        ConnectivityGraph::new(3, [(0, 1), (1, 2)]).unwrap(),
    ])
    .unwrap();
    let tree = build_dynamic_certificate(&p, &graphs).unwrap();
    assert_eq!(tree.to_string(), "B12*B13*B23*(Bc12*Bc13+Bc12*Bc23)");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut seen = [0usize; 2];
    for _ in 0..5000 {
        let x = random_state(&mut rng, 3, 0.4);
        let safe = [(0, 1), (0, 2), (1, 2)].iter().all(|&(i, j)| pair_h(&x, i, j, &p, false) > 0.0);
        let holds = |edges: &[(usize, usize)]| edges.iter().all(|&(i, j)| pair_h(&x, i, j, &p, true) > 0.0);
        let any = holds(&[(0, 1), (0, 2)]) || holds(&[(0, 1), (1, 2)]);
        let expected = safe && any;
        assert_eq!(tree.membership(&x).unwrap(), expected);
        seen[expected as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn empty_sets_and_bad_graphs_are_rejected() {
    assert!(TeamParams::new(2, 2.0, 0.5, 0.7, 0.6).is_err());
    assert!(ConnectivityGraph::new(3, [(0, 3)]).is_err());
    assert!(ConnectivityGraph::new(3, [(1, 1)]).is_err());
    assert!(AllowableGraphSet::new(vec![]).is_err());
}

mod common;

use mmwave_tfa::association::{activation_sets, feasible, ActivationVector};
use mmwave_tfa::ga::{evolve, repair, AdditiveObjective, AssignmentProblem, GaConfig, SlotProblem};
use mmwave_tfa::harness::{oracle_check, Scenario, UePlacement};
use mmwave_tfa::rng::{stream, StreamTag};
use proptest::prelude::*;
use rand::Rng;

/// `(streams, capacities, scores, chromosome)` with uniform stream demand and
/// enough per-BS slots to place every user.
fn repair_case() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..10, 1usize..5, 1usize..3).prop_flat_map(|(k, j, n)| {
        let caps = prop::collection::vec(0usize..(2 * k * n / j + n + 1), j)
            .prop_filter("room for every user", move |caps| {
                caps.iter().map(|c| c / n).sum::<usize>() >= k
            });
        let scores = prop::collection::vec(prop::collection::vec(0.0f64..10.0, j), k);
        let chromosome = prop::collection::vec(0..j, k);
        (Just(vec![n; k]), caps, scores, chromosome)
    })
}

proptest! {
    #[test]
    fn repair_yields_feasible_and_only_moves_overloaded_users(
        (streams, caps, scores, chromosome) in repair_case()
    ) {
        let problem = AssignmentProblem::new(&streams, &caps, &scores).unwrap();
        let out = repair(&chromosome, &problem).unwrap();
        prop_assert!(problem.is_feasible(&out));
        let act = ActivationVector::full(&out, 0);
        prop_assert!(feasible(&act, &streams, &caps).unwrap().feasible);
        let mut load = vec![0usize; caps.len()];
        for (k, &b) in chromosome.iter().enumerate() {
            load[b] += streams[k];
        }
        let mut moved = 0;
        for (k, (&before, &after)) in chromosome.iter().zip(&out).enumerate() {
            if before != after {
                moved += 1;
                prop_assert!(load[before] > caps[before], "user {} moved off a BS that fit", k);
            }
        }
        prop_assert!(moved <= streams.len());
        if problem.is_feasible(&chromosome) {
            prop_assert_eq!(&out, &chromosome);
        }
    }

    #[test]
    fn activation_sets_partition_the_served_users(
        assignment in prop::collection::vec(prop::option::of(0usize..4), 0..12)
    ) {
        let act = ActivationVector::new(assignment.clone(), 3);
        let sets = activation_sets(&act, 4).unwrap();
        prop_assert_eq!(sets.len(), 4);
        let mut seen = vec![false; assignment.len()];
        for s in &sets {
            prop_assert_eq!(s.slot_index, 3);
            for &k in &s.members {
                prop_assert_eq!(assignment[k], Some(s.bs_index));
                prop_assert!(!seen[k]);
                seen[k] = true;
            }
        }
        for (k, a) in assignment.iter().enumerate() {
            prop_assert_eq!(seen[k], a.is_some());
        }
    }
}

#[test]
fn everyone_on_one_bs_moves_exactly_the_excess() {
    for k in 3..9 {
        let streams = vec![1; k];
        let caps = vec![2, k, k];
        let scores = vec![vec![1.0, 0.5, 0.2]; k];
        let problem = AssignmentProblem::new(&streams, &caps, &scores).unwrap();
        let out = repair(&vec![0; k], &problem).unwrap();
        assert_eq!(out.iter().filter(|&&b| b != 0).count(), k - 2);
    }
}

#[test]
fn ga_is_deterministic_and_elitist_on_additive_objectives() {
    let mut rng = stream(21, StreamTag::Auxiliary, &[]);
    for trial in 0..50 {
        let k = rng.random_range(2..10);
        let j = rng.random_range(1..5);
        let streams = vec![1; k];
        let caps: Vec<usize> = (0..j)
            .map(|_| k.div_ceil(j) + rng.random_range(0..2))
            .collect();
        let scores: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..j).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let problem = AssignmentProblem::new(&streams, &caps, &scores).unwrap();
        let cfg = GaConfig::default().with_seed(trial);
        let a = evolve(&problem, &AdditiveObjective::new(&scores), &cfg).unwrap();
        let b = evolve(&problem, &AdditiveObjective::new(&scores), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(problem.is_feasible(&a.best));
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*a.trace.last().unwrap(), a.best_value);
    }
}

#[test]
fn ga_never_beats_the_oracle_and_reports_exact_utilities() {
    let mut rng = stream(22, StreamTag::Auxiliary, &[]);
    for trial in 0..40 {
        let k = rng.random_range(2..7);
        let j = rng.random_range(2..4);
        let ctx = common::random_slot(&mut rng, k, j, 4, 16);
        let streams = vec![2; k];
        let caps = vec![2 * k.div_ceil(j); j];
        let problem = SlotProblem::new(&ctx, &streams, &caps).unwrap();
        let ga = problem
            .solve(&GaConfig::default().with_seed(trial), 0)
            .unwrap();
        let (best, _) = problem.brute_force(1e6, 0).unwrap();
        assert!(ga.best_utility <= best + 1e-9);
        let direct = mmwave_tfa::ga::recompute_utility(&ctx, &ga, &streams).unwrap();
        assert!((direct - ga.best_utility).abs() <= 1e-12 * direct.max(1.0));
    }
}

#[test]
fn oracle_matches_ga_on_congested_slots() {
    let scenario = Scenario {
        ue_placement: UePlacement::congested(),
        master_seed: 7,
        ..Scenario::default()
    };
    for r in oracle_check(&scenario, 20).unwrap() {
        assert!(r.ga_utility <= r.oracle_utility + 1e-9);
        assert!(r.rel_gap() <= 0.01);
        assert!((r.ga_utility - r.ga_utility_direct).abs() <= 1e-12 * r.ga_utility_direct);
    }
}

//! Property tests over randomized instances. Runs use a fixed seed so
//! failures reproduce.

use crate::exact::{
    binom_pmf, binom_tail, exact_success, markov_bound, quasi_symmetric_success, symmetric_success,
};
use crate::memory::{
    anmax_alloc, anmax_markov_bound, condition_anmax, flmin_alloc, solve_arbitrary_profile,
    solve_constant_profile, water_fill, MemoryProfile,
};
use crate::multi_object::{allocate_two_objects, exhaustive_two_object, TwoObjectSpec};
use crate::oracle::{argmax_p1_full, grid_search_alloc};
use crate::relaxation::{
    candidate_set, disparity_scan, relaxed_objective, solve_p1, SearchRange,
};
use crate::{Allocation, Family, SystemParams};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;
const ALLOC_TOL: f64 = 1e-9;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

fn params(n: usize, p: f64, t: f64) -> SystemParams {
    SystemParams::new(n, p, t).unwrap()
}

fn caps_strategy(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    n.prop_flat_map(|k| prop::collection::vec(0.1f64..2.0, k))
}

fn assert_fits(alloc: &Allocation, caps: &[f64], budget: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(alloc.len(), caps.len());
    for (x, c) in alloc.amounts().iter().zip(caps) {
        prop_assert!(*x <= c + ALLOC_TOL, "{:?} over caps {:?}", alloc, caps);
    }
    prop_assert!((alloc.total() - budget).abs() <= ALLOC_TOL, "{:?} sums away from {}", alloc, budget);
    Ok(())
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn symmetric_closed_form_matches_enumeration(
        big_n in 1usize..=12,
        frac in 0.0f64..1.0,
        p in 0.01f64..0.99,
        t in 1.0f64..6.0,
    ) {
        let n = 1 + ((big_n as f64 - 1.0) * frac).round() as usize;
        let pr = params(big_n, p, t);
        let alloc = Allocation::symmetric(big_n, n, t).unwrap();
        let a = exact_success(&alloc, p).unwrap();
        let b = symmetric_success(n, &pr).unwrap();
        prop_assert!((a - b).abs() <= TOL, "n={} N={} p={} T={}: {} vs {}", n, big_n, p, t, a, b);
    }

    #[test]
    fn quasi_symmetric_closed_form_matches_enumeration(
        n in 1usize..=12,
        full in 0.1f64..1.5,
        rfrac in 0.01f64..=1.0,
        p in 0.01f64..0.99,
    ) {
        let residual = full * rfrac;
        let alloc = Allocation::quasi_symmetric(n, n, full, residual).unwrap();
        let a = exact_success(&alloc, p).unwrap();
        let b = quasi_symmetric_success(n, full, residual, p).unwrap();
        prop_assert!((a - b).abs() <= TOL, "{} vs {}", a, b);
    }

    #[test]
    fn symmetric_success_non_decreasing_in_p(
        n in 1usize..=45,
        t in 1.0f64..10.0,
        p in 0.0f64..1.0,
        dp in 0.0f64..0.2,
    ) {
        let q = (p + dp).min(1.0);
        let lo = symmetric_success(n, &params(n, p, t)).unwrap();
        let hi = symmetric_success(n, &params(n, q, t)).unwrap();
        prop_assert!(hi >= lo - TOL, "{} at p={} above {} at p={}", lo, p, hi, q);
    }

    #[test]
    fn tail_and_lower_pmf_sum_to_one(n in 0u64..=200, p in 0.0f64..=1.0, kfrac in 0.0f64..=1.0) {
        let k = (n as f64 * kfrac).round() as u64;
        let lower: f64 = (0..k).map(|i| binom_pmf(n, p, i).unwrap()).sum();
        let total = binom_tail(n, p, k).unwrap() + lower;
        prop_assert!((total - 1.0).abs() <= TOL, "total {}", total);
    }

    #[test]
    fn relaxed_objective_separates_support_sizes(
        n in 2usize..=45,
        t in 1.0f64..10.0,
        p in 0.05f64..0.95,
        m in 1usize..=45,
    ) {
        prop_assume!(m < n);
        let pr = params(n, p, t);
        let a = relaxed_objective(n as f64, &pr).unwrap();
        let b = relaxed_objective(m as f64, &pr).unwrap();
        let interior = |x: f64| x > 1e-300 && x < 1.0 - 1e-15;
        prop_assume!(interior(a) && interior(b));
        prop_assert!(a != b, "n={} and m={} share the value {}", n, m, a);
    }

    #[test]
    fn candidate_set_keeps_the_exact_optimum_value(
        n in 1usize..=45,
        t in 1.0f64..10.0,
        p in 0.01f64..0.99,
    ) {
        prop_assume!(t <= n as f64);
        let pr = params(n, p, t);
        let cands = solve_p1(&pr, SearchRange::CandidateSet).unwrap().success_prob;
        let full = solve_p1(&pr, SearchRange::FullRange).unwrap().success_prob;
        let oracle = symmetric_success(argmax_p1_full(&pr).unwrap(), &pr).unwrap();
        prop_assert!((cands - full).abs() <= TOL, "{} vs {}", cands, full);
        prop_assert!((oracle - cands).abs() <= TOL, "{} vs {}", oracle, cands);
        prop_assert!(candidate_set(&pr).unwrap().values.contains(&n));
    }
}

/// Collector that draws `n` nodes uniformly with replacement, each reached
/// with probability `p`.
fn with_replacement_success(xs: &[f64], p: f64, trials: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u32;
    for _ in 0..trials {
        let mut got = 0.0;
        for _ in 0..xs.len() {
            let x = xs[rng.random_range(0..xs.len())];
            if rng.random::<f64>() < p {
                got += x;
            }
        }
        if got >= 1.0 - 1e-9 {
            hits += 1;
        }
    }
    f64::from(hits) / f64::from(trials)
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn markov_bound_dominates_with_replacement_model(
        xs in prop::collection::vec(0.05f64..1.2, 1..=6),
        p in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let trials = 20_000;
        let alloc = Allocation::new(xs.clone()).unwrap();
        let bound = markov_bound(&alloc, p).unwrap();
        let est = with_replacement_success(&xs, p, trials, seed);
        let slack = 4.0 * (est * (1.0 - est) / f64::from(trials)).sqrt() + 1e-3;
        prop_assert!(est <= bound + slack, "estimate {} above bound {}", est, bound);
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn arbitrary_profile_allocations_fit(
        caps in caps_strategy(2..=10),
        tfrac in 0.0f64..1.0,
        p in 0.02f64..0.98,
    ) {
        let profile = MemoryProfile::new(caps.clone()).unwrap();
        let t = profile.total() * (0.05 + 0.95 * tfrac);
        prop_assume!(t >= 1.0);
        let pr = params(caps.len(), p, t);
        let out = solve_arbitrary_profile(&pr, &profile).unwrap();
        assert_fits(&out.allocation, &caps, t)?;
        let exact = exact_success(&out.allocation, p).unwrap();
        prop_assert!((exact - out.success_prob).abs() <= 1e-9);
        assert_fits(&flmin_alloc(&profile, t).unwrap(), &caps, t)?;
        assert_fits(&anmax_alloc(&profile, t).unwrap(), &caps, t)?;
    }

    #[test]
    fn constant_profile_allocations_fit_and_delegate(
        n in 2usize..=10,
        cap in 0.2f64..2.0,
        tfrac in 0.0f64..1.0,
        p in 0.02f64..0.98,
    ) {
        let t = n as f64 * cap * (0.05 + 0.95 * tfrac);
        prop_assume!(t >= 1.0);
        let pr = params(n, p, t);
        let caps = vec![cap; n];
        let direct = solve_constant_profile(&pr, cap).unwrap();
        assert_fits(&direct.outcome.allocation, &caps, t)?;
        let profile = MemoryProfile::constant(n, cap).unwrap();
        let via = solve_arbitrary_profile(&pr, &profile).unwrap();
        prop_assert_eq!(via.family, direct.outcome.family);
        prop_assert!((via.success_prob - direct.outcome.success_prob).abs() <= 1e-9);
    }

    #[test]
    fn water_level_and_anmax_monotone_in_budget(
        caps in caps_strategy(2..=10),
        f1 in 0.01f64..1.0,
        f2 in 0.01f64..1.0,
    ) {
        let profile = MemoryProfile::new(caps).unwrap();
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let (t_lo, t_hi) = (profile.total() * lo, profile.total() * hi);
        let a = water_fill(&profile, t_lo).unwrap();
        let b = water_fill(&profile, t_hi).unwrap();
        prop_assert!(a.level <= b.level + ALLOC_TOL);
        for (x, y) in a.allocation.amounts().iter().zip(b.allocation.amounts()) {
            prop_assert!(*x <= y + ALLOC_TOL);
        }
        // The level solves sum(min(M_i, a)) = T.
        let filled: f64 = profile.caps().iter().map(|c| c.min(a.level)).sum();
        prop_assert!((filled - t_lo).abs() <= ALLOC_TOL);
    }

    #[test]
    fn anmax_markov_bound_exceeds_load_iff_condition(
        caps in caps_strategy(2..=10),
        tfrac in 0.05f64..1.0,
        p in 0.01f64..1.0,
    ) {
        let profile = MemoryProfile::new(caps).unwrap();
        let t = profile.total() * tfrac;
        let bound = anmax_markov_bound(&profile, t, p).unwrap();
        let cond = condition_anmax(&profile, t).unwrap();
        let n_max = water_fill(&profile, t).unwrap().n_max;
        // With no saturated node the bound equals pT and the condition is
        // vacuous.
        if n_max == profile.len() {
            prop_assert!((bound - p * t).abs() <= 1e-12);
        } else {
            prop_assert_eq!(bound > p * t + p * 1e-12, cond);
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn grid_oracle_invariant_under_relabeling(
        caps in caps_strategy(2..=4),
        tfrac in 0.2f64..1.0,
        p in 0.05f64..0.95,
        shift in 0usize..4,
    ) {
        let profile = MemoryProfile::new(caps.clone()).unwrap();
        let t = (profile.total() * tfrac).max(1.0);
        prop_assume!(t <= profile.total());
        let pr = params(caps.len(), p, t);
        let mut rotated = caps.clone();
        rotated.rotate_left(shift % caps.len());
        let a = grid_search_alloc(&pr, Some(&profile), 8);
        let b = grid_search_alloc(&pr, Some(&MemoryProfile::new(rotated).unwrap()), 8);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a.best_score - b.best_score).abs() <= TOL),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn grid_refinement_never_lowers_best(
        caps in caps_strategy(2..=4),
        tfrac in 0.2f64..1.0,
        p in 0.05f64..0.95,
        g in 2usize..=6,
    ) {
        let profile = MemoryProfile::new(caps.clone()).unwrap();
        let t = (profile.total() * tfrac).max(1.0);
        prop_assume!(t <= profile.total());
        let pr = params(caps.len(), p, t);
        if let Ok(coarse) = grid_search_alloc(&pr, Some(&profile), g) {
            let fine = grid_search_alloc(&pr, Some(&profile), 2 * g).unwrap();
            prop_assert!(coarse.best_score <= fine.best_score + TOL);
        }
    }

    #[test]
    fn two_object_joint_caps_and_oracle_dominance(
        caps in caps_strategy(3..=3),
        f1 in 0.1f64..0.5,
        f2 in 0.1f64..0.5,
        p1 in 0.0f64..=1.0,
        p in 0.05f64..0.95,
    ) {
        let profile = MemoryProfile::new(caps.clone()).unwrap();
        let spec = TwoObjectSpec::new(profile.total() * f1, profile.total() * f2, p1, p).unwrap();
        let Ok(report) = exhaustive_two_object(&spec, &profile, 4) else {
            return Ok(());
        };
        prop_assert!(report.oracle_score >= report.greedy_score - 1e-9);
        for (i, c) in caps.iter().enumerate() {
            let used = report.greedy.allocation_1.amounts()[i] + report.greedy.allocation_2.amounts()[i];
            prop_assert!(used <= c + ALLOC_TOL);
            let o = report.oracle_allocation_1.amounts()[i] + report.oracle_allocation_2.amounts()[i];
            prop_assert!(o <= c + ALLOC_TOL);
        }
    }

    #[test]
    fn two_object_labels_swap(
        caps in caps_strategy(2..=5),
        f1 in 0.1f64..0.5,
        f2 in 0.1f64..0.5,
        p1 in 0.0f64..=1.0,
        p in 0.05f64..0.95,
    ) {
        prop_assume!((p1 - 0.5).abs() > 1e-9);
        let profile = MemoryProfile::new(caps).unwrap();
        let spec = TwoObjectSpec::new(profile.total() * f1, profile.total() * f2, p1, p).unwrap();
        let (Ok(a), Ok(b)) = (
            allocate_two_objects(&spec, &profile),
            allocate_two_objects(&spec.swapped(), &profile),
        ) else {
            return Ok(());
        };
        prop_assert_eq!(a.allocation_1, b.allocation_2);
        prop_assert_eq!(a.allocation_2, b.allocation_1);
    }
}

#[test]
fn quasi_symmetric_family_reported_for_binding_constant_memory() {
    let out = solve_constant_profile(&params(3, 0.1, 1.4), 0.5).unwrap();
    assert_eq!(out.outcome.family, Family::QuasiSymmetric);
}

#[test]
fn agreement_improves_with_more_nodes() {
    let reports: Vec<_> = [10, 20, 45]
        .iter()
        .map(|&n| disparity_scan(n, 1e-3, 0.1).unwrap())
        .collect();
    for w in reports.windows(2) {
        assert!(w[1].alpha >= w[0].alpha, "alpha {} then {}", w[0].alpha, w[1].alpha);
        assert!(w[1].beta >= w[0].beta, "beta {} then {}", w[0].beta, w[1].beta);
    }
}

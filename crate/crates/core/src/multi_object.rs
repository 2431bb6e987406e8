//! Two objects sharing one memory profile: the weighted relaxed objective,
//! priority-first sequential allocation and an exhaustive oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::exact_success;
use crate::memory::{flmin_alloc, solve_arbitrary_profile, MemoryProfile};
use crate::numeric::SNAP_TOL;
use crate::oracle::{check_size, compositions, grid_allocation, MAX_ORACLE_NODES};
use crate::relaxation::relaxed_objective;
use crate::types::{check_prob, Allocation, SystemParams};

pub const MAX_TWO_OBJECT_GRANULARITY: usize = 8;

/// Residual capacity below this is treated as a full node.
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoObjectSpec {
    pub budget_1: f64,
    pub budget_2: f64,
    pub demand_prob_1: f64,
    pub demand_prob_2: f64,
    pub access_prob: f64,
}

impl TwoObjectSpec {
    /// `p2` is set to `1 - p1`.
    pub fn new(budget_1: f64, budget_2: f64, demand_prob_1: f64, access_prob: f64) -> Result<Self> {
        let spec = Self {
            budget_1,
            budget_2,
            demand_prob_1,
            demand_prob_2: 1.0 - demand_prob_1,
            access_prob,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for t in [self.budget_1, self.budget_2] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Domain(format!("budgets must be positive, got {t}")));
            }
        }
        check_prob(self.demand_prob_1)?;
        check_prob(self.demand_prob_2)?;
        check_prob(self.access_prob)?;
        if (self.demand_prob_1 + self.demand_prob_2 - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("demand probabilities must sum to 1".into()));
        }
        Ok(())
    }

    /// The same instance with the object labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            budget_1: self.budget_2,
            budget_2: self.budget_1,
            demand_prob_1: self.demand_prob_2,
            demand_prob_2: self.demand_prob_1,
            access_prob: self.access_prob,
        }
    }

    fn budget(&self, object: Object) -> f64 {
        match object {
            Object::First => self.budget_1,
            Object::Second => self.budget_2,
        }
    }

    /// `p1 S1 + p2 S2` with exact per-object recovery probabilities.
    pub fn score(&self, x1: &Allocation, x2: &Allocation) -> Result<f64> {
        Ok(self.demand_prob_1 * exact_success(x1, self.access_prob)?
            + self.demand_prob_2 * exact_success(x2, self.access_prob)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Object {
    First,
    Second,
}

/// Weighted relaxed objective of symmetric supports `n1`, `n2`.
pub fn p4_objective(n1: usize, n2: usize, spec: &TwoObjectSpec) -> Result<f64> {
    spec.validate()?;
    let term = |n: usize, t: f64| relaxed_objective(n as f64, &SystemParams::new(n.max(1), spec.access_prob, t)?);
    Ok(spec.demand_prob_1 * term(n1, spec.budget_1)? + spec.demand_prob_2 * term(n2, spec.budget_2)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoObjectAllocation {
    pub first_allocated: Object,
    pub allocation_1: Allocation,
    pub allocation_2: Allocation,
}

/// Allocate one object on `caps` (original order, zeros allowed).
///
/// Budgets below one object cannot be recovered by any allocation; they are
/// placed with the minimum-support fill.
fn allocate_on(caps: &[f64], budget: f64, p: f64) -> Result<Allocation> {
    let live: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > RESIDUAL_EPS).collect();
    let sub = MemoryProfile::new(live.iter().map(|&i| caps[i]).collect())
        .map_err(|_| Error::Infeasible("no memory left for the object".into()))?;
    let placed = if budget < 1.0 - SNAP_TOL {
        flmin_alloc(&sub, budget)?
    } else {
        let params = SystemParams::new(sub.len(), p, budget)?;
        solve_arbitrary_profile(&params, &sub)?.allocation
    };
    let mut full = vec![0.0; caps.len()];
    for (k, &i) in live.iter().enumerate() {
        full[i] = placed.amounts()[k].min(caps[i]);
    }
    Allocation::new(full)
}

/// Allocate `first` on the full profile, then the other object on what is
/// left.
pub fn allocate_in_order(
    spec: &TwoObjectSpec,
    profile: &MemoryProfile,
    first: Object,
) -> Result<TwoObjectAllocation> {
    spec.validate()?;
    let caps = profile.original_caps();
    let total = spec.budget_1 + spec.budget_2;
    if total > profile.total() + SNAP_TOL {
        return Err(Error::Infeasible(format!(
            "combined budget {total} exceeds the total memory {}",
            profile.total()
        )));
    }
    let second = match first {
        Object::First => Object::Second,
        Object::Second => Object::First,
    };
    let a = allocate_on(&caps, spec.budget(first), spec.access_prob)?;
    let residual: Vec<f64> = caps.iter().zip(a.amounts()).map(|(c, x)| (c - x).max(0.0)).collect();
    let b = allocate_on(&residual, spec.budget(second), spec.access_prob).map_err(|e| {
        Error::Infeasible(format!("second object does not fit the residual memory: {e}"))
    })?;
    let (allocation_1, allocation_2) = match first {
        Object::First => (a, b),
        Object::Second => (b, a),
    };
    Ok(TwoObjectAllocation {
        first_allocated: first,
        allocation_1,
        allocation_2,
    })
}

/// Priority-first allocation: the object with the larger demand probability
/// goes first; equal demand goes to object 1.
pub fn allocate_two_objects(
    spec: &TwoObjectSpec,
    profile: &MemoryProfile,
) -> Result<TwoObjectAllocation> {
    let first = if spec.demand_prob_1 >= spec.demand_prob_2 {
        Object::First
    } else {
        Object::Second
    };
    allocate_in_order(spec, profile, first)
}

/// Each node's cap is split between the objects in proportion to their
/// budgets and both are allocated independently.
pub fn allocate_mixed(spec: &TwoObjectSpec, profile: &MemoryProfile) -> Result<TwoObjectAllocation> {
    spec.validate()?;
    let caps = profile.original_caps();
    let total = spec.budget_1 + spec.budget_2;
    let share = |t: f64| caps.iter().map(|c| c * t / total).collect::<Vec<_>>();
    Ok(TwoObjectAllocation {
        first_allocated: Object::First,
        allocation_1: allocate_on(&share(spec.budget_1), spec.budget_1, spec.access_prob)?,
        allocation_2: allocate_on(&share(spec.budget_2), spec.budget_2, spec.access_prob)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoObjectReport {
    pub greedy_score: f64,
    pub oracle_score: f64,
    /// `oracle_score - greedy_score`, never negative.
    pub gap: f64,
    /// Object 1 first, object 2 first, proportional split; `null` when the
    /// order leaves no room for the second object.
    pub strategy_scores: [Option<f64>; 3],
    pub greedy: TwoObjectAllocation,
    pub oracle_allocation_1: Allocation,
    pub oracle_allocation_2: Allocation,
    /// Grid pairs that fit the caps jointly.
    pub evaluated: u64,
}

/// Exhaustive search over pairs of grid allocations (object `k` in steps of
/// `T_k / g`) that fit the caps jointly, compared with the priority-first
/// allocation and the three allocation orders. The oracle best includes the
/// strategy allocations, so it never falls below the greedy score.
pub fn exhaustive_two_object(
    spec: &TwoObjectSpec,
    profile: &MemoryProfile,
    granularity: usize,
) -> Result<TwoObjectReport> {
    spec.validate()?;
    let n = profile.len();
    if n > MAX_ORACLE_NODES {
        return Err(Error::Size(format!(
            "two-object oracle supports at most {MAX_ORACLE_NODES} nodes, got {n}"
        )));
    }
    check_size(n, granularity, MAX_TWO_OBJECT_GRANULARITY)?;
    let caps = profile.original_caps();
    let greedy = allocate_two_objects(spec, profile)?;
    let greedy_score = spec.score(&greedy.allocation_1, &greedy.allocation_2)?;
    let strategies = [
        allocate_in_order(spec, profile, Object::First),
        allocate_in_order(spec, profile, Object::Second),
        allocate_mixed(spec, profile),
    ];
    let mut strategy_scores = [None; 3];
    for (slot, s) in strategy_scores.iter_mut().zip(&strategies) {
        if let Ok(a) = s {
            *slot = Some(spec.score(&a.allocation_1, &a.allocation_2)?);
        }
    }

    let grid = |t: f64| -> Result<Vec<(Vec<f64>, f64)>> {
        compositions(granularity, n)
            .iter()
            .filter_map(|u| grid_allocation(u, t / granularity as f64, Some(&caps)))
            .map(|xs| {
                let s = exact_success(&Allocation::new(xs.clone())?, spec.access_prob)?;
                Ok((xs, s))
            })
            .collect()
    };
    let g1 = grid(spec.budget_1)?;
    let g2 = grid(spec.budget_2)?;
    let (p1, p2) = (spec.demand_prob_1, spec.demand_prob_2);
    // per outer row: (best score, inner index, joint-feasible count); the
    // reduction keeps the first maximum in (outer, inner) order
    let rows: Vec<(f64, usize, u64)> = g1
        .par_iter()
        .map(|(x1, s1)| {
            let mut best = (f64::NEG_INFINITY, usize::MAX, 0u64);
            for (j, (x2, s2)) in g2.iter().enumerate() {
                if x1.iter().zip(x2).zip(&caps).all(|((a, b), c)| a + b <= c + SNAP_TOL) {
                    best.2 += 1;
                    let v = p1 * s1 + p2 * s2;
                    if v > best.0 {
                        best = (v, j, best.2);
                    }
                }
            }
            best
        })
        .collect();
    let evaluated = rows.iter().map(|r| r.2).sum();
    let mut oracle = (greedy_score, greedy.allocation_1.clone(), greedy.allocation_2.clone());
    for a in strategies.iter().flatten() {
        let v = spec.score(&a.allocation_1, &a.allocation_2)?;
        if v > oracle.0 {
            oracle = (v, a.allocation_1.clone(), a.allocation_2.clone());
        }
    }
    for (i, &(v, j, _)) in rows.iter().enumerate() {
        if j != usize::MAX && v > oracle.0 + 1e-15 {
            oracle = (v, Allocation::new(g1[i].0.clone())?, Allocation::new(g2[j].0.clone())?);
        }
    }
    Ok(TwoObjectReport {
        greedy_score,
        oracle_score: oracle.0,
        gap: (oracle.0 - greedy_score).max(0.0),
        strategy_scores,
        greedy,
        oracle_allocation_1: oracle.1,
        oracle_allocation_2: oracle.2,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::q_function;

    fn profile(caps: &[f64]) -> MemoryProfile {
        MemoryProfile::new(caps.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn spec_validation() {
        assert!(TwoObjectSpec::new(1.0, 1.0, 0.7, 0.5).is_ok());
        assert!(TwoObjectSpec::new(0.0, 1.0, 0.7, 0.5).is_err());
        let mut s = TwoObjectSpec::new(1.0, 1.0, 0.7, 0.5).unwrap();
        s.demand_prob_2 = 0.5;
        assert!(s.validate().is_err());
        let j: TwoObjectSpec = serde_json::from_str(
            r#"{"budget_1":1.4,"budget_2":0.6,"demand_prob_1":0.8,"demand_prob_2":0.2,"access_prob":0.1}"#,
        )
        .unwrap();
        assert!(j.validate().is_ok());
    }

    #[test]
    fn p4_examples() {
        let s = TwoObjectSpec::new(2.0, 1.5, 0.7, 0.6).unwrap();
        let q1 = q_function((2.0 - 2.4) / (4.0f64 * 0.24).sqrt());
        let q2 = q_function((2.0 - 1.2) / (2.0f64 * 0.24).sqrt());
        assert!((p4_objective(4, 2, &s).unwrap() - (0.7 * q1 + 0.3 * q2)).abs() < 1e-15);
        let single = TwoObjectSpec::new(2.0, 1.5, 1.0, 0.6).unwrap();
        let rel = relaxed_objective(4.0, &SystemParams::new(4, 0.6, 2.0).unwrap()).unwrap();
        assert!((p4_objective(4, 2, &single).unwrap() - rel).abs() < 1e-15);
        let even = TwoObjectSpec::new(2.0, 2.0, 0.5, 0.6).unwrap();
        let rel = relaxed_objective(3.0, &SystemParams::new(3, 0.6, 2.0).unwrap()).unwrap();
        assert!((p4_objective(3, 3, &even).unwrap() - rel).abs() < 1e-15);
        assert!(p4_objective(3, 3, &TwoObjectSpec::new(2.0, 2.0, 0.5, 0.0).unwrap()).is_err());
    }

    #[test]
    fn sequential_example() {
        let s = TwoObjectSpec::new(1.4, 0.6, 0.8, 0.1).unwrap();
        let a = allocate_two_objects(&s, &profile(&[0.5; 4])).unwrap();
        assert_eq!(a.first_allocated, Object::First);
        assert!(close(a.allocation_1.amounts(), &[0.5, 0.5, 0.4, 0.0]));
        assert!(close(a.allocation_2.amounts(), &[0.0, 0.0, 0.1, 0.5]));
    }

    #[test]
    fn full_memory_saturates_every_node() {
        let pr = profile(&[0.5, 0.8, 1.0, 0.7]);
        let s = TwoObjectSpec::new(1.5, 1.5, 0.6, 0.4).unwrap();
        let a = allocate_two_objects(&s, &pr).unwrap();
        let caps = pr.original_caps();
        for (i, c) in caps.iter().enumerate() {
            let used = a.allocation_1.amounts()[i] + a.allocation_2.amounts()[i];
            assert!((used - c).abs() < 1e-9);
        }
    }

    #[test]
    fn non_binding_memory_matches_single_solves() {
        let pr = profile(&[5.0; 6]);
        let s = TwoObjectSpec::new(2.0, 1.5, 0.7, 0.6).unwrap();
        let a = allocate_two_objects(&s, &pr).unwrap();
        let one = solve_arbitrary_profile(&SystemParams::new(6, 0.6, 2.0).unwrap(), &pr).unwrap();
        assert_eq!(a.allocation_1.support_size(), one.allocation.support_size());
        let s1 = exact_success(&a.allocation_1, 0.6).unwrap();
        assert!((s1 - one.success_prob).abs() < 1e-12);
    }

    #[test]
    fn second_object_infeasible() {
        let s = TwoObjectSpec::new(1.0, 1.5, 0.7, 0.6).unwrap();
        assert!(matches!(
            allocate_two_objects(&s, &profile(&[1.0, 1.0])),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn exhaustive_tiny_instance() {
        let pr = profile(&[0.6, 0.8, 1.0]);
        let s = TwoObjectSpec::new(1.2, 1.0, 0.7, 0.6).unwrap();
        let r = exhaustive_two_object(&s, &pr, 4).unwrap();
        assert!(r.gap >= 0.0);
        assert!(r.oracle_score >= r.greedy_score - 1e-9);
        assert!(r.evaluated > 0);
        let pr7 = profile(&[1.0; 7]);
        assert!(matches!(exhaustive_two_object(&s, &pr7, 4), Err(Error::Size(_))));
        assert!(matches!(exhaustive_two_object(&s, &pr, 9), Err(Error::Size(_))));
    }

    #[test]
    fn relabeling_keeps_oracle_score() {
        let pr = profile(&[0.6, 0.8, 1.0]);
        let s = TwoObjectSpec::new(1.2, 1.0, 0.5, 0.6).unwrap();
        let a = exhaustive_two_object(&s, &pr, 4).unwrap();
        let b = exhaustive_two_object(&s.swapped(), &pr, 4).unwrap();
        assert!((a.oracle_score - b.oracle_score).abs() < 1e-12);
    }
}

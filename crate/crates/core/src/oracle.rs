//! Brute-force searches used as ground truth on small instances.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{exact_success, symmetric_success};
use crate::memory::{solve_arbitrary_profile_with, DispatchRule, MemoryProfile};
use crate::numeric::{round_sig, SNAP_TOL};
use crate::relaxation::{argmax_smallest, tie_band};
use crate::types::{Allocation, SolveOutcome, SystemParams};

pub const MAX_ORACLE_NODES: usize = 6;
pub const MAX_GRANULARITY: usize = 12;
/// Largest node count for which every grid row may be dumped.
pub const MAX_DUMP_NODES: usize = 4;

/// Every way to write `total` as an ordered sum of `parts` non-negative
/// integers, in colexicographic order (last part varies slowest).
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<u32>> {
    fn rec(total: usize, parts: usize, suffix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            let mut v = Vec::with_capacity(suffix.len() + 1);
            v.push(total as u32);
            v.extend(suffix.iter().rev());
            out.push(v);
            return;
        }
        for last in 0..=total {
            suffix.push(last as u32);
            rec(total - last, parts - 1, suffix, out);
            suffix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// `C(total + parts - 1, parts - 1)`.
pub fn composition_count(total: usize, parts: usize) -> u64 {
    if parts == 0 {
        return 0;
    }
    let (n, k) = ((total + parts - 1) as u64, (parts - 1) as u64);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

pub(crate) fn check_size(num_nodes: usize, granularity: usize, max_g: usize) -> Result<()> {
    if num_nodes == 0 || num_nodes > MAX_ORACLE_NODES {
        return Err(Error::Size(format!(
            "oracle supports 1..={MAX_ORACLE_NODES} nodes, got {num_nodes}"
        )));
    }
    if granularity == 0 || granularity > max_g {
        return Err(Error::Size(format!(
            "granularity must lie in 1..={max_g}, got {granularity}"
        )));
    }
    Ok(())
}

/// Grid points as amounts; `None` when a cap is exceeded.
pub(crate) fn grid_allocation(
    units: &[u32],
    step: f64,
    caps: Option<&[f64]>,
) -> Option<Vec<f64>> {
    let xs: Vec<f64> = units.iter().map(|&u| u as f64 * step).collect();
    match caps {
        Some(c) if xs.iter().zip(c).any(|(x, m)| *x > m + SNAP_TOL) => None,
        _ => Some(xs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_alloc: Allocation,
    pub best_score: f64,
    pub evaluated: u64,
    /// Best score minus the best score of any allocation that is not a
    /// permutation of `best_alloc`.
    pub runner_up_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub allocation: Allocation,
    pub score: f64,
}

fn grid_rows(
    params: &SystemParams,
    profile: Option<&MemoryProfile>,
    granularity: usize,
) -> Result<Vec<GridRow>> {
    check_size(params.num_nodes, granularity, MAX_GRANULARITY)?;
    let caps = match profile {
        Some(pr) if pr.len() != params.num_nodes => {
            return Err(Error::Domain(format!(
                "profile lists {} nodes but num_nodes is {}",
                pr.len(),
                params.num_nodes
            )))
        }
        Some(pr) => Some(pr.original_caps()),
        None => None,
    };
    let step = params.budget / granularity as f64;
    compositions(granularity, params.num_nodes)
        .par_iter()
        .filter_map(|units| grid_allocation(units, step, caps.as_deref()))
        .map(|xs| {
            let allocation = Allocation::new(xs)?;
            let score = exact_success(&allocation, params.access_prob)?;
            Ok(GridRow { allocation, score })
        })
        .collect()
}

fn sorted_amounts(a: &Allocation) -> Vec<f64> {
    let mut v = a.amounts().to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn same_multiset(a: &Allocation, b: &Allocation) -> bool {
    sorted_amounts(a)
        .iter()
        .zip(sorted_amounts(b))
        .all(|(x, y)| (x - y).abs() <= SNAP_TOL)
}

/// Exhaustive search over allocations with entries in `{0, T/g, ..., T}`
/// summing to `T` (and within the caps when a profile is given).
///
/// Scores within a relative [`SOLUTION_TIE_TOL`](crate::relaxation::SOLUTION_TIE_TOL) tie; ties go to the smaller support
/// and then to the earlier allocation in colex order.
pub fn grid_search_alloc(
    params: &SystemParams,
    profile: Option<&MemoryProfile>,
    granularity: usize,
) -> Result<GridSearchResult> {
    let rows = grid_rows(params, profile, granularity)?;
    let mut best: Option<&GridRow> = None;
    for row in &rows {
        best = match best {
            None => Some(row),
            Some(b) if row.score > b.score + tie_band(row.score) => Some(row),
            Some(b)
                if row.score >= b.score - tie_band(b.score)
                    && row.allocation.support_size() < b.allocation.support_size() =>
            {
                Some(row)
            }
            keep => keep,
        };
    }
    let best = best.ok_or_else(|| {
        Error::Infeasible("no grid allocation fits under the caps".into())
    })?;
    let runner_up = rows
        .iter()
        .filter(|r| !same_multiset(&r.allocation, &best.allocation))
        .map(|r| r.score)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GridSearchResult {
        best_alloc: best.allocation.clone(),
        best_score: best.score,
        evaluated: rows.len() as u64,
        runner_up_gap: if runner_up.is_finite() {
            (best.score - runner_up).max(0.0)
        } else {
            0.0
        },
    })
}

/// CSV of every grid allocation and its score (`x1,...,xN,score`), limited
/// to [`MAX_DUMP_NODES`] nodes.
pub fn grid_rows_csv(
    params: &SystemParams,
    profile: Option<&MemoryProfile>,
    granularity: usize,
) -> Result<String> {
    if params.num_nodes > MAX_DUMP_NODES {
        return Err(Error::Size(format!(
            "row dumps are limited to {MAX_DUMP_NODES} nodes"
        )));
    }
    let rows = grid_rows(params, profile, granularity)?;
    let mut out = String::new();
    for i in 1..=params.num_nodes {
        let _ = write!(out, "x{i},");
    }
    out.push_str("score\n");
    for r in rows {
        for x in r.allocation.amounts() {
            let _ = write!(out, "{},", round_sig(*x, 12));
        }
        let _ = writeln!(out, "{}", round_sig(r.score, 12));
    }
    Ok(out)
}

/// Exact symmetric optimum over every support size `1..=N`.
pub fn argmax_p1_full(params: &SystemParams) -> Result<usize> {
    let values = (1..=params.num_nodes)
        .map(|n| symmetric_success(n, params).map(|v| (n, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_smallest(values).map(|(n, _)| n).unwrap_or(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub params: SystemParams,
    pub profile: MemoryProfile,
    pub granularity: usize,
    pub conjecture: SolveOutcome,
    /// Exact recovery probability of the dispatched allocation.
    pub conjecture_score: f64,
    /// `None` when no grid allocation fits under the caps.
    pub oracle: Option<GridSearchResult>,
    /// `oracle.best_score - conjecture_score`; negative when the dispatched
    /// allocation lies off the grid and beats it.
    pub gap: Option<f64>,
    pub relative_gap: Option<f64>,
}

/// Score the dispatched allocation for an arbitrary profile against the
/// grid oracle.
pub fn conjecture_report(
    params: &SystemParams,
    profile: &MemoryProfile,
    granularity: usize,
) -> Result<ConjectureReport> {
    conjecture_report_with(params, profile, granularity, DispatchRule::ConditionSelectsAsymmetric)
}

pub fn conjecture_report_with(
    params: &SystemParams,
    profile: &MemoryProfile,
    granularity: usize,
    rule: DispatchRule,
) -> Result<ConjectureReport> {
    check_size(params.num_nodes, granularity, MAX_GRANULARITY)?;
    let conjecture = solve_arbitrary_profile_with(params, profile, rule)?;
    let conjecture_score = exact_success(&conjecture.allocation, params.access_prob)?;
    let oracle = match grid_search_alloc(params, Some(profile), granularity) {
        Ok(r) => Some(r),
        Err(Error::Infeasible(_)) => None,
        Err(e) => return Err(e),
    };
    let gap = oracle.as_ref().map(|o| o.best_score - conjecture_score);
    let relative_gap = oracle.as_ref().zip(gap).map(|(o, g)| {
        if o.best_score > 0.0 {
            g / o.best_score
        } else {
            0.0
        }
    });
    Ok(ConjectureReport {
        params: *params,
        profile: profile.clone(),
        granularity,
        conjecture,
        conjecture_score,
        oracle,
        gap,
        relative_gap,
    })
}

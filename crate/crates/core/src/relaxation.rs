//! Symmetric allocations without memory limits: the exact binomial problem,
//! its Gaussian relaxation and the closed-form case analysis of the relaxed
//! optimum.
//!
//! For a symmetric allocation on `n` nodes the collector needs `ceil(n/T)`
//! of them. The exact objective is the binomial tail `P(B(n,p) >= ceil(n/T))`;
//! the relaxation replaces it by `Q((ceil(n/T) - np) / sqrt(np(1-p)))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact::symmetric_success;
use crate::numeric::{round_sig, snap_ceil, snap_floor};
use crate::types::{Allocation, CaseLabel, Family, NStar, SolveOutcome, SystemParams};

/// Half-width of the band in which `pT` counts as exactly 1.
pub const CRITICAL_LOAD_TOL: f64 = 1e-9;

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Position of `pT` relative to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadRegime {
    Below,
    Critical,
    Above,
}

impl LoadRegime {
    pub fn of(params: &SystemParams) -> Self {
        let load = params.load();
        if (load - 1.0).abs() <= CRITICAL_LOAD_TOL {
            LoadRegime::Critical
        } else if load < 1.0 {
            LoadRegime::Below
        } else {
            LoadRegime::Above
        }
    }
}

/// Relaxed objective at a (possibly fractional) support size `n`.
pub fn relaxed_objective(n: f64, params: &SystemParams) -> Result<f64> {
    let p = params.access_prob;
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::Degenerate(format!(
            "normal approximation needs 0 < p < 1, got {p}"
        )));
    }
    if !(n >= 1.0 && n <= params.num_nodes as f64) {
        return Err(Error::Domain(format!(
            "support {n} must lie in [1, {}]",
            params.num_nodes
        )));
    }
    let need = snap_ceil(n / params.budget) as f64;
    let mean = n * p;
    let sd = (n * p * (1.0 - p)).sqrt();
    Ok(q_function((need - mean) / sd))
}

/// Support sizes that can maximise the symmetric objective:
/// `{floor(T), floor(2T), ..., floor(LT), N}` with `L = floor(N/T)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub l: usize,
    pub values: Vec<usize>,
}

fn require_unit_budget(params: &SystemParams) -> Result<()> {
    if params.budget < 1.0 - crate::numeric::SNAP_TOL {
        return Err(Error::Infeasible(format!(
            "budget T = {} is below one object unit and can never be recovered",
            params.budget
        )));
    }
    Ok(())
}

/// `L = floor(N/T)`.
pub fn multiplicity_bound(num_nodes: usize, budget: f64) -> usize {
    snap_floor(num_nodes as f64 / budget).max(0) as usize
}

pub fn candidate_set(params: &SystemParams) -> Result<CandidateSet> {
    require_unit_budget(params)?;
    let n = params.num_nodes;
    let l = multiplicity_bound(n, params.budget);
    let mut values: Vec<usize> = (1..=l)
        .map(|i| snap_floor(i as f64 * params.budget) as usize)
        .filter(|&v| v >= 1 && v <= n)
        .collect();
    values.push(n);
    values.dedup();
    Ok(CandidateSet { l, values })
}

/// Upper edge of the Case 4 interval:
/// `(L+1)/(N - sqrt(LT)) + 1/(N sqrt(LT) - sqrt(T))`.
pub fn case5_threshold(num_nodes: usize, budget: f64, l: usize) -> f64 {
    let n = num_nodes as f64;
    let lt = (l as f64 * budget).sqrt();
    let d1 = n - lt;
    let d2 = n * lt - budget.sqrt();
    if d1 <= 0.0 || d2 <= 0.0 {
        return f64::INFINITY;
    }
    (l as f64 + 1.0) / d1 + 1.0 / d2
}

/// Case 3/4/5 split of the `pT > 1` regime and the support it selects.
pub fn high_load_case(params: &SystemParams, l: usize) -> (CaseLabel, usize) {
    let n = params.num_nodes;
    let p = params.access_prob;
    let top = snap_floor(l as f64 * params.budget).clamp(1, n as i64) as usize;
    let lower = (l as f64 + 1.0) / n as f64;
    if p < lower {
        (CaseLabel::Case3, top)
    } else if p <= case5_threshold(n, params.budget, l) {
        (CaseLabel::Case4, n)
    } else {
        (CaseLabel::Case5, top)
    }
}

/// Literal closed-form characterisation of the relaxed optimum by load
/// regime: `floor(T)` below critical load, the tie set `N \ {N}` at `pT = 1`,
/// and the Case 3/4/5 split above it.
///
/// Kept for comparison. [`solve_p2`] compares the objective at
/// `floor(LT)` and `N` instead of using the Case 4 band, which does not track
/// the maximiser (for `N = 45, T = 10, p = 0.12` it selects `N` while
/// `c(40) > c(45)`).
pub fn theorem_closed_form(params: &SystemParams) -> Result<(CaseLabel, NStar)> {
    let cands = candidate_set(params)?;
    let n = params.num_nodes;
    Ok(match LoadRegime::of(params) {
        LoadRegime::Below => {
            let floor_t = (snap_floor(params.budget) as usize).min(n);
            (CaseLabel::Case1, NStar::Single(floor_t))
        }
        LoadRegime::Critical => {
            let ties: Vec<usize> = cands.values.iter().copied().filter(|&v| v != n).collect();
            let ties = if ties.is_empty() { vec![n] } else { ties };
            (CaseLabel::Case2, NStar::Tie(ties))
        }
        LoadRegime::Above => {
            let (label, v) = high_load_case(params, cands.l);
            (label, NStar::Single(v))
        }
    })
}

/// Values within this relative distance of the maximum belong to the
/// solution set.
pub const SOLUTION_TIE_TOL: f64 = 1e-12;

/// Slack below `best` that still counts as a tie. Relative, so that deep
/// tail probabilities of very different size do not tie.
pub(crate) fn tie_band(best: f64) -> f64 {
    SOLUTION_TIE_TOL * best.abs()
}

/// All maximisers of `values` within [`SOLUTION_TIE_TOL`], ascending in `n`.
pub(crate) fn maximisers(values: &[(usize, f64)]) -> NStar {
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let mut set: Vec<usize> = values
        .iter()
        .filter(|v| v.1 >= best - tie_band(best))
        .map(|v| v.0)
        .collect();
    set.sort_unstable();
    if set.len() == 1 {
        NStar::Single(set[0])
    } else {
        NStar::Tie(set)
    }
}

/// Optimum of the relaxed problem `max Q((ceil(n/T) - np)/sqrt(np(1-p)))`.
///
/// Below critical load the objective is maximised over the candidate set.
/// At `pT = 1` every candidate except `N` ties. Above it the optimum is
/// restricted to `{floor(LT), N}` and the better of the two is taken; the
/// label is Case 4 when `N` wins and Case 3 or 5 (by the side of
/// `(L+1)/N` that `p` lies on) when `floor(LT)` wins. When `floor(LT) = N`
/// the closed-form label is kept. The closed-form band
/// of [`theorem_closed_form`] is not used to choose between the two.
pub fn solve_p2(params: &SystemParams) -> Result<SolveOutcome> {
    let cands = candidate_set(params)?;
    let n = params.num_nodes;
    let (case_label, n_star) = match LoadRegime::of(params) {
        LoadRegime::Below => (CaseLabel::Case1, relaxed_maximisers(&cands.values, params)?),
        LoadRegime::Critical => theorem_closed_form(params)?,
        LoadRegime::Above => {
            let top = snap_floor(cands.l as f64 * params.budget).clamp(1, n as i64) as usize;
            let mut pair = vec![top, n];
            pair.dedup();
            let n_star = relaxed_maximisers(&pair, params)?;
            let label = if top == n {
                high_load_case(params, cands.l).0
            } else if n_star.contains(n) {
                CaseLabel::Case4
            } else if params.access_prob < (cands.l as f64 + 1.0) / n as f64 {
                CaseLabel::Case3
            } else {
                CaseLabel::Case5
            };
            (label, n_star)
        }
    };
    let rep = n_star.representative();
    Ok(SolveOutcome {
        case_label,
        allocation: Allocation::symmetric(n, rep, params.budget)?,
        success_prob: symmetric_success(rep, params)?,
        n_star,
        family: Family::Symmetric,
        note: None,
    })
}

/// Maximisers of the relaxed objective over the candidate set, with no
/// structural restriction.
pub fn relaxed_argmax(params: &SystemParams) -> Result<NStar> {
    relaxed_maximisers(&candidate_set(params)?.values, params)
}

fn relaxed_maximisers(ns: &[usize], params: &SystemParams) -> Result<NStar> {
    let values = ns
        .iter()
        .map(|&n| relaxed_objective(n as f64, params).map(|v| (n, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(maximisers(&values))
}

/// Search space of the exact symmetric problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchRange {
    CandidateSet,
    FullRange,
}

/// First maximiser; later values must beat the running best by more than
/// the tie tolerance.
pub(crate) fn argmax_smallest<I: IntoIterator<Item = (usize, f64)>>(it: I) -> Option<(usize, f64)> {
    it.into_iter().fold(None, |best, (n, v)| match best {
        Some((_, bv)) if v <= bv + tie_band(bv.max(v)) => best,
        _ => Some((n, v)),
    })
}

/// Case label of the region `(p, T)` falls in.
pub fn region_label(params: &SystemParams, l: usize) -> CaseLabel {
    match LoadRegime::of(params) {
        LoadRegime::Below => CaseLabel::Case1,
        LoadRegime::Critical => CaseLabel::Case2,
        LoadRegime::Above => high_load_case(params, l).0,
    }
}

/// Exact optimum of the symmetric problem. `n_star` lists every maximiser;
/// the materialised allocation uses the smallest.
pub fn solve_p1(params: &SystemParams, search: SearchRange) -> Result<SolveOutcome> {
    let cands = candidate_set(params)?;
    let ns: Vec<usize> = match search {
        SearchRange::CandidateSet => cands.values.clone(),
        SearchRange::FullRange => (1..=params.num_nodes).collect(),
    };
    let values = ns
        .into_iter()
        .map(|n| symmetric_success(n, params).map(|v| (n, v)))
        .collect::<Result<Vec<_>>>()?;
    let n_star = maximisers(&values);
    let rep = n_star.representative();
    Ok(SolveOutcome {
        case_label: region_label(params, cands.l),
        allocation: Allocation::symmetric(params.num_nodes, rep, params.budget)?,
        success_prob: symmetric_success(rep, params)?,
        n_star,
        family: Family::Symmetric,
        note: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub p: f64,
    pub t: f64,
    pub n_p1: NStar,
    pub n_p2: NStar,
}

/// Agreement between the exact and relaxed optima over a `(p, T)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityReport {
    pub alpha: f64,
    pub beta: f64,
    pub grid_points_total: usize,
    #[serde(rename = "grid_points_pT_gt_1")]
    pub grid_points_pt_gt_1: usize,
    pub mismatches: Vec<Mismatch>,
}

/// `{step, 2 step, ...}` strictly inside `(0, 1)`.
pub fn probability_grid(step: f64) -> Vec<f64> {
    let k = snap_ceil(1.0 / step).max(1) as usize;
    (1..k).map(|i| i as f64 * step).filter(|&p| p < 1.0).collect()
}

/// Multiples of `step` in `[max(1, step), N]`.
pub fn budget_grid(num_nodes: usize, step: f64) -> Vec<f64> {
    let first = snap_ceil(1.0 / step).max(1);
    let last = snap_floor(num_nodes as f64 / step);
    (first..=last).map(|j| j as f64 * step).collect()
}

/// Compare [`solve_p1`] (candidate set) with [`solve_p2`] on the grid.
pub fn disparity_scan(num_nodes: usize, p_step: f64, t_step: f64) -> Result<DisparityReport> {
    disparity_scan_with(
        num_nodes,
        p_step,
        t_step,
        |params| solve_p1(params, SearchRange::CandidateSet).map(|o| o.n_star),
        |params| solve_p2(params).map(|o| o.n_star),
    )
}

/// Grid scan with caller-supplied solvers. A point agrees when the two
/// solution sets share a member; for single answers that is equality.
pub fn disparity_scan_with<F, G>(
    num_nodes: usize,
    p_step: f64,
    t_step: f64,
    exact: F,
    relaxed: G,
) -> Result<DisparityReport>
where
    F: Fn(&SystemParams) -> Result<NStar> + Sync,
    G: Fn(&SystemParams) -> Result<NStar> + Sync,
{
    if !(p_step > 0.0 && t_step > 0.0) {
        return Err(Error::Domain("grid steps must be positive".into()));
    }
    let ps = probability_grid(p_step);
    let ts = budget_grid(num_nodes, t_step);
    disparity_scan_on(num_nodes, &ps, &ts, exact, relaxed)
}

/// Scan over explicit probability and budget grids.
pub fn disparity_scan_on<F, G>(
    num_nodes: usize,
    ps: &[f64],
    ts: &[f64],
    exact: F,
    relaxed: G,
) -> Result<DisparityReport>
where
    F: Fn(&SystemParams) -> Result<NStar> + Sync,
    G: Fn(&SystemParams) -> Result<NStar> + Sync,
{
    // (agree, above, agree_above, mismatches) per budget row, in grid order
    let rows = ts
        .par_iter()
        .map(|&t| {
            let mut row = (0usize, 0usize, 0usize, Vec::new());
            for &p in ps {
                let params = SystemParams::new(num_nodes, p, t)?;
                let n1 = exact(&params)?;
                let n2 = relaxed(&params)?;
                let agree = n1.intersects(&n2);
                let above = params.load() > 1.0 + CRITICAL_LOAD_TOL;
                row.0 += usize::from(agree);
                row.1 += usize::from(above);
                row.2 += usize::from(agree && above);
                if !agree {
                    row.3.push(Mismatch {
                        p,
                        t,
                        n_p1: n1,
                        n_p2: n2,
                    });
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let total = ps.len() * ts.len();
    let (mut agree, mut above, mut agree_above) = (0, 0, 0);
    let mut mismatches = Vec::new();
    for (a, b, c, m) in rows {
        agree += a;
        above += b;
        agree_above += c;
        mismatches.extend(m);
    }
    let frac = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(DisparityReport {
        alpha: frac(agree, total),
        beta: frac(agree_above, above),
        grid_points_total: total,
        grid_points_pt_gt_1: above,
        mismatches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub p1_objective: f64,
    pub p2_objective: f64,
}

/// Exact and relaxed objectives for every support size `1..=N`.
pub fn objective_curve(params: &SystemParams) -> Result<Vec<CurvePoint>> {
    require_unit_budget(params)?;
    (1..=params.num_nodes)
        .map(|n| {
            Ok(CurvePoint {
                n,
                p1_objective: symmetric_success(n, params)?,
                p2_objective: relaxed_objective(n as f64, params)?,
            })
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str = "n,p1_objective,p2_objective";

/// CSV with header `n,p1_objective,p2_objective`, 12 significant digits.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for pt in points {
        let _ = writeln!(
            out,
            "{},{},{}",
            pt.n,
            round_sig(pt.p1_objective, 12),
            round_sig(pt.p2_objective, 12)
        );
    }
    out
}

//! Memory-limited allocation: constant caps with the quasi-symmetric/symmetric
//! crossover `p0`, and arbitrary cap profiles via FLmin, ANmax and symmetric
//! spreading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{
    evaluate, monte_carlo_success, quasi_symmetric_success, symmetric_success, tail_from,
};
use crate::numeric::{compensated_sum, ge_tol, snap_ceil, snap_floor, SNAP_TOL};
use crate::relaxation::{
    maximisers, multiplicity_bound, region_label, relaxed_objective, solve_p2, LoadRegime,
};
use crate::types::{Allocation, CaseLabel, Family, NStar, SolveOutcome, SystemParams};

/// Strictness margin for the Markov-bound conditions.
pub const CONDITION_TOL: f64 = 1e-12;

/// Target residual of the `p0` bisection.
pub const P0_RESIDUAL_TOL: f64 = 1e-10;

/// Points probed on `(0, 1/T)` when bracketing `p0`.
const P0_SCAN_POINTS: usize = 2000;

/// Per-node capacities, held sorted ascending together with the original
/// node index of each entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryProfile {
    caps: Vec<f64>,
    order: Vec<usize>,
}

impl MemoryProfile {
    /// Accepts caps in any order; they are sorted internally.
    pub fn new(caps: Vec<f64>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::Domain("memory profile must list at least one node".into()));
        }
        if let Some(bad) = caps.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!("memory caps must be positive, got {bad}")));
        }
        let mut order: Vec<usize> = (0..caps.len()).collect();
        order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]));
        let sorted = order.iter().map(|&i| caps[i]).collect();
        Ok(Self { caps: sorted, order })
    }

    pub fn constant(num_nodes: usize, cap: f64) -> Result<Self> {
        Self::new(vec![cap; num_nodes])
    }

    /// Caps sorted ascending.
    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    /// Caps in the order they were supplied.
    pub fn original_caps(&self) -> Vec<f64> {
        self.to_original(&self.caps)
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.caps.iter().copied())
    }

    pub fn min_cap(&self) -> f64 {
        self.caps[0]
    }

    pub fn max_cap(&self) -> f64 {
        self.caps[self.caps.len() - 1]
    }

    /// `m = Σ M_i² / Σ M_j`, the capacity-weighted mean cap.
    pub fn m_stat(&self) -> f64 {
        compensated_sum(self.caps.iter().map(|c| c * c)) / self.total()
    }

    /// The common cap when every node has the same capacity.
    pub fn constant_cap(&self) -> Option<f64> {
        let (lo, hi) = (self.min_cap(), self.max_cap());
        (hi - lo <= 1e-12 * hi.max(1.0)).then_some(hi)
    }

    /// Sum of the `k` smallest caps.
    pub fn bottom_sum(&self, k: usize) -> f64 {
        compensated_sum(self.caps[..k].iter().copied())
    }

    /// Sum of the `k` largest caps.
    pub fn top_sum(&self, k: usize) -> f64 {
        compensated_sum(self.caps[self.caps.len() - k..].iter().copied())
    }

    /// Map amounts indexed like [`caps`](Self::caps) back to the original
    /// node order.
    pub fn to_original(&self, sorted_amounts: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.caps.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = sorted_amounts[k];
        }
        out
    }

    fn allocation(&self, sorted_amounts: &[f64]) -> Result<Allocation> {
        Allocation::new(self.to_original(sorted_amounts))
    }

    /// Every entry of `alloc` (original order) fits under its cap.
    pub fn admits(&self, alloc: &Allocation) -> bool {
        let caps = self.original_caps();
        alloc.len() == caps.len()
            && alloc.amounts().iter().zip(&caps).all(|(x, c)| *x <= c + SNAP_TOL)
    }

    fn check_budget(&self, budget: f64) -> Result<()> {
        if budget > self.total() + SNAP_TOL {
            Err(Error::Infeasible(format!(
                "budget {budget} exceeds the total memory {} of the profile",
                self.total()
            )))
        } else {
            Ok(())
        }
    }

    fn check_nodes(&self, params: &SystemParams) -> Result<()> {
        if params.num_nodes != self.len() {
            return Err(Error::Domain(format!(
                "profile lists {} nodes but num_nodes is {}",
                self.len(),
                params.num_nodes
            )));
        }
        Ok(())
    }
}

impl Serialize for MemoryProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.original_caps().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MemoryProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let caps = Vec::<f64>::deserialize(d)?;
        Self::new(caps).map_err(serde::de::Error::custom)
    }
}

/// `n - 1` nodes at `full_level` and one node holding `residual`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiSymmetricSpec {
    pub n: usize,
    pub full_level: f64,
    pub residual: f64,
}

impl QuasiSymmetricSpec {
    /// Minimum-support fill of budget `T` under cap `M`; `R = T - M(n-1)`.
    pub fn minimal(budget: f64, cap: f64) -> Result<Self> {
        let n = n_min_const(budget, cap)?;
        let residual = (budget - cap * (n - 1) as f64).min(cap);
        Ok(Self {
            n,
            full_level: cap,
            residual,
        })
    }

    pub fn allocation(&self, num_nodes: usize) -> Result<Allocation> {
        Allocation::quasi_symmetric(num_nodes, self.n, self.full_level, self.residual)
    }

    pub fn success(&self, p: f64) -> Result<f64> {
        quasi_symmetric_success(self.n, self.full_level, self.residual, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum P0Method {
    ExactRoot,
    ClosedApprox,
    /// No root was usable; the two allocations were compared at `p` itself.
    Direct,
}

/// Constant-cap solution with the quantities that drive it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantProfileOutcome {
    #[serde(flatten)]
    pub outcome: SolveOutcome,
    pub p0: Option<f64>,
    pub p0_method: Option<P0Method>,
    #[serde(rename = "candidate_set_M")]
    pub candidate_set_m: Vec<usize>,
    #[serde(rename = "L0")]
    pub l0: usize,
    pub n_min: usize,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

/// Fewest nodes of capacity `M` that hold budget `T`: `ceil(T/M)`.
pub fn n_min_const(budget: f64, cap: f64) -> Result<usize> {
    check_positive("budget", budget)?;
    check_positive("memory cap", cap)?;
    Ok(snap_ceil(budget / cap).max(1) as usize)
}

/// Smallest `L0` with `n_min <= floor(L0 T)`.
pub fn smallest_l0(n_min: usize, budget: f64) -> Result<usize> {
    if n_min == 0 {
        return Err(Error::Domain("n_min must be at least 1".into()));
    }
    if budget.is_nan() || budget < 1.0 - SNAP_TOL {
        return Err(Error::Domain(format!("budget must be at least 1, got {budget}")));
    }
    // floor(l T) >= l when T >= 1, so l = n_min always qualifies
    Ok((1..=n_min)
        .find(|&l| snap_floor(l as f64 * budget) >= n_min as i64)
        .unwrap_or(n_min))
}

/// `P_QS(p) - P_S(p)`: quasi-symmetric minimum fill against the symmetric
/// allocation on `floor(L0 T)` nodes.
pub fn p0_residual(p: f64, budget: f64, cap: f64) -> Result<f64> {
    let (qs, s) = crossover_terms(p, budget, cap)?;
    Ok(qs - s)
}

fn crossover_terms(p: f64, budget: f64, cap: f64) -> Result<(f64, f64)> {
    let qs = QuasiSymmetricSpec::minimal(budget, cap)?;
    let l0 = smallest_l0(qs.n, budget)?;
    let n_sym = snap_floor(l0 as f64 * budget) as u64;
    let p_s = tail_from(n_sym, p, snap_ceil(n_sym as f64 / budget));
    Ok((qs.success(p)?, p_s))
}

fn check_p0_domain(budget: f64, cap: f64) -> Result<()> {
    if n_min_const(budget, cap)? < 2 {
        return Err(Error::Domain(
            "p0 needs a binding memory limit (ceil(T/M) >= 2)".into(),
        ));
    }
    if budget < 1.0 - SNAP_TOL {
        return Err(Error::Domain(format!("budget must be at least 1, got {budget}")));
    }
    Ok(())
}

/// Root of [`p0_residual`] on `(0, 1/T)`.
///
/// The interval is scanned for the first change from positive to negative
/// residual and the bracket is then bisected to machine resolution.
pub fn p0_solve(budget: f64, cap: f64) -> Result<f64> {
    check_p0_domain(budget, cap)?;
    let hi_end = (1.0 / budget).min(1.0);
    let f = |p: f64| p0_residual(p, budget, cap);
    let mut lo = None;
    let mut bracket = None;
    for k in 1..P0_SCAN_POINTS {
        let p = hi_end * k as f64 / P0_SCAN_POINTS as f64;
        let (qs, sym) = crossover_terms(p, budget, cap)?;
        let r = qs - sym;
        // differences at rounding level carry no sign; when T/M is an
        // integer the two allocations coincide and every point lands here
        if r.abs() <= 1e-12 * (qs + sym) {
            continue;
        }
        if r > 0.0 {
            lo = Some(p);
        } else if let Some(l) = lo {
            bracket = Some((l, p));
            break;
        }
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::NoRoot(format!(
            "quasi-symmetric and symmetric success do not cross on (0, 1/T) for T = {budget}, M = {cap}"
        ))
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let r = f(mid)?;
        if r == 0.0 {
            return Ok(mid);
        }
        if r > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let root = 0.5 * (a + b);
    let r = f(root)?;
    if r.abs() > P0_RESIDUAL_TOL {
        return Err(Error::NoRoot(format!(
            "bisection stalled with residual {r:e} at p = {root}"
        )));
    }
    Ok(root)
}

/// Taylor-expansion approximation of `p0`:
/// `(c - L0 sqrt((n-1)/n_s)) / (n - 1 - sqrt((n-1) n_s) + c - ceil((1-R)/M))`
/// with `c = ceil(1/M)`, `n = n_min` and `n_s = floor(L0 T)`.
pub fn p0_approx(budget: f64, cap: f64) -> Result<f64> {
    check_p0_domain(budget, cap)?;
    let qs = QuasiSymmetricSpec::minimal(budget, cap)?;
    let l0 = smallest_l0(qs.n, budget)? as f64;
    let n_s = snap_floor(l0 * budget) as f64;
    let c = snap_ceil(1.0 / cap) as f64;
    let c_res = snap_ceil((1.0 - qs.residual) / cap) as f64;
    let nm1 = (qs.n - 1) as f64;
    let num = c - l0 * (nm1 / n_s).sqrt();
    let den = nm1 - (nm1 * n_s).sqrt() + c - c_res;
    if den.abs() < 1e-15 {
        return Err(Error::Degenerate(format!(
            "p0 approximation has a vanishing denominator for T = {budget}, M = {cap}"
        )));
    }
    Ok(num / den)
}

/// `{floor(l T) : lo <= l <= hi} ∪ {N}`, ascending without duplicates.
fn spread_set(lo: usize, hi: usize, budget: f64, num_nodes: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (lo..=hi)
        .map(|l| snap_floor(l as f64 * budget) as usize)
        .filter(|&n| n >= 1 && n <= num_nodes)
        .collect();
    v.push(num_nodes);
    v.sort_unstable();
    v.dedup();
    v
}

fn symmetric_outcome(
    params: &SystemParams,
    label: CaseLabel,
    n_star: NStar,
    note: Option<String>,
) -> Result<SolveOutcome> {
    let rep = n_star.representative();
    Ok(SolveOutcome {
        case_label: label,
        allocation: Allocation::symmetric(params.num_nodes, rep, params.budget)?,
        success_prob: symmetric_success(rep, params)?,
        n_star,
        family: Family::Symmetric,
        note,
    })
}

/// Optimal allocation when every node stores at most `M`.
///
/// Below critical load the minimum quasi-symmetric fill competes with the
/// symmetric allocation on `floor(L0 T)` nodes, switching at `p0`. At and
/// above critical load the relaxed objective is maximised over
/// `N_M = {floor(L0 T), ..., floor(L T), N}`. When `L < L0` no such
/// symmetric allocation fits in `N` nodes and the quasi-symmetric fill is
/// compared directly with the symmetric allocation on all `N` nodes.
pub fn solve_constant_profile(params: &SystemParams, cap: f64) -> Result<ConstantProfileOutcome> {
    check_positive("memory cap", cap)?;
    let (n_nodes, t, p) = (params.num_nodes, params.budget, params.access_prob);
    if t <= cap + SNAP_TOL {
        let outcome = solve_p2(params)?;
        let candidates = spread_set(1, multiplicity_bound(n_nodes, t), t, n_nodes);
        return Ok(ConstantProfileOutcome {
            outcome,
            p0: None,
            p0_method: None,
            candidate_set_m: candidates,
            l0: 1,
            n_min: 1,
        });
    }
    if t > n_nodes as f64 * cap + SNAP_TOL {
        return Err(Error::Infeasible(format!(
            "budget {t} exceeds N*M = {}",
            n_nodes as f64 * cap
        )));
    }
    if t < 1.0 - SNAP_TOL {
        return Err(Error::Infeasible(format!(
            "budget {t} is below one object; no allocation can recover"
        )));
    }
    let qs = QuasiSymmetricSpec::minimal(t, cap)?;
    let l = multiplicity_bound(n_nodes, t);
    let l0 = smallest_l0(qs.n, t)?;
    let below_l0 = l < l0;
    let candidates = if below_l0 {
        vec![n_nodes]
    } else {
        spread_set(l0, l, t, n_nodes)
    };
    let mut p0 = None;
    let mut p0_method = None;
    let outcome = match LoadRegime::of(params) {
        LoadRegime::Below => {
            let root = p0_solve(t, cap);
            if let Ok(r) = root {
                p0 = Some(r);
                p0_method = Some(P0Method::ExactRoot);
            }
            let n_sym = if below_l0 {
                n_nodes
            } else {
                snap_floor(l0 as f64 * t) as usize
            };
            let quasi_wins = match (below_l0, p0) {
                (false, Some(r)) => p <= r,
                _ => {
                    p0_method = Some(P0Method::Direct);
                    qs.success(p)? >= symmetric_success(n_sym, params)?
                }
            };
            let note = below_l0.then(|| {
                format!("L = {l} < L0 = {l0}: compared against the symmetric allocation on all N nodes")
            });
            if quasi_wins {
                SolveOutcome {
                    case_label: CaseLabel::Case1a,
                    n_star: NStar::Single(qs.n),
                    family: Family::QuasiSymmetric,
                    allocation: qs.allocation(n_nodes)?,
                    success_prob: qs.success(p)?,
                    note,
                }
            } else {
                symmetric_outcome(params, CaseLabel::Case1b, NStar::Single(n_sym), note)?
            }
        }
        LoadRegime::Critical => {
            let ties: Vec<usize> = candidates.iter().copied().filter(|&n| n != n_nodes).collect();
            let n_star = match ties.len() {
                0 => NStar::Single(n_nodes),
                1 => NStar::Single(ties[0]),
                _ => NStar::Tie(ties),
            };
            symmetric_outcome(params, CaseLabel::Case2, n_star, None)?
        }
        LoadRegime::Above => {
            let values = candidates
                .iter()
                .map(|&n| relaxed_objective(n as f64, params).map(|v| (n, v)))
                .collect::<Result<Vec<_>>>()?;
            symmetric_outcome(params, region_label(params, l), maximisers(&values), None)?
        }
    };
    Ok(ConstantProfileOutcome {
        outcome,
        p0,
        p0_method,
        candidate_set_m: candidates,
        l0,
        n_min: qs.n,
    })
}

/// Fewest largest-capacity nodes whose caps cover the budget.
pub fn n_min_profile(profile: &MemoryProfile, budget: f64) -> Result<usize> {
    check_positive("budget", budget)?;
    profile.check_budget(budget)?;
    let caps = profile.caps();
    let mut acc = crate::numeric::CompensatedSum::new();
    for (k, c) in caps.iter().rev().enumerate() {
        acc.add(*c);
        if ge_tol(acc.value(), budget) {
            return Ok(k + 1);
        }
    }
    Ok(caps.len())
}

/// Full-load minimum-support allocation: the `n_min - 1` largest nodes are
/// filled to capacity and the residual goes to the next largest node.
/// Returned in original node order.
pub fn flmin_alloc(profile: &MemoryProfile, budget: f64) -> Result<Allocation> {
    let n_min = n_min_profile(profile, budget)?;
    let caps = profile.caps();
    let n = caps.len();
    let mut x = vec![0.0; n];
    x[n - n_min + 1..].copy_from_slice(&caps[n - n_min + 1..]);
    let residual = budget - profile.top_sum(n_min - 1);
    x[n - n_min] = residual.clamp(0.0, caps[n - n_min]);
    profile.allocation(&x)
}

/// FLmin beats symmetric minimal spreading under the Markov bound when
/// `m > T / n_min`.
pub fn condition_flmin(profile: &MemoryProfile, budget: f64) -> Result<bool> {
    let n_min = n_min_profile(profile, budget)?;
    Ok(profile.m_stat() > budget / n_min as f64 + CONDITION_TOL)
}

/// Water-filling of a budget against the caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterFill {
    /// Common amount `a` stored on every unsaturated node.
    pub level: f64,
    /// Nodes whose cap lies strictly below the level and is filled.
    pub saturated: usize,
    /// Nodes holding the common level, `N - saturated`.
    pub n_max: usize,
    /// Amounts in original node order.
    pub allocation: Allocation,
}

/// Water-filling: the level `a` with `Σ min(M_i, a) = T`.
pub fn water_fill(profile: &MemoryProfile, budget: f64) -> Result<WaterFill> {
    check_positive("budget", budget)?;
    profile.check_budget(budget)?;
    let caps = profile.caps();
    let n = caps.len();
    let mut k = 0;
    let mut below = 0.0;
    let level = loop {
        let a = (budget - below) / (n - k) as f64;
        if a <= caps[k] + SNAP_TOL || k + 1 == n {
            break a;
        }
        below += caps[k];
        k += 1;
    };
    let x: Vec<f64> = caps.iter().map(|&c| c.min(level)).collect();
    Ok(WaterFill {
        level,
        saturated: k,
        n_max: n - k,
        allocation: profile.allocation(&x)?,
    })
}

/// Number of nodes sharing the water level of [`water_fill`].
pub fn n_max_profile(profile: &MemoryProfile, budget: f64) -> Result<usize> {
    Ok(water_fill(profile, budget)?.n_max)
}

/// Largest `n <= N` with `T/n > M_{N-n}`, reading `M_0` as zero. Because
/// `T/N > 0 = M_0`, this is always `N`; kept for diagnostics.
pub fn n_max_literal(profile: &MemoryProfile, budget: f64) -> usize {
    let caps = profile.caps();
    let n = caps.len();
    (1..=n)
        .rev()
        .find(|&k| {
            let below = if k == n { 0.0 } else { caps[n - k - 1] };
            budget / k as f64 > below
        })
        .unwrap_or(0)
}

/// All-node maximum-support allocation (water-filling), original order.
pub fn anmax_alloc(profile: &MemoryProfile, budget: f64) -> Result<Allocation> {
    Ok(water_fill(profile, budget)?.allocation)
}

/// ANmax beats symmetric maximum spreading under the Markov bound when
/// `m (N - n_max) > Σ_{i <= N - n_max} M_i`; vacuously true when no cap
/// binds.
pub fn condition_anmax(profile: &MemoryProfile, budget: f64) -> Result<bool> {
    let n_max = n_max_profile(profile, budget)?;
    let k = profile.len() - n_max;
    if k == 0 {
        return Ok(true);
    }
    Ok(profile.m_stat() * k as f64 > profile.bottom_sum(k) + CONDITION_TOL)
}

/// Markov upper bound `p (T - Σ_{i <= N - n_max} M_i + m (N - n_max))` on
/// the recovery probability of ANmax.
pub fn anmax_markov_bound(profile: &MemoryProfile, budget: f64, p: f64) -> Result<f64> {
    let n_max = n_max_profile(profile, budget)?;
    let k = profile.len() - n_max;
    Ok(p * (budget - profile.bottom_sum(k) + profile.m_stat() * k as f64))
}

/// Symmetric allocation on the `n` largest nodes, if each can hold `T/n`.
pub fn symmetric_on_profile(
    profile: &MemoryProfile,
    n: usize,
    budget: f64,
) -> Option<Allocation> {
    let caps = profile.caps();
    let len = caps.len();
    if n == 0 || n > len || budget / n as f64 > caps[len - n] + SNAP_TOL {
        return None;
    }
    let mut x = vec![0.0; len];
    x[len - n..].fill(budget / n as f64);
    profile.allocation(&x).ok()
}

/// Exact recovery probability where enumeration is tractable, otherwise a
/// seeded Monte Carlo estimate (flagged in the returned note).
fn score(alloc: &Allocation, p: f64) -> Result<(f64, Option<String>)> {
    match evaluate(alloc, p) {
        Ok(v) => Ok((v, None)),
        Err(Error::Size(_)) => {
            let est = monte_carlo_success(alloc, p, 1_000_000, 0)?;
            Ok((
                est.value,
                Some(format!(
                    "success_prob is a Monte Carlo estimate (±{:.2e})",
                    est.ci_halfwidth
                )),
            ))
        }
        Err(e) => Err(e),
    }
}

fn join_notes(a: Option<String>, b: Option<String>) -> Option<String> {
    match (a, b) {
        (Some(a), Some(b)) => Some(format!("{a}; {b}")),
        (a, b) => a.or(b),
    }
}

/// How the Markov-bound conditions select between the asymmetric and
/// symmetric allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispatchRule {
    /// A condition that holds selects the asymmetric allocation (FLmin or
    /// ANmax); this is the direction the optimality conditions establish.
    ConditionSelectsAsymmetric,
    /// The opposite pairing.
    ConditionSelectsSymmetric,
}

/// Allocation for an arbitrary cap profile.
pub fn solve_arbitrary_profile(
    params: &SystemParams,
    profile: &MemoryProfile,
) -> Result<SolveOutcome> {
    solve_arbitrary_profile_with(params, profile, DispatchRule::ConditionSelectsAsymmetric)
}

/// [`solve_arbitrary_profile`] with an explicit dispatch rule.
///
/// Budgets within the smallest cap never bind and reduce to the
/// unconstrained problem; constant profiles go through
/// [`solve_constant_profile`]. Otherwise, below critical load FLmin
/// competes with symmetric spreading on `floor(L0 T)` nodes, at critical
/// load every `floor(l T)` with `L0 <= l <= L_max` ties, and above it ANmax
/// competes with symmetric spreading on `floor(L_max T)` nodes. When no cap
/// binds at the water level ANmax is itself symmetric, and the best fitting
/// symmetric spread is chosen by exact recovery probability. A symmetric
/// target that does not fit under the caps is replaced by the nearest one
/// that does; if none fits the asymmetric allocation is returned.
pub fn solve_arbitrary_profile_with(
    params: &SystemParams,
    profile: &MemoryProfile,
    rule: DispatchRule,
) -> Result<SolveOutcome> {
    profile.check_nodes(params)?;
    let (n_nodes, t, p) = (params.num_nodes, params.budget, params.access_prob);
    profile.check_budget(t)?;
    if let Some(cap) = profile.constant_cap() {
        let mut out = solve_constant_profile(params, cap)?.outcome;
        out.allocation = profile.allocation(out.allocation.amounts())?;
        return Ok(out);
    }
    if t <= profile.min_cap() + SNAP_TOL {
        return solve_p2(params);
    }
    if t < 1.0 - SNAP_TOL {
        return Err(Error::Infeasible(format!(
            "budget {t} is below one object; no allocation can recover"
        )));
    }
    let n_min = n_min_profile(profile, t)?;
    let l0 = smallest_l0(n_min, t)?;
    let fill = water_fill(profile, t)?;
    let l_max = (1..=n_nodes)
        .take_while(|&l| snap_floor(l as f64 * t) as usize <= fill.n_max)
        .last()
        .unwrap_or(0);
    let feasible: Vec<usize> = (l0..=l_max)
        .map(|l| snap_floor(l as f64 * t) as usize)
        .filter(|&n| symmetric_on_profile(profile, n, t).is_some())
        .collect();
    let prefer_asym = |cond: bool| match rule {
        DispatchRule::ConditionSelectsAsymmetric => cond,
        DispatchRule::ConditionSelectsSymmetric => !cond,
    };
    let symmetric = |label: CaseLabel, n_star: NStar, note: Option<String>| -> Result<SolveOutcome> {
        let rep = n_star.representative();
        let allocation = symmetric_on_profile(profile, rep, t)
            .ok_or_else(|| Error::Infeasible(format!("symmetric support {rep} exceeds a cap")))?;
        Ok(SolveOutcome {
            case_label: label,
            success_prob: symmetric_success(rep, params)?,
            n_star,
            family: Family::Symmetric,
            allocation,
            note,
        })
    };
    let asymmetric = |label: CaseLabel, family: Family, allocation: Allocation, note: Option<String>| -> Result<SolveOutcome> {
        let (success_prob, mc_note) = score(&allocation, p)?;
        Ok(SolveOutcome {
            case_label: label,
            n_star: NStar::Single(allocation.support_size()),
            family,
            allocation,
            success_prob,
            note: join_notes(note, mc_note),
        })
    };
    let no_symmetric = Some("no symmetric candidate fits under the caps".to_string());
    match LoadRegime::of(params) {
        LoadRegime::Below => {
            if prefer_asym(condition_flmin(profile, t)?) {
                return asymmetric(CaseLabel::Case1a, Family::FlMin, flmin_alloc(profile, t)?, None);
            }
            let target = snap_floor(l0 as f64 * t) as usize;
            match feasible.first() {
                Some(&n) => {
                    let note = (n != target).then(|| {
                        format!("floor(L0 T) = {target} exceeds a cap; using {n} nodes")
                    });
                    symmetric(CaseLabel::Case1b, NStar::Single(n), note)
                }
                None => asymmetric(CaseLabel::Case1a, Family::FlMin, flmin_alloc(profile, t)?, no_symmetric),
            }
        }
        LoadRegime::Critical => match feasible.len() {
            0 => asymmetric(CaseLabel::Case2, Family::FlMin, flmin_alloc(profile, t)?, no_symmetric),
            1 => symmetric(CaseLabel::Case2, NStar::Single(feasible[0]), None),
            _ => symmetric(CaseLabel::Case2, NStar::Tie(feasible.clone()), None),
        },
        LoadRegime::Above => {
            if fill.n_max == n_nodes {
                // no cap binds: ANmax is the uniform allocation on all N
                // nodes and the choice is among symmetric spreads that fit
                let mut options = feasible
                    .iter()
                    .chain(std::iter::once(&n_nodes))
                    .map(|&n| symmetric_success(n, params).map(|v| (n, v)))
                    .collect::<Result<Vec<_>>>()?;
                options.sort_by_key(|o| o.0);
                options.dedup_by_key(|o| o.0);
                let best = maximisers(&options);
                let label = if best.contains(n_nodes) { CaseLabel::Case4 } else { CaseLabel::Case5 };
                return symmetric(label, best, None);
            }
            if prefer_asym(condition_anmax(profile, t)?) {
                return asymmetric(CaseLabel::Case4, Family::AnMax, fill.allocation, None);
            }
            let target = snap_floor(l_max as f64 * t) as usize;
            match feasible.last() {
                Some(&n) => {
                    let note = (n != target).then(|| {
                        format!("floor(L_max T) = {target} exceeds a cap; using {n} nodes")
                    });
                    symmetric(CaseLabel::Case5, NStar::Single(n), note)
                }
                None => asymmetric(CaseLabel::Case4, Family::AnMax, fill.allocation, no_symmetric),
            }
        }
    }
}

//! Recovery probability of allocations: binomial machinery, exact subset
//! enumeration, structured closed forms and Monte Carlo estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ge_tol, snap_ceil, CompensatedSum};
use crate::types::{check_prob, Allocation, SystemParams};

/// Largest support `exact_success` enumerates (2^25 subsets).
pub const MAX_EXACT_SUPPORT: usize = 25;

/// Upper bound on the number of count vectors `grouped_success` visits.
const MAX_GROUP_STATES: u64 = 20_000_000;

/// Two-sided 99% standard normal quantile.
const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    ExactEnumeration,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub ci_halfwidth: f64,
    pub trials: u64,
}

impl SuccessEstimate {
    pub fn exact(value: f64, method: EstimateMethod) -> Self {
        Self {
            value,
            method,
            ci_halfwidth: 0.0,
            trials: 0,
        }
    }
}

/// `p^k (1-p)^(n-k)` in the log domain, with the `p ∈ {0, 1}` corners exact.
fn log_weight(n: u64, p: f64, k: u64) -> f64 {
    let mut lw = 0.0;
    if k > 0 {
        lw += k as f64 * p.ln();
    }
    if n > k {
        lw += (n - k) as f64 * (-p).ln_1p();
    }
    lw
}

/// `C(n,i) p^i (1-p)^(n-i)`.
pub fn binom_pmf(n: u64, p: f64, i: u64) -> Result<f64> {
    check_prob(p)?;
    if i > n {
        return Err(Error::Domain(format!("pmf index {i} exceeds n = {n}")));
    }
    Ok(pmf_unchecked(n, p, i))
}

fn pmf_unchecked(n: u64, p: f64, i: u64) -> f64 {
    if p == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if i == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, i) + log_weight(n, p, i)).exp()
}

/// `P(B(n,p) >= k)` for `0 <= k <= n + 1`.
pub fn binom_tail(n: u64, p: f64, k: u64) -> Result<f64> {
    check_prob(p)?;
    if k > n + 1 {
        return Err(Error::Domain(format!("tail index {k} exceeds n + 1 = {}", n + 1)));
    }
    Ok(tail_unchecked(n, p, k))
}

fn tail_unchecked(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // Sum whichever side of the threshold holds less mass so that tails close
    // to 1 keep their precision in the complement.
    if (k as f64) <= n as f64 * p {
        (1.0 - compensated_sum((0..k).map(|i| pmf_unchecked(n, p, i)))).clamp(0.0, 1.0)
    } else {
        compensated_sum((k..=n).map(|i| pmf_unchecked(n, p, i))).min(1.0)
    }
}

/// Tail with an arbitrary (possibly negative or oversized) integer threshold.
pub(crate) fn tail_from(n: u64, p: f64, k: i64) -> f64 {
    if k <= 0 {
        1.0
    } else {
        tail_unchecked(n, p, k as u64)
    }
}

/// Recovery probability of the symmetric allocation with support `n`:
/// `P(B(n,p) >= ceil(n/T))`.
pub fn symmetric_success(n: usize, params: &SystemParams) -> Result<f64> {
    if n == 0 || n > params.num_nodes {
        return Err(Error::Domain(format!(
            "symmetric support {n} must lie in 1..={}",
            params.num_nodes
        )));
    }
    let need = snap_ceil(n as f64 / params.budget);
    Ok(tail_from(n as u64, params.access_prob, need))
}

/// Recovery probability of `n - 1` nodes at `full_level` plus one node at
/// `residual`, conditioning on whether the residual node is reached.
pub fn quasi_symmetric_success(n: usize, full_level: f64, residual: f64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if n == 0 {
        return Err(Error::Domain("quasi-symmetric support must be at least 1".into()));
    }
    if !(residual > 0.0 && residual <= full_level + crate::numeric::SNAP_TOL) {
        return Err(Error::Domain(format!(
            "residual {residual} must lie in (0, {full_level}]"
        )));
    }
    let rest = (n - 1) as u64;
    let with_residual = tail_from(rest, p, snap_ceil((1.0 - residual) / full_level));
    let without_residual = tail_from(rest, p, snap_ceil(1.0 / full_level));
    Ok(p * with_residual + (1.0 - p) * without_residual)
}

/// Weight `p^k (1-p)^(n-k)` for every `k` in `0..=n`.
fn subset_weights(n: usize, p: f64) -> Vec<f64> {
    (0..=n as u64)
        .map(|k| {
            if p == 0.0 {
                f64::from(k == 0)
            } else if p == 1.0 {
                f64::from(k == n as u64)
            } else {
                log_weight(n as u64, p, k).exp()
            }
        })
        .collect()
}

/// Subset sums of `xs` indexed by bitmask.
fn subset_sums(xs: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1 << xs.len()];
    for mask in 1usize..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + xs[low];
    }
    sums
}

/// Exact recovery probability by enumerating every subset of reached nodes.
///
/// Zero entries are pruned first; the remaining support may hold at most
/// [`MAX_EXACT_SUPPORT`] nodes.
pub fn exact_success(alloc: &Allocation, p: f64) -> Result<f64> {
    check_prob(p)?;
    let xs = alloc.support();
    let n = xs.len();
    if n > MAX_EXACT_SUPPORT {
        return Err(Error::Size(format!(
            "support of {n} nodes exceeds the enumeration limit of {MAX_EXACT_SUPPORT}; \
             use monte_carlo_success instead"
        )));
    }
    // Split the support so both halves' subset sums fit in memory; the
    // success count is tallied per subset size and weighted at the end.
    let (lo, hi) = xs.split_at(n / 2);
    let lo_sums = subset_sums(lo);
    let hi_sums = subset_sums(hi);
    let mut hits = vec![0u64; n + 1];
    for (hm, &hs) in hi_sums.iter().enumerate() {
        let hk = hm.count_ones() as usize;
        for (lm, &ls) in lo_sums.iter().enumerate() {
            if ge_tol(hs + ls, 1.0) {
                hits[hk + lm.count_ones() as usize] += 1;
            }
        }
    }
    let weights = subset_weights(n, p);
    Ok(compensated_sum(
        hits.iter().zip(&weights).map(|(&c, &w)| c as f64 * w),
    ))
}

/// Exact recovery probability computed over groups of equal amounts.
///
/// Nodes holding the same amount are interchangeable, so it suffices to
/// enumerate how many nodes of each group are reached. Works for supports of
/// any size as long as the product of `(group size + 1)` stays moderate.
pub fn grouped_success(alloc: &Allocation, p: f64) -> Result<f64> {
    check_prob(p)?;
    let mut xs = alloc.support();
    xs.sort_by(|a, b| b.total_cmp(a));
    let mut groups: Vec<(f64, u64)> = Vec::new();
    for x in xs {
        match groups.last_mut() {
            Some((v, c)) if (*v - x).abs() <= 1e-12 => *c += 1,
            _ => groups.push((x, 1)),
        }
    }
    groups
        .iter()
        .try_fold(1u64, |acc, &(_, c)| acc.checked_mul(c + 1))
        .filter(|&s| s <= MAX_GROUP_STATES)
        .ok_or_else(|| {
            Error::Size(format!(
                "{} distinct amounts produce too many count vectors",
                groups.len()
            ))
        })?;
    let n: u64 = groups.iter().map(|g| g.1).sum();
    // multiplicity[k]: number of successful reached-sets with k nodes
    let mut multiplicity = vec![0.0f64; n as usize + 1];
    walk_groups(&groups, 0, 0.0, 0, 1.0, &mut multiplicity);
    let weights = subset_weights(n as usize, p);
    Ok(compensated_sum(
        multiplicity.iter().zip(&weights).map(|(&c, &w)| c * w),
    ))
}

fn walk_groups(
    groups: &[(f64, u64)],
    idx: usize,
    collected: f64,
    reached: usize,
    ways: f64,
    out: &mut [f64],
) {
    if idx == groups.len() {
        if ge_tol(collected, 1.0) {
            out[reached] += ways;
        }
        return;
    }
    let (amount, size) = groups[idx];
    for k in 0..=size {
        let c = ln_binomial(size, k).exp().round();
        walk_groups(
            groups,
            idx + 1,
            collected + k as f64 * amount,
            reached + k as usize,
            ways * c,
            out,
        );
    }
}

/// Evaluate an allocation exactly: subset enumeration for small supports,
/// grouped enumeration otherwise.
pub fn evaluate(alloc: &Allocation, p: f64) -> Result<f64> {
    if alloc.support_size() <= 16 {
        exact_success(alloc, p)
    } else {
        grouped_success(alloc, p)
    }
}

/// Closed-form recovery probability for symmetric and quasi-symmetric
/// allocations; other shapes are rejected.
pub fn closed_form_success(alloc: &Allocation, p: f64) -> Result<f64> {
    check_prob(p)?;
    let mut xs = alloc.support();
    if xs.is_empty() {
        return Ok(0.0);
    }
    xs.sort_by(|a, b| b.total_cmp(a));
    let top = xs[0];
    let n = xs.len();
    let same = |x: f64| (x - top).abs() <= 1e-12;
    if xs.iter().all(|&x| same(x)) {
        let params = SystemParams::new(n, p, top * n as f64)?;
        return symmetric_success(n, &params);
    }
    if xs[..n - 1].iter().all(|&x| same(x)) {
        return quasi_symmetric_success(n, top, xs[n - 1], p);
    }
    Err(Error::Domain(
        "closed form applies only to symmetric or quasi-symmetric allocations".into(),
    ))
}

/// Monte Carlo estimate with a 99% normal-approximation half-width.
pub fn monte_carlo_success(
    alloc: &Allocation,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<SuccessEstimate> {
    check_prob(p)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let xs = alloc.support();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let mut collected = 0.0;
        for &x in &xs {
            if rng.random::<f64>() < p {
                collected += x;
            }
        }
        if ge_tol(collected, 1.0) {
            hits += 1;
        }
    }
    let value = hits as f64 / trials as f64;
    let ci_halfwidth = Z_99 * (value * (1.0 - value) / trials as f64).sqrt();
    Ok(SuccessEstimate {
        value,
        method: EstimateMethod::MonteCarlo,
        ci_halfwidth,
        trials,
    })
}

/// Markov upper bound `min(1, m_X n p)` of the with-replacement model, where
/// `m_X` is the mean of the non-zero entries and `n` their count.
pub fn markov_bound(alloc: &Allocation, p: f64) -> Result<f64> {
    check_prob(p)?;
    let xs = alloc.support();
    if xs.is_empty() {
        return Err(Error::Domain("markov bound needs a non-empty support".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    Ok((mean * n * p).min(1.0))
}

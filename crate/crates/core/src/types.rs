use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::SNAP_TOL;

/// Node count `N`, access probability `p` and storage budget `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub num_nodes: usize,
    pub access_prob: f64,
    pub budget: f64,
}

impl SystemParams {
    pub fn new(num_nodes: usize, access_prob: f64, budget: f64) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Domain("num_nodes must be at least 1".into()));
        }
        check_prob(access_prob)?;
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::Domain(format!("budget must be positive, got {budget}")));
        }
        Ok(Self {
            num_nodes,
            access_prob,
            budget,
        })
    }

    /// `pT`, the expected amount of data reached under a budget-`T` allocation.
    pub fn load(&self) -> f64 {
        self.access_prob * self.budget
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(self.num_nodes, self.access_prob, budget)
    }
}

pub(crate) fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")))
    }
}

/// Per-node stored amounts in object-size units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(amounts: Vec<f64>) -> Result<Self> {
        if let Some(bad) = amounts.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain(format!(
                "allocation entries must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Self(amounts))
    }

    /// `n` nodes holding `T/n` each, padded with zeros to `num_nodes`.
    pub fn symmetric(num_nodes: usize, n: usize, budget: f64) -> Result<Self> {
        if n == 0 || n > num_nodes {
            return Err(Error::Domain(format!(
                "symmetric support {n} must lie in 1..={num_nodes}"
            )));
        }
        let mut v = vec![0.0; num_nodes];
        v[..n].fill(budget / n as f64);
        Self::new(v)
    }

    /// `n - 1` nodes at `full_level` and one node at `residual`, padded to `num_nodes`.
    pub fn quasi_symmetric(
        num_nodes: usize,
        n: usize,
        full_level: f64,
        residual: f64,
    ) -> Result<Self> {
        if n == 0 || n > num_nodes {
            return Err(Error::Domain(format!(
                "quasi-symmetric support {n} must lie in 1..={num_nodes}"
            )));
        }
        let mut v = vec![0.0; num_nodes];
        v[..n - 1].fill(full_level);
        v[n - 1] = residual;
        Self::new(v)
    }

    pub fn amounts(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        crate::numeric::compensated_sum(self.0.iter().copied())
    }

    /// Non-zero entries.
    pub fn support(&self) -> Vec<f64> {
        self.0.iter().copied().filter(|&x| x > 0.0).collect()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&x| x > 0.0).count()
    }

    /// Sum does not exceed `budget` beyond the snap tolerance.
    pub fn within_budget(&self, budget: f64) -> bool {
        self.total() <= budget + SNAP_TOL
    }
}

impl TryFrom<Vec<f64>> for Allocation {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Allocation> for Vec<f64> {
    fn from(a: Allocation) -> Self {
        a.0
    }
}

/// Which theorem/lemma branch produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    Case1a,
    Case1b,
    TieSet,
    Infeasible,
}

/// Structural family of a returned allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Symmetric,
    QuasiSymmetric,
    #[serde(rename = "flmin")]
    FlMin,
    #[serde(rename = "anmax")]
    AnMax,
    Explicit,
}

/// Optimal support size: a single value or a set of equally optimal values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NStar {
    Single(usize),
    Tie(Vec<usize>),
}

impl NStar {
    pub fn contains(&self, n: usize) -> bool {
        match self {
            NStar::Single(m) => *m == n,
            NStar::Tie(v) => v.contains(&n),
        }
    }

    pub fn members(&self) -> &[usize] {
        match self {
            NStar::Single(m) => std::slice::from_ref(m),
            NStar::Tie(v) => v,
        }
    }

    pub fn intersects(&self, other: &NStar) -> bool {
        self.members().iter().any(|&n| other.contains(n))
    }

    /// Smallest member.
    pub fn representative(&self) -> usize {
        match self {
            NStar::Single(m) => *m,
            NStar::Tie(v) => v.iter().copied().min().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    #[serde(rename = "case")]
    pub case_label: CaseLabel,
    pub n_star: NStar,
    pub family: Family,
    pub allocation: Allocation,
    pub success_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

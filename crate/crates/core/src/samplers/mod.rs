//! Minimizers for binary quadratic models.
//!
//! All samplers are deterministic functions of the model and their
//! configuration (including the seed). Restarts draw their random streams
//! from `derive_seed(seed, restart)`, so parallel and serial execution agree.

mod anneal;
mod branch;
mod compiled;
mod exact;
mod hybrid;
mod tabu;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Assignment, Bqm};

pub use anneal::sample_sa;
pub use branch::sample_branch_bound;
pub use exact::sample_exact;
pub use hybrid::{solve_hybrid, Backend, SubproblemSolver};
pub use tabu::sample_tabu;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("model has {variables} variables, above the limit of {limit}")]
    TooLarge { variables: usize, limit: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("no external backend registered")]
    BackendUnavailable,
    #[error("external backend failed: {0}")]
    BackendFailed(String),
    #[error("branch and bound exceeded its node budget of {0}")]
    NodeBudget(u64),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
}

impl PartialEq for Sample {
    fn eq(&self, other: &Self) -> bool {
        self.energy.to_bits() == other.energy.to_bits() && self.assignment == other.assignment
    }
}

#[derive(Debug, Clone, Default)]
pub struct SampleInfo {
    pub sampler: String,
    pub wall_time: Duration,
    pub sweeps: usize,
    pub restarts: usize,
}

/// Samples sorted by ascending energy; equal energies are ordered by the
/// lexicographically smallest assignment first.
///
/// Equality ignores the wall time.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub info: SampleInfo,
}

impl PartialEq for SampleSet {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.info.sampler == other.info.sampler
            && self.info.sweeps == other.info.sweeps
            && self.info.restarts == other.info.restarts
    }
}

fn sample_order(a: &Sample, b: &Sample) -> Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then_with(|| a.assignment.cmp(&b.assignment))
}

impl SampleSet {
    /// Recomputes every energy on `bqm`, then sorts.
    pub fn from_assignments(
        bqm: &Bqm,
        assignments: impl IntoIterator<Item = Assignment>,
        info: SampleInfo,
    ) -> Self {
        let samples = assignments
            .into_iter()
            .map(|assignment| {
                let energy = bqm
                    .energy(&assignment)
                    .expect("sampler produced a partial assignment");
                Sample { assignment, energy }
            })
            .collect();
        Self::from_samples(samples, info)
    }

    pub fn from_samples(mut samples: Vec<Sample>, info: SampleInfo) -> Self {
        samples.sort_by(sample_order);
        SampleSet { samples, info }
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn lowest_energy(&self) -> Option<f64> {
        self.best().map(|s| s.energy)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Mixes a master seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealConfig {
    pub restarts: usize,
    pub sweeps: usize,
    /// Starting temperature; the model's largest absolute weight when unset.
    pub t_hot: Option<f64>,
    pub t_cold: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            restarts: 8,
            sweeps: 64,
            t_hot: None,
            t_cold: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabuConfig {
    /// Iterations a flipped variable stays tabu; 0 picks `n/10` clamped to [1, 20].
    pub tenure: usize,
    pub max_stagnation: usize,
    pub restarts: usize,
}

impl Default for TabuConfig {
    fn default() -> Self {
        TabuConfig {
            tenure: 0,
            max_stagnation: 500,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub subproblem_size: usize,
    pub rounds: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            subproblem_size: 12,
            rounds: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    pub max_variables: usize,
    /// Keep only the lowest-energy samples; `None` keeps all `2^n`.
    pub keep: Option<usize>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_variables: 24,
            keep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchBoundConfig {
    pub max_variables: usize,
    pub max_nodes: u64,
    /// Number of equal-energy ground states to report.
    pub max_ties: usize,
}

impl Default for BranchBoundConfig {
    fn default() -> Self {
        BranchBoundConfig {
            max_variables: 2_000,
            max_nodes: 20_000_000,
            max_ties: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    pub sa: AnnealConfig,
    pub tabu: TabuConfig,
    pub hybrid: HybridConfig,
    pub exact: ExactConfig,
    pub branch_bound: BranchBoundConfig,
}

impl SamplerConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.into()));
        if self.sa.restarts == 0 || self.sa.sweeps == 0 {
            return bad("annealing restarts and sweeps must be >= 1");
        }
        if !(self.sa.t_cold > 0.0) || !self.sa.t_cold.is_finite() {
            return bad("t_cold must be > 0");
        }
        if let Some(hot) = self.sa.t_hot {
            if !(hot > self.sa.t_cold) || !hot.is_finite() {
                return bad("t_hot must exceed t_cold");
            }
        }
        if self.tabu.restarts == 0 || self.tabu.max_stagnation == 0 {
            return bad("tabu restarts and max_stagnation must be >= 1");
        }
        if self.hybrid.subproblem_size == 0 || self.hybrid.rounds == 0 {
            return bad("hybrid subproblem_size and rounds must be >= 1");
        }
        if self.branch_bound.max_ties == 0 {
            return bad("branch_bound max_ties must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Full enumeration (small models only).
    Exact,
    /// Exact ground states by branch and bound.
    BranchBound,
    Sa,
    Tabu,
    /// Hybrid SA + tabu with classical subproblem solves.
    Csa,
    /// Hybrid SA + tabu with subproblems sent to an external backend.
    Qasa,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Exact => "exact",
            SamplerKind::BranchBound => "branch-bound",
            SamplerKind::Sa => "sa",
            SamplerKind::Tabu => "tabu",
            SamplerKind::Csa => "csa",
            SamplerKind::Qasa => "qasa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SamplerKind::Exact,
            SamplerKind::BranchBound,
            SamplerKind::Sa,
            SamplerKind::Tabu,
            SamplerKind::Csa,
            SamplerKind::Qasa,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A sampler choice plus its configuration, callable with a per-call seed.
#[derive(Clone)]
pub struct Sampler {
    pub kind: SamplerKind,
    pub config: SamplerConfig,
    pub external: Option<Arc<dyn SubproblemSolver>>,
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sampler")
            .field("kind", &self.kind)
            .field("config", &self.config)
            .field("external", &self.external.is_some())
            .finish()
    }
}

impl Sampler {
    pub fn new(kind: SamplerKind, config: SamplerConfig) -> Self {
        Sampler {
            kind,
            config,
            external: None,
        }
    }

    pub fn with_external(mut self, solver: Arc<dyn SubproblemSolver>) -> Self {
        self.external = Some(solver);
        self
    }

    pub fn sample(&self, bqm: &Bqm, seed: u64) -> Result<SampleSet, SamplerError> {
        let cfg = self.config.with_seed(seed);
        match self.kind {
            SamplerKind::Exact => sample_exact(bqm, &cfg.exact),
            SamplerKind::BranchBound => sample_branch_bound(bqm, &cfg.branch_bound),
            SamplerKind::Sa => sample_sa(bqm, &cfg),
            SamplerKind::Tabu => sample_tabu(bqm, &cfg),
            SamplerKind::Csa => solve_hybrid(bqm, &cfg, &Backend::Classical),
            SamplerKind::Qasa => {
                let solver = self.external.clone().ok_or(SamplerError::BackendUnavailable)?;
                solve_hybrid(bqm, &cfg, &Backend::External(solver))
            }
        }
    }
}

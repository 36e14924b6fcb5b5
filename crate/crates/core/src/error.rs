use thiserror::Error;

use crate::bernoulli_factory::LoopStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("factory-timeout: two-coin exceeded {limit} loops ({stats:?}){}", at_step(*step))]
    FactoryTimeout {
        limit: u64,
        stats: LoopStats,
        step: Option<u64>,
    },

    #[error("bound-violation: coin probability {probability} > 1 at M = {at:?}; the bound or envelope is invalid")]
    BoundViolation { at: Vec<f64>, probability: f64 },

    #[error("invalid state: {reason}{}", at_step(*step))]
    InvalidState { reason: String, step: Option<u64> },

    #[error("proposal-sampling error after {attempts} attempts: {detail}")]
    ProposalSampling { attempts: u64, detail: String },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("tuning failed after {rounds} rounds: last acceptance rate {last_rate:.4}, goal {goal:.4}")]
    TuningFailure { rounds: usize, last_rate: f64, goal: f64 },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("degenerate normalizer estimate: no draws out of {mc_samples} landed in the orthant (increase mc_samples)")]
    DegenerateEstimate { mc_samples: usize },

    #[error("incompatible configuration: {0}")]
    Incompatible(String),
}

fn at_step(step: Option<u64>) -> String {
    step.map(|s| format!(" at step {s}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn invalid_state(reason: impl Into<String>) -> Self {
        Error::InvalidState {
            reason: reason.into(),
            step: None,
        }
    }

    /// Tags step-aware variants with the chain iteration they occurred at.
    pub fn at_step(self, k: u64) -> Self {
        match self {
            Error::FactoryTimeout { limit, stats, .. } => Error::FactoryTimeout {
                limit,
                stats,
                step: Some(k),
            },
            Error::InvalidState { reason, .. } => Error::InvalidState {
                reason,
                step: Some(k),
            },
            other => other,
        }
    }
}

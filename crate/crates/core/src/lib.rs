//! Exact accept-reject MCMC for proposals whose normalizing function is
//! unknown.
//!
//! Barker's acceptance function admits a Bernoulli factory: the two-coin
//! algorithm in [`bernoulli_factory`] draws `Bern(α_B(x, y))` from coins of
//! probability `r(x)/b_x`, which are simulated by drawing once from an
//! envelope. [`kernels`] turns this into a chain driver alongside evaluable
//! Metropolis-Hastings and Barker kernels and the auxiliary-variable RAM
//! sampler. [`proposals`] provides the truncated Gaussian, orthant-truncated
//! Gaussian and repelling-attracting proposals; [`models`] the Gamma,
//! sensor-network and Cox-process targets; [`diagnostics`] the estimators
//! used to summarise runs.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix `f64`.

pub mod bernoulli_factory;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod proposals;
mod real;

pub use error::{Error, Result};
pub use real::{log_add_exp, logistic, Real};

pub use bernoulli_factory::{expected_loops, make_normalizer_coin, two_coin, CoinOracle, LoopStats, TwoCoinInputs};
pub use distributions::{GaussianParams, RngStream};
pub use kernels::{run_chain, ChainTrace, Kernel, KernelKind, RunOptions, TargetDensity};
pub use proposals::{IntractableProposal, TractableProposal};

pub type ChainTrace64 = kernels::ChainTrace<f64>;
pub type ChainTrace32 = kernels::ChainTrace<f32>;
pub type GaussianParams64 = distributions::GaussianParams<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type GammaTarget64 = models::GammaTarget<f64>;
pub type GammaTarget32 = models::GammaTarget<f32>;
pub type CoxModel64 = models::CoxModel<f64>;
pub type SensorModel64 = models::SensorModel<f64>;
pub type SensorData64 = models::SensorData<f64>;
pub type DiscreteSystem64 = models::DiscreteSystem<f64>;
pub type GaussianMixture64 = models::GaussianMixture1d<f64>;
pub type TruncGauss1d64 = proposals::TruncGauss1d<f64>;
pub type TruncGauss1d32 = proposals::TruncGauss1d<f32>;
pub type TruncGaussOrthant64 = proposals::TruncGaussOrthant<f64>;
pub type GaussianWalk64 = proposals::GaussianWalk<f64>;

//! The two-coin Bernoulli factory for Barker's acceptance function.
//!
//! Given evaluable weights `c_x, c_y > 0` and coins of unknown success
//! probabilities `p_x, p_y`, [`two_coin`] emits `1` with probability
//! `c_y p_y / (c_x p_x + c_y p_y)` while only ever flipping the coins.
//! Weights are carried as logarithms so that targets whose log densities
//! reach magnitudes in the thousands stay representable.

use std::marker::PhantomData;

use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::real::{logistic, Real};

/// Loop cap applied when callers do not choose one.
pub const DEFAULT_MAX_LOOPS: u64 = 1_000_000;

/// Tolerance above 1 tolerated on importance-coin probabilities before
/// reporting a bound violation.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// A coin with a fixed but unknown success probability.
///
/// Implementations may sample and evaluate densities; they never expose the
/// success probability itself.
pub trait CoinOracle {
    fn flip(&self, rng: &mut RngStream) -> Result<bool>;
}

impl<C: CoinOracle + ?Sized> CoinOracle for &C {
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        (**self).flip(rng)
    }
}

impl<C: CoinOracle + ?Sized> CoinOracle for Box<C> {
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        (**self).flip(rng)
    }
}

/// Adapter turning a closure into a coin.
pub struct FnCoin<F>(pub F);

impl<F> CoinOracle for FnCoin<F>
where
    F: Fn(&mut RngStream) -> Result<bool>,
{
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        (self.0)(rng)
    }
}

/// Coin that always lands heads.
#[derive(Debug, Clone, Copy, Default)]
pub struct CertainCoin;

impl CoinOracle for CertainCoin {
    fn flip(&self, _rng: &mut RngStream) -> Result<bool> {
        Ok(true)
    }
}

/// Accounting for one two-coin invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoopStats {
    /// Passes through the outer `Bern(c_y / (c_x + c_y))` flip.
    pub loops: u64,
    pub inner_flips: u64,
    pub outcome: bool,
}

/// `(c_x, c_y, coin_x, coin_y)` with the weights held as logs.
#[derive(Debug, Clone)]
pub struct TwoCoinInputs<T, X, Y> {
    log_cx: T,
    log_cy: T,
    pub coin_x: X,
    pub coin_y: Y,
}

impl<T: Real, X: CoinOracle, Y: CoinOracle> TwoCoinInputs<T, X, Y> {
    /// Both log weights must be finite (so `c_x, c_y` are positive and finite).
    pub fn new(log_cx: T, log_cy: T, coin_x: X, coin_y: Y) -> Result<Self> {
        if !log_cx.is_finite() || !log_cy.is_finite() {
            return Err(Error::Domain(format!(
                "two-coin weights must be positive and finite (log c_x = {log_cx}, log c_y = {log_cy})"
            )));
        }
        Ok(Self {
            log_cx,
            log_cy,
            coin_x,
            coin_y,
        })
    }

    pub fn from_weights(cx: T, cy: T, coin_x: X, coin_y: Y) -> Result<Self> {
        if !(cx > T::zero() && cy > T::zero()) {
            return Err(Error::Domain(format!(
                "two-coin weights must be positive (c_x = {cx}, c_y = {cy})"
            )));
        }
        Self::new(cx.ln(), cy.ln(), coin_x, coin_y)
    }

    pub fn log_cx(&self) -> T {
        self.log_cx
    }

    pub fn log_cy(&self) -> T {
        self.log_cy
    }

    /// Success probability of the outer coin, `c_y / (c_x + c_y)`.
    pub fn outer_probability(&self) -> T {
        logistic(self.log_cy - self.log_cx)
    }
}

/// Runs the two-coin factory once.
///
/// Returns `true` ("accept `y`") with probability `c_y p_y / (c_x p_x + c_y p_y)`.
/// `max_loops = None` loops without bound.
pub fn two_coin<T, X, Y>(
    inputs: &TwoCoinInputs<T, X, Y>,
    rng: &mut RngStream,
    max_loops: Option<u64>,
) -> Result<(bool, LoopStats)>
where
    T: Real,
    X: CoinOracle,
    Y: CoinOracle,
{
    let outer = inputs.outer_probability();
    let mut stats = LoopStats::default();
    loop {
        if let Some(limit) = max_loops {
            if stats.loops >= limit {
                return Err(Error::FactoryTimeout {
                    limit,
                    stats,
                    step: None,
                });
            }
        }
        stats.loops += 1;
        let heads = rng.coin(outer);
        stats.inner_flips += 1;
        if heads {
            if inputs.coin_y.flip(rng)? {
                stats.outcome = true;
                return Ok((true, stats));
            }
        } else if inputs.coin_x.flip(rng)? {
            stats.outcome = false;
            return Ok((false, stats));
        }
    }
}

/// Mean number of two-coin loops, `(c_x + c_y) / (c_x p_x + c_y p_y)`.
pub fn expected_loops<T: Real>(cx: T, cy: T, px: T, py: T) -> Result<T> {
    let denom = cx * px + cy * py;
    if !(cx > T::zero() && cy > T::zero()) || !(denom > T::zero()) {
        return Err(Error::Domain(format!(
            "expected_loops needs positive weights and c_x p_x + c_y p_y > 0 (got {denom})"
        )));
    }
    Ok((cx + cy) / denom)
}

/// Coin with success probability `r(x) / b` where `r(x) = ∫ q̃(s|x) ds`.
///
/// Each flip draws `M ~ F` and returns `Bern(q̃(M|x) / (f(M) b))`.
pub struct ImportanceCoin<T, Q, S, F> {
    log_qtilde: Q,
    log_bound: T,
    envelope_sampler: S,
    envelope_log_density: F,
    _marker: PhantomData<fn() -> T>,
}

/// Builds the importance-sampling normalizer coin.
///
/// The caller promises `q̃(m|x) <= f(m) b` on the support of `F`; a violation
/// surfaces as [`Error::BoundViolation`] during a flip.
pub fn make_normalizer_coin<T, Q, S, F>(
    log_qtilde: Q,
    bound: T,
    envelope_sampler: S,
    envelope_log_density: F,
) -> Result<ImportanceCoin<T, Q, S, F>>
where
    T: Real,
    Q: Fn(&[T]) -> T,
    S: Fn(&mut RngStream) -> Vec<T>,
    F: Fn(&[T]) -> T,
{
    if !(bound > T::zero()) || !bound.is_finite() {
        return Err(Error::Domain(format!("normalizer bound must be positive, got {bound}")));
    }
    Ok(ImportanceCoin {
        log_qtilde,
        log_bound: bound.ln(),
        envelope_sampler,
        envelope_log_density,
        _marker: PhantomData,
    })
}

impl<T, Q, S, F> CoinOracle for ImportanceCoin<T, Q, S, F>
where
    T: Real,
    Q: Fn(&[T]) -> T,
    S: Fn(&mut RngStream) -> Vec<T>,
    F: Fn(&[T]) -> T,
{
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        let m = (self.envelope_sampler)(rng);
        let log_p = (self.log_qtilde)(&m) - (self.envelope_log_density)(&m) - self.log_bound;
        let p = log_p.exp();
        if p.is_nan() || p > T::one() + T::of(BOUND_TOLERANCE) {
            return Err(Error::BoundViolation {
                at: m.iter().map(|v| v.to_f64_lossy()).collect(),
                probability: p.to_f64_lossy(),
            });
        }
        Ok(rng.coin(p.min(T::one())))
    }
}

/// Streaming mean/max of loop counts over many factory calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoopAccumulator {
    pub calls: u64,
    pub total_loops: u64,
    pub max_loops: u64,
}

impl LoopAccumulator {
    pub fn record(&mut self, loops: u64) {
        self.calls += 1;
        self.total_loops += loops;
        self.max_loops = self.max_loops.max(loops);
    }

    pub fn merge(&mut self, other: &LoopAccumulator) {
        self.calls += other.calls;
        self.total_loops += other.total_loops;
        self.max_loops = self.max_loops.max(other.max_loops);
    }

    /// Mean loops per call; `None` before the first call.
    pub fn mean(&self) -> Option<f64> {
        (self.calls > 0).then(|| self.total_loops as f64 / self.calls as f64)
    }
}

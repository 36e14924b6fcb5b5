//! Proposal families: tractable random walks, and the intractable truncated
//! Gaussian, orthant-truncated Gaussian, and repelling-attracting (down-up)
//! proposals, each with its normalizer bound and normalizer coin.

use crate::bernoulli_factory::{CoinOracle, DEFAULT_MAX_LOOPS};
use crate::distributions::{draw_gaussian_into, GaussianParams, RngStream};
use crate::error::{Error, Result};
use crate::kernels::TargetDensity;
use crate::linalg::{Cholesky, Matrix};
use crate::real::{log_add_exp, Real};

/// Rejection attempts allowed before a truncated sampler gives up.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 100_000;

/// A proposal whose normalized density `q(y|x)` can be evaluated.
pub trait TractableProposal<T: Real> {
    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>>;
    /// Normalized `log q(to | from)`.
    fn log_density(&self, to: &[T], from: &[T]) -> T;
    fn is_symmetric(&self) -> bool;
}

/// A proposal `q(y|x) = q̃(y|x) / r(x)` with `r` unknown but bounded by `b_x`.
pub trait IntractableProposal<T: Real> {
    type Coin<'a>: CoinOracle
    where
        Self: 'a;

    /// Draws `y ~ Q(·|x)`; always lands in the proposal support.
    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>>;

    /// Like [`sample`](Self::sample), also reporting inner rejection loops
    /// `[down, up]` for proposals that have them.
    fn sample_traced(&self, x: &[T], rng: &mut RngStream) -> Result<(Vec<T>, Option<[u64; 2]>)> {
        self.sample(x, rng).map(|y| (y, None))
    }

    /// `log q̃(to | from)`, determined up to an additive term symmetric in
    /// `(to, from)`; `-inf` outside the support.
    fn log_qtilde(&self, to: &[T], from: &[T]) -> T;

    /// `log b_x` with `r(x) <= b_x`.
    fn log_bound(&self, x: &[T]) -> T;

    /// Coin with success probability `r(x) / b_x`.
    fn normalizer_coin<'a>(&'a self, x: &'a [T]) -> Self::Coin<'a>;
}

impl<T: Real, Q: IntractableProposal<T> + ?Sized> IntractableProposal<T> for &Q {
    type Coin<'a>
        = Q::Coin<'a>
    where
        Self: 'a;

    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        (**self).sample(x, rng)
    }

    fn sample_traced(&self, x: &[T], rng: &mut RngStream) -> Result<(Vec<T>, Option<[u64; 2]>)> {
        (**self).sample_traced(x, rng)
    }

    fn log_qtilde(&self, to: &[T], from: &[T]) -> T {
        (**self).log_qtilde(to, from)
    }

    fn log_bound(&self, x: &[T]) -> T {
        (**self).log_bound(x)
    }

    fn normalizer_coin<'a>(&'a self, x: &'a [T]) -> Self::Coin<'a> {
        (**self).normalizer_coin(x)
    }
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("empty interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn positive() -> Self {
        Self {
            lo: T::zero(),
            hi: T::infinity(),
        }
    }

    #[inline]
    pub fn contains(&self, v: T) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn is_real_line(&self) -> bool {
        self.lo == T::neg_infinity() && self.hi == T::infinity()
    }
}

fn gaussian_log_norm<T: Real>(chol: &Cholesky<T>) -> T {
    let half = T::of(0.5);
    -half * (T::of(chol.dim() as f64) * T::TAU().ln() + chol.log_det())
}

fn gaussian_log_density<T: Real>(chol: &Cholesky<T>, log_norm: T, to: &[T], from: &[T]) -> T {
    let diff: Vec<T> = to.iter().zip(from).map(|(&a, &b)| a - b).collect();
    log_norm - T::of(0.5) * chol.inv_quad_form(&diff)
}

/// Untruncated Gaussian random walk `N(x + drift, Σ)`.
#[derive(Debug, Clone)]
pub struct GaussianWalk<T> {
    chol: Cholesky<T>,
    drift: Option<Vec<T>>,
    log_norm: T,
}

impl<T: Real> GaussianWalk<T> {
    pub fn new(covariance: Matrix<T>) -> Result<Self> {
        let chol = Cholesky::factor(&covariance)?;
        Ok(Self {
            log_norm: gaussian_log_norm(&chol),
            chol,
            drift: None,
        })
    }

    pub fn isotropic(dim: usize, variance: T) -> Result<Self> {
        if !(variance > T::zero()) {
            return Err(Error::Domain(format!("variance must be positive, got {variance}")));
        }
        Self::new(Matrix::identity(dim).scaled(variance))
    }

    /// Mean-shifted walk `N(x + drift, Σ)`; no longer symmetric.
    pub fn with_drift(mut self, drift: Vec<T>) -> Result<Self> {
        if drift.len() != self.chol.dim() {
            return Err(Error::Domain("drift dimension mismatch".into()));
        }
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    fn center(&self, x: &[T]) -> Vec<T> {
        match &self.drift {
            Some(d) => x.iter().zip(d).map(|(&a, &b)| a + b).collect(),
            None => x.to_vec(),
        }
    }
}

impl<T: Real> TractableProposal<T> for GaussianWalk<T> {
    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); x.len()];
        draw_gaussian_into(rng, &self.chol, &self.center(x), &mut y);
        Ok(y)
    }

    fn log_density(&self, to: &[T], from: &[T]) -> T {
        gaussian_log_density(&self.chol, self.log_norm, to, &self.center(from))
    }

    fn is_symmetric(&self) -> bool {
        self.drift.is_none()
    }
}

/// `N(x, h)` truncated to an interval `A`.
#[derive(Debug, Clone)]
pub struct TruncGauss1d<T> {
    support: Interval<T>,
    h: T,
    sd: T,
    max_attempts: u64,
}

/// Builds the truncated Gaussian proposal with variance `h` on `support`.
pub fn trunc_gauss_1d<T: Real>(support: Interval<T>, h: T) -> Result<TruncGauss1d<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Domain(format!("proposal variance must be positive, got {h}")));
    }
    if !(support.lo < support.hi) {
        return Err(Error::Domain("empty truncation set".into()));
    }
    Ok(TruncGauss1d {
        support,
        h,
        sd: h.sqrt(),
        max_attempts: DEFAULT_MAX_ATTEMPTS,
    })
}

impl<T: Real> TruncGauss1d<T> {
    pub fn with_max_attempts(mut self, attempts: u64) -> Self {
        self.max_attempts = attempts;
        self
    }

    pub fn variance(&self) -> T {
        self.h
    }

    pub fn support(&self) -> Interval<T> {
        self.support
    }
}

/// Flips `1(M ∈ A)` for `M ~ N(center, sd²)`.
#[derive(Debug, Clone, Copy)]
pub struct IntervalCoin<T> {
    center: T,
    sd: T,
    support: Interval<T>,
}

impl<T: Real> CoinOracle for IntervalCoin<T> {
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        if self.support.is_real_line() {
            return Ok(true);
        }
        let m = self.center + self.sd * rng.standard_normal::<T>();
        Ok(self.support.contains(m))
    }
}

impl<T: Real> IntractableProposal<T> for TruncGauss1d<T> {
    type Coin<'a> = IntervalCoin<T>;

    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        for _ in 0..self.max_attempts {
            let y = x[0] + self.sd * rng.standard_normal::<T>();
            if self.support.contains(y) {
                return Ok(vec![y]);
            }
        }
        Err(Error::ProposalSampling {
            attempts: self.max_attempts,
            detail: format!(
                "truncation set ({}, {}) has negligible mass under N({}, {})",
                self.support.lo, self.support.hi, x[0], self.h
            ),
        })
    }

    fn log_qtilde(&self, to: &[T], from: &[T]) -> T {
        if !self.support.contains(to[0]) {
            return T::neg_infinity();
        }
        let d = to[0] - from[0];
        -d * d / (T::of(2.0) * self.h) - T::of(0.5) * (T::TAU() * self.h).ln()
    }

    fn log_bound(&self, _x: &[T]) -> T {
        T::zero()
    }

    fn normalizer_coin<'a>(&'a self, x: &'a [T]) -> IntervalCoin<T> {
        IntervalCoin {
            center: x[0],
            sd: self.sd,
            support: self.support,
        }
    }
}

/// `N(center, sd²)` mass of `support`, from `erfc` in double precision.
pub fn interval_mass(support: Interval<f64>, center: f64, sd: f64) -> f64 {
    let k = sd * std::f64::consts::SQRT_2;
    let a = (support.lo - center) / k;
    let b = (support.hi - center) / k;
    if a >= 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        1.0 - 0.5 * libm::erfc(-a) - 0.5 * libm::erfc(b)
    }
}

impl<T: Real> TruncGauss1d<T> {
    /// The same proposal with `r(x)` evaluated through the Gaussian CDF,
    /// for the Metropolis-Hastings and Barker baselines. The two-coin path
    /// never needs it.
    pub fn with_evaluated_normalizer(self) -> EvaluatedTruncGauss1d<T> {
        EvaluatedTruncGauss1d(self)
    }

    pub fn log_normalizer(&self, x: T) -> T {
        let support = Interval {
            lo: self.support.lo.to_f64_lossy(),
            hi: self.support.hi.to_f64_lossy(),
        };
        T::of(interval_mass(support, x.to_f64_lossy(), self.sd.to_f64_lossy()).ln())
    }
}

#[derive(Debug, Clone)]
pub struct EvaluatedTruncGauss1d<T>(pub TruncGauss1d<T>);

impl<T: Real> TractableProposal<T> for EvaluatedTruncGauss1d<T> {
    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        IntractableProposal::sample(&self.0, x, rng)
    }

    fn log_density(&self, to: &[T], from: &[T]) -> T {
        self.0.log_qtilde(to, from) - self.0.log_normalizer(from[0])
    }

    fn is_symmetric(&self) -> bool {
        self.0.support.is_real_line()
    }
}

/// `N(x, Σ)` truncated to the open positive orthant.
#[derive(Debug, Clone)]
pub struct TruncGaussOrthant<T> {
    chol: Cholesky<T>,
    log_norm: T,
    max_attempts: u64,
}

pub fn trunc_gauss_orthant<T: Real>(sigma: &Matrix<T>) -> Result<TruncGaussOrthant<T>> {
    let params = GaussianParams::new(vec![T::zero(); sigma.dim()], sigma.clone())?;
    Ok(TruncGaussOrthant::from_cholesky(params.cholesky().clone()))
}

impl<T: Real> TruncGaussOrthant<T> {
    pub fn from_cholesky(chol: Cholesky<T>) -> Self {
        Self {
            log_norm: gaussian_log_norm(&chol),
            chol,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn with_max_attempts(mut self, attempts: u64) -> Self {
        self.max_attempts = attempts;
        self
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    /// Untruncated draw `N(x, Σ)`.
    pub fn draw_untruncated(&self, x: &[T], rng: &mut RngStream) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        draw_gaussian_into(rng, &self.chol, x, &mut y);
        y
    }
}

pub fn in_orthant<T: Real>(v: &[T]) -> bool {
    v.iter().all(|&c| c > T::zero())
}

/// Flips `1(M ∈ C₊)` for `M ~ N(center, Σ)`, stopping at the first
/// nonpositive coordinate.
#[derive(Debug, Clone, Copy)]
pub struct OrthantCoin<'a, T> {
    center: &'a [T],
    chol: &'a Cholesky<T>,
}

impl<T: Real> CoinOracle for OrthantCoin<'_, T> {
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        let d = self.chol.dim();
        let mut z = Vec::with_capacity(d);
        for i in 0..d {
            z.push(rng.standard_normal::<T>());
            let mut m = self.center[i];
            for (k, &zk) in z.iter().enumerate() {
                m = m + self.chol.l(i, k) * zk;
            }
            if !(m > T::zero()) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl<T: Real> IntractableProposal<T> for TruncGaussOrthant<T> {
    type Coin<'a> = OrthantCoin<'a, T>;

    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); x.len()];
        for attempt in 0..self.max_attempts {
            draw_gaussian_into(rng, &self.chol, x, &mut y);
            if in_orthant(&y) {
                return Ok(y);
            }
            if attempt + 1 == self.max_attempts {
                break;
            }
        }
        Err(Error::ProposalSampling {
            attempts: self.max_attempts,
            detail: format!(
                "orthant mass under N(x, Σ) is below {:.1e}; reduce the proposal scale or dimension",
                1.0 / self.max_attempts as f64
            ),
        })
    }

    fn log_qtilde(&self, to: &[T], from: &[T]) -> T {
        if !in_orthant(to) {
            return T::neg_infinity();
        }
        gaussian_log_density(&self.chol, self.log_norm, to, from)
    }

    fn log_bound(&self, _x: &[T]) -> T {
        T::zero()
    }

    fn normalizer_coin<'a>(&'a self, x: &'a [T]) -> OrthantCoin<'a, T> {
        OrthantCoin {
            center: x,
            chol: &self.chol,
        }
    }
}

/// The repelling-attracting down-up proposal built on an inner walk `s`.
///
/// A draw forces a move downhill (`x'` accepted with probability
/// `min{1, (π̃(x)+ε)/(π̃(x')+ε)}`) and then uphill (`y` accepted with
/// probability `min{1, (π̃(y)+ε)/(π̃(x')+ε)}`), repeating each until success.
/// Its normalizer is `r(x) = A^D(x) <= 1`, and after cancellation the
/// remaining `q̃` factor is symmetric, so [`log_qtilde`](IntractableProposal::log_qtilde)
/// is identically zero. That cancellation needs a symmetric `s`; asymmetric
/// walks are refused unless [`allow_asymmetric`](Self::allow_asymmetric) is
/// set, which is experimental and not known to be exact.
#[derive(Debug, Clone)]
pub struct RamProposal<'a, T, P, S> {
    target: &'a P,
    inner: S,
    log_epsilon: T,
    max_loops: u64,
}

/// One down-up draw with its inner loop counts.
#[derive(Debug, Clone, PartialEq)]
pub struct RamDraw<T> {
    pub y: Vec<T>,
    pub log_pi_y: T,
    pub down_loops: u64,
    pub up_loops: u64,
}

impl<'a, T, P, S> RamProposal<'a, T, P, S>
where
    T: Real,
    P: TargetDensity<T>,
    S: TractableProposal<T>,
{
    pub fn new(target: &'a P, inner: S, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("RAM epsilon must be positive, got {epsilon}")));
        }
        if !inner.is_symmetric() {
            return Err(Error::Incompatible(
                "RAM requires a symmetric inner proposal (see allow_asymmetric)".into(),
            ));
        }
        Ok(Self {
            target,
            inner,
            log_epsilon: epsilon.ln(),
            max_loops: DEFAULT_MAX_LOOPS,
        })
    }

    /// Experimental: accepts an asymmetric inner walk.
    pub fn allow_asymmetric(target: &'a P, inner: S, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::Domain(format!("RAM epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            target,
            inner,
            log_epsilon: epsilon.ln(),
            max_loops: DEFAULT_MAX_LOOPS,
        })
    }

    /// `ε = fraction · max_i π̃(x_i)` over the supplied probe points.
    pub fn relative_epsilon(target: &P, probes: &[Vec<T>], fraction: T) -> T {
        let max_log = probes
            .iter()
            .map(|p| target.log_density(p))
            .fold(T::neg_infinity(), T::max);
        (fraction.ln() + max_log).exp()
    }

    pub fn with_max_loops(mut self, max_loops: u64) -> Self {
        self.max_loops = max_loops;
        self
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn target(&self) -> &'a P {
        self.target
    }

    pub fn log_epsilon(&self) -> T {
        self.log_epsilon
    }

    /// `log(π̃(x) + ε)` from `log π̃(x)`.
    #[inline]
    pub fn log_lifted(&self, log_pi: T) -> T {
        log_add_exp(log_pi, self.log_epsilon)
    }

    /// Repeats `x' ~ s(·|from)` until accepted with probability
    /// `min{1, exp(log_num - log(π̃(x')+ε))}` (downhill filter) or
    /// `min{1, exp(log(π̃(x')+ε) - log_ref)}` (uphill filter).
    fn filtered_draw(
        &self,
        from: &[T],
        log_ref: T,
        uphill: bool,
        rng: &mut RngStream,
    ) -> Result<(Vec<T>, T, u64)> {
        for loops in 1..=self.max_loops {
            let cand = self.inner.sample(from, rng)?;
            let lp = self.target.log_density(&cand);
            let lc = self.log_lifted(lp);
            let log_acc = if uphill { lc - log_ref } else { log_ref - lc };
            let accept = log_acc >= T::zero() || rng.uniform::<T>().ln() < log_acc;
            if accept {
                return Ok((cand, lp, loops));
            }
        }
        Err(Error::ProposalSampling {
            attempts: self.max_loops,
            detail: format!(
                "RAM {} filter did not accept within the loop cap",
                if uphill { "upward" } else { "downward" }
            ),
        })
    }

    /// Forced-downward draw from `x` given `log π̃(x)`; returns `(x', log π̃(x'), loops)`.
    pub fn forced_down(&self, x: &[T], log_pi_x: T, rng: &mut RngStream) -> Result<(Vec<T>, T, u64)> {
        self.filtered_draw(x, self.log_lifted(log_pi_x), false, rng)
    }

    /// Forced-upward draw from `x'` given `log π̃(x')`.
    pub fn forced_up(&self, xp: &[T], log_pi_xp: T, rng: &mut RngStream) -> Result<(Vec<T>, T, u64)> {
        self.filtered_draw(xp, self.log_lifted(log_pi_xp), true, rng)
    }

    /// Draws `y ~ q^DU(·|x)`.
    pub fn ram_downup_sample(&self, x: &[T], rng: &mut RngStream) -> Result<RamDraw<T>> {
        let lx = self.target.log_density(x);
        if lx == T::neg_infinity() {
            return Err(Error::invalid_state("RAM proposal called outside the target support"));
        }
        let (xp, lxp, down_loops) = self.forced_down(x, lx, rng)?;
        let (y, log_pi_y, up_loops) = self.forced_up(&xp, lxp, rng)?;
        Ok(RamDraw {
            y,
            log_pi_y,
            down_loops,
            up_loops,
        })
    }

    /// Coin with success probability `A^D(x)`: draw `M ~ s(·|x)` and flip
    /// `Bern(min{1, (π̃(x)+ε)/(π̃(M)+ε)})`.
    pub fn ram_normalizer_coin<'b>(&'b self, x: &'b [T]) -> DownhillCoin<'b, 'a, T, P, S> {
        DownhillCoin {
            prop: self,
            x,
            log_lifted_x: self.log_lifted(self.target.log_density(x)),
        }
    }
}

pub struct DownhillCoin<'b, 'a, T, P, S> {
    prop: &'b RamProposal<'a, T, P, S>,
    x: &'b [T],
    log_lifted_x: T,
}

impl<T, P, S> CoinOracle for DownhillCoin<'_, '_, T, P, S>
where
    T: Real,
    P: TargetDensity<T>,
    S: TractableProposal<T>,
{
    fn flip(&self, rng: &mut RngStream) -> Result<bool> {
        let m = self.prop.inner.sample(self.x, rng)?;
        let lm = self.prop.log_lifted(self.prop.target.log_density(&m));
        let log_acc = self.log_lifted_x - lm;
        Ok(log_acc >= T::zero() || rng.uniform::<T>().ln() < log_acc)
    }
}

impl<'a, T, P, S> IntractableProposal<T> for RamProposal<'a, T, P, S>
where
    T: Real,
    P: TargetDensity<T>,
    S: TractableProposal<T>,
{
    type Coin<'b>
        = DownhillCoin<'b, 'a, T, P, S>
    where
        Self: 'b;

    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        self.ram_downup_sample(x, rng).map(|d| d.y)
    }

    fn sample_traced(&self, x: &[T], rng: &mut RngStream) -> Result<(Vec<T>, Option<[u64; 2]>)> {
        self.ram_downup_sample(x, rng)
            .map(|d| (d.y, Some([d.down_loops, d.up_loops])))
    }

    fn log_qtilde(&self, _to: &[T], _from: &[T]) -> T {
        T::zero()
    }

    fn log_bound(&self, _x: &[T]) -> T {
        T::zero()
    }

    fn normalizer_coin<'b>(&'b self, x: &'b [T]) -> Self::Coin<'b> {
        self.ram_normalizer_coin(x)
    }
}

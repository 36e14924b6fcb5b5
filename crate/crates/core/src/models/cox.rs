//! Log-Gaussian-free Cox process: the intensity on `S = [0, L]` is a
//! piecewise-linear interpolant `Λ(x) = Σ_j φ_j(x) ξ_j` of knot values
//! `ξ ∈ C₊`, with a squared-exponential Gaussian prior truncated to `C₊`.

use std::io::{BufRead, Write};

use rand_distr::{Distribution, Poisson};

use crate::distributions::{draw_gaussian_into, RngStream};
use crate::error::{Error, Result};
use crate::kernels::{mh_acceptance, Kernel, KernelKind, StepInfo, TargetDensity};
use crate::linalg::{Cholesky, Matrix};
use crate::proposals::{in_orthant, IntractableProposal, TruncGaussOrthant};
use crate::real::Real;

pub const DOMAIN_LENGTH: f64 = 50.0;
pub const DEFAULT_SIGMA2: f64 = 1.0;
pub const DEFAULT_LENGTHSCALE: f64 = 5.0;
pub const DEFAULT_MC_SAMPLES: usize = 200;
/// Diagonal jitter on the prior covariance, relative to `σ²`.
pub const JITTER: f64 = 1e-8;

/// `λ(x) = 2 exp(-x/15) + exp(-((x-25)/10)²)`.
pub fn reference_intensity<T: Real>(x: T) -> T {
    let two = T::of(2.0);
    let z = (x - T::of(25.0)) / T::of(10.0);
    two * (-x / T::of(15.0)).exp() + (-z * z).exp()
}

/// Upper bound of [`reference_intensity`] on `[0, 50]` (its maximum is `λ(0) ≈ 2.0019`).
pub const REFERENCE_INTENSITY_BOUND: f64 = 2.1;

#[derive(Debug, Clone)]
pub struct CoxModel<T> {
    domain_length: T,
    knots: Vec<T>,
    delta: T,
    c_weights: Vec<T>,
    gamma: Matrix<T>,
    gamma_chol: Cholesky<T>,
    sigma2: T,
    lengthscale: T,
    observations: Vec<Vec<T>>,
    /// Per event: left knot index and interpolation weight of the right knot.
    events: Vec<(usize, T)>,
}

impl<T: Real> CoxModel<T> {
    /// `m >= 2` equispaced knots on `[0, L]`, spacing `Δ = L / (m - 1)`.
    pub fn new(m: usize, sigma2: T, lengthscale: T, observations: Vec<Vec<T>>) -> Result<Self> {
        Self::with_domain(T::of(DOMAIN_LENGTH), m, sigma2, lengthscale, observations)
    }

    pub fn with_domain(
        domain_length: T,
        m: usize,
        sigma2: T,
        lengthscale: T,
        observations: Vec<Vec<T>>,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("need at least two knots, got {m}")));
        }
        if !(sigma2 > T::zero() && lengthscale > T::zero() && domain_length > T::zero()) {
            return Err(Error::Domain("σ², l and |S| must be positive".into()));
        }
        if let Some(bad) = observations
            .iter()
            .flatten()
            .find(|&&x| !(x >= T::zero() && x <= domain_length))
        {
            return Err(Error::Domain(format!("event location {bad} outside [0, {domain_length}]")));
        }
        let delta = domain_length / T::of((m - 1) as f64);
        let knots: Vec<T> = (0..m).map(|j| T::of(j as f64) * delta).collect();
        let c_weights: Vec<T> = (0..m)
            .map(|j| if j == 0 || j == m - 1 { delta / T::of(2.0) } else { delta })
            .collect();
        let gamma = squared_exponential(&knots, sigma2, lengthscale);
        let mut jittered = gamma.clone();
        jittered.add_diagonal(T::of(JITTER) * sigma2);
        let gamma_chol = Cholesky::factor(&jittered)?;
        let events = observations
            .iter()
            .flatten()
            .map(|&x| {
                let u = x / delta;
                let j = u.floor().to_usize().unwrap_or(0).min(m - 2);
                (j, u - T::of(j as f64))
            })
            .collect();
        Ok(Self {
            domain_length,
            knots,
            delta,
            c_weights,
            gamma,
            gamma_chol,
            sigma2,
            lengthscale,
            observations,
            events,
        })
    }

    pub fn m(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn c_weights(&self) -> &[T] {
        &self.c_weights
    }

    pub fn domain_length(&self) -> T {
        self.domain_length
    }

    /// `Γ` without jitter.
    pub fn gamma(&self) -> &Matrix<T> {
        &self.gamma
    }

    /// Cholesky factor of `Γ + jitter·σ² I`.
    pub fn gamma_cholesky(&self) -> &Cholesky<T> {
        &self.gamma_chol
    }

    pub fn hyperparameters(&self) -> (T, T) {
        (self.sigma2, self.lengthscale)
    }

    pub fn observations(&self) -> &[Vec<T>] {
        &self.observations
    }

    pub fn replicates(&self) -> usize {
        self.observations.len()
    }

    /// Hat function `φ_j(x) = max(0, 1 - |x - t_j| / Δ)`.
    pub fn cox_basis(&self, x: T, j: usize) -> T {
        let u = ((x - self.knots[j]) / self.delta).abs();
        if u <= T::one() {
            T::one() - u
        } else {
            T::zero()
        }
    }

    /// `Λ_m(x) = Σ_j φ_j(x) ξ_j`.
    pub fn intensity(&self, x: T, xi: &[T]) -> T {
        let u = x / self.delta;
        let j = u.floor().to_usize().unwrap_or(0).min(self.m() - 2);
        let w = u - T::of(j as f64);
        (T::one() - w) * xi[j] + w * xi[j + 1]
    }

    /// `Σ_ν [-Σ_j c_j ξ_j + Σ_i log Λ(x_iν)]`; no orthant check.
    pub fn log_likelihood(&self, xi: &[T]) -> T {
        let n0 = T::of(self.observations.len() as f64);
        let linear: T = self.c_weights.iter().zip(xi).map(|(&c, &v)| c * v).sum();
        let mut total = -n0 * linear;
        for &(j, w) in &self.events {
            let lambda = (T::one() - w) * xi[j] + w * xi[j + 1];
            if !(lambda > T::zero()) {
                return T::neg_infinity();
            }
            total = total + lambda.ln();
        }
        total
    }

    /// `-½ ξᵀ Γ⁻¹ ξ`.
    pub fn log_prior(&self, xi: &[T]) -> T {
        -T::of(0.5) * self.gamma_chol.inv_quad_form(xi)
    }

    pub fn cox_log_posterior(&self, xi: &[T]) -> T {
        if !in_orthant(xi) {
            return T::neg_infinity();
        }
        self.log_likelihood(xi) + self.log_prior(xi)
    }

    /// Per-knot intensity estimate `Σ φ_j(x) / (N₀ c_j)`, floored at a
    /// fraction of its mean so the result lies in `C₊`.
    pub fn knot_intensity_estimate(&self) -> Vec<T> {
        let n0 = T::of(self.observations.len().max(1) as f64);
        let mut est = vec![T::zero(); self.m()];
        for &(j, w) in &self.events {
            est[j] = est[j] + T::one() - w;
            est[j + 1] = est[j + 1] + w;
        }
        for (e, &c) in est.iter_mut().zip(&self.c_weights) {
            *e = *e / (n0 * c);
        }
        let mean = est.iter().copied().sum::<T>() / T::of(self.m() as f64);
        let floor = (mean * T::of(0.1)).max(T::of(1e-3));
        est.into_iter().map(|v| v.max(floor)).collect()
    }

    /// Proposal `N(ξ, ηΓ)` truncated to `C₊`.
    pub fn proposal(&self, eta: T) -> Result<TruncGaussOrthant<T>> {
        if !(eta > T::zero()) {
            return Err(Error::Domain(format!("proposal scale η must be positive, got {eta}")));
        }
        let mut sigma = self.gamma.scaled(eta);
        sigma.add_diagonal(T::of(JITTER) * self.sigma2 * eta);
        Ok(TruncGaussOrthant::from_cholesky(Cholesky::factor(&sigma)?))
    }

    /// CSV with header `replicate_id,location`; replicate ids are 1-based.
    pub fn write_observations_csv<W: Write>(observations: &[Vec<T>], mut out: W) -> std::io::Result<()> {
        writeln!(out, "replicate_id,location")?;
        for (r, events) in observations.iter().enumerate() {
            for x in events {
                writeln!(out, "{},{}", r + 1, x.to_f64_lossy())?;
            }
        }
        Ok(())
    }

    /// Reads `replicate_id,location`; `replicates` fixes N₀ so empty patterns survive.
    pub fn read_observations_csv<R: BufRead>(input: R, replicates: usize) -> Result<Vec<Vec<T>>> {
        let mut obs = vec![Vec::new(); replicates];
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Domain(e.to_string()))?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Domain(format!("point-pattern CSV line {}: malformed row", n + 1));
            let (id, loc) = line.split_once(',').ok_or_else(bad)?;
            let id: usize = id.trim().parse().map_err(|_| bad())?;
            let loc: f64 = loc.trim().parse().map_err(|_| bad())?;
            if id == 0 || id > replicates {
                return Err(Error::Domain(format!("replicate id {id} outside 1..={replicates}")));
            }
            obs[id - 1].push(T::of(loc));
        }
        Ok(obs)
    }
}

fn squared_exponential<T: Real>(knots: &[T], sigma2: T, lengthscale: T) -> Matrix<T> {
    let two_l2 = T::of(2.0) * lengthscale * lengthscale;
    Matrix::from_fn(knots.len(), |i, j| {
        let d = knots[i] - knots[j];
        sigma2 * (-d * d / two_l2).exp()
    })
}

impl<T: Real> TargetDensity<T> for CoxModel<T> {
    fn dim(&self) -> usize {
        self.m()
    }

    fn log_density(&self, xi: &[T]) -> T {
        self.cox_log_posterior(xi)
    }

    fn in_support(&self, xi: &[T]) -> bool {
        in_orthant(xi)
    }
}

/// `N₀` independent realisations of an inhomogeneous Poisson process on
/// `[0, L]` by thinning a homogeneous process of rate `bound`.
pub fn simulate_cox_data<T: Real>(
    domain_length: T,
    intensity: impl Fn(T) -> T,
    bound: T,
    n0: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<T>>> {
    if !(bound >= T::zero()) || !bound.is_finite() {
        return Err(Error::Domain(format!("intensity bound must be finite and nonnegative, got {bound}")));
    }
    let mean = (bound * domain_length).to_f64_lossy();
    let poisson = if mean > 0.0 {
        Some(Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(n0);
    for _ in 0..n0 {
        let n = poisson.as_ref().map_or(0, |p| p.sample(rng) as u64);
        let mut events = Vec::new();
        for _ in 0..n {
            let x = domain_length * rng.uniform::<T>();
            let lambda = intensity(x);
            if lambda < T::zero() || lambda > bound * T::of(1.0 + 1e-12) {
                return Err(Error::Domain(format!("intensity {lambda} at {x} outside [0, {bound}]")));
            }
            if rng.uniform::<T>() * bound < lambda {
                events.push(x);
            }
        }
        out.push(events);
    }
    Ok(out)
}

/// Plug-in estimate of an orthant normalizer `r(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineNormalizerEstimate<T> {
    pub point_estimate: T,
    pub mc_samples: usize,
}

/// Estimates `r(center) = P(N(center, Σ) ∈ C₊)`.
pub trait OrthantMassEstimator<T: Real> {
    fn estimate(&mut self, center: &[T], rng: &mut RngStream) -> Result<BaselineNormalizerEstimate<T>>;
    /// Same center always gives the same estimate.
    fn is_deterministic(&self) -> bool;
}

/// Fresh plain Monte Carlo every call: the fraction of `mc_samples` draws
/// from the untruncated Gaussian that land in `C₊`.
#[derive(Debug, Clone)]
pub struct FreshMonteCarlo<T> {
    chol: Cholesky<T>,
    mc_samples: usize,
    redraws: u32,
}

impl<T: Real> FreshMonteCarlo<T> {
    pub fn new(chol: Cholesky<T>, mc_samples: usize) -> Result<Self> {
        if mc_samples == 0 {
            return Err(Error::Domain("mc_samples must be positive".into()));
        }
        Ok(Self {
            chol,
            mc_samples,
            redraws: 0,
        })
    }

    /// On a zero estimate, repeat with fresh draws up to `redraws` times
    /// before failing. This conditions on `r̂ > 0` and adds to the bias.
    pub fn with_redraws(mut self, redraws: u32) -> Self {
        self.redraws = redraws;
        self
    }
}

pub fn estimate_normalizer<T: Real>(
    center: &[T],
    chol: &Cholesky<T>,
    mc_samples: usize,
    rng: &mut RngStream,
) -> Result<BaselineNormalizerEstimate<T>> {
    if mc_samples == 0 {
        return Err(Error::Domain("mc_samples must be positive".into()));
    }
    let mut draw = vec![T::zero(); center.len()];
    let mut hits = 0usize;
    for _ in 0..mc_samples {
        draw_gaussian_into(rng, chol, center, &mut draw);
        hits += in_orthant(&draw) as usize;
    }
    if hits == 0 {
        return Err(Error::DegenerateEstimate { mc_samples });
    }
    Ok(BaselineNormalizerEstimate {
        point_estimate: T::of(hits as f64 / mc_samples as f64),
        mc_samples,
    })
}

impl<T: Real> OrthantMassEstimator<T> for FreshMonteCarlo<T> {
    fn estimate(&mut self, center: &[T], rng: &mut RngStream) -> Result<BaselineNormalizerEstimate<T>> {
        let mut tries = 0;
        loop {
            match estimate_normalizer(center, &self.chol, self.mc_samples, rng) {
                Err(Error::DegenerateEstimate { .. }) if tries < self.redraws => tries += 1,
                other => return other,
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Monte Carlo with one frozen set of draws `L z_i` reused for every
/// center (common random numbers); a deterministic high-accuracy estimate.
#[derive(Debug, Clone)]
pub struct FrozenMonteCarlo<T> {
    dim: usize,
    offsets: Vec<T>,
}

impl<T: Real> FrozenMonteCarlo<T> {
    pub fn new(chol: &Cholesky<T>, mc_samples: usize, rng: &mut RngStream) -> Result<Self> {
        if mc_samples == 0 {
            return Err(Error::Domain("mc_samples must be positive".into()));
        }
        let dim = chol.dim();
        let zero = vec![T::zero(); dim];
        let mut offsets = vec![T::zero(); dim * mc_samples];
        for row in offsets.chunks_mut(dim) {
            draw_gaussian_into(rng, chol, &zero, row);
        }
        Ok(Self { dim, offsets })
    }

    pub fn mc_samples(&self) -> usize {
        self.offsets.len() / self.dim
    }

    pub fn mass(&self, center: &[T]) -> Result<BaselineNormalizerEstimate<T>> {
        let hits = self
            .offsets
            .chunks(self.dim)
            .filter(|row| row.iter().zip(center).all(|(&o, &c)| c + o > T::zero()))
            .count();
        let n = self.mc_samples();
        if hits == 0 {
            return Err(Error::DegenerateEstimate { mc_samples: n });
        }
        Ok(BaselineNormalizerEstimate {
            point_estimate: T::of(hits as f64 / n as f64),
            mc_samples: n,
        })
    }
}

impl<T: Real> OrthantMassEstimator<T> for FrozenMonteCarlo<T> {
    fn estimate(&mut self, center: &[T], _rng: &mut RngStream) -> Result<BaselineNormalizerEstimate<T>> {
        self.mass(center)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// One inexact Metropolis-Hastings step for the Cox posterior with fresh
/// plug-in estimates of both `r(ξ_k)` and `r(χ)`.
pub fn inexact_mh_cox_step<T: Real>(
    model: &CoxModel<T>,
    state: &[T],
    proposal: &TruncGaussOrthant<T>,
    mc_samples: usize,
    rng: &mut RngStream,
) -> Result<(Vec<T>, bool)> {
    let mut est = FreshMonteCarlo::new(proposal.cholesky().clone(), mc_samples)?;
    let mut kernel = PluginMhKernel::new(model, proposal.clone(), &mut est, state.to_vec())?;
    let info = kernel.step(rng)?;
    Ok((kernel.state().to_vec(), info.accepted))
}

/// Metropolis-Hastings for a target on `C₊` with the orthant-truncated
/// Gaussian proposal, plugging estimated normalizers into the ratio
/// `π̃(χ) r(ξ) / (π̃(ξ) r(χ))`.
pub struct PluginMhKernel<T, P, E> {
    target: P,
    proposal: TruncGaussOrthant<T>,
    estimator: E,
    x: Vec<T>,
    log_pi_x: T,
    cached_log_r_x: Option<T>,
}

impl<T, P, E> PluginMhKernel<T, P, E>
where
    T: Real,
    P: TargetDensity<T>,
    E: OrthantMassEstimator<T>,
{
    pub fn new(target: P, proposal: TruncGaussOrthant<T>, estimator: E, init: Vec<T>) -> Result<Self> {
        let log_pi_x = target.log_density(&init);
        if log_pi_x == T::neg_infinity() || init.len() != target.dim() {
            return Err(Error::invalid_state("initial state outside the positive orthant"));
        }
        Ok(Self {
            target,
            proposal,
            estimator,
            x: init,
            log_pi_x,
            cached_log_r_x: None,
        })
    }
}

impl<T, P, E> Kernel<T> for PluginMhKernel<T, P, E>
where
    T: Real,
    P: TargetDensity<T>,
    E: OrthantMassEstimator<T>,
{
    fn kind(&self) -> KernelKind {
        KernelKind::MhPluginNormalizer
    }

    fn state(&self) -> &[T] {
        &self.x
    }

    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo> {
        let y = self.proposal.sample(&self.x, rng)?;
        let log_pi_y = self.target.log_density(&y);
        let log_r_x = match self.cached_log_r_x {
            Some(v) => v,
            None => {
                let v = self.estimator.estimate(&self.x, rng)?.point_estimate.ln();
                if self.estimator.is_deterministic() {
                    self.cached_log_r_x = Some(v);
                }
                v
            }
        };
        let log_r_y = self.estimator.estimate(&y, rng)?.point_estimate.ln();
        // q̃ is symmetric; q(y|x) = q̃ / r(x).
        let alpha = mh_acceptance(self.log_pi_x, log_pi_y, -log_r_y, -log_r_x)?;
        let accepted = rng.coin(alpha);
        if accepted {
            self.x = y;
            self.log_pi_x = log_pi_y;
            self.cached_log_r_x = self.estimator.is_deterministic().then_some(log_r_y);
        }
        Ok(StepInfo {
            accepted,
            loops: None,
        })
    }
}

impl<T: Real, E: OrthantMassEstimator<T> + ?Sized> OrthantMassEstimator<T> for &mut E {
    fn estimate(&mut self, center: &[T], rng: &mut RngStream) -> Result<BaselineNormalizerEstimate<T>> {
        (**self).estimate(center, rng)
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

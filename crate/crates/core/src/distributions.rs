//! Random streams and the elementary draws every sampler is built from.
//!
//! Every chain owns one [`RngStream`]. Streams are ChaCha8 keyed by `seed`
//! with the 64-bit ChaCha stream selector set to `stream_id`, so replicated
//! chains sharing a seed read disjoint keystreams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::real::Real;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id.
    pub fn sibling(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    #[inline]
    pub fn uniform<T: Real>(&mut self) -> T {
        T::of(self.rng.random::<f64>())
    }

    #[inline]
    pub fn standard_normal<T: Real>(&mut self) -> T {
        T::of(self.rng.sample::<f64, _>(StandardNormal))
    }

    /// `Bern(p)` for a probability already known to lie in `[0, 1]`.
    #[inline]
    pub(crate) fn coin<T: Real>(&mut self, p: T) -> bool {
        self.rng.random::<f64>() < p.to_f64_lossy()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Multivariate normal parameters with a validated Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianParams<T> {
    mean: Vec<T>,
    covariance: Matrix<T>,
    chol: Cholesky<T>,
}

impl<T: Real> GaussianParams<T> {
    pub fn new(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        if mean.is_empty() || mean.len() != covariance.dim() {
            return Err(Error::Domain(format!(
                "mean has dimension {} but covariance is {}x{}",
                mean.len(),
                covariance.dim(),
                covariance.dim()
            )));
        }
        if !covariance.is_symmetric(T::of(1e-12)) {
            return Err(Error::Domain("covariance is not symmetric".into()));
        }
        let chol = Cholesky::factor(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            chol,
        })
    }

    pub fn univariate(mean: T, variance: T) -> Result<Self> {
        if !(variance > T::zero()) {
            return Err(Error::Domain(format!("variance must be positive, got {variance}")));
        }
        Self::new(vec![mean], Matrix::from_fn(1, |_, _| variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }
}

pub fn draw_uniform<T: Real>(rng: &mut RngStream) -> T {
    rng.uniform()
}

/// Exact draw `mean + L z` with `z` iid standard normal.
pub fn draw_gaussian<T: Real>(rng: &mut RngStream, params: &GaussianParams<T>) -> Vec<T> {
    let mut out = vec![T::zero(); params.dim()];
    draw_gaussian_into(rng, params.cholesky(), params.mean(), &mut out);
    out
}

/// Writes `mean + L z` into `out`.
pub fn draw_gaussian_into<T: Real>(
    rng: &mut RngStream,
    chol: &Cholesky<T>,
    mean: &[T],
    out: &mut [T],
) {
    let d = chol.dim();
    for i in 0..d {
        out[i] = rng.standard_normal();
    }
    // L is lower triangular: fill from the bottom so z_k is still unread when row i needs it.
    for i in (0..d).rev() {
        let mut acc = T::zero();
        for k in 0..=i {
            acc = acc + chol.l(i, k) * out[k];
        }
        out[i] = mean[i] + acc;
    }
}

pub fn draw_bernoulli<T: Real>(rng: &mut RngStream, p: T) -> Result<bool> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain(format!("Bernoulli probability {p} outside [0, 1]")));
    }
    Ok(rng.coin(p))
}

/// Unnormalized Gamma(shape, rate) log density; `-inf` off `(0, inf)`.
pub fn log_gamma_density<T: Real>(x: T, alpha: T, beta: T) -> T {
    if x > T::zero() {
        (alpha - T::one()) * x.ln() - beta * x
    } else {
        T::neg_infinity()
    }
}

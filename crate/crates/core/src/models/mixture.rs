use crate::error::{Error, Result};
use crate::kernels::TargetDensity;
use crate::real::{log_add_exp, Real};

/// Finite mixture of univariate normals.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture1d<T> {
    log_weights: Vec<T>,
    means: Vec<T>,
    sds: Vec<T>,
}

impl<T: Real> GaussianMixture1d<T> {
    pub fn new(weights: Vec<T>, means: Vec<T>, sds: Vec<T>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || means.len() != sds.len() {
            return Err(Error::Domain("mixture components must have matching lengths".into()));
        }
        if weights.iter().any(|&w| !(w > T::zero())) || sds.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::Domain("mixture weights and sds must be positive".into()));
        }
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            means,
            sds,
        })
    }

    /// `0.5 N(-5, 1) + 0.5 N(5, 1)`.
    pub fn symmetric_bimodal() -> Self {
        Self::new(
            vec![T::of(0.5), T::of(0.5)],
            vec![T::of(-5.0), T::of(5.0)],
            vec![T::one(), T::one()],
        )
        .expect("valid constants")
    }

    /// Normalized mixture CDF through an error-function evaluator supplied by the caller.
    pub fn cdf_with(&self, x: T, normal_cdf: impl Fn(f64) -> f64) -> f64 {
        self.log_weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((&lw, &m), &s)| lw.exp().to_f64_lossy() * normal_cdf(((x - m) / s).to_f64_lossy()))
            .sum()
    }
}

impl<T: Real> TargetDensity<T> for GaussianMixture1d<T> {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[T]) -> T {
        let half = T::of(0.5);
        let mut acc = T::neg_infinity();
        for ((&lw, &m), &s) in self.log_weights.iter().zip(&self.means).zip(&self.sds) {
            let z = (x[0] - m) / s;
            acc = log_add_exp(acc, lw - s.ln() - half * z * z);
        }
        acc - half * T::TAU().ln()
    }
}

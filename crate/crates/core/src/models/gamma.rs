use crate::distributions::log_gamma_density;
use crate::error::{Error, Result};
use crate::kernels::TargetDensity;
use crate::real::Real;

/// `π̃(x) = x^{α-1} e^{-βx}` on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTarget<T> {
    pub alpha: T,
    pub beta: T,
}

pub fn gamma_target<T: Real>(alpha: T, beta: T) -> Result<GammaTarget<T>> {
    if !(alpha > T::zero() && beta > T::zero()) {
        return Err(Error::Domain(format!("Gamma parameters must be positive ({alpha}, {beta})")));
    }
    Ok(GammaTarget { alpha, beta })
}

impl<T: Real> GammaTarget<T> {
    /// Mode of the density when `α >= 1`.
    pub fn mode(&self) -> T {
        ((self.alpha - T::one()) / self.beta).max(T::zero())
    }
}

impl<T: Real> TargetDensity<T> for GammaTarget<T> {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[T]) -> T {
        log_gamma_density(x[0], self.alpha, self.beta)
    }

    fn in_support(&self, x: &[T]) -> bool {
        x[0] > T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_support() {
        let g = gamma_target(2.0f64, 1.0).unwrap();
        assert_eq!(g.mode(), 1.0);
        assert!((g.log_density(&[1.0]) + 1.0).abs() < 1e-15);
        assert!(!g.in_support(&[-0.5]));
        assert_eq!(g.log_density(&[-0.5]), f64::NEG_INFINITY);
        assert!(gamma_target(0.0, 1.0).is_err());
        // Mode is the stationary point: the density falls off on both sides.
        let h = 1e-4;
        assert!(g.log_density(&[1.0 - h]) < g.log_density(&[1.0]));
        assert!(g.log_density(&[1.0 + h]) < g.log_density(&[1.0]));
    }
}

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Lower bound applied to the variance `sigma^2` (normalized units).
pub const SIGMA2_FLOOR: f64 = 1e-8;

/// Parameters of a registration run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    /// Entropy regularization weight.
    pub lambda: f64,
    /// Smoothness trade-off of the displacement field.
    pub zeta: f64,
    pub kernel: KernelSpec,
    /// Fraction of source points used as Nyström landmarks; `1.0` uses the
    /// exact Gram matrix.
    pub approx_ratio: f64,
    pub max_iters: usize,
    /// Relative change of `sigma^2` below which the loop stops.
    pub tol: f64,
    /// Seeds the k-means++ landmark initialization.
    pub seed: u64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            zeta: 0.1,
            kernel: KernelSpec::default(),
            approx_ratio: 0.3,
            max_iters: 100,
            tol: 1e-5,
            seed: 0,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("zeta", self.zeta)?;
        positive("tol", self.tol)?;
        positive("gamma", self.kernel.gamma())?;
        if !(self.approx_ratio > 0.0 && self.approx_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "approx_ratio must lie in (0, 1], got {}",
                self.approx_ratio
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// True when the exact Gram matrix is used instead of a Nyström factor.
    pub fn uses_dense_gram(&self) -> bool {
        self.approx_ratio >= 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;

    #[test]
    fn defaults() {
        let c = RegistrationConfig::default();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.zeta, 0.1);
        assert_eq!(c.kernel.gamma(), 2.0);
        assert_eq!(c.kernel.family(), KernelFamily::Laplacian);
        assert_eq!(c.approx_ratio, 0.3);
        assert_eq!(c.max_iters, 100);
        assert_eq!(c.tol, 1e-5);
        assert_eq!(c.seed, 0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_non_positive() {
        let base = RegistrationConfig::default();
        for cfg in [
            RegistrationConfig { lambda: 0.0, ..base.clone() },
            RegistrationConfig { zeta: -1.0, ..base.clone() },
            RegistrationConfig { tol: 0.0, ..base.clone() },
            RegistrationConfig { approx_ratio: 0.0, ..base.clone() },
            RegistrationConfig { approx_ratio: 1.2, ..base.clone() },
            RegistrationConfig { max_iters: 0, ..base.clone() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}

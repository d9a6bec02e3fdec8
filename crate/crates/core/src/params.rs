use crate::error::{Error, Result};

/// Model coefficients of the Biot-Brinkman system.
///
/// `mu`/`lambda` are the Lame coefficients of the skeleton, `nu` the
/// kinematic viscosity of the interstitial fluid, `kappa` the permeability,
/// `c0` the storativity and `alpha` the Biot-Willis coupling coefficient.
/// `nu = 0` is the non-viscous (four-field Biot) limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    pub mu: f64,
    pub lambda: f64,
    pub nu: f64,
    pub kappa: f64,
    pub c0: f64,
    pub alpha: f64,
}

impl Default for ParameterSet {
    /// Baseline values used in the accuracy tests: all coefficients one.
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 1.0,
            nu: 1.0,
            kappa: 1.0,
            c0: 1.0,
            alpha: 1.0,
        }
    }
}

impl ParameterSet {
    pub fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("lambda", self.lambda), ("kappa", self.kappa)];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "parameter {name} must be positive and finite, got {value}"
                )));
            }
        }
        let nonnegative = [("nu", self.nu), ("c0", self.c0), ("alpha", self.alpha)];
        for (name, value) in nonnegative {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "parameter {name} must be nonnegative and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Weight of the vorticity coupling, sqrt(nu/kappa).
    pub fn curl_weight(&self) -> f64 {
        (self.nu / self.kappa).sqrt()
    }

    /// Coefficient of the fluid pressure mass term, c0 + alpha^2/lambda.
    pub fn pressure_mass_weight(&self) -> f64 {
        self.c0 + self.alpha * self.alpha / self.lambda
    }
}

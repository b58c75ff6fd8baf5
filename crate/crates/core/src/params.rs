use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Scalar parameters of one blow-up construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupParams {
    /// Rate exponent, `lambda(t) = t^(-1/2 - nu)`.
    pub nu: f64,
    /// Rotation rate, `alpha(t) = alpha0 ln t`.
    pub alpha0: f64,
    /// Size of the remote profile.
    pub delta: f64,
    /// Expansion order N.
    pub order_n: usize,
    /// Inner/self-similar overlap exponent.
    pub eps1: f64,
    /// Self-similar/remote overlap exponent.
    pub eps2: f64,
}

impl BlowupParams {
    pub fn new(nu: f64, alpha0: f64, delta: f64, order_n: usize) -> Result<Self> {
        let p = BlowupParams { nu, alpha0, delta, order_n, eps1: nu / 2.0, eps2: 0.25 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.nu > 1.0) || !self.nu.is_finite() {
            return bad("nu > 1 required");
        }
        if !self.alpha0.is_finite() {
            return bad("alpha0 must be finite");
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return bad("0 < delta <= 0.5 required");
        }
        if self.order_n < 1 {
            return bad("order N >= 1 required");
        }
        if !(self.eps1 > 0.0 && self.eps1 < self.nu) {
            return bad("0 < eps1 < nu required");
        }
        if !(self.eps2 > 0.0 && self.eps2 < 0.5) {
            return bad("0 < eps2 < 1/2 required");
        }
        Ok(())
    }

    /// `d = alpha0 - i(1/2 + nu)`.
    pub fn d(&self) -> Complex64 {
        Complex64::new(self.alpha0, -(0.5 + self.nu))
    }

    /// `T = t^(2 nu)`, the inner expansion variable.
    pub fn big_t(&self, t: f64) -> f64 {
        t.powf(2.0 * self.nu)
    }

    pub fn lambda(&self, t: f64) -> f64 {
        t.powf(-0.5 - self.nu)
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.alpha0 * t.ln()
    }

    /// Self-similar eigenvalue `mu_j = -alpha0 + i nu (2j+1)`.
    pub fn mu(&self, j: usize) -> Complex64 {
        Complex64::new(-self.alpha0, self.nu * (2 * j + 1) as f64)
    }

    /// Far-field exponent `2 i alpha0 + 2 nu (2j+1)` of layer j.
    pub fn sigma(&self, j: usize) -> Complex64 {
        Complex64::new(2.0 * self.nu * (2 * j + 1) as f64, 2.0 * self.alpha0)
    }
}

impl Default for BlowupParams {
    fn default() -> Self {
        BlowupParams { nu: 1.5, alpha0: 0.0, delta: 0.2, order_n: 1, eps1: 0.75, eps2: 0.25 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(BlowupParams::new(1.5, 0.0, 0.2, 1).is_ok());
        assert!(BlowupParams::new(0.5, 0.0, 0.2, 1).is_err());
        let mut p = BlowupParams::default();
        p.eps2 = 0.6;
        assert!(p.validate().is_err());
        p.eps2 = 0.25;
        p.delta = 0.7;
        assert!(p.validate().is_err());
    }

    #[test]
    fn derived_constants() {
        let p = BlowupParams::new(1.5, 0.3, 0.2, 2).unwrap();
        assert_eq!(p.d(), Complex64::new(0.3, -2.0));
        assert_eq!(p.mu(1), Complex64::new(-0.3, 4.5));
        assert!((p.lambda(0.25) - 0.25f64.powf(-2.0)).abs() < 1e-12);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// (n, α, β): the operator acts on ℝ^{n+1}, the kernel is |t|^{−α−n}, the
/// oscillation e^{−2πi|t|^{−β}}. Requires β > 2α > 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorParams {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
}

impl OperatorParams {
    pub fn new(n: u32, alpha: f64, beta: f64) -> Result<Self> {
        let p = OperatorParams { n, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 2.0 * self.alpha) {
            return Err(Error::InvalidParams(format!(
                "need beta > 2 alpha, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Open interval (β/(β−α), β/α) of L^p exponents.
    pub fn p_window(&self) -> (f64, f64) {
        (self.beta / (self.beta - self.alpha), self.beta / self.alpha)
    }

    /// Decay rate of m_l for l ≥ 0: α − β/2.
    pub fn positive_scale_rate(&self) -> f64 {
        self.alpha - self.beta / 2.0
    }

    /// L² → L²_s smoothing order s₀ = (β/2 − α)/(β + k₃ + 2).
    pub fn s0(&self, k3: f64) -> f64 {
        (self.beta / 2.0 - self.alpha) / (self.beta + k3 + 2.0)
    }

    /// Envelope exponent for frequencies with |ξ′| ≥ |ξ_last|.
    pub fn envelope_exponent_prime(&self) -> f64 {
        self.positive_scale_rate() / (1.0 + self.beta)
    }

    /// Envelope exponent for frequencies with |ξ′| < |ξ_last|.
    pub fn envelope_exponent_last(&self, k3: f64) -> f64 {
        self.positive_scale_rate() / (self.beta + k3 + 2.0)
    }
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams { n: 2, alpha: 0.25, beta: 1.0 }
    }
}

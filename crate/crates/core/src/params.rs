use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper end (exclusive) of the admissible typicality factor range.
pub const DELTA_TYP_MAX: f64 = 40.0 / 81.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha must be positive, got {0}")]
    Alpha(f64),
    #[error("beta must be non-negative, got {0}")]
    Beta(f64),
    #[error("network delay bound must be non-negative, got {0}")]
    DeltaNet(f64),
    #[error("typicality factor must lie in (0, 40/81), got {0}")]
    InvalidDelta(f64),
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
}

/// Rates, delays and sizes shared by the simulator, the trace analysis and
/// the closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Honest mining rate per chain.
    pub alpha: f64,
    /// Upper bound on the adversarial mining rate per chain.
    pub beta: f64,
    /// Propagation delay bound.
    pub delta_net: f64,
    /// Typicality factor used by the good and typical events.
    pub delta_typ: f64,
    /// Number of voter chains; 0 means plain bitcoin.
    pub m: usize,
    pub horizon: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.25, delta_net: 0.1, delta_typ: 0.3, m: 0, horizon: 1000.0 }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ParamError::Alpha(self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ParamError::Beta(self.beta));
        }
        if !(self.delta_net >= 0.0 && self.delta_net.is_finite()) {
            return Err(ParamError::DeltaNet(self.delta_net));
        }
        check_delta_typ(self.delta_typ)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ParamError::Horizon(self.horizon));
        }
        Ok(())
    }

    /// Propagation discount `e^{-alpha * delta_net}`.
    pub fn g(&self) -> f64 {
        (-self.alpha * self.delta_net).exp()
    }

    /// Number of chains simulated: one, or `m + 1` in Prism mode.
    pub fn chain_count(&self) -> usize {
        self.m + 1
    }

    pub fn is_prism(&self) -> bool {
        self.m > 0
    }
}

pub(crate) fn check_delta_typ(delta_typ: f64) -> Result<(), ParamError> {
    if delta_typ > 0.0 && delta_typ < DELTA_TYP_MAX {
        Ok(())
    } else {
        Err(ParamError::InvalidDelta(delta_typ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_out_of_range_values() {
        let ok = ProtocolParams::default();
        assert!(ok.validate().is_ok());
        for bad in [
            ProtocolParams { alpha: 0.0, ..ok },
            ProtocolParams { beta: -1.0, ..ok },
            ProtocolParams { delta_net: -0.1, ..ok },
            ProtocolParams { delta_typ: DELTA_TYP_MAX, ..ok },
            ProtocolParams { delta_typ: 0.0, ..ok },
            ProtocolParams { horizon: 0.0, ..ok },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}

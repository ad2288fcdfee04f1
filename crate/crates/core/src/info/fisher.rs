//! Fisher information about the load carried by the grid readings when the
//! policy adds load-independent noise, `Y_t = X_t + N_t`. The Cramér–Rao
//! bound then limits the total error variance of any unbiased load
//! estimator by the trace of the inverse Fisher matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Density of the additive noise, centered at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDensity {
    Gaussian { sigma: f64 },
    /// Double exponential with scale `b`.
    Laplace { b: f64 },
    Logistic { s: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl NoiseDensity {
    /// Fisher information of one sample about its location parameter.
    pub fn per_sample_fisher(&self) -> Result<f64> {
        let (scale, info) = match *self {
            NoiseDensity::Gaussian { sigma } => (sigma, 1.0 / (sigma * sigma)),
            NoiseDensity::Laplace { b } => (b, 1.0 / (b * b)),
            NoiseDensity::Logistic { s } => (s, 1.0 / (3.0 * s * s)),
            NoiseDensity::Uniform { .. } => {
                return Err(Error::UnsupportedDensity("uniform density has no Fisher information"))
            }
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise scale {scale} must be positive")));
        }
        Ok(info)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherReport {
    /// Diagonal of the `n × n` Fisher matrix (off-diagonal entries are 0).
    pub diagonal: Vec<f64>,
    /// `Σ 1 / FI_tt`: lower bound on the summed estimator variance.
    pub cr_trace: f64,
}

pub fn fisher_info_additive(noise: &NoiseDensity, n: usize) -> Result<FisherReport> {
    let fi = noise.per_sample_fisher()?;
    Ok(FisherReport {
        diagonal: vec![fi; n],
        cr_trace: n as f64 / fi,
    })
}

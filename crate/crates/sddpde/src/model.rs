//! Complete problem description: spectrum, nonlinearity, delay, horizon.

use crate::delay::{DelayError, DelayFunctional};
use crate::nonlinearity::ConvolutionB;
use crate::spectral::SpectrumConfig;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Delay(#[from] DelayError),
}

/// The evolution problem u̇ + Au = B(u(t - r(u_t))) with history horizon h.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSpec {
    pub spectrum: SpectrumConfig,
    pub conv: ConvolutionB,
    pub delay: DelayFunctional,
}

impl ModelSpec {
    pub fn new(
        spectrum: SpectrumConfig,
        conv: ConvolutionB,
        delay: DelayFunctional,
    ) -> Result<Self, ModelError> {
        if spectrum.n_modes > conv.grid_points {
            return Err(ModelError::Invalid(format!(
                "{} modes cannot be resolved on a {}-point physical grid",
                spectrum.n_modes, conv.grid_points
            )));
        }
        delay.ensure_solvable()?;
        Ok(Self {
            spectrum,
            conv,
            delay,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.delay.horizon()
    }

    pub fn n_modes(&self) -> usize {
        self.spectrum.n_modes
    }
}

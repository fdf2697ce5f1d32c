//! BPSK over the AWGN channel.
//!
//! Eb/N0 `gamma_b` (dB) and the per-dimension noise deviation `sigma` are
//! related through the code rate `R` by `gamma_b = 10 log10(1 / (2 sigma^2 R))`.
//! Noise samples come from the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::llr::{self, LLR_MAX};

/// Name of the noise generator, recorded alongside simulation results.
pub const NOISE_GENERATOR: &str = "chacha8-stream/ziggurat-normal";

/// Noise level of a simulation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub ebn0_db: f64,
    pub rate: f64,
    pub sigma: f64,
}

impl ChannelParams {
    pub fn new(ebn0_db: f64, rate: f64) -> Result<Self> {
        Ok(ChannelParams {
            ebn0_db,
            rate,
            sigma: ebn0_to_sigma(ebn0_db, rate)?,
        })
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

pub fn ebn0_to_sigma(ebn0_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter(format!("code rate {rate} outside (0, 1]")));
    }
    Ok((1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))).sqrt())
}

pub fn sigma_to_ebn0(sigma: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter(format!("code rate {rate} outside (0, 1]")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    Ok(10.0 * (1.0 / (2.0 * sigma * sigma * rate)).log10())
}

/// Channel outputs and the corresponding LLRs for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedBlock {
    pub y: Vec<f64>,
    pub llr: Vec<f64>,
}

impl ReceivedBlock {
    pub fn new(y: Vec<f64>, sigma: f64) -> Self {
        let llr = channel_llr(&y, sigma);
        ReceivedBlock { y, llr }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `y_j = x_j + z_j` with `z_j ~ N(0, sigma^2)` drawn from `rng`.
pub fn transmit<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    debug_assert!(sigma > 0.0);
    x.iter()
        .map(|&s| {
            let z: f64 = rng.sample(StandardNormal);
            s + sigma * z
        })
        .collect()
}

/// `2 y / sigma^2`, saturated at [`LLR_MAX`].
pub fn channel_llr(y: &[f64], sigma: f64) -> Vec<f64> {
    let scale = 2.0 / (sigma * sigma);
    y.iter().map(|&v| llr::clamp(scale * v)).collect()
}

/// Noise-free LLRs for a bipolar sequence, pinned at [`LLR_MAX`].
pub fn noiseless_llr(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&s| if s < 0.0 { -LLR_MAX } else { LLR_MAX }).collect()
}

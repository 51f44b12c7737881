//! Image-only augmentations: intensity, noise and vessel shadows.
//!
//! None of these touch boundary curves or fluid masks.

mod histogram;
mod noise;
mod svd;
mod vessels;

pub use histogram::{histogram_match, DEFAULT_BINS};
pub use noise::{add_gaussian_noise, add_speckle_noise, NoiseParams};
pub use svd::{svd_noise_transfer, svd_noise_transfer_parts, SvdTransferParams, SvdTransferParts};
pub use vessels::{draw_vessels, shade_vessels, simulate_vessels, vessel_profile, Vessel, VesselParams, FWHM_TO_SIGMA};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastParams {
    pub factor: f64,
}

impl ContrastParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.25..=4.0).contains(&self.factor) {
            return Err(Error::param("factor", format!("{} outside [0.25, 4]", self.factor)));
        }
        Ok(())
    }
}

/// Stretches intensities about the image mean: `clamp(mean + factor * (v - mean))`.
pub fn adjust_contrast(img: &Image, factor: f64) -> Result<Image> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::param("factor", format!("{factor} must be finite and > 0")));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let mean = img.mean();
    let data = img.data().iter().map(|v| mean + factor * (v - mean)).collect();
    Ok(Image::from_raw_clamped(img.height(), img.width(), data))
}

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub gaussian_sigma: f64,
    /// Photon count that maps to intensity 1.0; higher means weaker speckle.
    pub speckle_photons: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.gaussian_sigma) {
            return Err(Error::param("gaussian_sigma", format!("{} outside [0, 0.5]", self.gaussian_sigma)));
        }
        if !(1.0..=1e4).contains(&self.speckle_photons) {
            return Err(Error::param(
                "speckle_photons",
                format!("{} outside [1, 1e4]", self.speckle_photons),
            ));
        }
        Ok(())
    }
}

/// Adds i.i.d. `N(0, sigma^2)` noise and clamps to `[0, 1]`.
pub fn add_gaussian_noise(img: &Image, sigma: f64, rng: &mut SeededRng) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("sigma", e.to_string()))?;
    let data = img.data().iter().map(|v| v + normal.sample(rng)).collect();
    Ok(Image::from_raw_clamped(img.height(), img.width(), data))
}

/// Photon-count speckle: each pixel becomes `Poisson(v * photons) / photons`.
///
/// The variance is signal dependent (`v / photons`); zero pixels stay zero.
pub fn add_speckle_noise(img: &Image, photons: f64, rng: &mut SeededRng) -> Result<Image> {
    if !(photons > 0.0 && photons.is_finite()) {
        return Err(Error::param("photons", format!("{photons} must be finite and > 0")));
    }
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let lambda = v * photons;
            if lambda <= 0.0 {
                return 0.0;
            }
            let count: f64 = Poisson::new(lambda).expect("lambda is positive and finite").sample(rng);
            count / photons
        })
        .collect();
    Ok(Image::from_raw_clamped(img.height(), img.width(), data))
}

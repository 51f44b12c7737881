use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::SeededRng;

/// `FWHM = FWHM_TO_SIGMA * sigma` for a Gaussian, i.e. `2 sqrt(2 ln 2)`.
pub const FWHM_TO_SIGMA: f64 = 2.354_820_045_030_949;

/// Ranges the shadow generator draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselParams {
    pub count: [u32; 2],
    /// Shadow full width at half maximum, pixels.
    pub width: [u32; 2],
    /// Remaining intensity fraction at the shadow center.
    pub attenuation: [f64; 2],
}

impl Default for VesselParams {
    fn default() -> Self {
        VesselParams {
            count: [1, 4],
            width: [3, 12],
            attenuation: [0.3, 0.8],
        }
    }
}

impl VesselParams {
    pub fn validate(&self) -> Result<()> {
        if self.count[0] > self.count[1] {
            return Err(Error::param("count", format!("{:?} min > max", self.count)));
        }
        if self.width[0] > self.width[1] || self.width[0] == 0 {
            return Err(Error::param("width", format!("{:?} must be 1 <= min <= max", self.width)));
        }
        let [lo, hi] = self.attenuation;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::param("attenuation", format!("{:?} must satisfy 0 < min <= max <= 1", self.attenuation)));
        }
        Ok(())
    }
}

/// One simulated shadow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vessel {
    pub center: usize,
    pub width: u32,
    pub attenuation: f64,
}

/// Multiplicative shading at column `x`: `1 - (1 - a) exp(-(x - c)^2 / (2 sigma^2))`,
/// with `sigma = width / FWHM_TO_SIGMA`.
#[inline]
pub fn vessel_profile(x: f64, center: f64, width: f64, attenuation: f64) -> f64 {
    let sigma = width / FWHM_TO_SIGMA;
    let d = x - center;
    1.0 - (1.0 - attenuation) * (-(d * d) / (2.0 * sigma * sigma)).exp()
}

pub fn draw_vessels(p: &VesselParams, image_width: usize, rng: &mut SeededRng) -> Result<Vec<Vessel>> {
    p.validate()?;
    let n = rng.random_range(p.count[0]..=p.count[1]);
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let center = rng.random_range(0..image_width);
        let width = rng.random_range(p.width[0]..=p.width[1]);
        let [lo, hi] = p.attenuation;
        let attenuation = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        out.push(Vessel {
            center,
            width,
            attenuation,
        });
    }
    Ok(out)
}

/// Darkens whole columns with each vessel's lateral profile.
pub fn shade_vessels(img: &Image, vessels: &[Vessel]) -> Image {
    let w = img.width();
    let mut factor = vec![1.0; w];
    for v in vessels {
        if v.attenuation == 1.0 {
            continue;
        }
        for (x, f) in factor.iter_mut().enumerate() {
            *f *= vessel_profile(x as f64, v.center as f64, v.width as f64, v.attenuation);
        }
    }
    if factor.iter().all(|&f| f == 1.0) {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(w)
        .flat_map(|row| row.iter().zip(&factor).map(|(v, f)| v * f))
        .collect();
    Image::from_raw_clamped(img.height(), w, data)
}

pub fn simulate_vessels(img: &Image, p: &VesselParams, rng: &mut SeededRng) -> Result<Image> {
    let vessels = draw_vessels(p, img.width(), rng)?;
    Ok(shade_vessels(img, &vessels))
}

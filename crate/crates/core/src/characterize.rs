//! Acquisition-related scan metrics: alignment, symmetry, contrast and SNR.
//!
//! Every metric reduces one B-scan to a single float. The RPE is located as
//! the brightest (blurred) pixel of each column; that profile drives both the
//! alignment score and the flattening used before symmetry is measured.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometric::rotate_image;
use crate::image::Image;
use crate::sample::Sample;

pub const DEFAULT_BLUR_SIGMA: f64 = 2.0;
pub const MEDIAN_WINDOW: usize = 9;
pub const DEFAULT_BACKGROUND_ROWS: usize = 16;
/// Angles below this (radians) are treated as already flat.
pub const FLAT_ANGLE: f64 = 1e-4;
const NCC_EPS: f64 = 1e-12;
const SNR_FLOOR: f64 = 1e-6;
const SIGNAL_PERCENTILE: f64 = 0.95;

/// Tunables shared by all four metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub blur_sigma: f64,
    pub background_rows: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            blur_sigma: DEFAULT_BLUR_SIGMA,
            background_rows: DEFAULT_BACKGROUND_ROWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub id: String,
    /// Std of the RPE row profile, pixels. Lower is better aligned.
    pub alignment: f64,
    /// Left/right NCC after flattening, in `[-1, 1]`.
    pub symmetry: f64,
    /// Population std of intensities.
    pub contrast: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Alignment,
    Symmetry,
    Contrast,
    Snr,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Alignment, Metric::Symmetry, Metric::Contrast, Metric::Snr];

    pub fn of(self, r: &CharacterizationReport) -> f64 {
        match self {
            Metric::Alignment => r.alignment,
            Metric::Symmetry => r.symmetry,
            Metric::Contrast => r.contrast,
            Metric::Snr => r.snr_db,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Alignment => "alignment",
            Metric::Symmetry => "symmetry",
            Metric::Contrast => "contrast",
            Metric::Snr => "snr",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s || (s == "snr_db" && *m == Metric::Snr))
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur with replicated borders. `sigma <= 0` copies.
pub fn gaussian_blur(data: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; data.len()];
    for r in 0..height {
        let row = &data[r * width..(r + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let x = (c as isize + i as isize - radius).clamp(0, width as isize - 1) as usize;
                acc += kv * row[x];
            }
            tmp[r * width + c] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for r in 0..height {
        for (i, kv) in k.iter().enumerate() {
            let y = (r as isize + i as isize - radius).clamp(0, height as isize - 1) as usize;
            let src = &tmp[y * width..(y + 1) * width];
            for (d, s) in out[r * width..(r + 1) * width].iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Row of the brightest pixel in every column of an unclamped raster.
/// Ties go to the smaller row.
pub fn brightest_rows(data: &[f64], height: usize, width: usize, blur_sigma: f64) -> Vec<usize> {
    let blurred = gaussian_blur(data, height, width, blur_sigma);
    (0..width)
        .map(|c| {
            let mut best = 0;
            for r in 1..height {
                if blurred[r * width + c] > blurred[best * width + c] {
                    best = r;
                }
            }
            best
        })
        .collect()
}

pub fn brightest_row_profile(img: &Image, blur_sigma: f64) -> Vec<usize> {
    brightest_rows(img.data(), img.height(), img.width(), blur_sigma)
}

/// Running median with mirrored borders (`p[-k] = p[k]`).
pub fn median_filter(profile: &[f64], window: usize) -> Vec<f64> {
    if profile.len() < 2 {
        return profile.to_vec();
    }
    let n = profile.len() as isize;
    let half = (window / 2) as isize;
    let reflect = |i: isize| -> usize {
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i } else { 2 * (n - 1) - i };
        }
        i as usize
    };
    let mut buf = Vec::with_capacity(window);
    (0..n)
        .map(|c| {
            buf.clear();
            buf.extend((c - half..=c + half).map(|i| profile[reflect(i)]));
            buf.sort_by(f64::total_cmp);
            buf[buf.len() / 2]
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = crate::image::mean_of(xs);
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population std of a median-filtered row profile.
pub fn profile_alignment(profile: &[f64]) -> f64 {
    mean_std(&median_filter(profile, MEDIAN_WINDOW)).1
}

pub fn alignment_metric(img: &Image) -> f64 {
    alignment_with(img, DEFAULT_BLUR_SIGMA)
}

fn alignment_with(img: &Image, blur_sigma: f64) -> f64 {
    let profile: Vec<f64> = brightest_row_profile(img, blur_sigma).into_iter().map(|r| r as f64).collect();
    profile_alignment(&profile)
}

/// Least-squares tilt of the RPE profile, radians.
pub fn retina_tilt(img: &Image, blur_sigma: f64) -> f64 {
    let profile: Vec<f64> = brightest_row_profile(img, blur_sigma).into_iter().map(|r| r as f64).collect();
    let ys = median_filter(&profile, MEDIAN_WINDOW);
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in ys.iter().enumerate() {
        let dx = x as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    (sxy / sxx).atan()
}

/// Rotates the scan so the RPE profile becomes horizontal; returns the
/// flattened image and the rotation that was applied (radians).
pub fn flatten_retina_with_angle(img: &Image, blur_sigma: f64) -> Result<(Image, f64)> {
    let tilt = retina_tilt(img, blur_sigma);
    if tilt.abs() < FLAT_ANGLE {
        return Ok((img.clone(), 0.0));
    }
    Ok((rotate_image(img, -tilt)?, -tilt))
}

pub fn flatten_retina(img: &Image) -> Result<Image> {
    Ok(flatten_retina_with_angle(img, DEFAULT_BLUR_SIGMA)?.0)
}

/// NCC of two equally sized rasters, with the zero-variance rules:
/// both constant and equal gives 1, otherwise a zero-variance side gives 0.
pub fn normalized_cross_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, _) = mean_std(a);
    let (mb, _) = mean_std(b);
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        num += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 && vb == 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    (num / (va.sqrt() * vb.sqrt() + NCC_EPS)).clamp(-1.0, 1.0)
}

/// Left half against the mirrored right half of the flattened scan.
///
/// The halves are split first and blurred independently, so the seam does
/// not leak between them. Odd widths drop the center column. The scan is
/// first put in a canonical left/right orientation, which makes the score
/// exactly invariant under horizontal flips.
pub fn symmetry_metric(img: &Image) -> Result<f64> {
    symmetry_with(img, DEFAULT_BLUR_SIGMA)
}

fn symmetry_with(img: &Image, blur_sigma: f64) -> Result<f64> {
    let flipped = img.flip_horizontal();
    let canonical = match img
        .data()
        .iter()
        .zip(flipped.data())
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
    {
        Some(std::cmp::Ordering::Greater) => &flipped,
        _ => img,
    };
    let (flat, _) = flatten_retina_with_angle(canonical, blur_sigma)?;
    let (h, w) = (flat.height(), flat.width());
    let half = w / 2;
    let mut left = Vec::with_capacity(h * half);
    let mut right = Vec::with_capacity(h * half);
    for r in 0..h {
        let row = flat.row(r);
        left.extend_from_slice(&row[..half]);
        right.extend(row[w - half..].iter().rev());
    }
    let left = gaussian_blur(&left, h, half, blur_sigma);
    let right = gaussian_blur(&right, h, half, blur_sigma);
    Ok(normalized_cross_correlation(&left, &right))
}

pub fn contrast_metric(img: &Image) -> f64 {
    mean_std(img.data()).1
}

/// `20 log10(signal / background_std)` in dB.
///
/// Background is the top `background_rows` rows (vitreous); signal is the
/// mean of pixels at or above the 95th percentile. `background_rows` is
/// capped below a quarter of the height. Both terms are floored at 1e-6.
pub fn snr_metric(img: &Image, background_rows: usize) -> f64 {
    let h = img.height();
    let rows = background_rows.clamp(1, (h.div_ceil(4) - 1).max(1));
    let (_, bg_std) = mean_std(&img.data()[..rows * img.width()]);

    let mut sorted = img.data().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let idx = ((SIGNAL_PERCENTILE * sorted.len() as f64).ceil() as usize).saturating_sub(1);
    let bright = &sorted[idx..];
    let signal = bright.iter().sum::<f64>() / bright.len() as f64;
    20.0 * (signal.max(SNR_FLOOR) / bg_std.max(SNR_FLOOR)).log10()
}

pub fn characterize_with(s: &Sample, cfg: &MetricConfig) -> Result<CharacterizationReport> {
    let img = &s.image;
    Ok(CharacterizationReport {
        id: s.id.clone(),
        alignment: alignment_with(img, cfg.blur_sigma),
        symmetry: symmetry_with(img, cfg.blur_sigma)?,
        contrast: contrast_metric(img),
        snr_db: snr_metric(img, cfg.background_rows),
    })
}

pub fn characterize(s: &Sample) -> Result<CharacterizationReport> {
    characterize_with(s, &MetricConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photometric::add_gaussian_noise;
    use crate::rng::SeededRng;
    use rand::Rng;

    fn line_image(h: usize, w: usize, row_of: impl Fn(usize) -> f64) -> Image {
        Image::from_fn(h, w, |r, c| {
            let d = r as f64 - row_of(c);
            0.1 + 0.8 * (-(d * d) / 2.0).exp()
        })
        .unwrap()
    }

    #[test]
    fn flat_line_profile_and_alignment() {
        let img = line_image(32, 40, |_| 10.0);
        assert!(brightest_row_profile(&img, 2.0).iter().all(|&r| r == 10));
        assert_eq!(alignment_metric(&img), 0.0);
    }

    #[test]
    fn tie_goes_to_upper_row() {
        let img = Image::from_fn(16, 16, |r, _| if r == 5 || r == 9 { 1.0 } else { 0.0 }).unwrap();
        assert!(brightest_row_profile(&img, 0.0).iter().all(|&r| r == 5));
    }

    #[test]
    fn alternating_profile_std_is_one() {
        let p: Vec<f64> = (0..40).map(|c| if c % 2 == 0 { 10.0 } else { 12.0 }).collect();
        assert!((profile_alignment(&p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_profile() {
        let n = 64;
        let img = line_image(72, n, |c| c as f64);
        let prof = brightest_row_profile(&img, 2.0);
        assert!(prof.iter().enumerate().all(|(c, &r)| (r as i64 - c as i64).abs() <= 1));
        let expected = (((n * n - 1) as f64) / 12.0).sqrt();
        assert!((alignment_metric(&img) - expected).abs() <= 1.0);
    }

    #[test]
    fn alignment_ignores_constant_offset() {
        let img = line_image(32, 40, |c| 8.0 + 0.2 * c as f64);
        let shifted: Vec<f64> = img.data().iter().map(|v| v + 5.0).collect();
        assert_eq!(
            brightest_rows(img.data(), 32, 40, 2.0),
            brightest_rows(&shifted, 32, 40, 2.0)
        );
    }

    #[test]
    fn flat_scan_is_not_rotated() {
        let img = line_image(32, 40, |_| 12.0);
        let (out, angle) = flatten_retina_with_angle(&img, 2.0).unwrap();
        assert_eq!(angle, 0.0);
        assert_eq!(out, img);
    }

    #[test]
    fn tilted_scan_flattens() {
        let img = line_image(128, 128, |c| 58.0 + 0.1 * (c as f64 - 64.0));
        assert!(alignment_metric(&img) > 3.0);
        let (flat, first) = flatten_retina_with_angle(&img, 2.0).unwrap();
        assert!(alignment_metric(&flat) < 1.0);
        let (_, second) = flatten_retina_with_angle(&flat, 2.0).unwrap();
        assert!(second.abs() < first.abs());
        assert!(second.abs() < 1e-2);
    }

    fn mirror_retina(w: usize) -> Image {
        Image::from_fn(64, w, |r, c| {
            let x = c as f64 - (w as f64 - 1.0) / 2.0;
            let layer = 30.0 - 8.0 * (-(x * x) / 200.0).exp();
            0.1 + 0.7 * (-((r as f64 - layer) / 3.0).powi(2)).exp()
        })
        .unwrap()
    }

    #[test]
    fn mirror_symmetric_scan_scores_high() {
        assert!(symmetry_metric(&mirror_retina(64)).unwrap() >= 0.99);
        assert!(symmetry_metric(&mirror_retina(65)).unwrap() >= 0.99);
    }

    #[test]
    fn symmetry_is_flip_invariant() {
        let mut rng = SeededRng::from_seed(12);
        for _ in 0..5 {
            let img = Image::from_fn(48, 64, |_, _| rng.random::<f64>()).unwrap();
            let a = symmetry_metric(&img).unwrap();
            let b = symmetry_metric(&img.flip_horizontal()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn constant_halves() {
        let img = Image::from_fn(16, 16, |_, c| if c < 8 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(symmetry_metric(&img).unwrap(), 0.0);
        let flat = Image::filled(16, 16, 0.4).unwrap();
        assert_eq!(symmetry_metric(&flat).unwrap(), 1.0);
    }

    #[test]
    fn contrast_cases() {
        assert_eq!(contrast_metric(&Image::filled(8, 8, 0.3).unwrap()), 0.0);
        let half = Image::from_fn(8, 8, |r, _| if r < 4 { 0.0 } else { 1.0 }).unwrap();
        assert!((contrast_metric(&half) - 0.5).abs() < 1e-12);
        let ramp = Image::from_fn(100, 100, |r, c| (r * 100 + c) as f64 / 9999.0).unwrap();
        assert!((contrast_metric(&ramp) - 1.0 / 12f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn contrast_scales_linearly() {
        let img = Image::from_fn(16, 16, |r, c| (r * 16 + c) as f64 / 400.0).unwrap();
        let scaled = Image::new(16, 16, img.data().iter().map(|v| 1.5 * v).collect()).unwrap();
        assert!((contrast_metric(&scaled) - 1.5 * contrast_metric(&img)).abs() < 1e-12);
    }

    fn snr_fixture(sigma: f64) -> Image {
        let mut rng = SeededRng::from_seed(21);
        let normal = rand_distr::Normal::new(0.0, sigma.max(1e-300)).unwrap();
        Image::from_fn(64, 64, |r, _| {
            use rand_distr::Distribution;
            if r < 16 {
                if sigma > 0.0 {
                    0.05 + normal.sample(&mut rng)
                } else {
                    0.05
                }
            } else if (30..40).contains(&r) {
                0.8
            } else {
                0.3
            }
        })
        .unwrap()
    }

    #[test]
    fn snr_reference_fixture() {
        let snr = snr_metric(&snr_fixture(0.01), 16);
        assert!((snr - 38.06).abs() < 0.5, "snr {snr}");
    }

    #[test]
    fn snr_noiseless_background_is_capped() {
        let snr = snr_metric(&snr_fixture(0.0), 16);
        assert!((snr - 20.0 * (0.8f64 / 1e-6).log10()).abs() < 1e-9);
    }

    #[test]
    fn snr_drops_with_noise() {
        let img = snr_fixture(0.01);
        let noisy = add_gaussian_noise(&img, 0.05, &mut SeededRng::from_seed(3)).unwrap();
        assert!(snr_metric(&noisy, 16) < snr_metric(&img, 16));
    }

    #[test]
    fn constant_image_report() {
        let r = characterize(&Sample::new("c", Image::filled(32, 32, 0.5).unwrap())).unwrap();
        assert_eq!(r.contrast, 0.0);
        assert_eq!(r.symmetry, 1.0);
        assert_eq!(r.alignment, 0.0);
        assert!(r.snr_db.is_finite());
    }

    #[test]
    fn black_image_report_is_finite() {
        let r = characterize(&Sample::new("b", Image::filled(16, 16, 0.0).unwrap())).unwrap();
        assert!(r.snr_db.is_finite());
    }

    #[test]
    fn tilted_scan_has_worse_alignment() {
        let flat = line_image(96, 96, |_| 40.0);
        let tilted = line_image(96, 96, |c| 20.0 + 0.5 * c as f64);
        assert!(alignment_metric(&tilted) > alignment_metric(&flat));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.name()), Some(m));
        }
        assert_eq!(Metric::parse("snr_db"), Some(Metric::Snr));
        assert_eq!(Metric::parse("x"), None);
    }
}

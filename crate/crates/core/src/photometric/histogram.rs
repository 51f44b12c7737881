use crate::error::{Error, Result};
use crate::image::Image;

/// 8-bit source data.
pub const DEFAULT_BINS: usize = 256;

#[inline]
fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Maps `target` onto the intensity distribution of `source`.
///
/// Target intensities are binned; every pixel in bin `b` receives the
/// smallest source intensity whose empirical CDF reaches the target's CDF at
/// the upper edge of `b`. Output values are actual source intensities, so a
/// constant source yields a constant output.
pub fn histogram_match(target: &Image, source: &Image, bins: usize) -> Result<Image> {
    if bins < 2 {
        return Err(Error::param("bins", format!("{bins} < 2")));
    }
    let mut counts = vec![0usize; bins];
    for &v in target.data() {
        counts[bin_of(v, bins)] += 1;
    }
    let mut sorted = source.data().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let nt = target.data().len();
    let ns = sorted.len();
    let mut lut = vec![0.0; bins];
    let mut cum = 0usize;
    for (b, &n) in counts.iter().enumerate() {
        cum += n;
        if n == 0 {
            continue;
        }
        // smallest k with (k + 1) / ns >= cum / nt
        let k = (cum * ns).div_ceil(nt) - 1;
        lut[b] = sorted[k.min(ns - 1)];
    }
    let data = target.data().iter().map(|&v| lut[bin_of(v, bins)]).collect();
    Ok(Image::from_raw_clamped(target.height(), target.width(), data))
}

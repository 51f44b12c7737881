//! Noise transfer between scans through their singular value spectra.
//!
//! The leading singular components of a B-scan carry its layered anatomy;
//! the trailing ones carry speckle and device texture. The target keeps its
//! head (enough components to hold a fraction `energy_fraction` of its
//! squared singular-value mass) and receives the source's tail, rescaled so
//! the grafted tail has the same Frobenius norm as the tail it replaces.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdTransferParams {
    pub energy_fraction: f64,
}

impl SvdTransferParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_fraction > 0.0 && self.energy_fraction <= 1.0) {
            return Err(Error::param(
                "energy_fraction",
                format!("{} outside (0, 1]", self.energy_fraction),
            ));
        }
        Ok(())
    }
}

/// Unclamped pieces of a transfer, exposed for inspection and testing.
#[derive(Debug, Clone)]
pub struct SvdTransferParts {
    /// Number of target components kept.
    pub cut: usize,
    /// `U Σ_head Vᵀ` of the target.
    pub head: DMatrix<f64>,
    /// Rescaled source tail that gets added to the head.
    pub tail: DMatrix<f64>,
    /// Frobenius norm of the target components that were dropped.
    pub target_tail_norm: f64,
}

impl SvdTransferParts {
    /// `head + tail`, clamped into an image.
    pub fn combine(&self) -> Image {
        let (h, w) = self.head.shape();
        let sum = &self.head + &self.tail;
        // row-major
        let data = (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).map(|(r, c)| sum[(r, c)]).collect();
        Image::from_raw_clamped(h, w, data)
    }
}

struct Decomposition {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v_t: DMatrix<f64>,
}

fn decompose(img: &Image) -> Result<Decomposition> {
    if img.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in svd input".into()));
    }
    let m = DMatrix::from_row_slice(img.height(), img.width(), img.data());
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vt");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    // keep components in descending order regardless of backend conventions
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    if order.iter().enumerate().all(|(i, &j)| i == j) {
        return Ok(Decomposition { u, sigma, v_t });
    }
    Ok(Decomposition {
        u: u.select_columns(&order),
        sigma: order.iter().map(|&i| sigma[i]).collect(),
        v_t: v_t.select_rows(&order),
    })
}

/// `Σ_{i in range} σ_i u_i v_iᵀ`.
fn reconstruct(d: &Decomposition, range: std::ops::Range<usize>, scale: f64) -> DMatrix<f64> {
    let (h, w) = (d.u.nrows(), d.v_t.ncols());
    if range.is_empty() || scale == 0.0 {
        return DMatrix::zeros(h, w);
    }
    let k = range.len();
    let u = d.u.columns(range.start, k);
    let mut scaled_vt = d.v_t.rows(range.start, k).into_owned();
    for (i, mut row) in scaled_vt.row_iter_mut().enumerate() {
        row *= d.sigma[range.start + i] * scale;
    }
    u * scaled_vt
}

/// Smallest `k` whose leading components hold at least `fraction` of the squared mass.
fn cut_index(sigma: &[f64], fraction: f64) -> usize {
    if fraction >= 1.0 {
        return sigma.len();
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let goal = fraction * total;
    let mut cum = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        if cum >= goal {
            return i;
        }
        cum += s * s;
    }
    sigma.len()
}

pub fn svd_noise_transfer_parts(target: &Image, source: &Image, energy_fraction: f64) -> Result<SvdTransferParts> {
    SvdTransferParams { energy_fraction }.validate()?;
    let source = source.resize_bilinear(target.height(), target.width())?;
    let t = decompose(target)?;
    let s = decompose(&source)?;
    let cut = cut_index(&t.sigma, energy_fraction);
    let norm_from = |sig: &[f64]| sig.iter().skip(cut).map(|v| v * v).sum::<f64>().sqrt();
    let target_tail_norm = norm_from(&t.sigma);
    let source_tail_norm = norm_from(&s.sigma);
    let scale = if source_tail_norm > 0.0 {
        target_tail_norm / source_tail_norm
    } else {
        0.0
    };
    Ok(SvdTransferParts {
        cut,
        head: reconstruct(&t, 0..cut, 1.0),
        tail: reconstruct(&s, cut..s.sigma.len(), scale),
        target_tail_norm,
    })
}

/// Replaces the low-energy singular components of `target` with those of `source`.
pub fn svd_noise_transfer(target: &Image, source: &Image, energy_fraction: f64) -> Result<Image> {
    Ok(svd_noise_transfer_parts(target, source, energy_fraction)?.combine())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photometric::add_gaussian_noise;
    use crate::rng::SeededRng;

    fn as_matrix(img: &Image) -> DMatrix<f64> {
        DMatrix::from_row_slice(img.height(), img.width(), img.data())
    }

    fn scan(seed: u64, sigma: f64) -> Image {
        let base = Image::from_fn(40, 48, |r, c| {
            let layer = 12.0 + 3.0 * (c as f64 / 9.0).sin();
            0.15 + 0.6 * (-((r as f64 - layer) / 4.0).powi(2)).exp()
        })
        .unwrap();
        add_gaussian_noise(&base, sigma, &mut SeededRng::from_seed(seed)).unwrap()
    }

    #[test]
    fn full_energy_keeps_target() {
        let t = scan(1, 0.05);
        let s = scan(2, 0.1);
        let parts = svd_noise_transfer_parts(&t, &s, 1.0).unwrap();
        assert_eq!(parts.cut, 40);
        assert_eq!(parts.tail.norm(), 0.0);
        let out = parts.combine();
        let max = out.data().iter().zip(t.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max < 1e-9);
    }

    #[test]
    fn self_transfer_is_identity() {
        let t = scan(3, 0.05);
        let parts = svd_noise_transfer_parts(&t, &t, 0.9).unwrap();
        let rel = (&parts.head + &parts.tail - as_matrix(&t)).norm() / as_matrix(&t).norm();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn rank_one_target_has_no_tail() {
        let a: Vec<f64> = (0..32).map(|i| 0.2 + 0.02 * i as f64).collect();
        let b: Vec<f64> = (0..24).map(|j| 0.5 + 0.4 * (j as f64 / 5.0).sin()).collect();
        let t = Image::from_fn(32, 24, |r, c| a[r] * b[c]).unwrap();
        let s = scan(4, 0.1).resize_bilinear(32, 24).unwrap();
        let parts = svd_noise_transfer_parts(&t, &s, 0.99).unwrap();
        assert_eq!(parts.cut, 1);
        assert!(parts.target_tail_norm < 1e-12);
        assert!(parts.tail.norm() < 1e-12);
        let err = (&parts.head - as_matrix(&t)).amax();
        assert!(err < 1e-12, "head error {err}");
    }

    #[test]
    fn tail_energy_is_conserved() {
        let t = scan(5, 0.03);
        let s = scan(6, 0.2);
        for rho in [0.5, 0.9, 0.99, 0.999] {
            let parts = svd_noise_transfer_parts(&t, &s, rho).unwrap();
            let added = parts.tail.norm();
            let rel = (added - parts.target_tail_norm).abs() / parts.target_tail_norm;
            assert!(rel < 1e-6, "rho {rho}: {added} vs {}", parts.target_tail_norm);
        }
    }

    #[test]
    fn singular_values_descend() {
        let d = decompose(&scan(7, 0.1)).unwrap();
        assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn source_shape_is_adapted() {
        let t = scan(8, 0.05);
        let s = scan(9, 0.1).resize_bilinear(20, 30).unwrap();
        let out = svd_noise_transfer(&t, &s, 0.95).unwrap();
        assert_eq!((out.height(), out.width()), (40, 48));
    }

    #[test]
    fn bad_fraction() {
        let t = scan(1, 0.0);
        assert!(svd_noise_transfer(&t, &t, 0.0).is_err());
        assert!(svd_noise_transfer(&t, &t, 1.5).is_err());
    }
}

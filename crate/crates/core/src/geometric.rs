//! Spatial augmentations applied jointly to image, fluid mask and boundary curves.
//!
//! Images and masks are resampled by backward warping (bilinear for
//! intensities, nearest neighbour for labels, zero fill outside the frame).
//! Boundary curves are pushed forward through the same spatial map, re-read
//! at every output column and re-sorted so surfaces never cross.
//!
//! Coordinates are `(x, y) = (column, row)` with `y` pointing down.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::labels::{is_valid_height, BoundarySet, FluidMask, INVALID};
use crate::rng::SeededRng;
use crate::sample::Sample;

/// Bilinear read at fractional `(x, y)`; zero outside `[0, w-1] x [0, h-1]`.
#[inline]
pub fn sample_bilinear(img: &Image, x: f64, y: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return 0.0;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let d = img.data();
    let top = lerp(d[y0 * w + x0], d[y0 * w + x1], fx);
    let bottom = lerp(d[y1 * w + x0], d[y1 * w + x1], fx);
    lerp(top, bottom, fy)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Nearest-neighbour label read; background outside the frame.
#[inline]
fn sample_nearest(mask: &FluidMask, x: f64, y: f64) -> u8 {
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    if !(x >= -0.5 && y >= -0.5 && x < w - 0.5 && y < h - 0.5) {
        return 0;
    }
    let c = (x.round() as usize).min(mask.width() - 1);
    let r = (y.round() as usize).min(mask.height() - 1);
    mask.get(r, c)
}

/// Resamples an image through a backward map `output (x, y) -> source (x, y)`.
pub fn warp_image(img: &Image, backward: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    let (h, w) = (img.height(), img.width());
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (sx, sy) = backward(c as f64, r as f64);
            data.push(sample_bilinear(img, sx, sy));
        }
    }
    Image::from_raw_clamped(h, w, data)
}

pub fn warp_mask(mask: &FluidMask, backward: impl Fn(f64, f64) -> (f64, f64)) -> FluidMask {
    let (h, w) = (mask.height(), mask.width());
    let mut labels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (sx, sy) = backward(c as f64, r as f64);
            labels.push(sample_nearest(mask, sx, sy));
        }
    }
    FluidMask::from_parts(h, w, labels)
}

/// Pushes every surface forward through `forward` and re-reads heights at
/// integer output columns.
///
/// Each curve is densified to `oversample` points per column, mapped, and
/// linearly interpolated between consecutive mapped points. Columns no
/// mapped segment reaches, or that land outside `[0, height)`, become
/// [`INVALID`]. `forward` may return `None` for points it cannot map.
pub fn warp_boundaries(
    bs: &BoundarySet,
    height: usize,
    oversample: usize,
    forward: impl Fn(f64, f64) -> Option<(f64, f64)>,
) -> BoundarySet {
    let width = bs.width();
    let oversample = oversample.max(1);
    let mut surfaces = Vec::with_capacity(bs.num_surfaces());
    let mut mapped: Vec<Option<(f64, f64)>> = Vec::new();
    for src in bs.surfaces() {
        let mut out = vec![INVALID; width];
        let mut filled = vec![false; width];
        mapped.clear();
        for j in 0..width {
            let y0 = src[j];
            if !is_valid_height(y0) {
                mapped.push(None);
                continue;
            }
            mapped.push(forward(j as f64, y0));
            let next = src.get(j + 1).copied().filter(|h| is_valid_height(*h));
            if let Some(y1) = next {
                for k in 1..oversample {
                    let t = k as f64 / oversample as f64;
                    mapped.push(forward(j as f64 + t, lerp(y0, y1, t)));
                }
            } else {
                // run ends here; break the polyline
                mapped.push(None);
            }
        }
        for pair in mapped.windows(2) {
            let (Some(a), Some(b)) = (pair[0], pair[1]) else {
                continue;
            };
            let (lo, hi) = if a.0 <= b.0 { (a.0, b.0) } else { (b.0, a.0) };
            let first = lo.ceil().max(0.0);
            let last = hi.floor().min((width - 1) as f64);
            if first > last {
                continue;
            }
            for c in first as usize..=last as usize {
                if filled[c] {
                    continue;
                }
                let y = if b.0 == a.0 {
                    a.1
                } else {
                    lerp(a.1, b.1, (c as f64 - a.0) / (b.0 - a.0))
                };
                filled[c] = true;
                out[c] = y;
            }
        }
        for v in &mut out {
            if is_valid_height(*v) && !(*v >= 0.0 && *v < height as f64) {
                *v = INVALID;
            }
        }
        surfaces.push(out);
    }
    let mut result = BoundarySet::from_parts(width, surfaces);
    result.sort_columns();
    result
}

/// Concrete affine augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation_deg: f64,
    pub shear_x: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub translate_x: f64,
    pub translate_y: f64,
    pub flip_horizontal: bool,
}

impl Default for AffineParams {
    fn default() -> Self {
        AffineParams::identity()
    }
}

impl AffineParams {
    pub const fn identity() -> Self {
        AffineParams {
            rotation_deg: 0.0,
            shear_x: 0.0,
            scale_x: 1.0,
            scale_y: 1.0,
            translate_x: 0.0,
            translate_y: 0.0,
            flip_horizontal: false,
        }
    }

    pub fn flip() -> Self {
        AffineParams {
            flip_horizontal: true,
            ..AffineParams::identity()
        }
    }

    pub fn rotation(deg: f64) -> Self {
        AffineParams {
            rotation_deg: deg,
            ..AffineParams::identity()
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        AffineParams {
            translate_x: dx,
            translate_y: dy,
            ..AffineParams::identity()
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == AffineParams::identity()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rotation_deg,
            self.shear_x,
            self.scale_x,
            self.scale_y,
            self.translate_x,
            self.translate_y,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("affine", "non-finite value"));
        }
        if self.rotation_deg.abs() > 90.0 {
            return Err(Error::param("rotation_deg", format!("|{}| > 90", self.rotation_deg)));
        }
        for (name, s) in [("scale_x", self.scale_x), ("scale_y", self.scale_y)] {
            if !(s > 0.0 && s <= 10.0) {
                return Err(Error::param(name, format!("{s} outside (0, 10]")));
            }
        }
        Ok(())
    }
}

/// `p_out = center + t + A (p_in - center)`, with its inverse.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    a: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    center: (f64, f64),
    t: (f64, f64),
}

impl AffineMap {
    /// `A = R(rotation) * Shear(shear_x) * Scale(scale_x, scale_y) * Flip`.
    pub fn new(p: &AffineParams, height: usize, width: usize) -> Result<Self> {
        p.validate()?;
        let theta = p.rotation_deg.to_radians();
        let (sin, cos) = theta.sin_cos();
        let flip = if p.flip_horizontal { -1.0 } else { 1.0 };
        // R * Sh = [[cos, cos*k - sin], [sin, sin*k + cos]]
        let rs = [[cos, cos * p.shear_x - sin], [sin, sin * p.shear_x + cos]];
        let a = [
            [rs[0][0] * p.scale_x * flip, rs[0][1] * p.scale_y],
            [rs[1][0] * p.scale_x * flip, rs[1][1] * p.scale_y],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::param("affine", "transform matrix is singular"));
        }
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        Ok(AffineMap {
            a,
            inv,
            center: ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
            t: (p.translate_x, p.translate_y),
        })
    }

    #[inline]
    pub fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        (
            self.center.0 + self.t.0 + (self.a[0][0] * dx + self.a[0][1] * dy),
            self.center.1 + self.t.1 + (self.a[1][0] * dx + self.a[1][1] * dy),
        )
    }

    #[inline]
    pub fn backward(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.center.0 - self.t.0, y - self.center.1 - self.t.1);
        (
            self.center.0 + (self.inv[0][0] * dx + self.inv[0][1] * dy),
            self.center.1 + (self.inv[1][0] * dx + self.inv[1][1] * dy),
        )
    }
}

/// Rotates an image about its center; positive angles turn `+x` towards `+y`.
pub fn rotate_image(img: &Image, angle_rad: f64) -> Result<Image> {
    let map = AffineMap::new(&AffineParams::rotation(angle_rad.to_degrees()), img.height(), img.width())?;
    Ok(warp_image(img, |x, y| map.backward(x, y)))
}

pub fn apply_affine(s: &Sample, p: &AffineParams) -> Result<Sample> {
    let map = AffineMap::new(p, s.image.height(), s.image.width())?;
    if p.is_identity() {
        return Ok(s.clone());
    }
    let back = |x, y| map.backward(x, y);
    Ok(Sample {
        id: s.id.clone(),
        image: warp_image(&s.image, back),
        mask: s.mask.as_ref().map(|m| warp_mask(m, back)),
        boundaries: s
            .boundaries
            .as_ref()
            .map(|b| warp_boundaries(b, s.image.height(), 1, |x, y| Some(map.forward(x, y)))),
        device: s.device.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElasticVariant {
    /// Fine-grained deformation, narrow node spacing.
    Short,
    /// Broad deformation, wide node spacing.
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub grid_spacing: usize,
    pub max_displacement: f64,
    pub variant: ElasticVariant,
}

/// Largest `max_displacement / grid_spacing` ratio accepted.
///
/// With Catmull-Rom upsampling the displacement slope is bounded by
/// `3 * 1.25 * max_displacement / grid_spacing`; a ratio of 1/4 keeps it
/// below 1, so the backward map stays monotone along both axes.
pub const MAX_DISPLACEMENT_RATIO: f64 = 0.25;

impl ElasticParams {
    pub fn short() -> Self {
        ElasticParams {
            grid_spacing: 16,
            max_displacement: 4.0,
            variant: ElasticVariant::Short,
        }
    }

    pub fn long() -> Self {
        ElasticParams {
            grid_spacing: 64,
            max_displacement: 12.0,
            variant: ElasticVariant::Long,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_spacing < 4 {
            return Err(Error::param("grid_spacing", format!("{} < 4", self.grid_spacing)));
        }
        if !(self.max_displacement >= 0.0 && self.max_displacement.is_finite()) {
            return Err(Error::param(
                "max_displacement",
                format!("{} must be finite and >= 0", self.max_displacement),
            ));
        }
        let limit = self.grid_spacing as f64 * MAX_DISPLACEMENT_RATIO;
        if self.max_displacement > limit {
            return Err(Error::param(
                "max_displacement",
                format!(
                    "{} exceeds fold-over limit {limit} for grid spacing {}",
                    self.max_displacement, self.grid_spacing
                ),
            ));
        }
        Ok(())
    }
}

#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Backward displacement field: output pixel `p` reads the source at `p + d(p)`.
///
/// Displacements are defined on a coarse node grid (node `(i, j)` sits at
/// `(j * spacing, i * spacing)`) and upsampled with separable Catmull-Rom
/// interpolation, which reproduces node values exactly.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    height: usize,
    width: usize,
    spacing: usize,
    nodes_y: usize,
    nodes_x: usize,
    node_dx: Vec<f64>,
    node_dy: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    pub fn node_shape(height: usize, width: usize, spacing: usize) -> (usize, usize) {
        (
            (height - 1).div_ceil(spacing) + 1,
            (width - 1).div_ceil(spacing) + 1,
        )
    }

    /// Builds a field from explicit node displacements (row-major `nodes_y x nodes_x`).
    pub fn from_nodes(
        height: usize,
        width: usize,
        spacing: usize,
        node_dx: Vec<f64>,
        node_dy: Vec<f64>,
    ) -> Result<Self> {
        if spacing == 0 {
            return Err(Error::param("grid_spacing", "must be positive"));
        }
        let (ny, nx) = Self::node_shape(height, width, spacing);
        if node_dx.len() != ny * nx || node_dy.len() != ny * nx {
            return Err(Error::Input(format!("expected {ny}x{nx} node displacements")));
        }
        let mut field = DisplacementField {
            height,
            width,
            spacing,
            nodes_y: ny,
            nodes_x: nx,
            node_dx,
            node_dy,
            dx: Vec::new(),
            dy: Vec::new(),
        };
        field.dx = field.upsample(&field.node_dx);
        field.dy = field.upsample(&field.node_dy);
        Ok(field)
    }

    /// Node displacements drawn uniformly in `[-max, max]` per axis.
    pub fn random(height: usize, width: usize, p: &ElasticParams, rng: &mut SeededRng) -> Result<Self> {
        p.validate()?;
        let (ny, nx) = Self::node_shape(height, width, p.grid_spacing);
        let m = p.max_displacement;
        let mut node_dx = Vec::with_capacity(ny * nx);
        let mut node_dy = Vec::with_capacity(ny * nx);
        for _ in 0..ny * nx {
            let (a, b) = if m > 0.0 {
                (rng.random_range(-m..=m), rng.random_range(-m..=m))
            } else {
                (0.0, 0.0)
            };
            node_dx.push(a);
            node_dy.push(b);
        }
        Self::from_nodes(height, width, p.grid_spacing, node_dx, node_dy)
    }

    #[inline]
    fn axis_weights(&self, pos: f64, n: usize) -> ([usize; 4], [f64; 4]) {
        let g = pos / self.spacing as f64;
        let i = g.floor();
        let t = g - i;
        let i = i as isize;
        let clamp = |k: isize| k.clamp(0, n as isize - 1) as usize;
        (
            [clamp(i - 1), clamp(i), clamp(i + 1), clamp(i + 2)],
            catmull_rom_weights(t),
        )
    }

    fn upsample(&self, nodes: &[f64]) -> Vec<f64> {
        let (h, w, nx) = (self.height, self.width, self.nodes_x);
        // along x for every node row
        let mut rows = vec![0.0; self.nodes_y * w];
        for c in 0..w {
            let (idx, wt) = self.axis_weights(c as f64, nx);
            for i in 0..self.nodes_y {
                let base = i * nx;
                rows[i * w + c] = (0..4).map(|k| wt[k] * nodes[base + idx[k]]).sum();
            }
        }
        let mut out = vec![0.0; h * w];
        for r in 0..h {
            let (idx, wt) = self.axis_weights(r as f64, self.nodes_y);
            let dst = &mut out[r * w..(r + 1) * w];
            for (k, &i) in idx.iter().enumerate() {
                let src = &rows[i * w..(i + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wt[k] * s;
                }
            }
        }
        out
    }

    /// Displacement at an integer pixel.
    #[inline]
    pub fn at_pixel(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.dx[i], self.dy[i])
    }

    /// Displacement at an arbitrary point, evaluated from the nodes.
    pub fn displacement_at(&self, x: f64, y: f64) -> (f64, f64) {
        let (ix, wx) = self.axis_weights(x, self.nodes_x);
        let (iy, wy) = self.axis_weights(y, self.nodes_y);
        let (mut dx, mut dy) = (0.0, 0.0);
        for a in 0..4 {
            let base = iy[a] * self.nodes_x;
            let mut rx = 0.0;
            let mut ry = 0.0;
            for b in 0..4 {
                rx += wx[b] * self.node_dx[base + ix[b]];
                ry += wx[b] * self.node_dy[base + ix[b]];
            }
            dx += wy[a] * rx;
            dy += wy[a] * ry;
        }
        (dx, dy)
    }

    pub fn max_abs(&self) -> f64 {
        self.dx.iter().chain(&self.dy).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Source position for output pixel `(col, row)`.
    #[inline]
    pub fn backward_pixel(&self, col: usize, row: usize) -> (f64, f64) {
        let (dx, dy) = self.at_pixel(row, col);
        (col as f64 + dx, row as f64 + dy)
    }

    /// Output position whose backward map lands on source point `(x, y)`.
    ///
    /// Solves `q + d(q) = p` by Newton iteration with a finite-difference
    /// Jacobian; `None` if it does not converge.
    pub fn forward(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        const H: f64 = 1e-4;
        let (mut qx, mut qy) = (x, y);
        for _ in 0..32 {
            let (dx, dy) = self.displacement_at(qx, qy);
            let (fx, fy) = (qx + dx - x, qy + dy - y);
            if fx.abs() < 1e-10 && fy.abs() < 1e-10 {
                return Some((qx, qy));
            }
            let (dxx, dyx) = self.displacement_at(qx + H, qy);
            let (dxy, dyy) = self.displacement_at(qx, qy + H);
            let j00 = 1.0 + (dxx - dx) / H;
            let j10 = (dyx - dy) / H;
            let j01 = (dxy - dx) / H;
            let j11 = 1.0 + (dyy - dy) / H;
            let det = j00 * j11 - j01 * j10;
            if det.abs() < 1e-12 {
                return None;
            }
            qx -= (j11 * fx - j01 * fy) / det;
            qy -= (-j10 * fx + j00 * fy) / det;
        }
        let (dx, dy) = self.displacement_at(qx, qy);
        ((qx + dx - x).abs() < 1e-6 && (qy + dy - y).abs() < 1e-6).then_some((qx, qy))
    }

    pub fn warp_sample(&self, s: &Sample) -> Sample {
        let w = self.width;
        let back = |x: f64, y: f64| {
            let i = y as usize * w + x as usize;
            (x + self.dx[i], y + self.dy[i])
        };
        Sample {
            id: s.id.clone(),
            image: warp_image(&s.image, back),
            mask: s.mask.as_ref().map(|m| warp_mask(m, back)),
            boundaries: s
                .boundaries
                .as_ref()
                .map(|b| warp_boundaries(b, self.height, 4, |x, y| self.forward(x, y))),
            device: s.device.clone(),
        }
    }
}

pub fn apply_elastic(s: &Sample, p: &ElasticParams, rng: &mut SeededRng) -> Result<Sample> {
    p.validate()?;
    if p.max_displacement == 0.0 {
        return Ok(s.clone());
    }
    let field = DisplacementField::random(s.image.height(), s.image.width(), p, rng)?;
    Ok(field.warp_sample(s))
}

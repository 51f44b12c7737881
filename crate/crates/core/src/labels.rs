//! Label rasters co-registered with an [`Image`](crate::Image): per-column
//! layer boundary curves and the fluid class mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Rule;

/// Marker for a boundary column that has no defined height.
pub const INVALID: f64 = f64::NAN;

#[inline]
pub fn is_valid_height(h: f64) -> bool {
    h.is_finite()
}

/// Ordered retinal layer surfaces, one fractional row position per column.
///
/// Surface `0` is the top-most. Columns without a position hold [`INVALID`].
#[derive(Debug, Clone)]
pub struct BoundarySet {
    width: usize,
    surfaces: Vec<Vec<f64>>,
}

impl PartialEq for BoundarySet {
    /// Bitwise equality, so two `INVALID` cells compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.surfaces.len() == other.surfaces.len()
            && self
                .surfaces
                .iter()
                .flatten()
                .zip(other.surfaces.iter().flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl BoundarySet {
    /// Surfaces must all have `width` entries; every entry is either finite or [`INVALID`].
    pub fn new(width: usize, surfaces: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((i, s)) = surfaces.iter().enumerate().find(|(_, s)| s.len() != width) {
            return Err(Error::Input(format!(
                "boundaries.surface[{i}]: {} columns, expected {width}",
                s.len()
            )));
        }
        if surfaces.iter().flatten().any(|v| v.is_infinite()) {
            return Err(Error::Input("boundaries: infinite height".into()));
        }
        Ok(BoundarySet { width, surfaces })
    }

    pub(crate) fn from_parts(width: usize, surfaces: Vec<Vec<f64>>) -> Self {
        BoundarySet { width, surfaces }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_surfaces(&self) -> usize {
        self.surfaces.len()
    }

    pub fn surface(&self, index: usize) -> &[f64] {
        &self.surfaces[index]
    }

    pub fn surfaces(&self) -> &[Vec<f64>] {
        &self.surfaces
    }

    /// Heights of every surface at one column, top to bottom.
    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        self.surfaces.iter().map(move |s| s[col])
    }

    /// Rules broken against an image of `height` rows.
    pub(crate) fn violations(&self, height: usize) -> Vec<(Rule, String)> {
        let mut out = Vec::new();
        for (i, s) in self.surfaces.iter().enumerate() {
            if s.len() != self.width {
                out.push((Rule::Shape, format!("surface[{i}]: length {} != width {}", s.len(), self.width)));
                continue;
            }
            if let Some((c, h)) = s
                .iter()
                .enumerate()
                .find(|(_, h)| is_valid_height(**h) && !(0.0..height as f64).contains(*h))
            {
                out.push((Rule::Range, format!("surface[{i}][{c}]: height {h} outside [0,{height})")));
            }
            if let Some((c, h)) = s.iter().enumerate().find(|(_, h)| h.is_infinite()) {
                out.push((Rule::Range, format!("surface[{i}][{c}]: height {h} is not finite")));
            }
        }
        if let Some(col) = self.first_order_violation() {
            out.push((Rule::Ordering, format!("surfaces cross at column {col}")));
        }
        out
    }

    /// First column where all surfaces are valid but not non-decreasing.
    pub fn first_order_violation(&self) -> Option<usize> {
        (0..self.width).find(|&c| {
            let col: Vec<f64> = self.column(c).collect();
            col.iter().all(|h| is_valid_height(*h)) && col.windows(2).any(|w| w[1] < w[0])
        })
    }

    /// Restores top-to-bottom ordering per column. Valid heights are sorted
    /// among the valid slots; `INVALID` slots keep their positions.
    pub fn sort_columns(&mut self) {
        let mut buf = Vec::with_capacity(self.surfaces.len());
        for c in 0..self.width {
            buf.clear();
            buf.extend(self.surfaces.iter().map(|s| s[c]).filter(|h| is_valid_height(*h)));
            if buf.windows(2).all(|w| w[0] <= w[1]) {
                continue;
            }
            buf.sort_by(f64::total_cmp);
            let mut it = buf.iter();
            for s in &mut self.surfaces {
                if is_valid_height(s[c]) {
                    s[c] = *it.next().unwrap();
                }
            }
        }
    }
}

/// Fluid class per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum FluidClass {
    Background = 0,
    /// Intraretinal fluid.
    Irf = 1,
    /// Subretinal fluid.
    Srf = 2,
    /// Pigment epithelial detachment.
    Ped = 3,
}

impl FluidClass {
    pub const ALL: [FluidClass; 4] = [FluidClass::Background, FluidClass::Irf, FluidClass::Srf, FluidClass::Ped];
    pub const FLUIDS: [FluidClass; 3] = [FluidClass::Irf, FluidClass::Srf, FluidClass::Ped];

    pub fn from_label(label: u8) -> Option<FluidClass> {
        FluidClass::ALL.get(label as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FluidClass::Background => "background",
            FluidClass::Irf => "irf",
            FluidClass::Srf => "srf",
            FluidClass::Ped => "ped",
        }
    }
}

/// Largest label value a [`FluidMask`] may hold.
pub const MAX_LABEL: u8 = FluidClass::Ped as u8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluidMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl FluidMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        let m = FluidMask { height, width, labels };
        match m.violations().into_iter().next() {
            None => Ok(m),
            Some((_, v)) => Err(Error::Input(format!("mask: {v}"))),
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut labels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                labels.push(f(r, c));
            }
        }
        FluidMask::new(height, width, labels)
    }

    pub(crate) fn from_parts(height: usize, width: usize, labels: Vec<u8>) -> Self {
        FluidMask { height, width, labels }
    }

    pub(crate) fn violations(&self) -> Vec<(Rule, String)> {
        let mut out = Vec::new();
        if self.labels.len() != self.height * self.width {
            out.push((
                Rule::Shape,
                format!("length {} != height*width {}", self.labels.len(), self.height * self.width),
            ));
        }
        if let Some((i, l)) = self.labels.iter().enumerate().find(|(_, l)| **l > MAX_LABEL) {
            out.push((Rule::Label, format!("label {l} at index {i} outside 0..={MAX_LABEL}")));
        }
        out
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Set of labels that occur at least once.
    pub fn present_labels(&self) -> [bool; MAX_LABEL as usize + 1] {
        let mut seen = [false; MAX_LABEL as usize + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        seen
    }

    pub fn count(&self, class: FluidClass) -> usize {
        self.labels.iter().filter(|&&l| l == class as u8).count()
    }
}

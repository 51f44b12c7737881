use std::fmt;

use crate::image::Image;
use crate::labels::{BoundarySet, FluidMask};

/// One B-scan plus whatever annotations came with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub boundaries: Option<BoundarySet>,
    pub mask: Option<FluidMask>,
    /// Acquisition device tag, e.g. `spectralis`.
    pub device: Option<String>,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: Image) -> Self {
        Sample {
            id: id.into(),
            image,
            boundaries: None,
            mask: None,
            device: None,
        }
    }

    pub fn with_boundaries(mut self, boundaries: BoundarySet) -> Self {
        self.boundaries = Some(boundaries);
        self
    }

    pub fn with_mask(mut self, mask: FluidMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_device(mut self, device: impl Into<String>) -> Self {
        self.device = Some(device.into());
        self
    }
}

/// Which invariant a [`Violation`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Shape,
    Range,
    Ordering,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:?}): {}", self.field, self.rule, self.detail)
    }
}

/// Every broken invariant of `s`; empty when the sample is well-formed.
pub fn validate_sample(s: &Sample) -> Vec<Violation> {
    let mut out = Vec::new();
    let img = &s.image;
    let mut push = |field: &'static str, (rule, detail): (Rule, String)| out.push(Violation { field, rule, detail });
    for v in img.violations() {
        push("image", v);
    }
    if s.id.is_empty() {
        push("id", (Rule::Shape, "empty sample id".into()));
    }
    if let Some(b) = &s.boundaries {
        if b.width() != img.width() {
            push(
                "boundaries",
                (Rule::Shape, format!("width {} != image width {}", b.width(), img.width())),
            );
        }
        for v in b.violations(img.height()) {
            push("boundaries", v);
        }
    }
    if let Some(m) = &s.mask {
        if m.height() != img.height() || m.width() != img.width() {
            push(
                "mask",
                (
                    Rule::Shape,
                    format!("{}x{} != image {}x{}", m.height(), m.width(), img.height(), img.width()),
                ),
            );
        }
        for v in m.violations() {
            push("mask", v);
        }
    }
    out
}

//! Seeded, probabilistic augmentation pipelines.
//!
//! Operator `i` of sample `k` draws everything (the apply/skip coin, its
//! parameters, any noise) from `derive_rng(master_seed, k, i)`, so outputs do
//! not depend on batch order or thread count.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{apply_affine, apply_elastic, AffineParams, ElasticParams, ElasticVariant};
use crate::image::Image;
use crate::parallel::{map_indexed, Execution};
use crate::photometric::{
    add_gaussian_noise, add_speckle_noise, adjust_contrast, draw_vessels, histogram_match, shade_vessels,
    svd_noise_transfer, ContrastParams, SvdTransferParams, Vessel, VesselParams, DEFAULT_BINS,
};
use crate::rng::{derive_rng, SeededRng};
use crate::sample::{validate_sample, Sample};

pub const DEFAULT_PROBABILITY: f64 = 0.33;
pub const DEFAULT_FLIP_PROBABILITY: f64 = 0.5;
pub const SPEC_VERSION: &str = "1";

/// Closed interval `[min, max]`. Deserializes from `[min, max]` or a single number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RangeRepr", into = "[f64; 2]")]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RangeRepr {
    Pair([f64; 2]),
    Single(f64),
}

impl TryFrom<RangeRepr> for Range {
    type Error = String;

    fn try_from(r: RangeRepr) -> std::result::Result<Self, String> {
        let (min, max) = match r {
            RangeRepr::Pair([a, b]) => (a, b),
            RangeRepr::Single(a) => (a, a),
        };
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(format!("range [{min}, {max}] must be finite with min <= max"));
        }
        Ok(Range { min, max })
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.min, r.max]
    }
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Range { min: v, max: v }
    }

    /// Uniform draw; always consumes one value from `rng`, returns `min` exactly for a degenerate range.
    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        let u: f64 = rng.random();
        self.min + u * (self.max - self.min)
    }

    fn check(&self, name: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::param(name, format!("range [{}, {}] must be finite with min <= max", self.min, self.max)));
        }
        Ok(())
    }

    fn check_within(&self, name: &'static str, lo: f64, hi: f64) -> Result<()> {
        self.check(name)?;
        if self.min < lo || self.max > hi {
            return Err(Error::param(name, format!("range [{}, {}] outside [{lo}, {hi}]", self.min, self.max)));
        }
        Ok(())
    }
}

fn rot() -> Range {
    Range::new(-10.0, 10.0)
}
fn shear() -> Range {
    Range::new(-0.1, 0.1)
}
fn scale() -> Range {
    Range::new(0.9, 1.1)
}
fn translate() -> Range {
    Range::new(-20.0, 20.0)
}
fn short_spacing() -> usize {
    ElasticParams::short().grid_spacing
}
fn short_disp() -> Range {
    Range::fixed(ElasticParams::short().max_displacement)
}
fn long_spacing() -> usize {
    ElasticParams::long().grid_spacing
}
fn long_disp() -> Range {
    Range::fixed(ElasticParams::long().max_displacement)
}
fn contrast_factor() -> Range {
    Range::new(0.7, 1.4)
}
fn hist_bins() -> usize {
    DEFAULT_BINS
}
fn gauss_sigma() -> Range {
    Range::new(0.01, 0.05)
}
fn photons() -> Range {
    Range::new(50.0, 500.0)
}
fn energy() -> Range {
    Range::new(0.95, 0.995)
}
fn vessel_count() -> [u32; 2] {
    VesselParams::default().count
}
fn vessel_width() -> [u32; 2] {
    VesselParams::default().width
}
fn vessel_attenuation() -> Range {
    let [a, b] = VesselParams::default().attenuation;
    Range::new(a, b)
}

/// An operator kind together with its parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    Flip,
    Affine {
        #[serde(default = "rot")]
        rotation_deg: Range,
        #[serde(default = "shear")]
        shear_x: Range,
        #[serde(default = "scale")]
        scale_x: Range,
        #[serde(default = "scale")]
        scale_y: Range,
        #[serde(default = "translate")]
        translate_x: Range,
        #[serde(default = "translate")]
        translate_y: Range,
    },
    ElasticShort {
        #[serde(default = "short_spacing")]
        grid_spacing: usize,
        #[serde(default = "short_disp")]
        max_displacement: Range,
    },
    ElasticLong {
        #[serde(default = "long_spacing")]
        grid_spacing: usize,
        #[serde(default = "long_disp")]
        max_displacement: Range,
    },
    Contrast {
        #[serde(default = "contrast_factor")]
        factor: Range,
    },
    HistMatch {
        #[serde(default = "hist_bins")]
        bins: usize,
    },
    GaussianNoise {
        #[serde(default = "gauss_sigma")]
        sigma: Range,
    },
    SpeckleNoise {
        #[serde(default = "photons")]
        photons: Range,
    },
    SvdTransfer {
        #[serde(default = "energy")]
        energy_fraction: Range,
    },
    VesselSim {
        #[serde(default = "vessel_count")]
        count: [u32; 2],
        #[serde(default = "vessel_width")]
        width: [u32; 2],
        #[serde(default = "vessel_attenuation")]
        attenuation: Range,
    },
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::Flip => "flip",
            Operator::Affine { .. } => "affine",
            Operator::ElasticShort { .. } => "elastic_short",
            Operator::ElasticLong { .. } => "elastic_long",
            Operator::Contrast { .. } => "contrast",
            Operator::HistMatch { .. } => "hist_match",
            Operator::GaussianNoise { .. } => "gaussian_noise",
            Operator::SpeckleNoise { .. } => "speckle_noise",
            Operator::SvdTransfer { .. } => "svd_transfer",
            Operator::VesselSim { .. } => "vessel_sim",
        }
    }

    pub fn affine() -> Self {
        Operator::Affine {
            rotation_deg: rot(),
            shear_x: shear(),
            scale_x: scale(),
            scale_y: scale(),
            translate_x: translate(),
            translate_y: translate(),
        }
    }

    /// Affine whose ranges all collapse to the identity.
    pub fn affine_identity() -> Self {
        Operator::Affine {
            rotation_deg: Range::fixed(0.0),
            shear_x: Range::fixed(0.0),
            scale_x: Range::fixed(1.0),
            scale_y: Range::fixed(1.0),
            translate_x: Range::fixed(0.0),
            translate_y: Range::fixed(0.0),
        }
    }

    pub fn elastic_short() -> Self {
        Operator::ElasticShort {
            grid_spacing: short_spacing(),
            max_displacement: short_disp(),
        }
    }

    pub fn elastic_long() -> Self {
        Operator::ElasticLong {
            grid_spacing: long_spacing(),
            max_displacement: long_disp(),
        }
    }

    pub fn contrast() -> Self {
        Operator::Contrast { factor: contrast_factor() }
    }

    pub fn hist_match() -> Self {
        Operator::HistMatch { bins: hist_bins() }
    }

    pub fn gaussian_noise() -> Self {
        Operator::GaussianNoise { sigma: gauss_sigma() }
    }

    pub fn speckle_noise() -> Self {
        Operator::SpeckleNoise { photons: photons() }
    }

    pub fn svd_transfer() -> Self {
        Operator::SvdTransfer { energy_fraction: energy() }
    }

    pub fn vessel_sim() -> Self {
        Operator::VesselSim {
            count: vessel_count(),
            width: vessel_width(),
            attenuation: vessel_attenuation(),
        }
    }

    pub fn needs_source(&self) -> bool {
        matches!(self, Operator::HistMatch { .. } | Operator::SvdTransfer { .. })
    }

    pub fn default_probability(&self) -> f64 {
        match self {
            Operator::Flip => DEFAULT_FLIP_PROBABILITY,
            _ => DEFAULT_PROBABILITY,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Operator::Flip => Ok(()),
            Operator::Affine {
                rotation_deg,
                shear_x,
                scale_x,
                scale_y,
                translate_x,
                translate_y,
            } => {
                rotation_deg.check_within("rotation_deg", -90.0, 90.0)?;
                shear_x.check("shear_x")?;
                translate_x.check("translate_x")?;
                translate_y.check("translate_y")?;
                for (name, r) in [("scale_x", scale_x), ("scale_y", scale_y)] {
                    r.check_within(name, f64::MIN_POSITIVE, 10.0)?;
                }
                // the extreme shear/scale combinations must stay invertible
                for sh in [shear_x.min, shear_x.max] {
                    for sx in [scale_x.min, scale_x.max] {
                        for sy in [scale_y.min, scale_y.max] {
                            let p = AffineParams {
                                shear_x: sh,
                                scale_x: sx,
                                scale_y: sy,
                                ..AffineParams::identity()
                            };
                            p.validate()?;
                        }
                    }
                }
                Ok(())
            }
            Operator::ElasticShort {
                grid_spacing,
                max_displacement,
            }
            | Operator::ElasticLong {
                grid_spacing,
                max_displacement,
            } => {
                max_displacement.check_within("max_displacement", 0.0, f64::MAX)?;
                ElasticParams {
                    grid_spacing: *grid_spacing,
                    max_displacement: max_displacement.max,
                    variant: ElasticVariant::Short,
                }
                .validate()
            }
            Operator::Contrast { factor } => {
                factor.check("factor")?;
                ContrastParams { factor: factor.min }.validate()?;
                ContrastParams { factor: factor.max }.validate()
            }
            Operator::HistMatch { bins } => {
                if *bins < 2 {
                    return Err(Error::param("bins", format!("{bins} < 2")));
                }
                Ok(())
            }
            Operator::GaussianNoise { sigma } => sigma.check_within("sigma", 0.0, 0.5),
            Operator::SpeckleNoise { photons } => photons.check_within("photons", 1.0, 1e4),
            Operator::SvdTransfer { energy_fraction } => {
                energy_fraction.check("energy_fraction")?;
                SvdTransferParams {
                    energy_fraction: energy_fraction.min,
                }
                .validate()?;
                SvdTransferParams {
                    energy_fraction: energy_fraction.max,
                }
                .validate()
            }
            Operator::VesselSim {
                count,
                width,
                attenuation,
            } => VesselParams {
                count: *count,
                width: *width,
                attenuation: [attenuation.min, attenuation.max],
            }
            .validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub operator: Operator,
    /// Falls back to the operator's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

impl OperatorSpec {
    pub fn new(operator: Operator, probability: f64) -> Self {
        OperatorSpec {
            operator,
            probability: Some(probability),
        }
    }

    pub fn with_default_probability(operator: Operator) -> Self {
        OperatorSpec {
            operator,
            probability: None,
        }
    }

    pub fn probability(&self) -> f64 {
        self.probability.unwrap_or_else(|| self.operator.default_probability())
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probability();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("probability", format!("{p} outside [0, 1]")));
        }
        self.operator.validate()
    }
}

/// Images that `hist_match` and `svd_transfer` draw their second scan from.
#[derive(Debug, Clone, Default)]
pub struct SourcePool(Arc<Vec<Image>>);

impl SourcePool {
    pub fn new(images: Vec<Image>) -> Self {
        SourcePool(Arc::new(images))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Image> {
        self.0.get(i)
    }
}

impl PartialEq for SourcePool {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    #[serde(default = "spec_version")]
    pub version: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub operators: Vec<OperatorSpec>,
    #[serde(skip)]
    pub sources: SourcePool,
}

fn spec_version() -> String {
    SPEC_VERSION.to_string()
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec::new(Vec::new())
    }
}

impl PipelineSpec {
    pub fn new(operators: Vec<OperatorSpec>) -> Self {
        PipelineSpec {
            version: spec_version(),
            master_seed: 0,
            operators,
            sources: SourcePool::default(),
        }
    }

    /// Flip, affine, short elastic, Gaussian and speckle noise at their default probabilities.
    pub fn default_geometric_noise() -> Self {
        PipelineSpec::new(
            [
                Operator::Flip,
                Operator::affine(),
                Operator::elastic_short(),
                Operator::gaussian_noise(),
                Operator::speckle_noise(),
            ]
            .into_iter()
            .map(OperatorSpec::with_default_probability)
            .collect(),
        )
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_sources(mut self, sources: SourcePool) -> Self {
        self.sources = sources;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, op) in self.operators.iter().enumerate() {
            op.validate().map_err(|e| wrap(i, &op.operator, e))?;
            if op.operator.needs_source() && self.sources.is_empty() {
                return Err(wrap(i, &op.operator, Error::param("sources", "operator needs a non-empty source pool")));
            }
        }
        Ok(())
    }
}

fn wrap(index: usize, op: &Operator, e: Error) -> Error {
    Error::Operator {
        index,
        kind: op.name(),
        source: Box::new(e),
    }
}

/// Concrete parameters drawn for one operator application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppliedParams {
    Flip,
    Affine(AffineParams),
    Elastic(ElasticParams),
    Contrast { factor: f64 },
    HistMatch { source: usize, bins: usize },
    GaussianNoise { sigma: f64 },
    SpeckleNoise { photons: f64 },
    SvdTransfer { source: usize, energy_fraction: f64 },
    VesselSim { vessels: Vec<Vessel> },
}

/// One coin flip (`u < p` applies), then each parameter drawn in declaration order.
pub fn sample_params(spec: &OperatorSpec, sources: usize, image_width: usize, rng: &mut SeededRng) -> Result<Option<AppliedParams>> {
    let u: f64 = rng.random();
    if u >= spec.probability() {
        return Ok(None);
    }
    let pick_source = |rng: &mut SeededRng| -> Result<usize> {
        if sources == 0 {
            return Err(Error::param("sources", "operator needs a non-empty source pool"));
        }
        Ok(rng.random_range(0..sources))
    };
    let p = match &spec.operator {
        Operator::Flip => AppliedParams::Flip,
        Operator::Affine {
            rotation_deg,
            shear_x,
            scale_x,
            scale_y,
            translate_x,
            translate_y,
        } => AppliedParams::Affine(AffineParams {
            rotation_deg: rotation_deg.sample(rng),
            shear_x: shear_x.sample(rng),
            scale_x: scale_x.sample(rng),
            scale_y: scale_y.sample(rng),
            translate_x: translate_x.sample(rng),
            translate_y: translate_y.sample(rng),
            flip_horizontal: false,
        }),
        Operator::ElasticShort {
            grid_spacing,
            max_displacement,
        } => AppliedParams::Elastic(ElasticParams {
            grid_spacing: *grid_spacing,
            max_displacement: max_displacement.sample(rng),
            variant: ElasticVariant::Short,
        }),
        Operator::ElasticLong {
            grid_spacing,
            max_displacement,
        } => AppliedParams::Elastic(ElasticParams {
            grid_spacing: *grid_spacing,
            max_displacement: max_displacement.sample(rng),
            variant: ElasticVariant::Long,
        }),
        Operator::Contrast { factor } => AppliedParams::Contrast {
            factor: factor.sample(rng),
        },
        Operator::HistMatch { bins } => AppliedParams::HistMatch {
            source: pick_source(rng)?,
            bins: *bins,
        },
        Operator::GaussianNoise { sigma } => AppliedParams::GaussianNoise { sigma: sigma.sample(rng) },
        Operator::SpeckleNoise { photons } => AppliedParams::SpeckleNoise {
            photons: photons.sample(rng),
        },
        Operator::SvdTransfer { energy_fraction } => AppliedParams::SvdTransfer {
            source: pick_source(rng)?,
            energy_fraction: energy_fraction.sample(rng),
        },
        Operator::VesselSim {
            count,
            width,
            attenuation,
        } => {
            let vp = VesselParams {
                count: *count,
                width: *width,
                attenuation: [attenuation.min, attenuation.max],
            };
            AppliedParams::VesselSim {
                vessels: draw_vessels(&vp, image_width, rng)?,
            }
        }
    };
    Ok(Some(p))
}

/// Applies drawn parameters; `rng` continues the operator's stream after sampling.
pub fn apply_params(s: &Sample, p: &AppliedParams, sources: &SourcePool, rng: &mut SeededRng) -> Result<Sample> {
    let with_image = |image: Image| Sample {
        image,
        ..s.clone()
    };
    let source = |i: usize| {
        sources
            .get(i)
            .ok_or_else(|| Error::param("sources", format!("source index {i} out of range")))
    };
    Ok(match p {
        AppliedParams::Flip => apply_affine(s, &AffineParams::flip())?,
        AppliedParams::Affine(a) => apply_affine(s, a)?,
        AppliedParams::Elastic(e) => apply_elastic(s, e, rng)?,
        AppliedParams::Contrast { factor } => with_image(adjust_contrast(&s.image, *factor)?),
        AppliedParams::HistMatch { source: i, bins } => with_image(histogram_match(&s.image, source(*i)?, *bins)?),
        AppliedParams::GaussianNoise { sigma } => with_image(add_gaussian_noise(&s.image, *sigma, rng)?),
        AppliedParams::SpeckleNoise { photons } => with_image(add_speckle_noise(&s.image, *photons, rng)?),
        AppliedParams::SvdTransfer {
            source: i,
            energy_fraction,
        } => with_image(svd_noise_transfer(&s.image, source(*i)?, *energy_fraction)?),
        AppliedParams::VesselSim { vessels } => with_image(shade_vessels(&s.image, vessels)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub index: usize,
    pub operator: String,
    /// `None` when the operator was skipped.
    pub params: Option<AppliedParams>,
}

impl LogEntry {
    pub fn applied(&self) -> bool {
        self.params.is_some()
    }
}

/// What each operator did to one sample, in application order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AppliedLog {
    pub sample_id: String,
    pub sample_index: u64,
    pub master_seed: u64,
    pub entries: Vec<LogEntry>,
}

impl AppliedLog {
    pub fn applied_count(&self) -> usize {
        self.entries.iter().filter(|e| e.applied()).count()
    }
}

pub fn run_pipeline(s: &Sample, spec: &PipelineSpec, sample_index: u64) -> Result<(Sample, AppliedLog)> {
    spec.validate()?;
    let mut log = AppliedLog {
        sample_id: s.id.clone(),
        sample_index,
        master_seed: spec.master_seed,
        entries: Vec::with_capacity(spec.operators.len()),
    };
    let mut cur = s.clone();
    for (i, op) in spec.operators.iter().enumerate() {
        let mut rng = derive_rng(spec.master_seed, sample_index, i as u64);
        let params = sample_params(op, spec.sources.len(), cur.image.width(), &mut rng).map_err(|e| wrap(i, &op.operator, e))?;
        if let Some(p) = &params {
            cur = apply_params(&cur, p, &spec.sources, &mut rng).map_err(|e| wrap(i, &op.operator, e))?;
        }
        log.entries.push(LogEntry {
            index: i,
            operator: op.operator.name().to_string(),
            params,
        });
    }
    let violations = validate_sample(&cur);
    if let Some(v) = violations.first() {
        return Err(Error::Internal(format!(
            "pipeline produced an invalid sample `{}`: {v} ({} violations)",
            s.id,
            violations.len()
        )));
    }
    Ok((cur, log))
}

/// Runs the pipeline on every sample; sample `k` uses stream index `k`.
pub fn run_batch(samples: &[Sample], spec: &PipelineSpec, exec: Execution) -> Vec<Result<(Sample, AppliedLog)>> {
    map_indexed(samples, exec, |k, s| run_pipeline(s, spec, k as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{BoundarySet, FluidMask};

    fn sample(seed: u64) -> Sample {
        let (h, w) = (32, 40);
        let img = Image::from_fn(h, w, |r, c| {
            let t = (r as f64 / h as f64) + 0.01 * ((c * 7 + seed as usize) % 5) as f64;
            t.min(1.0)
        })
        .unwrap();
        let bounds = BoundarySet::new(w, vec![vec![8.0; w], vec![12.5; w], vec![20.0; w]]).unwrap();
        let mask = FluidMask::from_fn(h, w, |r, c| if (14..18).contains(&r) && (10..20).contains(&c) { 2 } else { 0 }).unwrap();
        Sample::new(format!("s{seed}"), img).with_boundaries(bounds).with_mask(mask)
    }

    #[test]
    fn probability_zero_always_skips() {
        let spec = OperatorSpec::new(Operator::affine(), 0.0);
        let mut rng = SeededRng::from_seed(1);
        for _ in 0..1000 {
            assert!(sample_params(&spec, 0, 64, &mut rng).unwrap().is_none());
        }
    }

    #[test]
    fn degenerate_range_gives_exact_value() {
        let spec = OperatorSpec::new(Operator::GaussianNoise { sigma: Range::fixed(0.0371) }, 1.0);
        let mut rng = SeededRng::from_seed(2);
        for _ in 0..1000 {
            assert_eq!(
                sample_params(&spec, 0, 64, &mut rng).unwrap(),
                Some(AppliedParams::GaussianNoise { sigma: 0.0371 })
            );
        }
    }

    #[test]
    fn application_rate_matches_probability() {
        let spec = OperatorSpec::new(Operator::contrast(), 0.33);
        let mut rng = SeededRng::from_seed(3);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_params(&spec, 0, 64, &mut rng).unwrap().is_some())
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.33).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn drawn_values_stay_in_range() {
        let spec = OperatorSpec::new(Operator::affine(), 1.0);
        let mut rng = SeededRng::from_seed(4);
        for _ in 0..500 {
            let Some(AppliedParams::Affine(a)) = sample_params(&spec, 0, 64, &mut rng).unwrap() else {
                panic!("expected affine")
            };
            assert!((-10.0..=10.0).contains(&a.rotation_deg));
            assert!((0.9..=1.1).contains(&a.scale_x) && (0.9..=1.1).contains(&a.scale_y));
            assert!((-20.0..=20.0).contains(&a.translate_x));
        }
    }

    #[test]
    fn empty_pipeline_is_identity() {
        let s = sample(0);
        let (out, log) = run_pipeline(&s, &PipelineSpec::default(), 0).unwrap();
        assert_eq!(out, s);
        assert!(log.entries.is_empty());
    }

    #[test]
    fn composition_matches_manual_chain() {
        let s = sample(1);
        let spec = PipelineSpec::new(vec![
            OperatorSpec::new(Operator::affine_identity(), 1.0),
            OperatorSpec::new(Operator::GaussianNoise { sigma: Range::fixed(0.05) }, 1.0),
        ])
        .with_seed(11);
        let (out, log) = run_pipeline(&s, &spec, 5).unwrap();

        let mut rng0 = derive_rng(11, 5, 0);
        let _coin: f64 = rng0.random();
        let step = apply_affine(&s, &AffineParams::identity()).unwrap();
        let mut rng1 = derive_rng(11, 5, 1);
        let _coin: f64 = rng1.random();
        let _sigma: f64 = rng1.random();
        let expected = add_gaussian_noise(&step.image, 0.05, &mut rng1).unwrap();
        assert_eq!(out.image, expected);
        assert_eq!(out.mask, s.mask);
        assert_eq!(out.boundaries, s.boundaries);
        assert_eq!(log.entries[0].params, Some(AppliedParams::Affine(AffineParams::identity())));
    }

    fn everything() -> PipelineSpec {
        let mut ops: Vec<OperatorSpec> = [
            Operator::Flip,
            Operator::affine(),
            Operator::elastic_short(),
            Operator::elastic_long(),
            Operator::contrast(),
            Operator::hist_match(),
            Operator::gaussian_noise(),
            Operator::speckle_noise(),
            Operator::svd_transfer(),
            Operator::vessel_sim(),
        ]
        .into_iter()
        .map(|o| OperatorSpec::new(o, 0.7))
        .collect();
        ops.push(OperatorSpec::new(Operator::Flip, 1.0));
        PipelineSpec::new(ops)
            .with_seed(99)
            .with_sources(SourcePool::new(vec![sample(7).image, sample(8).image]))
    }

    #[test]
    fn deterministic_and_order_recorded() {
        let spec = everything();
        let s = sample(2);
        let a = run_pipeline(&s, &spec, 3).unwrap();
        let b = run_pipeline(&s, &spec, 3).unwrap();
        assert_eq!(a, b);
        let names: Vec<&str> = a.1.entries.iter().map(|e| e.operator.as_str()).collect();
        let declared: Vec<&str> = spec.operators.iter().map(|o| o.operator.name()).collect();
        assert_eq!(names, declared);
        assert!(a.1.entries.iter().enumerate().all(|(i, e)| e.index == i));
        let c = run_pipeline(&s, &spec, 4).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn outputs_are_always_valid() {
        let spec = everything();
        for k in 0..40 {
            let (out, _) = run_pipeline(&sample(k), &spec, k).unwrap();
            assert!(validate_sample(&out).is_empty());
        }
    }

    #[test]
    fn batch_matches_single_runs_in_both_modes() {
        let spec = everything();
        let samples: Vec<Sample> = (0..6).map(sample).collect();
        let seq = run_batch(&samples, &spec, Execution::Sequential);
        let par = run_batch(&samples, &spec, Execution::Parallel);
        for (k, (a, b)) in seq.iter().zip(&par).enumerate() {
            let single = run_pipeline(&samples[k], &spec, k as u64).unwrap();
            assert_eq!(a.as_ref().unwrap(), &single);
            assert_eq!(b.as_ref().unwrap(), &single);
        }
    }

    #[test]
    fn bad_specs_report_operator_index() {
        let spec = PipelineSpec::new(vec![
            OperatorSpec::new(Operator::Flip, 0.5),
            OperatorSpec::new(Operator::Contrast { factor: Range::new(0.1, 2.0) }, 0.5),
        ]);
        match run_pipeline(&sample(0), &spec, 0) {
            Err(Error::Operator { index: 1, kind: "contrast", .. }) => {}
            other => panic!("{other:?}"),
        }
        let spec = PipelineSpec::new(vec![OperatorSpec::new(Operator::hist_match(), 1.0)]);
        assert!(matches!(spec.validate(), Err(Error::Operator { index: 0, .. })));
        let spec = PipelineSpec::new(vec![OperatorSpec::new(Operator::Flip, 1.5)]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = everything();
        let json = serde_json::to_string(&spec).unwrap();
        let back: PipelineSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.operators, spec.operators);
        assert_eq!(back.master_seed, 99);
        let minimal: OperatorSpec = serde_json::from_str(r#"{"kind":"gaussian_noise","sigma":0.02}"#).unwrap();
        assert_eq!(minimal.operator, Operator::GaussianNoise { sigma: Range::fixed(0.02) });
        assert_eq!(minimal.probability(), DEFAULT_PROBABILITY);
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"contrast","factor":[2,1]}"#).is_err());
    }
}

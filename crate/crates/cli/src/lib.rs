//! Subcommands of the `octaug` binary, callable without spawning a process.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use octaug::characterize::{characterize_with, Metric, MetricConfig};
use octaug::evaluate::{bin_by_metric, delta_table, eval_rows_to_table, evaluate_pair, EvalRow};
use octaug::io::{
    load_image, load_manifest, load_pipeline_config, read_reports, read_result_table, write_bins, write_boundaries,
    write_delta_summary, write_delta_table, write_image, write_manifest, write_mask, write_reports, write_result_table,
    DatasetManifest, ManifestEntry, ReportFormat, SourceRef,
};
use octaug::parallel::{map_indexed, Execution};
use octaug::pipeline::{apply_params, run_pipeline, sample_params, AppliedLog, OperatorSpec, PipelineSpec};
use octaug::{derive_rng, Error, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Partial = 1,
    InvalidInput = 2,
    Internal = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Invalid(_) => ExitCode::InvalidInput,
            CliError::Internal(_) => ExitCode::Internal,
        }
    }

    /// For failures while reading user-supplied inputs: always the caller's problem.
    fn input(e: Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_invalid_input() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Per-item problems that did not stop the command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> ExitCode {
        if self.warnings.is_empty() {
            ExitCode::Success
        } else {
            ExitCode::Partial
        }
    }
}

fn mkdir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", p.display())))
}

fn copy(from: &Path, to: &Path) -> octaug::Result<()> {
    fs::copy(from, to).map(|_| ()).map_err(|e| Error::Io {
        path: to.into(),
        source: e,
    })
}

/// Folds per-item results into successes plus warnings; fails outright when nothing succeeded.
fn split<T>(results: Vec<(String, octaug::Result<T>)>, what: &str) -> CliResult<(Vec<T>, Outcome)> {
    let mut ok = Vec::new();
    let mut out = Outcome::default();
    let mut errors = Vec::new();
    for (id, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                out.warnings.push(format!("{id}: {e}"));
                errors.push(e);
            }
        }
    }
    if ok.is_empty() && !errors.is_empty() {
        let listing = out.warnings.join("\n  ");
        let msg = format!("every {what} failed:\n  {listing}");
        return Err(if errors.iter().all(Error::is_invalid_input) {
            CliError::Invalid(msg)
        } else {
            CliError::Internal(msg)
        });
    }
    Ok((ok, out))
}

#[derive(Debug, Clone)]
pub struct AugmentArgs {
    pub manifest: PathBuf,
    /// `None` runs the default geometric + noise pipeline.
    pub pipeline: Option<PathBuf>,
    pub out: PathBuf,
    /// Overrides the config's `master_seed`.
    pub seed: Option<u64>,
    pub auto_sort: bool,
}

fn load_spec(path: Option<&Path>, seed: Option<u64>, manifest: Option<&DatasetManifest>, exec: Execution) -> CliResult<PipelineSpec> {
    let mut spec = match path {
        Some(p) => load_pipeline_config(p)
            .and_then(|cfg| cfg.into_spec(manifest, exec))
            .map_err(CliError::input)?,
        None => PipelineSpec::default_geometric_noise(),
    };
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    Ok(spec)
}

/// Augments every manifest entry; sample `k` uses stream index `k`.
///
/// Output tree: `images/`, `masks/`, `boundaries/`, `logs/<id>.json` and a
/// `manifest.json` describing the augmented set. Samples no operator touched
/// are copied byte for byte.
pub fn cmd_augment(args: &AugmentArgs, exec: Execution) -> CliResult<Outcome> {
    let manifest = load_manifest(&args.manifest).map_err(CliError::input)?;
    let spec = load_spec(args.pipeline.as_deref(), args.seed, Some(&manifest), exec)?;
    for sub in ["images", "masks", "boundaries", "logs"] {
        mkdir(&args.out.join(sub))?;
    }
    let results = map_indexed(&manifest.entries, exec, |k, e| {
        let r = manifest
            .load_sample(e, args.auto_sort)
            .and_then(|s| run_pipeline(&s, &spec, k as u64))
            .and_then(|(s, log)| write_augmented(&args.out, &manifest, e, &s, &log, args.auto_sort));
        (e.id.clone(), r)
    });
    let (entries, outcome) = split(results, "sample")?;
    let out_manifest = DatasetManifest::new(entries, &args.out);
    write_manifest(&out_manifest, args.out.join("manifest.json"))?;
    Ok(outcome)
}

fn write_augmented(
    out: &Path,
    manifest: &DatasetManifest,
    e: &ManifestEntry,
    s: &Sample,
    log: &AppliedLog,
    auto_sort: bool,
) -> octaug::Result<ManifestEntry> {
    let untouched = log.applied_count() == 0 && !auto_sort;
    let ext = |p: &Path, default: &str| p.extension().and_then(|x| x.to_str()).unwrap_or(default).to_string();
    let image = if untouched {
        PathBuf::from("images").join(format!("{}.{}", e.id, ext(&e.image, "png")))
    } else {
        PathBuf::from("images").join(format!("{}.png", e.id))
    };
    if untouched {
        copy(&manifest.resolve(&e.image), &out.join(&image))?;
    } else {
        write_image(&s.image, out.join(&image))?;
    }
    let mask = match (&s.mask, &e.mask) {
        (Some(m), Some(src)) => {
            let rel = PathBuf::from("masks").join(format!("{}.png", e.id));
            if untouched {
                copy(&manifest.resolve(src), &out.join(&rel))?;
            } else {
                write_mask(m, out.join(&rel))?;
            }
            Some(rel)
        }
        _ => None,
    };
    let boundaries = match (&s.boundaries, &e.boundaries) {
        (Some(b), Some(src)) => {
            let rel = PathBuf::from("boundaries").join(format!("{}.csv", e.id));
            if untouched {
                copy(&manifest.resolve(src), &out.join(&rel))?;
            } else {
                write_boundaries(b, out.join(&rel))?;
            }
            Some(rel)
        }
        _ => None,
    };
    let log_path = out.join("logs").join(format!("{}.json", e.id));
    let text = serde_json::to_string_pretty(log).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&log_path, text + "\n").map_err(|err| Error::Io {
        path: log_path,
        source: err,
    })?;
    Ok(ManifestEntry {
        id: e.id.clone(),
        image,
        mask,
        boundaries,
        device: e.device.clone(),
    })
}

pub fn cmd_characterize(manifest: &Path, out: &Path, format: ReportFormat, exec: Execution) -> CliResult<Outcome> {
    let manifest = load_manifest(manifest).map_err(CliError::input)?;
    let cfg = MetricConfig::default();
    let results = map_indexed(&manifest.entries, exec, |_, e| {
        (
            e.id.clone(),
            manifest.load_sample(e, true).and_then(|s| characterize_with(&s, &cfg)),
        )
    });
    let (reports, outcome) = split(results, "entry")?;
    write_reports(&reports, out, format)?;
    Ok(outcome)
}

/// Scores predictions against references matched by id. Boundary RMSE is in
/// pixels unless the reference manifest sets `rmse_scale`.
pub fn cmd_evaluate(pred: &Path, truth: &Path, out: &Path, format: ReportFormat, exec: Execution) -> CliResult<Outcome> {
    let pred = load_manifest(pred).map_err(CliError::input)?;
    let truth = load_manifest(truth).map_err(CliError::input)?;
    let truth_ids: HashMap<&str, &ManifestEntry> = truth.entries.iter().map(|e| (e.id.as_str(), e)).collect();
    let pred_ids: std::collections::HashSet<&str> = pred.entries.iter().map(|e| e.id.as_str()).collect();
    let mut outcome = Outcome::default();
    let pairs: Vec<(&ManifestEntry, &ManifestEntry)> = pred
        .entries
        .iter()
        .filter_map(|p| match truth_ids.get(p.id.as_str()) {
            Some(t) => Some((p, *t)),
            None => {
                outcome.warnings.push(format!("{}: no reference with this id", p.id));
                None
            }
        })
        .collect();
    for t in &truth.entries {
        if !pred_ids.contains(t.id.as_str()) {
            outcome.warnings.push(format!("{}: no prediction with this id", t.id));
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Invalid("predictions and references share no ids".into()));
    }
    let results = map_indexed(&pairs, exec, |_, (p, t)| {
        let r = pred
            .load_sample(p, true)
            .and_then(|ps| truth.load_sample(t, true).map(|ts| (ps, ts)))
            .and_then(|(ps, ts)| evaluate_pair(&ps, &ts))
            .map(|row| row.with_rmse_scale(truth.rmse_scale.unwrap_or(1.0)));
        (p.id.clone(), r)
    });
    let (rows, mut more): (Vec<EvalRow>, Outcome) = split(results, "pair")?;
    outcome.warnings.append(&mut more.warnings);
    write_result_table(&eval_rows_to_table(&rows), out, format)?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub aug: PathBuf,
    pub base: PathBuf,
    pub reports: Option<PathBuf>,
    /// Bins on every metric when `None`.
    pub metric: Option<Metric>,
    pub bins: usize,
    pub out: PathBuf,
}

/// Paired deltas, signed-rank tests and (with reports) metric-binned deltas.
///
/// Writes `deltas`, `summary` and optionally `bins` tables into `out`.
pub fn cmd_compare(args: &CompareArgs, format: ReportFormat) -> CliResult<Outcome> {
    let aug = read_result_table(&args.aug).map_err(CliError::input)?;
    let base = read_result_table(&args.base).map_err(CliError::input)?;
    let reports = args
        .reports
        .as_ref()
        .map(|p| read_reports(p).map_err(CliError::input))
        .transpose()?;
    let d = delta_table(&aug, &base).map_err(CliError::input)?;
    let mut outcome = Outcome::default();
    for id in &d.unmatched {
        outcome.warnings.push(format!("{id}: present in only one table, excluded"));
    }
    mkdir(&args.out)?;
    let ext = format.extension();
    write_delta_table(&d, args.out.join(format!("deltas.{ext}")), format)?;
    write_delta_summary(&d, args.out.join(format!("summary.{ext}")), format)?;
    for s in &d.summaries {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "{}: n={} mean_delta={} median_delta={} p={}",
            s.column,
            s.n,
            fmt(s.mean),
            fmt(s.median),
            fmt(s.wilcoxon.map(|w| w.p_value))
        );
    }
    if let Some(reports) = reports {
        let metrics: Vec<Metric> = args.metric.map_or(Metric::ALL.to_vec(), |m| vec![m]);
        let mut binned = Vec::new();
        for (k, col) in d.columns.iter().enumerate() {
            let deltas = d.column_deltas(k);
            if deltas.is_empty() {
                outcome.warnings.push(format!("{col}: no defined deltas, not binned"));
                continue;
            }
            for &m in &metrics {
                match bin_by_metric(&deltas, &reports, m, args.bins) {
                    Ok(b) => {
                        if b.degenerate {
                            outcome.warnings.push(format!("{col}: {} is constant, single bin", m.name()));
                        }
                        binned.push((col.clone(), b));
                    }
                    Err(e @ Error::Parameter { .. }) => return Err(CliError::Invalid(e.to_string())),
                    Err(e) => outcome.warnings.push(format!("{col} by {}: {e}", m.name())),
                }
            }
        }
        if !binned.is_empty() {
            write_bins(&binned, args.out.join(format!("bins.{ext}")), format)?;
        }
    }
    Ok(outcome)
}

/// File name of the variant produced by operator `index`.
pub fn preview_name(index: usize, op: &OperatorSpec) -> String {
    format!("{index:02}_{}.png", op.operator.name())
}

/// Writes `original.png` plus one variant per configured operator, each
/// applied alone (forced on) with the stream it would use for sample 0.
pub fn cmd_preview(image: &Path, pipeline: &Path, seed: Option<u64>, out: &Path) -> CliResult<Outcome> {
    let img = load_image(image).map_err(CliError::input)?;
    let cfg = load_pipeline_config(pipeline).map_err(CliError::input)?;
    if matches!(cfg.sources, Some(SourceRef::Keyword(_))) && cfg.needs_sources() {
        return Err(CliError::Invalid(
            "preview has no manifest; give sources as a list of image paths".into(),
        ));
    }
    let spec = load_spec(Some(pipeline), seed, None, Execution::Sequential)?;
    mkdir(out)?;
    let sample = Sample::new(
        image.file_stem().and_then(|s| s.to_str()).unwrap_or("preview"),
        img,
    );
    write_image(&sample.image, out.join("original.png"))?;
    for (i, op) in spec.operators.iter().enumerate() {
        let forced = OperatorSpec::new(op.operator.clone(), 1.0);
        let mut rng = derive_rng(spec.master_seed, 0, i as u64);
        let wrap = |e: Error| Error::Operator {
            index: i,
            kind: op.operator.name(),
            source: Box::new(e),
        };
        let params = sample_params(&forced, spec.sources.len(), sample.image.width(), &mut rng)
            .map_err(wrap)?
            .ok_or_else(|| CliError::Internal("forced operator was skipped".into()))?;
        let variant = apply_params(&sample, &params, &spec.sources, &mut rng).map_err(wrap)?;
        write_image(&variant.image, out.join(preview_name(i, op)))?;
    }
    Ok(Outcome::default())
}

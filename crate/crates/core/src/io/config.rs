use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use super::raster::load_image;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::pipeline::{OperatorSpec, PipelineSpec, SourcePool, SPEC_VERSION};

/// Where `hist_match` / `svd_transfer` take their second scan from:
/// a list of image files, or `"manifest"` for the images of the dataset being augmented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceRef {
    Paths(Vec<PathBuf>),
    Keyword(String),
}

pub const MANIFEST_SOURCES: &str = "manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(default = "version")]
    version: String,
    #[serde(default)]
    master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sources: Option<SourceRef>,
    #[serde(default)]
    operators: Vec<OperatorSpec>,
}

fn version() -> String {
    SPEC_VERSION.to_string()
}

/// A parsed pipeline config whose source pool is not loaded yet.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub spec: PipelineSpec,
    pub sources: Option<SourceRef>,
    /// Directory relative source paths resolve against.
    pub base_dir: PathBuf,
}

/// Parses TOML config text. `origin` is only used in error messages and to resolve source paths.
pub fn parse_pipeline_config(text: &str, origin: &Path) -> Result<PipelineConfig> {
    let f: ConfigFile = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    if f.version != SPEC_VERSION {
        return Err(Error::parse(origin, format!("unsupported config version `{}`", f.version)));
    }
    if let Some(SourceRef::Keyword(k)) = &f.sources {
        if k != MANIFEST_SOURCES {
            return Err(Error::parse(origin, format!("sources must be a list of paths or \"{MANIFEST_SOURCES}\", got `{k}`")));
        }
    }
    let mut spec = PipelineSpec::new(f.operators).with_seed(f.master_seed);
    spec.version = f.version;
    for (i, op) in spec.operators.iter().enumerate() {
        op.validate().map_err(|e| Error::parse(origin, format!("operator #{i} ({}): {e}", op.operator.name())))?;
    }
    Ok(PipelineConfig {
        spec,
        sources: f.sources,
        base_dir: origin.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn load_pipeline_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pipeline_config(&text, path)
}

impl PipelineConfig {
    pub fn needs_sources(&self) -> bool {
        self.spec.operators.iter().any(|o| o.operator.needs_source())
    }

    /// Loads the source pool (if any operator needs one) and returns a validated spec.
    pub fn into_spec(self, manifest: Option<&DatasetManifest>, exec: Execution) -> Result<PipelineSpec> {
        let paths: Vec<PathBuf> = match (&self.sources, self.needs_sources()) {
            (_, false) | (None, true) => Vec::new(),
            (Some(SourceRef::Paths(ps)), true) => ps
                .iter()
                .map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
                .collect(),
            (Some(SourceRef::Keyword(_)), true) => {
                let m = manifest.ok_or_else(|| Error::Input("sources = \"manifest\" but no manifest given".into()))?;
                m.entries.iter().map(|e| m.resolve(&e.image)).collect()
            }
        };
        let images = map_indexed(&paths, exec, |_, p| load_image(p)).into_iter().collect::<Result<Vec<_>>>()?;
        let spec = self.spec.with_sources(SourcePool::new(images));
        spec.validate()?;
        Ok(spec)
    }
}

pub fn pipeline_config_to_string(spec: &PipelineSpec, sources: Option<&SourceRef>) -> Result<String> {
    let f = ConfigFile {
        version: spec.version.clone(),
        master_seed: spec.master_seed,
        sources: sources.cloned(),
        operators: spec.operators.clone(),
    };
    toml::to_string(&f).map_err(|e| Error::Internal(e.to_string()))
}

pub fn write_pipeline_config(spec: &PipelineSpec, sources: Option<&SourceRef>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pipeline_config_to_string(spec, sources)?).map_err(|e| Error::io(path, e))
}

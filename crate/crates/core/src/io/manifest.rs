use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::boundaries::load_boundaries;
use super::raster::{load_image, load_mask};
use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::sample::{validate_sample, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
}

/// A JSON list of samples. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default = "schema_version")]
    pub schema_version: String,
    pub entries: Vec<ManifestEntry>,
    /// Physical size of one pixel along the boundary axis (e.g. micrometers);
    /// boundary RMSE against this dataset is multiplied by it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_scale: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn schema_version() -> String {
    SCHEMA_VERSION.to_string()
}

/// Ids become file names in output trees, so they must be plain names.
fn check_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) || id.chars().any(char::is_control) {
        return Err(format!("id `{id}` is not usable as a file name"));
    }
    Ok(())
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            schema_version: schema_version(),
            entries,
            rmse_scale: None,
            base_dir: base_dir.into(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Unique, file-name-safe ids and every referenced file present.
    pub fn check(&self, path: &Path) -> Result<()> {
        if let Some(k) = self.rmse_scale {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::parse(path, format!("rmse_scale {k} must be finite and > 0")));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            check_id(&e.id).map_err(|r| Error::parse(path, r))?;
            if !seen.insert(e.id.as_str()) {
                return Err(Error::parse(path, format!("duplicate id `{}`", e.id)));
            }
            for f in [Some(&e.image), e.mask.as_ref(), e.boundaries.as_ref()].into_iter().flatten() {
                let full = self.resolve(f);
                if !full.is_file() {
                    return Err(Error::Input(format!("entry `{}`: missing file {}", e.id, full.display())));
                }
            }
        }
        Ok(())
    }

    /// Loads one entry and rejects it if the assembled sample is invalid.
    pub fn load_sample(&self, entry: &ManifestEntry, auto_sort: bool) -> Result<Sample> {
        let image = load_image(self.resolve(&entry.image))?;
        let mut s = Sample::new(entry.id.clone(), image);
        if let Some(m) = &entry.mask {
            s = s.with_mask(load_mask(self.resolve(m))?);
        }
        if let Some(b) = &entry.boundaries {
            let width = s.image.width();
            s = s.with_boundaries(load_boundaries(self.resolve(b), Some(width), auto_sort)?);
        }
        if let Some(d) = &entry.device {
            s = s.with_device(d.clone());
        }
        let violations = validate_sample(&s);
        if !violations.is_empty() {
            let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Input(format!("entry `{}`: {}", entry.id, listed.join("; "))));
        }
        Ok(s)
    }

    /// Loads every entry; order matches `entries`.
    pub fn load_all(&self, auto_sort: bool, exec: Execution) -> Vec<Result<Sample>> {
        map_indexed(&self.entries, exec, |_, e| self.load_sample(e, auto_sort))
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.check(path)?;
    Ok(m)
}

/// Writes entries as given; paths are stored verbatim.
pub fn write_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(m).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

//! Rasters (PNG/PGM), boundary CSVs, dataset manifests, pipeline configs and
//! report tables.

mod boundaries;
mod config;
mod manifest;
mod raster;
mod report;

pub use boundaries::{load_boundaries, write_boundaries};
pub use config::{
    load_pipeline_config, parse_pipeline_config, pipeline_config_to_string, write_pipeline_config, PipelineConfig,
    SourceRef, MANIFEST_SOURCES,
};
pub use manifest::{load_manifest, write_manifest, DatasetManifest, ManifestEntry};
pub use raster::{load_image, load_mask, write_image, write_mask};
pub use report::{
    read_delta_summary, read_reports, read_result_table, round_significant, write_bins, write_delta_summary,
    write_delta_table, write_reports, write_result_table, ReportFormat, BIN_COLUMNS, REPORT_COLUMNS,
    SIGNIFICANT_DIGITS, SUMMARY_COLUMNS,
};

/// Version tag written into manifests and JSON reports.
pub const SCHEMA_VERSION: &str = "1";

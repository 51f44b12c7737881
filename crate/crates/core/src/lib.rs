//! Label-consistent data augmentation, acquisition characterization and
//! evaluation statistics for retinal OCT B-scans.
//!
//! The crate is organised by stage:
//!
//! * [`geometric`]: affine transforms, flips and elastic deformation that move
//!   image, fluid mask and layer boundaries together.
//! * [`photometric`]: contrast, histogram matching, Gaussian/speckle noise,
//!   SVD noise transfer and vessel shadows (image only).
//! * [`characterize`]: alignment, symmetry, contrast and SNR scan metrics.
//! * [`evaluate`]: boundary RMSE, Dice, paired delta tables, Wilcoxon
//!   signed-rank tests and metric-binned summaries.
//! * [`pipeline`]: seeded, probabilistic operator chains and batch execution.
//! * [`io`]: PNG/PGM rasters, boundary CSVs, manifests, configs and reports.
//!
//! Batch execution uses rayon when the `parallel` feature is enabled (the
//! default) and falls back to a sequential loop otherwise; results are
//! identical either way.

pub mod characterize;
pub mod error;
pub mod evaluate;
pub mod geometric;
pub mod image;
pub mod io;
pub mod labels;
pub mod parallel;
pub mod photometric;
pub mod pipeline;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
pub use image::Image;
pub use labels::{BoundarySet, FluidClass, FluidMask, INVALID};
pub use rng::{derive_rng, SeededRng};
pub use sample::{validate_sample, Rule, Sample, Violation};

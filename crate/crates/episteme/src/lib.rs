//! File formats and command line for the `episteme-core` analysis toolkit.
//!
//! - [`pose_json`]: AlphaPose-style keypoint results.
//! - [`eaf`]: ELAN annotation files.
//! - [`tables`]: series and events CSV.
//! - [`profile`]: calibration profile JSON.
//! - [`plot`]: SVG charts.
//! - [`cli`]: the `episteme` commands.

pub mod cli;
pub mod eaf;
pub mod plot;
pub mod pose_json;
pub mod profile;
pub mod tables;

pub use episteme_core as core;

//! File formats and renderers: the JSON Lines dataset format, flat
//! key=value configs, the binary model checkpoint, detection dumps,
//! PGM/SVG renderers, and the per-run manifest.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod detections;
pub mod manifest;
pub mod render;

pub use checkpoint::{decode_checkpoint, load_checkpoint, save_checkpoint, CheckpointError};
pub use config::{parse_key_values, ConfigError};
pub use dataset::{load_dataset, parse_dataset_str, save_dataset, DatasetError, LoadReport};
pub use detections::{load_detections, parse_detections_str, save_detections};
pub use manifest::{write_manifest, Manifest};
pub use render::{render_boxes_svg, render_objectness_map, Pgm};

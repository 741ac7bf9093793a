//! File formats: array containers, checkpoints, run configs and PGM dumps.

mod checkpoint;
mod config;
mod container;
mod render;

pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use config::{load_config, parse_config};
pub use container::{ArrayContainer, ArrayData, ArrayHeader, Dtype, Precision, ARRAY_MAGIC};
pub use render::{pgm, render_frames, render_yt, Window};

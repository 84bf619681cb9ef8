//! On-disk formats and dataset plumbing.

mod archive;
pub mod config;
mod grid;
mod lft;
mod manifest;

pub use archive::{ArchiveEntry, WeightArchive, LFW_MAGIC};
pub use config::TrainConfig;
pub use grid::{export_sai_grid, grid_to_light_field, import_sai_grid, light_field_to_grid, save_gray_image};
pub use lft::{payload_bytes, read_lft, read_lft_from, write_lft, write_lft_to, DTYPE_F32, LFT_MAGIC};
pub use manifest::{load_light_field, DatasetManifest, ManifestEntry};

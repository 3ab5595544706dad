//! Dataset ingestion and feature preparation.

pub mod idx;
pub mod pca;
pub mod table;

pub use idx::{load_idx, write_idx, RawDataset};
pub use pca::{PcaModel, PcaTarget};
pub use table::{load_feature_table, read_feature_table, write_feature_table, FeatureTable};

//! On-disk formats.

pub mod container;
pub mod dataset;
pub mod estimate;

pub use container::{config_hash, ArrayData, Container};
pub use dataset::{Dataset, DatasetMeta};
pub use estimate::{read_estimates, read_volumes, write_estimates, write_volumes, EstimateMeta};

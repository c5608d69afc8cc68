//! The limiting projection covariance operator `L̂`, block by block.

pub mod block;
pub mod cache;
pub mod funk_hecke;
pub mod product;
pub mod spectral;

pub use block::{assemble_block, KernelBlock};
pub use cache::{BlockProvider, CONVENTION_TAG};
pub use funk_hecke::{funk_hecke_coeff, triangular_kernel};
pub use product::{sh_product_table, ShProductTable};
pub use spectral::{block_spectral_stats, condition_fit, lambda_max_fit, lanczos_extremes, BlockSpectrum};

//! Rotations, Wigner matrices, projection operators `P̂`, and the
//! pixel-to-coefficient maps.

pub mod matrix;
pub mod pixel;
pub mod rotation;
pub mod wigner;

pub use matrix::{apply_backprojection, apply_projection, equator_weights, projection_matrix, ProjectionMatrix};
pub use pixel::{build_pixel_map, disc_pixels, PixelMap, PIXEL_CONVENTION};
pub use rotation::{sample_uniform_rotations, Rotation};
pub use wigner::{little_d_all, wigner_d, wigner_d_all, WignerMatrix};

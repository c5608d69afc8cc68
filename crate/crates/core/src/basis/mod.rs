//! Radial functions, spherical harmonics, the volume and image bases, and
//! transforms between coefficients and real-domain grids.

pub mod harmonics;
pub mod index;
pub mod radial;
pub mod transforms;
pub mod volume;

pub use harmonics::{eval_sph_harm, lm_count, lm_index, sph_harm_all, SphereQuadrature};
pub use index::{angular_index, angular_pos, p_hat_for, q_hat_for, v_block_dim, BasisIndexSet, IIndex, VIndex};
pub use radial::{default_quad_order, RadialBasis};
pub use transforms::{concentration_report, eval_fourier, eval_image_fourier, grid_center, volume_to_real_grid, ConcentrationEntry, RealGrid};
pub use volume::{conjugate_image, conjugate_volume, real_part_volume, real_symmetry_defect, FourierImage, FourierVolume};

/// Bandlimit `N_res · π / 2` for an effective resolution of `N_res` pixels.
pub fn omega_max_for(n_res: usize) -> f64 {
    n_res as f64 * std::f64::consts::PI / 2.0
}

/// Default radial cutoff `K = N_res − 2`.
pub fn default_k_max(n_res: usize) -> usize {
    n_res.saturating_sub(2)
}

/// Make a basis and matching index set.
pub fn make_index_sets(k_max: usize) -> BasisIndexSet {
    BasisIndexSet::new(k_max)
}

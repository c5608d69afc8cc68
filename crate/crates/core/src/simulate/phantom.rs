use crate::basis::harmonics::{lm_index, sph_harm_all_dir, SphereQuadrature};
use crate::basis::index::BasisIndexSet;
use crate::basis::radial::RadialBasis;
use crate::basis::transforms::grid_center;
use crate::error::{Error, Result};
use crate::projection::rotation::Rotation;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Isotropic Gaussian `a · exp(−‖x − c‖² / 2σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: [f64; 3],
    pub amplitude: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub blobs: Vec<Blob>,
}

impl Blob {
    pub fn new(center: [f64; 3], amplitude: f64, sigma: f64) -> Self {
        Self { center, amplitude, sigma }
    }
}

impl Phantom {
    pub fn new(blobs: Vec<Blob>) -> Self {
        Self { blobs }
    }

    /// Checks widths and amplitudes. Blobs reaching well outside the unit
    /// ball are allowed but logged.
    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.blobs.iter().enumerate() {
            if !(b.sigma > 0.0 && b.sigma.is_finite()) {
                return Err(Error::Simulation(format!("blob {i}: sigma must be positive, got {}", b.sigma)));
            }
            if !(b.amplitude > 0.0 && b.amplitude.is_finite()) {
                return Err(Error::Simulation(format!("blob {i}: amplitude must be positive, got {}", b.amplitude)));
            }
            let r = b.center.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r + 3.0 * b.sigma > 1.2 {
                log::warn!("blob {i} extends to radius {:.2}, outside the unit ball", r + 3.0 * b.sigma);
            }
        }
        Ok(())
    }

    pub fn density(&self, x: [f64; 3]) -> f64 {
        self.blobs
            .iter()
            .map(|b| {
                let d2: f64 = (0..3).map(|t| (x[t] - b.center[t]).powi(2)).sum();
                b.amplitude * (-d2 / (2.0 * b.sigma * b.sigma)).exp()
            })
            .sum()
    }

    /// `∫ X(x) e^{−i ξ·x} dx`.
    pub fn fourier(&self, xi: [f64; 3]) -> Complex64 {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        self.blobs
            .iter()
            .map(|b| {
                let amp = b.amplitude * (2.0 * PI).powf(1.5) * b.sigma.powi(3) * (-0.5 * b.sigma * b.sigma * r2).exp();
                let phase = -(xi[0] * b.center[0] + xi[1] * b.center[1] + xi[2] * b.center[2]);
                Complex64::from_polar(amp, phase)
            })
            .sum()
    }

    /// `∫ X dx`.
    pub fn mass(&self) -> f64 {
        self.blobs.iter().map(|b| b.amplitude * (2.0 * PI).powf(1.5) * b.sigma.powi(3)).sum()
    }

    pub fn max_extent(&self) -> f64 {
        self.blobs
            .iter()
            .map(|b| b.center.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Line integrals along `z` of the rotated phantom `X(Rᵀ·)` at the pixel
/// centers of an `N × N` grid (row = y, column = x).
pub fn project_phantom_analytic(phantom: &Phantom, rot: &Rotation, n: usize) -> Vec<f64> {
    let mut img = vec![0.0; n * n];
    add_projection(phantom, rot, n, 1.0, &mut img);
    img
}

/// `img += scale · project_phantom_analytic(...)`, using the separable
/// form of each Gaussian.
pub fn add_projection(phantom: &Phantom, rot: &Rotation, n: usize, scale: f64, img: &mut [f64]) {
    let coords: Vec<f64> = (0..n).map(|i| grid_center(i, n)).collect();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for b in &phantom.blobs {
        let c = rot.apply(b.center);
        let inv = 1.0 / (2.0 * b.sigma * b.sigma);
        for (g, x) in gx.iter_mut().zip(&coords) {
            *g = (-(x - c[0]).powi(2) * inv).exp();
        }
        for (g, y) in gy.iter_mut().zip(&coords) {
            *g = (-(y - c[1]).powi(2) * inv).exp();
        }
        let amp = scale * b.amplitude * b.sigma * (2.0 * PI).sqrt();
        for (row, &wy) in gy.iter().enumerate() {
            let a = amp * wy;
            if a.abs() < 1e-300 {
                continue;
            }
            for (v, &wx) in img[row * n..(row + 1) * n].iter_mut().zip(&gx) {
                *v += a * wx;
            }
        }
    }
}

/// Degree of the sphere rule used by [`phantom_to_coeffs`]: the harmonic
/// cutoff plus the angular bandwidth of `e^{−i ξ·c}` at `|ξ| = ω_max`.
pub fn projection_quadrature_degree(phantom: &Phantom, k_max: usize, omega_max: f64) -> usize {
    k_max + (omega_max * phantom.max_extent()).ceil() as usize + 16
}

/// Orthogonal projection of the phantom's Fourier transform onto the volume
/// basis: `c_{kℓm} = ∫ X̂(ξ) f_k(|ξ|) conj(Y_ℓ^m(ξ̂)) |ξ| d|ξ| dΩ`.
pub fn phantom_to_coeffs(phantom: &Phantom, basis: &RadialBasis, index: &BasisIndexSet) -> Vec<Complex64> {
    phantoms_to_coeffs(std::slice::from_ref(phantom), basis, index).pop().expect("one phantom")
}

pub fn phantoms_to_coeffs(phantoms: &[Phantom], basis: &RadialBasis, index: &BasisIndexSet) -> Vec<Vec<Complex64>> {
    let k_max = index.k_max();
    let degree = phantoms
        .iter()
        .map(|p| projection_quadrature_degree(p, k_max, basis.omega_max()))
        .max()
        .unwrap_or(k_max);
    let dirs = SphereQuadrature::exact_for_degree(degree).directions();
    let harmonics: Vec<Vec<Complex64>> = dirs.iter().map(|(d, _)| sph_harm_all_dir(k_max, *d)).collect();
    let n_lm = (k_max + 1) * (k_max + 1);
    let nodes = basis.nodes();
    let weights = basis.weights();
    phantoms
        .iter()
        .map(|ph| {
            // g[q][lm] = ∫ X̂(r_q ω) conj(Y_lm(ω)) dω
            let g: Vec<Vec<Complex64>> = nodes
                .par_iter()
                .map(|&r| {
                    let mut acc = vec![Complex64::new(0.0, 0.0); n_lm];
                    for ((d, w), y) in dirs.iter().zip(&harmonics) {
                        let f = ph.fourier([r * d[0], r * d[1], r * d[2]]) * *w;
                        for (a, yv) in acc.iter_mut().zip(y) {
                            *a += f * yv.conj();
                        }
                    }
                    acc
                })
                .collect();
            index
                .v_indices()
                .iter()
                .map(|v| {
                    let f = basis.samples(v.k);
                    let lm = lm_index(v.l, v.m);
                    (0..nodes.len()).map(|q| g[q][lm] * (f[q] * nodes[q] * weights[q])).sum()
                })
                .collect()
        })
        .collect()
}

/// `‖X̂‖²` in the weighted norm `∫ |X̂(ξ)|² |ξ|⁻¹ dξ` over the ball `|ξ| ≤ ω_max`.
pub fn weighted_fourier_energy(phantom: &Phantom, basis: &RadialBasis) -> f64 {
    let degree = 2 * projection_quadrature_degree(phantom, 0, basis.omega_max());
    let dirs = SphereQuadrature::exact_for_degree(degree).directions();
    basis
        .nodes()
        .iter()
        .zip(basis.weights())
        .map(|(&r, &w)| {
            let shell: f64 = dirs.iter().map(|(d, wd)| phantom.fourier([r * d[0], r * d[1], r * d[2]]).norm_sqr() * wd).sum();
            shell * r * w
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gauss_legendre;

    #[test]
    fn centered_blob_center_pixel_matches_line_integral() {
        let ph = Phantom::new(vec![Blob::new([0.0; 3], 1.0, 0.1)]);
        // Odd N puts a pixel center at the origin.
        let img = project_phantom_analytic(&ph, &Rotation::identity(), 65);
        let (z, w) = gauss_legendre(10_000, -1.0, 1.0);
        let oracle: f64 = z.iter().zip(&w).map(|(z, w)| ph.density([0.0, 0.0, *z]) * w).sum();
        assert!((img[32 * 65 + 32] - oracle).abs() < 1e-12);
        assert!((oracle - 0.1 * (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn fourier_transform_matches_quadrature() {
        let ph = Phantom::new(vec![Blob::new([0.2, -0.1, 0.3], 1.5, 0.2)]);
        let xi = [1.3, -0.4, 2.0];
        let (t, w) = gauss_legendre(80, -1.6, 1.6);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, wx) in t.iter().zip(&w) {
            for (y, wy) in t.iter().zip(&w) {
                for (z, wz) in t.iter().zip(&w) {
                    let p = [*x, *y, *z];
                    let ph_ = -(xi[0] * x + xi[1] * y + xi[2] * z);
                    acc += Complex64::from_polar(ph.density(p) * wx * wy * wz, ph_);
                }
            }
        }
        assert!((acc - ph.fourier(xi)).norm() < 1e-8);
    }
}

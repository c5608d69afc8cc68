//! Evaluation of basis expansions in the Fourier and real domains, and the
//! energy concentration of the spherical Hankel transforms.

use super::harmonics::{lm_index, sph_harm_all, sph_harm_all_dir};
use super::index::BasisIndexSet;
use super::radial::RadialBasis;
use super::volume::{FourierImage, FourierVolume};
use crate::special::gauss_legendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Pixel or voxel center coordinate `(2i+1)/n − 1` on `[−1, 1]`.
pub fn grid_center(i: usize, n: usize) -> f64 {
    (2 * i + 1) as f64 / n as f64 - 1.0
}

/// Volume expansion evaluated at a Fourier-domain point.
pub fn eval_fourier(index: &BasisIndexSet, basis: &RadialBasis, coeffs: &[Complex64], xi: [f64; 3]) -> Complex64 {
    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    let f = basis.eval_all(r);
    let y = sph_harm_all_dir(index.k_max(), xi);
    index
        .v_indices()
        .iter()
        .zip(coeffs)
        .map(|(v, c)| c * f[v.k] * y[lm_index(v.l, v.m)])
        .sum()
}

/// Image expansion evaluated at the Fourier-domain polar point `(r, φ)`.
pub fn eval_image_fourier(index: &BasisIndexSet, basis: &RadialBasis, img: &FourierImage, r: f64, phi: f64) -> Complex64 {
    let f = basis.eval_all(r);
    let norm = 1.0 / (2.0 * PI).sqrt();
    index
        .i_indices()
        .iter()
        .zip(&img.coeffs)
        .map(|(i, c)| c * f[i.k] * Complex64::from_polar(norm, i.m as f64 * phi))
        .sum()
}

/// Cube of real-domain samples `data[(iz·n + iy)·n + ix]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealGrid {
    pub n: usize,
    pub data: Vec<f64>,
    /// Largest imaginary part seen during evaluation.
    pub max_imag_residual: f64,
}

/// `i^ℓ`.
pub fn i_pow(l: i64) -> Complex64 {
    match l.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Evaluates a volume expansion at voxel centers of an `n_out³` grid over
/// `[−1, 1]³`.
pub fn volume_to_real_grid(index: &BasisIndexSet, basis: &RadialBasis, vol: &FourierVolume, n_out: usize) -> RealGrid {
    assert!(n_out >= 2, "grid needs at least two voxels per side");
    let k_max = index.k_max();
    let mut data = vec![0.0; n_out * n_out * n_out];
    let mut max_imag: f64 = 0.0;
    // Radii repeat heavily on a centered grid; cache the transforms by the
    // exact integer value of (n r)².
    let mut cache: HashMap<i64, Vec<Vec<f64>>> = HashMap::new();
    let scale = 1.0 / (2.0 * PI * PI);
    let il: Vec<Complex64> = (0..=k_max as i64).map(i_pow).collect();
    for iz in 0..n_out {
        for iy in 0..n_out {
            for ix in 0..n_out {
                let c = |i: usize| (2 * i + 1) as i64 - n_out as i64;
                let key = c(ix).pow(2) + c(iy).pow(2) + c(iz).pow(2);
                let x = [grid_center(ix, n_out), grid_center(iy, n_out), grid_center(iz, n_out)];
                let r = (key as f64).sqrt() / n_out as f64;
                let s = cache.entry(key).or_insert_with(|| basis.spherical_hankel(k_max, r));
                let y = sph_harm_all_dir(k_max, x);
                let mut acc = Complex64::new(0.0, 0.0);
                for (v, cf) in index.v_indices().iter().zip(&vol.coeffs) {
                    acc += cf * il[v.l] * s[v.k][v.l] * y[lm_index(v.l, v.m)];
                }
                acc *= scale;
                max_imag = max_imag.max(acc.im.abs());
                data[(iz * n_out + iy) * n_out + ix] = acc.re;
            }
        }
    }
    RealGrid {
        n: n_out,
        data,
        max_imag_residual: max_imag,
    }
}

/// Real-domain value of a volume expansion at arbitrary points.
pub fn eval_real(index: &BasisIndexSet, basis: &RadialBasis, vol: &FourierVolume, points: &[[f64; 3]]) -> Vec<Complex64> {
    let k_max = index.k_max();
    let scale = 1.0 / (2.0 * PI * PI);
    points
        .iter()
        .map(|x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let s = basis.spherical_hankel(k_max, r);
            let y = sph_harm_all_dir(k_max, *x);
            let acc: Complex64 = index
                .v_indices()
                .iter()
                .zip(&vol.coeffs)
                .map(|(v, cf)| cf * i_pow(v.l as i64) * s[v.k][v.l] * y[lm_index(v.l, v.m)])
                .sum();
            acc * scale
        })
        .collect()
}

/// Energy fraction of `S_ℓ f_k` inside the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEntry {
    pub k: usize,
    pub l: usize,
    /// `‖S_ℓ f_k‖²` on `[0, 1]` over the same on `[0, 4]`.
    pub fraction: f64,
    /// `‖S_ℓ f_k‖²` on `[0, 1]` over the exact total `(π/2) ∫ f_k² r² dr`.
    pub fraction_of_total: f64,
}

/// Composite Gauss–Legendre rule: `panels` panels of 8 nodes on `[a, b]`.
fn composite_rule(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x8, w8) = gauss_legendre(8, 0.0, 1.0);
    let h = (b - a) / panels as f64;
    let mut x = Vec::with_capacity(8 * panels);
    let mut w = Vec::with_capacity(8 * panels);
    for p in 0..panels {
        for (xi, wi) in x8.iter().zip(&w8) {
            x.push(a + h * (p as f64 + xi));
            w.push(h * wi);
        }
    }
    (x, w)
}

/// Concentration table over admissible `(k, ℓ)`, using 512 points on
/// `[0, 4]`.
pub fn concentration_report(basis: &RadialBasis) -> Vec<ConcentrationEntry> {
    concentration_report_with(basis, 64)
}

/// As [`concentration_report`] with `panels` eight-point panels on `[0, 4]`.
pub fn concentration_report_with(basis: &RadialBasis, panels: usize) -> Vec<ConcentrationEntry> {
    let k_max = basis.k_max();
    let (rho, w) = composite_rule(0.0, 4.0, panels);
    let mut inner = vec![vec![0.0; k_max + 1]; k_max + 1];
    let mut total = vec![vec![0.0; k_max + 1]; k_max + 1];
    for (&p, &wq) in rho.iter().zip(&w) {
        let s = basis.spherical_hankel(k_max, p);
        for k in 0..=k_max {
            for l in (k % 2..=k).step_by(2) {
                let e = s[k][l] * s[k][l] * p * p * wq;
                total[k][l] += e;
                if p <= 1.0 {
                    inner[k][l] += e;
                }
            }
        }
    }
    let mut out = Vec::new();
    for k in 0..=k_max {
        let exact_total: f64 = PI / 2.0
            * basis
                .samples(k)
                .iter()
                .zip(basis.nodes().iter().zip(basis.weights()))
                .map(|(f, (r, wr))| f * f * r * r * wr)
                .sum::<f64>();
        for l in (k % 2..=k).step_by(2) {
            out.push(ConcentrationEntry {
                k,
                l,
                fraction: inner[k][l] / total[k][l],
                fraction_of_total: inner[k][l] / exact_total,
            });
        }
    }
    out
}

/// Values of `Y_ℓ^m` for an image-plane direction, used by tests and by
/// slice evaluation.
pub fn equator_harmonics(lmax: usize, phi: f64) -> Vec<Complex64> {
    sph_harm_all(lmax, 0.0, phi)
}

//! Orthonormal complex spherical harmonics with the Condon–Shortley phase,
//! and a product quadrature on the sphere.

use crate::error::{Error, Result};
use crate::special::gauss_legendre;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Position of `Y_ℓ^m` in a full table of degree `≤ L`.
pub const fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Table size for all degrees `≤ lmax`.
pub const fn lm_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Normalized associated Legendre values `P̄_ℓ^m(cos θ)` for `m ≥ 0`, with
/// `Y_ℓ^m = P̄_ℓ^m e^{imφ}`. Stored at `lm_index(ℓ, m)`.
pub(crate) fn normalized_legendre(lmax: usize, cos_theta: f64, out: &mut [f64]) {
    let x = cos_theta.clamp(-1.0, 1.0);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[lm_index(m, m as i64)] = pmm;
        if m == lmax {
            break;
        }
        let mut p_prev = pmm;
        let mut p_cur = ((2 * m + 3) as f64).sqrt() * x * pmm;
        out[lm_index(m + 1, m as i64)] = p_cur;
        for l in m + 2..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let p_next = a * (x * p_cur - b * p_prev);
            out[lm_index(l, m as i64)] = p_next;
            p_prev = p_cur;
            p_cur = p_next;
        }
    }
}

/// All `Y_ℓ^m(θ, φ)` for `ℓ ≤ lmax`, indexed by [`lm_index`].
pub fn sph_harm_all(lmax: usize, cos_theta: f64, phi: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); lm_count(lmax)];
    sph_harm_all_into(lmax, cos_theta, phi, &mut out);
    out
}

/// In-place variant of [`sph_harm_all`].
pub fn sph_harm_all_into(lmax: usize, cos_theta: f64, phi: f64, out: &mut [Complex64]) {
    let mut p = vec![0.0; lm_count(lmax)];
    normalized_legendre(lmax, cos_theta, &mut p);
    for m in 0..=lmax as i64 {
        let e = Complex64::from_polar(1.0, m as f64 * phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for l in m as usize..=lmax {
            let y = e * p[lm_index(l, m)];
            out[lm_index(l, m)] = y;
            if m > 0 {
                out[lm_index(l, -m)] = y.conj() * sign;
            }
        }
    }
}

/// `Y_ℓ^m` at a unit direction.
pub fn sph_harm_all_dir(lmax: usize, dir: [f64; 3]) -> Vec<Complex64> {
    let (cos_theta, phi) = direction_angles(dir);
    sph_harm_all(lmax, cos_theta, phi)
}

/// `(cos θ, φ)` of a nonzero vector.
pub fn direction_angles(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r == 0.0 {
        return (1.0, 0.0);
    }
    (v[2] / r, v[1].atan2(v[0]))
}

/// Single harmonic `Y_ℓ^m(θ, φ)`.
pub fn eval_sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::Domain(format!("|m| = {} exceeds ℓ = {l}", m.abs())));
    }
    let all = sph_harm_all(l, theta.cos(), phi);
    Ok(all[lm_index(l, m)])
}

/// Gauss–Legendre in `cos θ` times a uniform rule in `φ`.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub cos_theta: Vec<f64>,
    pub phi: Vec<f64>,
    theta_weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (cos_theta, theta_weights) = gauss_legendre(n_theta, -1.0, 1.0);
        let phi = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        Self {
            cos_theta,
            phi,
            theta_weights,
        }
    }

    /// Rule integrating every spherical polynomial of degree `≤ degree` exactly.
    pub fn exact_for_degree(degree: usize) -> Self {
        Self::new(degree / 2 + 1, degree + 1)
    }

    pub fn len(&self) -> usize {
        self.cos_theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(cos θ, φ, weight)` for every node.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let dphi = 2.0 * PI / self.phi.len() as f64;
        self.cos_theta
            .iter()
            .zip(&self.theta_weights)
            .flat_map(move |(&ct, &wt)| self.phi.iter().map(move |&p| (ct, p, wt * dphi)))
    }

    /// Node directions as unit vectors, with weights.
    pub fn directions(&self) -> Vec<([f64; 3], f64)> {
        self.nodes()
            .map(|(ct, p, w)| {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                ([st * p.cos(), st * p.sin(), ct], w)
            })
            .collect()
    }
}

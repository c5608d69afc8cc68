//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tomocov::basis::harmonics::{lm_index, sph_harm_all_dir, SphereQuadrature};
use tomocov::basis::index::{angular_index, v_block_dim};
use tomocov::estimator::CoefficientData;
use tomocov::projection::rotation::sample_uniform_rotations;
use tomocov::special::gauss_legendre;

pub fn random_hermitian(p: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::<Complex64>::from_fn(p, p, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_vec(p: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

/// Data `Î_s = P̂_s x_s + noise` with `x_s` drawn from `volumes`.
pub fn data_from_volumes(k: usize, n: usize, volumes: &[Vec<Complex64>], noise: f64, seed: u64) -> CoefficientData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..volumes.len())).collect();
    let amp = (noise / 2.0).sqrt();
    CoefficientData::synthesize(k, sample_uniform_rotations(n, seed + 1), noise, |s, p, out| {
        p.apply_raw(&volumes[labels[s]], out);
        if noise > 0.0 {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ (s as u64 + 17));
            for o in out.iter_mut() {
                let (a, b): (f64, f64) = (r.sample(rand_distr::StandardNormal), r.sample(rand_distr::StandardNormal));
                *o += Complex64::new(a, b) * amp;
            }
        }
    })
    .unwrap()
}

/// `A_{ij}(ξ) = conj(Y_i(ξ)) Y_j(ξ)` for the angular positions of block `k`.
pub fn pair_products(k: usize, dir: [f64; 3]) -> Vec<Complex64> {
    let y = sph_harm_all_dir(k, dir);
    let d = v_block_dim(k);
    let a: Vec<Complex64> = (0..d)
        .map(|p| {
            let (l, m) = angular_index(k, p);
            y[lm_index(l, m)]
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = a[i].conj() * a[j];
        }
    }
    out
}

/// Brute-force `∫∫ A_{i1j1}(α) conj(A_{i2j2}(β)) / (2π|α×β|) dα dβ`.
///
/// For each outer node `α` the inner integral is taken in spherical
/// coordinates with pole `α`: `β = cos ψ α + sin ψ (cos χ u + sin χ v)`.
/// The area element `sin ψ` cancels `|α × β| = sin ψ`, leaving a smooth
/// integrand in `(ψ, χ)`. No harmonic expansion of the kernel is used.
pub fn brute_force_block(k: usize) -> Vec<Complex64> {
    let d = v_block_dim(k);
    let n = d * d;
    let outer = SphereQuadrature::exact_for_degree(4 * k + 2).directions();
    let (psi, wpsi) = gauss_legendre(40, 0.0, PI);
    let n_chi = 4 * k + 4;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for (alpha, wa) in outer {
        let a_alpha = pair_products(k, alpha);
        let helper = if alpha[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let mut u = cross(helper, alpha);
        let un = dot(u, u).sqrt();
        u = u.map(|v| v / un);
        let v = cross(alpha, u);
        let mut inner = vec![Complex64::new(0.0, 0.0); d * d];
        for (&p, &wp) in psi.iter().zip(&wpsi) {
            for c in 0..n_chi {
                let chi = 2.0 * PI * c as f64 / n_chi as f64;
                let (sp, cp) = p.sin_cos();
                let beta: [f64; 3] = std::array::from_fn(|t| cp * alpha[t] + sp * (chi.cos() * u[t] + chi.sin() * v[t]));
                let w = wp * (2.0 * PI / n_chi as f64) / (2.0 * PI);
                for (acc, b) in inner.iter_mut().zip(pair_products(k, beta)) {
                    *acc += b.conj() * w;
                }
            }
        }
        for r1 in 0..d * d {
            if a_alpha[r1].norm() == 0.0 {
                continue;
            }
            let (i1, j1) = (r1 / d, r1 % d);
            for r2 in 0..d * d {
                let (i2, j2) = (r2 / d, r2 % d);
                out[(i1 * d + i2) * n + (j1 * d + j2)] += a_alpha[r1] * inner[r2] * wa;
            }
        }
    }
    out
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}


//! Radial functions `f_k` on `[0, ω_max]`, orthonormal under the weight `r`
//! within each parity family.

use crate::error::{Error, Result};
use crate::special::{bessel_j_all, bessel_j_zeros, gauss_legendre, spherical_bessel_all};

/// A seed `J_order(zero · r / ω_max)` on `[0, ω_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Seed {
    pub order: usize,
    pub zero: f64,
}

#[derive(Clone, Debug)]
pub struct RadialBasis {
    k_max: usize,
    omega_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    seeds: Vec<Seed>,
    /// `coeffs[k][j]`: weight of seed `j` in `f_k`; zero across parities.
    coeffs: Vec<Vec<f64>>,
    /// `samples[k][q] = f_k(nodes[q])`.
    samples: Vec<Vec<f64>>,
}

/// Smallest quadrature order that keeps all bandlimited products exact, with
/// headroom for the Hankel transforms evaluated out to `|x| = 4`.
pub fn default_quad_order(k_max: usize) -> usize {
    (4 * (k_max + 2)).max(256)
}

impl RadialBasis {
    /// Builds both parity families by r-weighted Gram–Schmidt over Bessel
    /// seeds, sweeping from the highest index down.
    pub fn build(k_max: usize, omega_max: f64, quad_order: usize) -> Result<Self> {
        if !(omega_max > 0.0) {
            return Err(Error::Basis(format!("omega_max must be positive, got {omega_max}")));
        }
        if quad_order < 4 * (k_max + 2) {
            return Err(Error::Basis(format!(
                "quadrature order {quad_order} is below 4(K+2) = {}",
                4 * (k_max + 2)
            )));
        }
        let (nodes, weights) = gauss_legendre(quad_order, 0.0, omega_max);

        let mut seeds = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let top = if k_max % 2 == k % 2 { k_max } else { k_max - 1 };
            let zero_index = (top - k) / 2 + 1;
            let zeros = bessel_j_zeros(k, zero_index)?;
            seeds.push(Seed {
                order: k,
                zero: zeros[zero_index - 1],
            });
        }

        let seed_samples: Vec<Vec<f64>> = seeds
            .iter()
            .map(|s| nodes.iter().map(|&r| eval_seed(s, r, omega_max)).collect())
            .collect();

        let inner = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .zip(nodes.iter().zip(&weights))
                .map(|((x, y), (r, w))| x * y * r * w)
                .sum()
        };

        let mut coeffs = vec![Vec::new(); k_max + 1];
        let mut samples = vec![Vec::new(); k_max + 1];
        for parity in 0..2 {
            let mut done: Vec<usize> = Vec::new();
            let members: Vec<usize> = (0..=k_max).rev().filter(|k| k % 2 == parity).collect();
            for &k in &members {
                let mut v = seed_samples[k].clone();
                let mut c = vec![0.0; k_max + 1];
                c[k] = 1.0;
                let seed_norm = inner(&v, &v).sqrt();
                for _pass in 0..2 {
                    for &j in &done {
                        let proj = inner(&v, &samples[j]);
                        for (vq, fq) in v.iter_mut().zip(&samples[j]) {
                            *vq -= proj * fq;
                        }
                        for (ci, cj) in c.iter_mut().zip(&coeffs[j]) {
                            *ci -= proj * cj;
                        }
                    }
                }
                let norm = inner(&v, &v).sqrt();
                if !(norm > 1e-10 * seed_norm) {
                    return Err(Error::Basis(format!(
                        "Gram-Schmidt lost rank at k = {k} (residual norm {norm:.3e})"
                    )));
                }
                v.iter_mut().for_each(|x| *x /= norm);
                c.iter_mut().for_each(|x| *x /= norm);
                samples[k] = v;
                coeffs[k] = c;
                done.push(k);
            }
        }

        Ok(Self {
            k_max,
            omega_max,
            nodes,
            weights,
            seeds,
            coeffs,
            samples,
        })
    }

    /// Reassembles a basis from stored parts, recomputing the tabulation.
    pub fn from_parts(k_max: usize, omega_max: f64, seeds: Vec<Seed>, coeffs: Vec<Vec<f64>>, quad_order: usize) -> Result<Self> {
        if seeds.len() != k_max + 1 || coeffs.len() != k_max + 1 || coeffs.iter().any(|c| c.len() != k_max + 1) {
            return Err(Error::Format("radial basis parts have inconsistent sizes".into()));
        }
        let (nodes, weights) = gauss_legendre(quad_order, 0.0, omega_max);
        let mut basis = Self {
            k_max,
            omega_max,
            nodes,
            weights,
            seeds,
            coeffs,
            samples: Vec::new(),
        };
        basis.samples = basis.nodes.iter().map(|&r| basis.eval_all(r)).fold(
            vec![Vec::with_capacity(quad_order); k_max + 1],
            |mut acc, vals| {
                for (k, v) in vals.into_iter().enumerate() {
                    acc[k].push(v);
                }
                acc
            },
        );
        Ok(basis)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn quad_order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seeds(&self) -> &[Seed] {
        &self.seeds
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// `f_k` tabulated on the quadrature nodes.
    pub fn samples(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    /// `f_0(r) ..= f_K(r)`; zero outside `[0, ω_max]`.
    pub fn eval_all(&self, r: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.k_max + 1];
        if !(0.0..=self.omega_max).contains(&r) {
            return out;
        }
        let seed_vals: Vec<f64> = self.seeds.iter().map(|s| eval_seed(s, r, self.omega_max)).collect();
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k] = c.iter().zip(&seed_vals).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn eval(&self, k: usize, r: f64) -> f64 {
        self.eval_all(r)[k]
    }

    /// `∫₀^ω f_i f_j r dr` on the stored quadrature.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        self.samples[i]
            .iter()
            .zip(&self.samples[j])
            .zip(self.nodes.iter().zip(&self.weights))
            .map(|((a, b), (r, w))| a * b * r * w)
            .sum()
    }

    /// Order-m Hankel transforms `∫ f_k(r) J_m(r ρ) r dr` for `m ≤ m_max`,
    /// returned as `out[k][m]`.
    pub fn hankel(&self, m_max: usize, rho: f64) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; m_max + 1]; self.k_max + 1];
        let mut j = vec![0.0; m_max + 1];
        for (q, (&r, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            bessel_j_all(m_max, r * rho, &mut j);
            for k in 0..=self.k_max {
                let f = self.samples[k][q] * r * w;
                for (o, jm) in out[k].iter_mut().zip(&j) {
                    *o += f * jm;
                }
            }
        }
        out
    }

    /// Spherical Hankel transforms `∫ f_k(r) j_ℓ(r ρ) r² dr` for `ℓ ≤ l_max`,
    /// returned as `out[k][ℓ]`.
    pub fn spherical_hankel(&self, l_max: usize, rho: f64) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; l_max + 1]; self.k_max + 1];
        let mut j = vec![0.0; l_max + 1];
        for (q, (&r, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            spherical_bessel_all(l_max, r * rho, &mut j);
            for k in 0..=self.k_max {
                let f = self.samples[k][q] * r * r * w;
                for (o, jl) in out[k].iter_mut().zip(&j) {
                    *o += f * jl;
                }
            }
        }
        out
    }
}

fn eval_seed(seed: &Seed, r: f64, omega_max: f64) -> f64 {
    if !(0.0..=omega_max).contains(&r) {
        return 0.0;
    }
    let mut buf = vec![0.0; seed.order + 1];
    bessel_j_all(seed.order, seed.zero * r / omega_max, &mut buf);
    buf[seed.order]
}

use super::block::KernelBlock;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const LANCZOS_TOL: f64 = 1e-8;
pub const LANCZOS_MAX_ITER: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpectrum {
    pub k1: usize,
    pub k2: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub nnz: usize,
    pub fill_ratio: f64,
    pub iterations: usize,
}

impl BlockSpectrum {
    pub fn condition_number(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// Extremal eigenvalues `(λ_min, λ_max, iterations)` of a symmetric operator
/// of dimension `n` by Lanczos with full reorthogonalization. Both Ritz
/// values must reach a residual `≤ tol · max|λ|`.
pub fn lanczos_extremes<F>(n: usize, apply: F, tol: f64, max_iter: usize, seed: u64) -> Result<(f64, f64, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(Error::Domain("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nrm = norm(&q);
    q.iter_mut().for_each(|v| *v /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let limit = max_iter.min(n);
    for it in 0..limit {
        apply(&basis[it], &mut w);
        let a = dot(&w, &basis[it]);
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let check = m == limit || b < 1e-14 * alpha.iter().fold(0.0f64, |s, v| s.max(v.abs())) || m % 10 == 0;
        if check {
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (mut imin, mut imax) = (0, 0);
            for i in 0..m {
                if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                    imin = i;
                }
                if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                    imax = i;
                }
            }
            let scale = eig.eigenvalues[imin].abs().max(eig.eigenvalues[imax].abs());
            let res_min = (b * eig.eigenvectors[(m - 1, imin)]).abs();
            let res_max = (b * eig.eigenvectors[(m - 1, imax)]).abs();
            let exhausted = m == n || b < 1e-14 * scale;
            if exhausted || (res_min <= tol * scale && res_max <= tol * scale) {
                return Ok((eig.eigenvalues[imin], eig.eigenvalues[imax], m));
            }
        }
        if m == limit {
            break;
        }
        beta.push(b);
        let next: Vec<f64> = w.iter().map(|v| v / b).collect();
        basis.push(next);
    }
    Err(Error::Lanczos(limit))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn block_spectral_stats(block: &KernelBlock) -> Result<BlockSpectrum> {
    let seed = (block.k1 * 1000 + block.k2) as u64;
    let (lambda_min, lambda_max, iterations) =
        lanczos_extremes(block.dim(), |x, y| block.apply_real(x, y), LANCZOS_TOL, LANCZOS_MAX_ITER, seed)?;
    Ok(BlockSpectrum {
        k1: block.k1,
        k2: block.k2,
        lambda_min,
        lambda_max,
        nnz: block.nnz(),
        fill_ratio: block.fill_ratio(),
        iterations,
    })
}

/// Straight-line fit `0.2358 + 0.1357 k` to the largest eigenvalue of `L̂^{k,k}`.
pub fn lambda_max_fit(k: usize) -> f64 {
    0.2358 + 0.1357 * k as f64
}

/// Conjectured condition-number envelope `1.4818 + 0.8524 min(k1, k2)`.
pub fn condition_fit(k: usize) -> f64 {
    1.4818 + 0.8524 * k as f64
}

//! Conjugate gradients on complex vectors and small dense helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    /// Stop once `‖r‖ ≤ tol · ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Declare stagnation when the residual fails to improve by this
    /// relative amount over `stagnation_window` iterations.
    pub stagnation_improvement: f64,
    pub stagnation_window: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            stagnation_improvement: 1e-3,
            stagnation_window: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    pub stagnated: bool,
    /// Relative residual after each iteration, starting with the initial one.
    pub residual_trace: Vec<f64>,
    /// Extreme Ritz values `(min, max)` of the operator on the Krylov space,
    /// recovered from the CG coefficients.
    pub ritz: Option<(f64, f64)>,
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` for a Hermitian positive semidefinite `A` given as a
/// closure, optionally with a diagonal preconditioner `inv_diag ≈ diag(A)⁻¹`.
pub fn conjugate_gradient<F>(mut apply: F, b: &[Complex64], inv_diag: Option<&[f64]>, opts: &CgOptions) -> CgOutcome
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let bnorm = norm(b);
    let mut x = vec![zero; n];
    if bnorm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            stagnated: false,
            residual_trace: vec![0.0],
            ritz: None,
        };
    }
    let precondition = |r: &[Complex64], z: &mut [Complex64]| match inv_diag {
        Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((z, r), d)| *z = r * d),
        None => z.copy_from_slice(r),
    };
    let mut r = b.to_vec();
    let mut z = vec![zero; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut ap = vec![zero; n];
    let mut trace = vec![1.0];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = false;
    let mut stagnated = false;
    let mut it = 0;
    while it < opts.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            stagnated = true;
            break;
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += p * alpha);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= a * alpha);
        it += 1;
        alphas.push(alpha);
        let rel = norm(&r) / bnorm;
        trace.push(rel);
        if rel <= opts.tol {
            converged = true;
            break;
        }
        let w = opts.stagnation_window;
        if w > 0 && it >= w && rel > trace[it - w] * (1.0 - opts.stagnation_improvement) {
            stagnated = true;
            break;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + *p * beta);
    }
    let ritz = (inv_diag.is_none() && !alphas.is_empty()).then(|| ritz_from_cg(&alphas, &betas));
    CgOutcome {
        x,
        iterations: it,
        rel_residual: *trace.last().unwrap(),
        converged,
        stagnated,
        residual_trace: trace,
        ritz,
    }
}

/// Extreme eigenvalues of the Lanczos tridiagonal implied by CG steps.
fn ritz_from_cg(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut d = 1.0 / alphas[j];
        if j > 0 {
            d += betas[j - 1] / alphas[j - 1];
        }
        t[(j, j)] = d;
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let e = SymmetricEigen::new(t).eigenvalues;
    (e.min(), e.max())
}

/// Eigenpairs of a Hermitian matrix sorted by descending eigenvalue.
pub fn hermitian_eigen_desc(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    if m.is_empty() {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `(M + Mᴴ) / 2`.
pub fn symmetrize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Largest `|M_ij − conj(M_ji)|`.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_dvector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

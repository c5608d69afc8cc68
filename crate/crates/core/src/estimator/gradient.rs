//! Finite-difference checks of the least-squares objectives whose normal
//! equations the solvers invert.
//!
//! `f(μ) = (1/n) Σ ‖Î_s − P̂_s μ‖²` has `∂f/∂μ̄ = Â_n μ − b̂_n`.
//! `g(Σ) = (1/n) Σ ‖r_s r_sᴴ − σ² c_q I − P̂_s Σ P̂_sᴴ‖²_F` with
//! `r_s = Î_s − P̂_s μ` has `∂g/∂Σ̄ = L̂_n Σ − B̂_n` where `B̂_n` uses the
//! empirical noise term.

use super::covariance::{accumulate_covariance_rhs, apply_empirical_l, NoiseTerm};
use super::data::CoefficientData;
use super::mean::{accumulate_a_blocks, accumulate_mean};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub const FD_STEP: f64 = 1e-5;

pub fn mean_objective(data: &CoefficientData, mu: &[Complex64]) -> f64 {
    let mut pm = vec![Complex64::new(0.0, 0.0); data.q_hat()];
    let mut total = 0.0;
    for s in 0..data.len() {
        data.projection(s).apply_raw(mu, &mut pm);
        total += data.image(s).iter().zip(&pm).map(|(i, m)| (i - m).norm_sqr()).sum::<f64>();
    }
    total / data.len() as f64
}

pub fn covariance_objective(data: &CoefficientData, mu: &[Complex64], sigma: &DMatrix<Complex64>) -> f64 {
    let q = data.q_hat();
    let s2 = data.noise_var();
    let mut pm = vec![Complex64::new(0.0, 0.0); q];
    let mut total = 0.0;
    for s in 0..data.len() {
        let proj = data.projection(s);
        proj.apply_raw(mu, &mut pm);
        let r: Vec<Complex64> = data.image(s).iter().zip(&pm).map(|(i, m)| i - m).collect();
        // P̂ Σ P̂ᴴ column by column.
        let p = sigma.nrows();
        let mut ps = DMatrix::<Complex64>::zeros(q, p);
        let mut col = vec![Complex64::new(0.0, 0.0); q];
        for j in 0..p {
            let c: Vec<Complex64> = sigma.column(j).iter().copied().collect();
            proj.apply_raw(&c, &mut col);
            ps.column_mut(j).copy_from_slice(&col);
        }
        let mut row = vec![Complex64::new(0.0, 0.0); q];
        for i in 0..q {
            let c: Vec<Complex64> = ps.row(i).iter().map(|z| z.conj()).collect();
            proj.apply_raw(&c, &mut row);
            for j in 0..q {
                let model = row[j].conj();
                let noise = if i == j { s2 } else { 0.0 };
                total += (r[i] * r[j].conj() - noise - model).norm_sqr();
            }
        }
    }
    total / data.len() as f64
}

/// `(∂f/∂Re z + i ∂f/∂Im z) / 2` for every coordinate by central differences.
fn wirtinger_fd(n: usize, mut f: impl FnMut(usize, Complex64) -> f64, h: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let dr = (f(i, Complex64::new(h, 0.0)) - f(i, Complex64::new(-h, 0.0))) / (2.0 * h);
            let di = (f(i, Complex64::new(0.0, h)) - f(i, Complex64::new(0.0, -h))) / (2.0 * h);
            Complex64::new(dr, di) * 0.5
        })
        .collect()
}

pub fn mean_gradient(data: &CoefficientData, mu: &[Complex64]) -> Vec<Complex64> {
    let b = accumulate_mean(data);
    let mut out = Vec::with_capacity(mu.len());
    let mut offset = 0;
    for a in accumulate_a_blocks(data) {
        let d = a.nrows();
        let x = nalgebra::DVector::from_column_slice(&mu[offset..offset + d]);
        out.extend((a * x).iter().copied());
        offset += d;
    }
    out.iter_mut().zip(b).for_each(|(o, b)| *o -= b);
    out
}

pub fn covariance_gradient(data: &CoefficientData, mu: &[Complex64], sigma: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    apply_empirical_l(data, sigma) - accumulate_covariance_rhs(data, mu, NoiseTerm::Empirical)
}

/// Largest `|analytic − finite difference|` over all coordinates of `μ`.
pub fn gradient_check_mean(data: &CoefficientData, mu: &[Complex64], h: f64) -> f64 {
    let analytic = mean_gradient(data, mu);
    let mut point = mu.to_vec();
    let fd = wirtinger_fd(
        mu.len(),
        |i, dz| {
            point[i] = mu[i] + dz;
            let v = mean_objective(data, &point);
            point[i] = mu[i];
            v
        },
        h,
    );
    analytic.iter().zip(&fd).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Largest `|analytic − finite difference|` over all entries of `Σ`, each
/// entry perturbed independently (no Hermitian coupling).
pub fn gradient_check_covariance(data: &CoefficientData, mu: &[Complex64], sigma: &DMatrix<Complex64>, h: f64) -> f64 {
    let analytic = covariance_gradient(data, mu, sigma);
    let p = sigma.nrows();
    let mut point = sigma.clone();
    let fd = wirtinger_fd(
        p * p,
        |k, dz| {
            let (i, j) = (k / p, k % p);
            point[(i, j)] = sigma[(i, j)] + dz;
            let v = covariance_objective(data, mu, &point);
            point[(i, j)] = sigma[(i, j)];
            v
        },
        h,
    );
    (0..p * p).map(|k| (analytic[(k / p, k % p)] - fd[k]).norm()).fold(0.0, f64::max)
}

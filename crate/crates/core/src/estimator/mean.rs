use super::data::{chunks, CoefficientData};
use crate::basis::index::v_block_dim;
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, hermitian_eigen_desc, CgOptions};
use crate::registry::Registry;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Images per partial sum in streaming accumulations.
pub(crate) const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mu: Vec<Complex64>,
    pub n_used: usize,
    /// `‖A μ − b‖ / ‖b‖` for the operator the solver used.
    pub residual_norm: f64,
    /// The near-singularity guard fired and `mu` was set to zero.
    pub flagged: bool,
    pub solver: String,
    pub iterations: usize,
    /// Estimated `‖A_n⁻¹‖` (empirical path only).
    pub inverse_norm: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanOptions {
    pub cg_tol: f64,
    /// Reject when `‖A_n⁻¹‖ > guard_factor · ‖Â⁻¹‖ = guard_factor · 2`.
    pub guard_factor: f64,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            guard_factor: 2.0,
        }
    }
}

pub trait MeanSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, data: &CoefficientData, b: &[Complex64], opts: &MeanOptions) -> Result<MeanEstimate>;
}

/// `b̂_n = (1/n) Σ P̂_sᴴ Î_s`.
pub fn accumulate_mean(data: &CoefficientData) -> Vec<Complex64> {
    let p = data.p_hat();
    let parts: Vec<Vec<Complex64>> = chunks(data.len(), CHUNK)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![Complex64::new(0.0, 0.0); p];
            let mut tmp = vec![Complex64::new(0.0, 0.0); p];
            for s in range {
                data.projection(s).backproject_raw(data.image(s), &mut tmp);
                acc.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
            }
            acc
        })
        .collect();
    let inv_n = 1.0 / data.len() as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); p];
    for part in parts {
        out.iter_mut().zip(part).for_each(|(o, v)| *o += v);
    }
    out.iter_mut().for_each(|o| *o *= inv_n);
    out
}

/// Diagonal blocks of `Â_n = (1/n) Σ P̂_sᴴ P̂_s`, one `d_k × d_k` per `k`.
pub fn accumulate_a_blocks(data: &CoefficientData) -> Vec<DMatrix<Complex64>> {
    let k_max = data.k_max();
    let zero_blocks = || -> Vec<Vec<Complex64>> { (0..=k_max).map(|k| vec![Complex64::new(0.0, 0.0); v_block_dim(k).pow(2)]).collect() };
    let parts: Vec<Vec<Vec<Complex64>>> = chunks(data.len(), CHUNK)
        .into_par_iter()
        .map(|range| {
            let mut acc = zero_blocks();
            for s in range {
                for (a, g) in acc.iter_mut().zip(data.projection(s).gram_blocks()) {
                    a.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                }
            }
            acc
        })
        .collect();
    let mut total = zero_blocks();
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.iter_mut().zip(p).for_each(|(t, p)| *t += p);
        }
    }
    let inv_n = 1.0 / data.len() as f64;
    total
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let d = v_block_dim(k);
            DMatrix::from_row_slice(d, d, &v) * Complex64::new(inv_n, 0.0)
        })
        .collect()
}

/// `μ̂_n = 2 b̂_n`, using `Â = ½ I`.
pub struct LimitingMean;

impl MeanSolver for LimitingMean {
    fn name(&self) -> &'static str {
        "limiting"
    }

    fn solve(&self, data: &CoefficientData, b: &[Complex64], _opts: &MeanOptions) -> Result<MeanEstimate> {
        Ok(MeanEstimate {
            mu: b.iter().map(|v| v * 2.0).collect(),
            n_used: data.len(),
            residual_norm: 0.0,
            flagged: false,
            solver: self.name().into(),
            iterations: 0,
            inverse_norm: None,
        })
    }
}

/// Solves `Â_n μ = b̂_n` block by block with CG.
pub struct EmpiricalMean;

impl MeanSolver for EmpiricalMean {
    fn name(&self) -> &'static str {
        "empirical"
    }

    fn solve(&self, data: &CoefficientData, b: &[Complex64], opts: &MeanOptions) -> Result<MeanEstimate> {
        let blocks = accumulate_a_blocks(data);
        let min_eig = blocks
            .iter()
            .map(|a| *hermitian_eigen_desc(a).0.last().expect("nonempty block"))
            .fold(f64::INFINITY, f64::min);
        let inverse_norm = if min_eig > 0.0 { 1.0 / min_eig } else { f64::INFINITY };
        let mut est = MeanEstimate {
            mu: vec![Complex64::new(0.0, 0.0); b.len()],
            n_used: data.len(),
            residual_norm: 0.0,
            flagged: false,
            solver: self.name().into(),
            iterations: 0,
            inverse_norm: Some(inverse_norm),
        };
        if inverse_norm > opts.guard_factor * 2.0 {
            log::warn!("mean guard: ‖A_n⁻¹‖ ≈ {inverse_norm:.3e} exceeds {}", opts.guard_factor * 2.0);
            est.flagged = true;
            return Ok(est);
        }
        let cg = CgOptions {
            tol: opts.cg_tol,
            max_iter: 10 * b.len().max(100),
            ..Default::default()
        };
        let mut offset = 0;
        let mut res2 = 0.0;
        for a in &blocks {
            let d = a.nrows();
            let rhs = &b[offset..offset + d];
            let out = conjugate_gradient(
                |x, y| {
                    let r = a * nalgebra::DVector::from_column_slice(x);
                    y.copy_from_slice(r.as_slice());
                },
                rhs,
                None,
                &cg,
            );
            if !out.converged {
                return Err(Error::Solver(format!(
                    "mean CG did not converge on a {d}-dimensional block; residual trace tail {:?}",
                    &out.residual_trace[out.residual_trace.len().saturating_sub(5)..]
                )));
            }
            est.iterations = est.iterations.max(out.iterations);
            res2 += (out.rel_residual * crate::linalg::norm(rhs)).powi(2);
            est.mu[offset..offset + d].copy_from_slice(&out.x);
            offset += d;
        }
        let bn = crate::linalg::norm(b);
        est.residual_norm = if bn > 0.0 { res2.sqrt() / bn } else { 0.0 };
        Ok(est)
    }
}

pub fn mean_solvers() -> Registry<dyn MeanSolver> {
    let mut r: Registry<dyn MeanSolver> = Registry::new("mean solver");
    r.register("limiting", Box::new(LimitingMean));
    r.register("empirical", Box::new(EmpiricalMean));
    r
}

/// Looks up `mode` in the default registry and solves.
pub fn solve_mean(data: &CoefficientData, b: &[Complex64], mode: &str, opts: &MeanOptions) -> Result<MeanEstimate> {
    mean_solvers().get(mode)?.solve(data, b, opts)
}

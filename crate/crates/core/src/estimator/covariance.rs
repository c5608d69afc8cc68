use super::data::{chunks, CoefficientData};
use super::mean::{accumulate_a_blocks, CHUNK};
use super::rank::{estimate_rank, fix_eigenvector_phases};
use crate::basis::index::{p_hat_for, v_block_dim, BasisIndexSet};
use crate::error::{Error, Result};
use crate::kernel::{BlockProvider, KernelBlock};
use crate::linalg::{conjugate_gradient, hermitian_eigen_desc, symmetrize, CgOptions};
use crate::registry::Registry;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// How the noise term `σ² c_q Â_n` in `B̂_n` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseTerm {
    /// `σ² c_q · ½ I`.
    Limiting,
    /// `σ² c_q · Â_n` from the data.
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceOptions {
    pub cg_tol: f64,
    /// Overrides the per-block iteration cap; `None` uses
    /// `max(200, ⌈cg_budget(k1, k2)⌉)`.
    pub max_iter: Option<usize>,
    pub jacobi: bool,
    /// Empirical path: reject when `‖L_n⁻¹‖ > guard_factor · 2π`.
    pub guard_factor: f64,
    pub rank_gap_delta: f64,
    /// Spikes smaller than this fraction of the top eigenvalue are not
    /// counted toward the rank.
    pub rank_min_ratio: f64,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-8,
            max_iter: None,
            jacobi: false,
            guard_factor: 2.0,
            rank_gap_delta: 0.5,
            rank_min_ratio: 0.02,
        }
    }
}

/// `10 √(1.4818 + 0.8524 min(k1, k2))`.
pub fn cg_budget(k1: usize, k2: usize) -> f64 {
    10.0 * crate::kernel::condition_fit(k1.min(k2)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSolveReport {
    pub k1: usize,
    pub k2: usize,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solver: String,
    pub blocks: Vec<BlockSolveReport>,
    /// A guard fired: the affected part of `Σ̂` was zeroed.
    pub flagged: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma: DMatrix<Complex64>,
    pub eigvals: Vec<f64>,
    pub eigvecs: DMatrix<Complex64>,
    pub rank_estimate: usize,
    pub solver_report: SolverReport,
}

/// Inputs shared by the covariance strategies. Each strategy reads what it
/// needs and errors if it is missing.
pub struct CovarianceProblem<'a> {
    pub index: &'a BasisIndexSet,
    pub rhs: &'a DMatrix<Complex64>,
    pub data: Option<&'a CoefficientData>,
    pub blocks: Option<&'a BlockProvider>,
}

pub trait CovarianceSolver: Send + Sync {
    fn name(&self) -> &'static str;
    /// Solves for `Σ̂_n` without eigendecomposition.
    fn solve_matrix(&self, problem: &CovarianceProblem, opts: &CovarianceOptions) -> Result<(DMatrix<Complex64>, SolverReport)>;

    fn solve(&self, problem: &CovarianceProblem, opts: &CovarianceOptions) -> Result<CovarianceEstimate> {
        let (sigma, report) = self.solve_matrix(problem, opts)?;
        Ok(finish_estimate(problem.index, sigma, report, opts))
    }
}

/// Symmetrizes, eigendecomposes, fixes eigenvector phases and estimates rank.
pub fn finish_estimate(index: &BasisIndexSet, mut sigma: DMatrix<Complex64>, report: SolverReport, opts: &CovarianceOptions) -> CovarianceEstimate {
    symmetrize(&mut sigma);
    let (eigvals, mut eigvecs) = hermitian_eigen_desc(&sigma);
    fix_eigenvector_phases(index, &mut eigvecs, eigvals.len().min(16));
    let rank_estimate = estimate_rank(&eigvals, opts.rank_gap_delta, opts.rank_min_ratio);
    CovarianceEstimate {
        sigma,
        eigvals,
        eigvecs,
        rank_estimate,
        solver_report: report,
    }
}

/// Adds partial results in chunk order so the sum does not depend on the
/// number of worker threads.
fn ordered_sum<T, F>(ranges: Vec<Range<usize>>, zero: impl Fn() -> T, map: F, add: impl Fn(&mut T, T)) -> T
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let group = rayon::current_num_threads().max(1);
    let mut total = zero();
    for batch in ranges.chunks(group) {
        let parts: Vec<T> = batch.par_iter().cloned().map(&map).collect();
        for p in parts {
            add(&mut total, p);
        }
    }
    total
}

/// `B̂_n = (1/n) Σ P̂ᴴ r rᴴ P̂ − σ² c_q · (noise operator)` with
/// `r = Î − P̂ μ̂_n`, built from outer products of backprojected residuals.
pub fn accumulate_covariance_rhs(data: &CoefficientData, mu: &[Complex64], noise: NoiseTerm) -> DMatrix<Complex64> {
    let p = data.p_hat();
    let q = data.q_hat();
    let (re, im) = ordered_sum(
        chunks(data.len(), CHUNK),
        || (DMatrix::<f64>::zeros(p, p), DMatrix::<f64>::zeros(p, p)),
        |range| {
            let len = range.len();
            let mut a = DMatrix::<f64>::zeros(p, len);
            let mut b = DMatrix::<f64>::zeros(p, len);
            let mut pm = vec![Complex64::new(0.0, 0.0); q];
            let mut y = vec![Complex64::new(0.0, 0.0); p];
            for (col, s) in range.enumerate() {
                let proj = data.projection(s);
                proj.apply_raw(mu, &mut pm);
                let r: Vec<Complex64> = data.image(s).iter().zip(&pm).map(|(i, m)| i - m).collect();
                proj.backproject_raw(&r, &mut y);
                for (row, v) in y.iter().enumerate() {
                    a[(row, col)] = v.re;
                    b[(row, col)] = v.im;
                }
            }
            let at = a.transpose();
            let bt = b.transpose();
            let mut re = &a * &at;
            re.gemm(1.0, &b, &bt, 1.0);
            let c = &b * &at;
            let im = &c - c.transpose();
            (re, im)
        },
        |t, (r, i)| {
            t.0 += r;
            t.1 += i;
        },
    );
    let inv_n = 1.0 / data.len() as f64;
    let mut out = DMatrix::from_fn(p, p, |i, j| Complex64::new(re[(i, j)], im[(i, j)]) * inv_n);
    let s2 = data.noise_var();
    if s2 > 0.0 {
        match noise {
            NoiseTerm::Limiting => {
                for i in 0..p {
                    out[(i, i)] -= s2 * 0.5;
                }
            }
            NoiseTerm::Empirical => {
                let mut offset = 0;
                for a in accumulate_a_blocks(data) {
                    let d = a.nrows();
                    for i in 0..d {
                        for j in 0..d {
                            out[(offset + i, offset + j)] -= a[(i, j)] * s2;
                        }
                    }
                    offset += d;
                }
            }
        }
    }
    out
}

/// Block `(k1, k2)` of a `p̂ × p̂` matrix, flattened row-major.
pub fn extract_block(m: &DMatrix<Complex64>, index: &BasisIndexSet, k1: usize, k2: usize) -> Vec<Complex64> {
    let (r, c) = (index.v_block(k1), index.v_block(k2));
    let mut out = Vec::with_capacity(r.len() * c.len());
    for i in r {
        for j in c.clone() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn insert_block(m: &mut DMatrix<Complex64>, index: &BasisIndexSet, k1: usize, k2: usize, v: &[Complex64]) {
    let (r, c) = (index.v_block(k1), index.v_block(k2));
    let d2 = c.len();
    for (a, i) in r.enumerate() {
        for (b, j) in c.clone().enumerate() {
            m[(i, j)] = v[a * d2 + b];
        }
    }
}

/// `L̂ Σ` with the limiting operator, block by block.
pub fn apply_limiting_l(sigma: &DMatrix<Complex64>, index: &BasisIndexSet, blocks: &BlockProvider) -> Result<DMatrix<Complex64>> {
    let p = index.p_hat();
    let mut out = DMatrix::<Complex64>::zeros(p, p);
    for k1 in 0..=index.k_max() {
        for k2 in 0..=index.k_max() {
            let b = blocks.block(k1, k2)?;
            let x = extract_block(sigma, index, k1, k2);
            let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
            b.apply(&x, &mut y);
            insert_block(&mut out, index, k1, k2, &y);
        }
    }
    Ok(out)
}

/// Solves one block system `L̂^{k1,k2} x = b`.
pub fn solve_block(block: &KernelBlock, rhs: &[Complex64], opts: &CovarianceOptions) -> (Vec<Complex64>, BlockSolveReport) {
    let budget = cg_budget(block.k1, block.k2);
    let cg = CgOptions {
        tol: opts.cg_tol,
        max_iter: opts.max_iter.unwrap_or_else(|| (budget.ceil() as usize).max(200)),
        ..Default::default()
    };
    let inv: Option<Vec<f64>> = opts.jacobi.then(|| block.diagonal().iter().map(|d| 1.0 / d).collect());
    let out = conjugate_gradient(|x, y| block.apply(x, y), rhs, inv.as_deref(), &cg);
    let report = BlockSolveReport {
        k1: block.k1,
        k2: block.k2,
        iterations: out.iterations,
        rel_residual: out.rel_residual,
        converged: out.converged,
        budget,
    };
    (out.x, report)
}

/// Inverts the limiting operator `L̂` one `(k1, k2)` block at a time.
pub struct LimitingCovariance;

impl CovarianceSolver for LimitingCovariance {
    fn name(&self) -> &'static str {
        "limiting"
    }

    fn solve_matrix(&self, problem: &CovarianceProblem, opts: &CovarianceOptions) -> Result<(DMatrix<Complex64>, SolverReport)> {
        let provider = problem
            .blocks
            .ok_or_else(|| Error::Config("the limiting covariance solver needs kernel blocks".into()))?;
        let index = problem.index;
        let p = index.p_hat();
        let mut sigma = DMatrix::<Complex64>::zeros(p, p);
        let mut report = SolverReport {
            solver: self.name().into(),
            blocks: Vec::new(),
            flagged: false,
            notes: Vec::new(),
        };
        for k1 in 0..=index.k_max() {
            for k2 in k1..=index.k_max() {
                let block = provider.block(k1, k2)?;
                let rhs = extract_block(problem.rhs, index, k1, k2);
                let (x, r) = solve_block(&block, &rhs, opts);
                if r.converged {
                    insert_block(&mut sigma, index, k1, k2, &x);
                    if k1 != k2 {
                        let (d1, d2) = (v_block_dim(k1), v_block_dim(k2));
                        let mut xt = vec![Complex64::new(0.0, 0.0); x.len()];
                        for i in 0..d1 {
                            for j in 0..d2 {
                                xt[j * d1 + i] = x[i * d2 + j].conj();
                            }
                        }
                        insert_block(&mut sigma, index, k2, k1, &xt);
                    }
                } else {
                    report.flagged = true;
                    report.notes.push(format!(
                        "block ({k1},{k2}) stopped after {} iterations at residual {:.2e}; set to zero",
                        r.iterations, r.rel_residual
                    ));
                }
                report.blocks.push(r);
            }
        }
        Ok((sigma, report))
    }
}

fn to_row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `L̂_n Σ = (1/n) Σ_s P̂ᴴ (P̂ Σ P̂ᴴ) P̂` on row-major `p̂ × p̂` slices.
pub fn apply_empirical_l_raw(data: &CoefficientData, sigma: &[Complex64], out: &mut [Complex64]) {
    let k_max = data.k_max();
    let p = data.p_hat();
    let q = data.q_hat();
    let zero = Complex64::new(0.0, 0.0);
    let vol_off: Vec<usize> = (0..=k_max).scan(0, |o, k| {
        let s = *o;
        *o += v_block_dim(k);
        Some(s)
    }).collect();
    let img_off: Vec<usize> = (0..=k_max).map(|k| k * (k + 1) / 2).collect();
    let total = ordered_sum(
        chunks(data.len(), CHUNK),
        || vec![zero; p * p],
        |range| {
            let mut acc = vec![zero; p * p];
            let mut t = vec![zero; q * p];
            let mut m = vec![zero; q * q];
            let mut u = vec![zero; p * q];
            for s in range {
                let proj = data.projection(s);
                // T = P̂ Σ  (q̂ × p̂)
                t.fill(zero);
                for k in 0..=k_max {
                    let d = v_block_dim(k);
                    let blk = proj.block(k);
                    for r in 0..=k {
                        let trow = &mut t[(img_off[k] + r) * p..(img_off[k] + r + 1) * p];
                        for c in 0..d {
                            let a = blk[r * d + c];
                            if a == zero {
                                continue;
                            }
                            let srow = &sigma[(vol_off[k] + c) * p..(vol_off[k] + c + 1) * p];
                            trow.iter_mut().zip(srow).for_each(|(x, y)| *x += a * y);
                        }
                    }
                }
                // M = T P̂ᴴ  (q̂ × q̂)
                for i in 0..q {
                    let trow = &t[i * p..(i + 1) * p];
                    for k in 0..=k_max {
                        let d = v_block_dim(k);
                        let blk = proj.block(k);
                        let tseg = &trow[vol_off[k]..vol_off[k] + d];
                        for r in 0..=k {
                            m[i * q + img_off[k] + r] = tseg.iter().zip(&blk[r * d..(r + 1) * d]).map(|(x, a)| x * a.conj()).sum();
                        }
                    }
                }
                // U = P̂ᴴ M  (p̂ × q̂)
                u.fill(zero);
                for k in 0..=k_max {
                    let d = v_block_dim(k);
                    let blk = proj.block(k);
                    for r in 0..=k {
                        let mrow = &m[(img_off[k] + r) * q..(img_off[k] + r + 1) * q];
                        for c in 0..d {
                            let a = blk[r * d + c].conj();
                            if a == zero {
                                continue;
                            }
                            let urow = &mut u[(vol_off[k] + c) * q..(vol_off[k] + c + 1) * q];
                            urow.iter_mut().zip(mrow).for_each(|(x, y)| *x += a * y);
                        }
                    }
                }
                // acc += U P̂
                for j in 0..p {
                    let urow = &u[j * q..(j + 1) * q];
                    let arow = &mut acc[j * p..(j + 1) * p];
                    for k in 0..=k_max {
                        let d = v_block_dim(k);
                        let blk = proj.block(k);
                        for r in 0..=k {
                            let w = urow[img_off[k] + r];
                            if w == zero {
                                continue;
                            }
                            let seg = &mut arow[vol_off[k]..vol_off[k] + d];
                            seg.iter_mut().zip(&blk[r * d..(r + 1) * d]).for_each(|(x, a)| *x += w * a);
                        }
                    }
                }
            }
            acc
        },
        |t, part| t.iter_mut().zip(part).for_each(|(a, b)| *a += b),
    );
    let inv_n = 1.0 / data.len() as f64;
    out.iter_mut().zip(total).for_each(|(o, v)| *o = v * inv_n);
}

pub fn apply_empirical_l(data: &CoefficientData, sigma: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let p = data.p_hat();
    let mut out = vec![Complex64::new(0.0, 0.0); p * p];
    apply_empirical_l_raw(data, &to_row_major(sigma), &mut out);
    DMatrix::from_row_slice(p, p, &out)
}

/// Matrix-free CG on the empirical operator `L̂_n`.
pub struct EmpiricalCovariance;

impl CovarianceSolver for EmpiricalCovariance {
    fn name(&self) -> &'static str {
        "empirical"
    }

    fn solve_matrix(&self, problem: &CovarianceProblem, opts: &CovarianceOptions) -> Result<(DMatrix<Complex64>, SolverReport)> {
        let data = problem
            .data
            .ok_or_else(|| Error::Config("the empirical covariance solver needs the dataset".into()))?;
        let p = p_hat_for(data.k_max());
        let q = data.q_hat();
        let mut report = SolverReport {
            solver: self.name().into(),
            blocks: Vec::new(),
            flagged: false,
            notes: Vec::new(),
        };
        let zero = DMatrix::<Complex64>::zeros(p, p);
        // Each term maps through q̂ × q̂ matrices, so rank(L̂_n) ≤ n q̂².
        if data.len() * q * q < p * p {
            report.flagged = true;
            report.notes.push(format!("L_n has rank at most {} < {}; estimate set to zero", data.len() * q * q, p * p));
            return Ok((zero, report));
        }
        let budget = cg_budget(data.k_max(), data.k_max());
        let cg = CgOptions {
            tol: opts.cg_tol,
            max_iter: opts.max_iter.unwrap_or_else(|| (budget.ceil() as usize).max(200)),
            ..Default::default()
        };
        let rhs = to_row_major(problem.rhs);
        let out = conjugate_gradient(|x, y| apply_empirical_l_raw(data, x, y), &rhs, None, &cg);
        report.blocks.push(BlockSolveReport {
            k1: data.k_max(),
            k2: data.k_max(),
            iterations: out.iterations,
            rel_residual: out.rel_residual,
            converged: out.converged,
            budget,
        });
        let floor = 1.0 / (opts.guard_factor * 2.0 * std::f64::consts::PI);
        if let Some((lo, _)) = out.ritz {
            if lo < floor {
                report.flagged = true;
                report.notes.push(format!("Ritz value {lo:.3e} below {floor:.3e}: L_n is near singular; estimate set to zero"));
                return Ok((zero, report));
            }
        }
        if !out.converged {
            report.flagged = true;
            let why = if out.stagnated { "stagnated" } else { "hit the iteration cap" };
            report.notes.push(format!("CG {why} at residual {:.2e}; estimate set to zero", out.rel_residual));
            return Ok((zero, report));
        }
        Ok((DMatrix::from_row_slice(p, p, &out.x), report))
    }
}

pub fn covariance_solvers() -> Registry<dyn CovarianceSolver> {
    let mut r: Registry<dyn CovarianceSolver> = Registry::new("covariance solver");
    r.register("limiting", Box::new(LimitingCovariance));
    r.register("empirical", Box::new(EmpiricalCovariance));
    r
}

pub fn solve_covariance(problem: &CovarianceProblem, mode: &str, opts: &CovarianceOptions) -> Result<CovarianceEstimate> {
    covariance_solvers().get(mode)?.solve(problem, opts)
}

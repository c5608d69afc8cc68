use super::container::{into_c64, ArrayData, Container};
use crate::error::{Error, Result};
use crate::estimator::{CovarianceEstimate, MeanEstimate, SolverReport};
use crate::pipeline::Estimates;
use crate::simulate::row_major;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

pub const ESTIMATE_KIND: &str = "estimate";
pub const VOLUMES_KIND: &str = "volumes";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MeanMeta {
    n_used: usize,
    residual_norm: f64,
    flagged: bool,
    solver: String,
    iterations: usize,
    inverse_norm: Option<f64>,
}

/// Header of an estimate file. `source` is the dataset fingerprint and
/// `config_hash` the pipeline configuration it was built with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub p_hat: usize,
    pub k_max: usize,
    pub eigvals: Vec<f64>,
    pub rank_estimate: usize,
    pub solver_report: SolverReport,
    pub sigma2: f64,
    pub source: serde_json::Value,
    pub config_hash: String,
    mean: MeanMeta,
}

pub fn write_estimates(path: &Path, est: &Estimates, k_max: usize, sigma2: f64, source: serde_json::Value, config_hash: &str) -> Result<()> {
    let m = &est.mean;
    let c = &est.covariance;
    let meta = EstimateMeta {
        p_hat: m.mu.len(),
        k_max,
        eigvals: c.eigvals.clone(),
        rank_estimate: c.rank_estimate,
        solver_report: c.solver_report.clone(),
        sigma2,
        source,
        config_hash: config_hash.into(),
        mean: MeanMeta {
            n_used: m.n_used,
            residual_norm: m.residual_norm,
            flagged: m.flagged,
            solver: m.solver.clone(),
            iterations: m.iterations,
            inverse_norm: m.inverse_norm,
        },
    };
    Container::new(ESTIMATE_KIND, serde_json::to_value(&meta)?)
        .with("mu", ArrayData::C64(m.mu.clone()))
        .with("sigma", ArrayData::C64(row_major(&c.sigma)))
        .with("eigvecs", ArrayData::C64(row_major(&c.eigvecs)))
        .write(path)
}

fn square(v: Vec<Complex64>, p: usize, what: &str) -> Result<DMatrix<Complex64>> {
    if v.len() != p * p {
        return Err(Error::Format(format!("{what} holds {} values, expected {}", v.len(), p * p)));
    }
    Ok(DMatrix::from_row_slice(p, p, &v))
}

pub fn read_estimates(path: &Path) -> Result<(Estimates, EstimateMeta)> {
    let mut c = Container::read(path)?;
    if c.kind != ESTIMATE_KIND {
        return Err(Error::Format(format!("{} holds a `{}`, not an estimate", path.display(), c.kind)));
    }
    let meta: EstimateMeta = serde_json::from_value(c.meta.clone())?;
    let p = meta.p_hat;
    let mu = into_c64(c.take("mu")?)?;
    if mu.len() != p {
        return Err(Error::Format(format!("mean holds {} values, expected {p}", mu.len())));
    }
    let sigma = square(into_c64(c.take("sigma")?)?, p, "sigma")?;
    let eigvecs = square(into_c64(c.take("eigvecs")?)?, p, "eigvecs")?;
    let mm = &meta.mean;
    let est = Estimates {
        mean: MeanEstimate {
            mu,
            n_used: mm.n_used,
            residual_norm: mm.residual_norm,
            flagged: mm.flagged,
            solver: mm.solver.clone(),
            iterations: mm.iterations,
            inverse_norm: mm.inverse_norm,
        },
        covariance: CovarianceEstimate {
            sigma,
            eigvals: meta.eigvals.clone(),
            eigvecs,
            rank_estimate: meta.rank_estimate,
            solver_report: meta.solver_report.clone(),
        },
    };
    Ok((est, meta))
}

/// Class volumes in coefficient space, one array per class.
pub fn write_volumes(path: &Path, k_max: usize, omega_max: f64, volumes: &[Vec<Complex64>], weights: &[f64], config_hash: &str) -> Result<()> {
    let meta = json!({ "k_max": k_max, "omega_max": omega_max, "classes": volumes.len(), "weights": weights, "config_hash": config_hash });
    let mut c = Container::new(VOLUMES_KIND, meta);
    for (i, v) in volumes.iter().enumerate() {
        c = c.with(&format!("class_{i}"), ArrayData::C64(v.clone()));
    }
    c.write(path)
}

pub fn read_volumes(path: &Path) -> Result<(Vec<Vec<Complex64>>, serde_json::Value)> {
    let mut c = Container::read(path)?;
    if c.kind != VOLUMES_KIND {
        return Err(Error::Format(format!("{} holds a `{}`, not volumes", path.display(), c.kind)));
    }
    let n = c.meta["classes"].as_u64().ok_or_else(|| Error::Format("volume file lacks a class count".into()))? as usize;
    let vols = (0..n).map(|i| into_c64(c.take(&format!("class_{i}"))?)).collect::<Result<Vec<_>>>()?;
    Ok((vols, c.meta))
}

//! End-to-end heterogeneity analysis: noise level, basis and image mapping,
//! mean and covariance, rank, per-image coordinates, mixture fit and class
//! volumes.

pub mod coords;
pub mod mixture;

pub use coords::{estimate_coordinates, CoordinateSet};
pub use mixture::{mixture_fitters, EmOptions, GaussianMixture, MixtureFitter};

use crate::basis::index::BasisIndexSet;
use crate::basis::radial::{default_quad_order, RadialBasis};
use crate::error::{Error, Result, StageContext};
use crate::estimator::{
    accumulate_covariance_rhs, accumulate_mean, solve_covariance, solve_mean, CoefficientData, CovarianceEstimate, CovarianceOptions,
    CovarianceProblem, MeanEstimate, MeanOptions, NoiseTerm, SolverReport,
};
use crate::io::Dataset;
use crate::kernel::BlockProvider;
use crate::projection::pixel::PixelMap;
use crate::simulate::estimate_sigma2_from_corners;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::time::Instant;

/// Upper limit on the number of eigenvectors used as coordinates.
pub const MAX_CLASSES: usize = 16;

/// Where the pixel noise variance comes from when no override is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma2Source {
    /// Dataset metadata, falling back to the corners when absent.
    Metadata,
    Corners,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mean_solver: String,
    pub covariance_solver: String,
    pub noise_term: NoiseTerm,
    pub mean: MeanOptions,
    pub covariance: CovarianceOptions,
    /// Overrides `C = r + 1`.
    pub classes: Option<usize>,
    pub mixture: String,
    pub em: EmOptions,
    pub sigma2_source: Sigma2Source,
    /// Fixed pixel noise variance; wins over `sigma2_source`.
    pub sigma2: Option<f64>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mean_solver: "limiting".into(),
            covariance_solver: "limiting".into(),
            noise_term: NoiseTerm::Limiting,
            mean: MeanOptions::default(),
            covariance: CovarianceOptions::default(),
            classes: None,
            mixture: "isotropic".into(),
            em: EmOptions::default(),
            sigma2_source: Sigma2Source::Metadata,
            sigma2: None,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    /// Checks names and ranges before any stage runs.
    pub fn validate(&self) -> Result<()> {
        crate::estimator::mean_solvers().get(&self.mean_solver)?;
        crate::estimator::covariance_solvers().get(&self.covariance_solver)?;
        mixture_fitters().get(&self.mixture)?;
        if !(self.covariance.cg_tol > 0.0) || !(self.mean.cg_tol > 0.0) {
            return Err(Error::Config("CG tolerances must be positive".into()));
        }
        if !(self.covariance.rank_gap_delta >= 0.0) {
            return Err(Error::Config("rank_gap_delta must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.covariance.rank_min_ratio) {
            return Err(Error::Config("rank_min_ratio must lie in [0, 1)".into()));
        }
        if !(self.covariance.guard_factor > 1.0) || !(self.mean.guard_factor > 1.0) {
            return Err(Error::Config("guard factors must exceed 1".into()));
        }
        if let Some(c) = self.classes {
            if c == 0 || c > MAX_CLASSES + 1 {
                return Err(Error::Config(format!("classes must lie in 1..={}", MAX_CLASSES + 1)));
            }
        }
        if let Some(s) = self.sigma2 {
            if !(s >= 0.0) {
                return Err(Error::Config(format!("sigma2 {s} must be nonnegative")));
            }
        }
        if self.em.max_iter == 0 || !(self.em.tol > 0.0) {
            return Err(Error::Config("EM needs max_iter ≥ 1 and tol > 0".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        crate::io::config_hash(&serde_json::to_value(self).expect("config serializes"))
    }
}

/// Basis, pixel map and the images in coefficient space.
pub struct Prepared {
    pub index: BasisIndexSet,
    pub basis: RadialBasis,
    pub map: PixelMap,
    pub data: CoefficientData,
    pub sigma2: f64,
    pub sigma2_source: String,
}

/// Noise level, basis construction and image mapping.
pub fn prepare(dataset: &Dataset, config: &PipelineConfig) -> Result<Prepared> {
    let meta = &dataset.meta;
    let (sigma2, source) = match (config.sigma2, config.sigma2_source, meta.sigma2) {
        (Some(s), _, _) => (s, "config"),
        (None, Sigma2Source::Metadata, Some(s)) => (s, "metadata"),
        _ => (estimate_sigma2_from_corners(&dataset.images, meta.n_pix), "corners"),
    };
    let basis = RadialBasis::build(meta.k_max, meta.omega_max, default_quad_order(meta.k_max)).stage("basis")?;
    let index = BasisIndexSet::new(meta.k_max);
    let map = PixelMap::build(meta.n_pix, &basis, &index).stage("pixel map")?;
    let data = CoefficientData::from_pixels(&map, dataset.rotations.clone(), &dataset.images, sigma2).stage("image mapping")?;
    Ok(Prepared {
        index,
        basis,
        map,
        data,
        sigma2,
        sigma2_source: source.into(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimates {
    pub mean: MeanEstimate,
    pub covariance: CovarianceEstimate,
}

/// Mean and covariance solves plus the spectrum.
pub fn estimate(data: &CoefficientData, index: &BasisIndexSet, config: &PipelineConfig) -> Result<Estimates> {
    let b = accumulate_mean(data);
    let mean = solve_mean(data, &b, &config.mean_solver, &config.mean).stage("mean")?;
    let rhs = accumulate_covariance_rhs(data, &mean.mu, config.noise_term);
    let blocks = BlockProvider::new(data.k_max(), config.cache_dir.clone());
    let problem = CovarianceProblem {
        index,
        rhs: &rhs,
        data: Some(data),
        blocks: Some(&blocks),
    };
    let covariance = solve_covariance(&problem, &config.covariance_solver, &config.covariance).stage("covariance")?;
    Ok(Estimates { mean, covariance })
}

/// Mixture over the coordinates, with complex means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub fitter: String,
    pub c: usize,
    pub means: Vec<Vec<Complex64>>,
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: usize,
}

/// EM over the real embedding of the coordinates.
pub fn fit_mixture(coords: &CoordinateSet, c: usize, fitter: &str, opts: &EmOptions) -> Result<MixtureModel> {
    let reg = mixture_fitters();
    let f = reg.get(fitter)?;
    let g = f.fit(&coords.real_embedding(), c, opts)?;
    Ok(MixtureModel {
        fitter: f.name().into(),
        c,
        means: g.means.iter().map(|m| m.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()).collect(),
        weights: g.weights,
        variances: g.variances,
        loglik: g.loglik,
        loglik_trace: g.loglik_trace,
        iterations: g.iterations,
        converged: g.converged,
        reseeds: g.reseeds,
    })
}

/// `X^c = μ + Σ_c' m^c_c' v_c'` for each component mean.
pub fn reconstruct_volumes(mu: &[Complex64], eigvecs: &DMatrix<Complex64>, mixture: &MixtureModel) -> Vec<Vec<Complex64>> {
    mixture
        .means
        .iter()
        .map(|m| {
            let mut x = mu.to_vec();
            for (c, a) in m.iter().enumerate() {
                x.iter_mut().zip(eigvecs.column(c).iter()).for_each(|(x, v)| *x += a * v);
            }
            x
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub classes: usize,
    pub classes_overridden: bool,
    pub coords: CoordinateSet,
    pub mixture: MixtureModel,
    pub volumes: Vec<Vec<Complex64>>,
}

/// Coordinates, mixture and volumes with `C = r + 1` unless overridden.
pub fn analyze(data: &CoefficientData, est: &Estimates, config: &PipelineConfig) -> Result<Analysis> {
    let rank = est.covariance.rank_estimate.min(MAX_CLASSES);
    let classes = config.classes.unwrap_or(rank + 1);
    let dim = classes - 1;
    if dim > est.covariance.eigvecs.ncols() {
        return Err(Error::Config(format!("{classes} classes exceed the {} available eigenvectors", est.covariance.eigvecs.ncols())));
    }
    let coords = estimate_coordinates(data, &est.mean.mu, &est.covariance.eigvecs, dim).stage("coordinates")?;
    if coords.flagged_count() > 0 {
        log::warn!("{} images had a rank-deficient coordinate design", coords.flagged_count());
    }
    let mixture = fit_mixture(&coords, classes, &config.mixture, &config.em).stage("mixture")?;
    let volumes = reconstruct_volumes(&est.mean.mu, &est.covariance.eigvecs, &mixture);
    Ok(Analysis {
        classes,
        classes_overridden: config.classes.is_some(),
        coords,
        mixture,
        volumes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub solver: String,
    pub flagged: bool,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Machine-readable record of a run. Holds no timings so that identical
/// inputs give identical reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n_images: usize,
    pub k_max: usize,
    pub p_hat: usize,
    pub sigma2: f64,
    pub sigma2_source: String,
    pub rank_estimate: usize,
    pub classes: usize,
    pub classes_overridden: bool,
    pub probabilities: Vec<f64>,
    /// Leading eigenvalues, descending.
    pub eigvals: Vec<f64>,
    pub mean: MeanSummary,
    pub covariance: SolverReport,
    pub mixture: MixtureModel,
    pub flagged_coordinates: usize,
    pub config_hash: String,
}

/// Number of eigenvalues copied into the report.
pub const REPORT_EIGVALS: usize = 64;

pub fn build_report(prep_n: usize, k_max: usize, sigma2: f64, sigma2_source: &str, est: &Estimates, an: &Analysis, config: &PipelineConfig) -> PipelineReport {
    PipelineReport {
        n_images: prep_n,
        k_max,
        p_hat: est.mean.mu.len(),
        sigma2,
        sigma2_source: sigma2_source.into(),
        rank_estimate: est.covariance.rank_estimate,
        classes: an.classes,
        classes_overridden: an.classes_overridden,
        probabilities: an.mixture.weights.clone(),
        eigvals: est.covariance.eigvals.iter().take(REPORT_EIGVALS).copied().collect(),
        mean: MeanSummary {
            solver: est.mean.solver.clone(),
            flagged: est.mean.flagged,
            residual_norm: est.mean.residual_norm,
            iterations: est.mean.iterations,
        },
        covariance: est.covariance.solver_report.clone(),
        mixture: an.mixture.clone(),
        flagged_coordinates: an.coords.flagged_count(),
        config_hash: config.hash(),
    }
}

pub struct PipelineOutput {
    pub prepared: Prepared,
    pub estimates: Estimates,
    pub analysis: Analysis,
    pub report: PipelineReport,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(&'static str, f64)>,
}

/// Runs every stage in order.
pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate().stage("config")?;
    let mut timings = Vec::new();
    let t = Instant::now();
    let prepared = prepare(dataset, config)?;
    timings.push(("prepare", t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let estimates = estimate(&prepared.data, &prepared.index, config)?;
    timings.push(("estimate", t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let analysis = analyze(&prepared.data, &estimates, config)?;
    timings.push(("analyze", t.elapsed().as_secs_f64()));
    let report = build_report(
        prepared.data.len(),
        prepared.data.k_max(),
        prepared.sigma2,
        &prepared.sigma2_source,
        &estimates,
        &analysis,
        config,
    );
    Ok(PipelineOutput {
        prepared,
        estimates,
        analysis,
        report,
        timings,
    })
}

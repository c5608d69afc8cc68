//! Synthetic ground truth: Gaussian-blob phantoms, exact projections, noise
//! at a prescribed heterogeneity SNR, and the matching coefficient-space
//! mean and covariance.

pub mod desk;
pub mod phantom;

pub use phantom::{phantom_to_coeffs, phantoms_to_coeffs, project_phantom_analytic, Blob, Phantom};

use crate::basis::radial::{default_quad_order, RadialBasis};
use crate::basis::transforms::grid_center;
use crate::basis::{omega_max_for, BasisIndexSet};
use crate::error::{Error, Result};
use crate::io::container::{into_c64, into_f64, into_u32, ArrayData, Container};
use crate::io::dataset::{Dataset, DatasetMeta};
use crate::linalg::hermitian_eigen_desc;
use crate::projection::pixel::{disc_pixels, PIXEL_CONVENTION};
use crate::projection::rotation::Rotation;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub phantom: Phantom,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Heterogeneity {
    Discrete { classes: Vec<ClassSpec> },
    /// Volumes drawn uniformly from the perimeter of the triangle whose
    /// vertices are the three phantoms.
    Triangle { vertices: Vec<Phantom> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Image side length `N`.
    pub n_pix: usize,
    pub n_res: usize,
    pub k_max: usize,
    /// `None` means noiseless.
    pub snr_het: Option<f64>,
    pub seed: u64,
    pub heterogeneity: Heterogeneity,
}

impl SimConfig {
    pub fn omega_max(&self) -> f64 {
        omega_max_for(self.n_res)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.n_res > self.n_pix {
            return Err(Error::Config(format!("N_res = {} exceeds N = {}", self.n_res, self.n_pix)));
        }
        if let Some(s) = self.snr_het {
            if !(s > 0.0) {
                return Err(Error::Config(format!("snr_het must be positive, got {s}")));
            }
        }
        match &self.heterogeneity {
            Heterogeneity::Discrete { classes } => {
                if classes.is_empty() {
                    return Err(Error::Config("at least one class is required".into()));
                }
                let total: f64 = classes.iter().map(|c| c.probability).sum();
                if classes.iter().any(|c| !(c.probability >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("class probabilities must be nonnegative and sum to 1, got {total}")));
                }
                classes.iter().try_for_each(|c| c.phantom.validate())
            }
            Heterogeneity::Triangle { vertices } => {
                if vertices.len() != 3 {
                    return Err(Error::Config(format!("a triangle needs 3 vertices, got {}", vertices.len())));
                }
                vertices.iter().try_for_each(|v| v.validate())
            }
        }
    }
}

/// Oracle-only description of the simulated population.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub k_max: usize,
    pub kind: String,
    /// Class or vertex volumes in coefficient space.
    pub volumes: Vec<Vec<Complex64>>,
    /// Class probabilities, or for a triangle the mixing weight of each
    /// vertex in the mean.
    pub probabilities: Vec<f64>,
    /// Per image: class index, or edge index for a triangle.
    pub labels: Vec<u32>,
    /// Per image position along its edge (triangle only).
    pub positions: Vec<f64>,
    pub mu0: Vec<Complex64>,
    pub sigma0: DMatrix<Complex64>,
    pub sigma0_eigvals: Vec<f64>,
    pub sigma0_eigvecs: DMatrix<Complex64>,
    pub noise: NoiseReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub sigma2: f64,
    pub p_signal_het: f64,
    pub p_signal: f64,
    pub snr_het_target: Option<f64>,
    /// Conventional `P(signal) / P(noise)`.
    pub snr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

const STREAM_CLASS: u64 = 1;
const STREAM_ROTATION: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Independent stream for `purpose`, positioned at image `index`. Draws for
/// one image never depend on how other images were scheduled.
pub fn substream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(purpose);
    r.set_word_pos((index as u128) << 32);
    r
}

/// `P(noise) = (N_res² / N²) σ²`.
pub fn noise_power(sigma2: f64, n_pix: usize, n_res: usize) -> f64 {
    sigma2 * (n_res * n_res) as f64 / (n_pix * n_pix) as f64
}

/// `σ²` giving `P(signal_het) / P(noise) = snr_het`.
pub fn sigma2_for_snr(p_signal_het: f64, snr_het: Option<f64>, n_pix: usize, n_res: usize) -> Result<f64> {
    match snr_het {
        None => Ok(0.0),
        Some(snr) if p_signal_het > 0.0 => Ok(p_signal_het / (snr * noise_power(1.0, n_pix, n_res))),
        Some(_) => Err(Error::Simulation("heterogeneity signal is zero; a finite SNR_het is undefined".into())),
    }
}

/// Sample variance over all pixels outside the unit disc.
pub fn estimate_sigma2_from_corners(images: &[f32], n_pix: usize) -> f64 {
    let corners: Vec<usize> = (0..n_pix * n_pix)
        .filter(|&f| {
            let (x, y) = (grid_center(f % n_pix, n_pix), grid_center(f / n_pix, n_pix));
            x * x + y * y > 1.0
        })
        .collect();
    let npix = n_pix * n_pix;
    let (mut sum, mut sum2, mut count) = (0.0f64, 0.0f64, 0usize);
    for img in images.chunks(npix) {
        for &f in &corners {
            let v = img[f] as f64;
            sum += v;
            sum2 += v * v;
        }
        count += corners.len();
    }
    if count < 2 {
        return 0.0;
    }
    let mean = sum / count as f64;
    ((sum2 - count as f64 * mean * mean) / (count - 1) as f64).max(0.0)
}

/// `P(signal_het) / P(noise)` with `σ²` estimated from the corners.
pub fn realized_snr_het(p_signal_het: f64, images: &[f32], n_pix: usize, n_res: usize) -> f64 {
    p_signal_het / noise_power(estimate_sigma2_from_corners(images, n_pix), n_pix, n_res)
}

/// Adds i.i.d. `N(0, σ²)` noise to every pixel, one substream per image.
pub fn add_noise(images: &mut [f32], n_pix: usize, sigma2: f64, seed: u64) {
    if sigma2 == 0.0 {
        return;
    }
    let sd = sigma2.sqrt();
    images.par_chunks_mut(n_pix * n_pix).enumerate().for_each(|(s, img)| {
        let mut rng = substream(seed, STREAM_NOISE, s as u64);
        for v in img.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v as f64 + sd * z) as f32;
        }
    });
}

/// Per-image mixture of the basis phantoms.
struct Draws {
    weights: Vec<Vec<f64>>,
    mean_weights: Vec<f64>,
    labels: Vec<u32>,
    positions: Vec<f64>,
}

fn draw_discrete(classes: &[ClassSpec], n: usize, seed: u64) -> Draws {
    let probs: Vec<f64> = classes.iter().map(|c| c.probability).collect();
    let labels: Vec<u32> = (0..n)
        .map(|s| {
            let u: f64 = substream(seed, STREAM_CLASS, s as u64).random();
            let mut acc = 0.0;
            for (c, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return c as u32;
                }
            }
            (probs.len() - 1) as u32
        })
        .collect();
    let weights = labels
        .iter()
        .map(|&c| {
            let mut w = vec![0.0; probs.len()];
            w[c as usize] = 1.0;
            w
        })
        .collect();
    Draws {
        weights,
        mean_weights: probs,
        labels,
        positions: Vec::new(),
    }
}

/// Triangle edges `(0,1)`, `(1,2)`, `(2,0)` and their lengths in coefficient
/// space, which define the uniform measure on the perimeter.
fn triangle_edges(vertices: &[Vec<Complex64>]) -> Vec<(usize, usize, f64)> {
    (0..3)
        .map(|e| {
            let (a, b) = (e, (e + 1) % 3);
            let len = vertices[a].iter().zip(&vertices[b]).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            (a, b, len)
        })
        .collect()
}

fn draw_triangle(edges: &[(usize, usize, f64)], n: usize, seed: u64) -> Result<Draws> {
    let total: f64 = edges.iter().map(|e| e.2).sum();
    if !(total > 0.0) {
        return Err(Error::Simulation("triangle vertices coincide".into()));
    }
    let mut labels = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for s in 0..n {
        let mut t = substream(seed, STREAM_CLASS, s as u64).random::<f64>() * total;
        let mut e = 0;
        while e < 2 && t >= edges[e].2 {
            t -= edges[e].2;
            e += 1;
        }
        let u = (t / edges[e].2).clamp(0.0, 1.0);
        let mut w = vec![0.0; 3];
        w[edges[e].0] += 1.0 - u;
        w[edges[e].1] += u;
        labels.push(e as u32);
        positions.push(u);
        weights.push(w);
    }
    let mut mean_weights = vec![0.0; 3];
    for &(a, b, len) in edges {
        mean_weights[a] += 0.5 * len / total;
        mean_weights[b] += 0.5 * len / total;
    }
    Ok(Draws {
        weights,
        mean_weights,
        labels,
        positions,
    })
}

fn outer_add(m: &mut DMatrix<Complex64>, a: &[Complex64], b: &[Complex64], scale: f64) {
    for i in 0..a.len() {
        for j in 0..b.len() {
            m[(i, j)] += a[i] * b[j].conj() * scale;
        }
    }
}

/// `Σ₀` of the simulated population in coefficient space.
fn population_covariance(het: &Heterogeneity, volumes: &[Vec<Complex64>], mu0: &[Complex64], edges: &[(usize, usize, f64)]) -> DMatrix<Complex64> {
    let p = mu0.len();
    let mut sigma = DMatrix::<Complex64>::zeros(p, p);
    let centered = |v: &[Complex64]| -> Vec<Complex64> { v.iter().zip(mu0).map(|(a, m)| a - m).collect() };
    match het {
        Heterogeneity::Discrete { classes } => {
            for (c, v) in classes.iter().zip(volumes) {
                let d = centered(v);
                outer_add(&mut sigma, &d, &d, c.probability);
            }
        }
        Heterogeneity::Triangle { .. } => {
            // Along an edge X = A + u D with u ~ U[0, 1]:
            // E[(X−μ)(X−μ)ᴴ] = aaᴴ + (aDᴴ + Daᴴ)/2 + DDᴴ/3 with a = A − μ.
            let total: f64 = edges.iter().map(|e| e.2).sum();
            for &(ia, ib, len) in edges {
                let w = len / total;
                let a = centered(&volumes[ia]);
                let d: Vec<Complex64> = volumes[ib].iter().zip(&volumes[ia]).map(|(b, a)| b - a).collect();
                outer_add(&mut sigma, &a, &a, w);
                outer_add(&mut sigma, &a, &d, 0.5 * w);
                outer_add(&mut sigma, &d, &a, 0.5 * w);
                outer_add(&mut sigma, &d, &d, w / 3.0);
            }
        }
    }
    crate::linalg::symmetrize(&mut sigma);
    sigma
}

/// Simulates a dataset and its ground truth.
pub fn generate_dataset(config: &SimConfig) -> Result<Simulated> {
    config.validate()?;
    let index = BasisIndexSet::new(config.k_max);
    let basis = RadialBasis::build(config.k_max, config.omega_max(), default_quad_order(config.k_max))?;
    let (phantoms, kind): (Vec<Phantom>, &str) = match &config.heterogeneity {
        Heterogeneity::Discrete { classes } => (classes.iter().map(|c| c.phantom.clone()).collect(), "discrete"),
        Heterogeneity::Triangle { vertices } => (vertices.clone(), "triangle"),
    };
    let volumes = phantoms_to_coeffs(&phantoms, &basis, &index);
    let edges = match config.heterogeneity {
        Heterogeneity::Triangle { .. } => triangle_edges(&volumes),
        Heterogeneity::Discrete { .. } => Vec::new(),
    };
    let draws = match &config.heterogeneity {
        Heterogeneity::Discrete { classes } => draw_discrete(classes, config.n, config.seed),
        Heterogeneity::Triangle { .. } => draw_triangle(&edges, config.n, config.seed)?,
    };
    let rotations: Vec<Rotation> = (0..config.n)
        .map(|s| Rotation::random(&mut substream(config.seed, STREAM_ROTATION, s as u64)))
        .collect();

    let np = config.n_pix;
    let npix = np * np;
    let disc = disc_pixels(np);
    let mut images = vec![0f32; config.n * npix];
    let powers: Vec<(f64, f64)> = images
        .par_chunks_mut(npix)
        .enumerate()
        .map(|(s, out)| {
            let mut clean = vec![0.0; npix];
            let mut het = vec![0.0; npix];
            for (j, ph) in phantoms.iter().enumerate() {
                let w = draws.weights[s][j];
                let dw = w - draws.mean_weights[j];
                if w == 0.0 && dw == 0.0 {
                    continue;
                }
                let proj = project_phantom_analytic(ph, &rotations[s], np);
                for ((c, h), v) in clean.iter_mut().zip(het.iter_mut()).zip(&proj) {
                    *c += w * v;
                    *h += dw * v;
                }
            }
            for (o, c) in out.iter_mut().zip(&clean) {
                *o = *c as f32;
            }
            let q = disc.len() as f64;
            let ph = disc.iter().map(|&f| het[f] * het[f]).sum::<f64>() / q;
            let ps = disc.iter().map(|&f| clean[f] * clean[f]).sum::<f64>() / q;
            (ph, ps)
        })
        .collect();
    let p_signal_het = powers.iter().map(|p| p.0).sum::<f64>() / config.n as f64;
    let p_signal = powers.iter().map(|p| p.1).sum::<f64>() / config.n as f64;
    let sigma2 = sigma2_for_snr(p_signal_het, config.snr_het, np, config.n_res)?;
    add_noise(&mut images, np, sigma2, config.seed);

    let p = index.p_hat();
    let mut mu0 = vec![Complex64::new(0.0, 0.0); p];
    for (v, w) in volumes.iter().zip(&draws.mean_weights) {
        mu0.iter_mut().zip(v).for_each(|(m, x)| *m += x * *w);
    }
    let sigma0 = population_covariance(&config.heterogeneity, &volumes, &mu0, &edges);
    let (sigma0_eigvals, sigma0_eigvecs) = hermitian_eigen_desc(&sigma0);
    let noise = NoiseReport {
        sigma2,
        p_signal_het,
        p_signal,
        snr_het_target: config.snr_het,
        snr: (sigma2 > 0.0).then(|| p_signal / noise_power(sigma2, np, config.n_res)),
    };
    let meta = DatasetMeta {
        n_images: config.n,
        n_pix: np,
        n_res: config.n_res,
        k_max: config.k_max,
        omega_max: config.omega_max(),
        sigma2: Some(sigma2),
        pixel_convention: PIXEL_CONVENTION.into(),
    };
    Ok(Simulated {
        dataset: Dataset::new(meta, rotations, images)?,
        truth: GroundTruth {
            k_max: config.k_max,
            kind: kind.into(),
            volumes,
            probabilities: draws.mean_weights,
            labels: draws.labels,
            positions: draws.positions,
            mu0,
            sigma0,
            sigma0_eigvals,
            sigma0_eigvecs,
            noise,
        },
    })
}

pub const TRUTH_KIND: &str = "ground_truth";

impl GroundTruth {
    /// Numerical rank of `Σ₀` relative to its largest eigenvalue.
    pub fn sigma0_rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma0_eigvals.first().copied().unwrap_or(0.0);
        self.sigma0_eigvals.iter().filter(|&&v| v > rel_tol * top).count()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let meta = json!({
            "oracle_only": true,
            "k_max": self.k_max,
            "kind": self.kind,
            "probabilities": self.probabilities,
            "n_volumes": self.volumes.len(),
            "noise": self.noise,
        });
        Container::new(TRUTH_KIND, meta)
            .with("volumes", ArrayData::C64(self.volumes.concat()))
            .with("labels", ArrayData::U32(self.labels.clone()))
            .with("positions", ArrayData::F64(self.positions.clone()))
            .with("mu0", ArrayData::C64(self.mu0.clone()))
            .with("sigma0", ArrayData::C64(row_major(&self.sigma0)))
            .with("sigma0_eigvals", ArrayData::F64(self.sigma0_eigvals.clone()))
            .with("sigma0_eigvecs", ArrayData::C64(row_major(&self.sigma0_eigvecs)))
            .write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut c = Container::read(path)?;
        if c.kind != TRUTH_KIND {
            return Err(Error::Format(format!("{} holds a `{}`, not ground truth", path.display(), c.kind)));
        }
        let k_max = c.meta["k_max"].as_u64().ok_or_else(|| Error::Format("missing k_max".into()))? as usize;
        let kind = c.meta["kind"].as_str().unwrap_or("discrete").to_string();
        let probabilities: Vec<f64> = serde_json::from_value(c.meta["probabilities"].clone())?;
        let noise: NoiseReport = serde_json::from_value(c.meta["noise"].clone())?;
        let mu0 = into_c64(c.take("mu0")?)?;
        let p = mu0.len();
        let flat = into_c64(c.take("volumes")?)?;
        let volumes = flat.chunks(p.max(1)).map(|v| v.to_vec()).collect();
        let square = |v: Vec<Complex64>| -> Result<DMatrix<Complex64>> {
            if v.len() != p * p {
                return Err(Error::Format("ground-truth matrix has the wrong size".into()));
            }
            Ok(DMatrix::from_row_slice(p, p, &v))
        };
        Ok(Self {
            k_max,
            kind,
            volumes,
            probabilities,
            labels: into_u32(c.take("labels")?)?,
            positions: into_f64(c.take("positions")?)?,
            mu0,
            sigma0: square(into_c64(c.take("sigma0")?)?)?,
            sigma0_eigvals: into_f64(c.take("sigma0_eigvals")?)?,
            sigma0_eigvecs: square(into_c64(c.take("sigma0_eigvecs")?)?)?,
            noise,
        })
    }
}

pub fn row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect()
}

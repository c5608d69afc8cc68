use crate::error::{Error, Result};
use crate::registry::Registry;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the log-likelihood changes by less than `tol · |L|`.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

/// Gaussian mixture over real points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Per-component isotropic variance (equal across components for the
    /// shared isotropic model).
    pub variances: Vec<f64>,
    /// Row-major `d × d` covariances for the full model.
    pub covariances: Option<Vec<Vec<f64>>>,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: usize,
}

pub trait MixtureFitter: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, points: &[Vec<f64>], c: usize, opts: &EmOptions) -> Result<GaussianMixture>;
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// k-means++ seeding.
pub fn kmeans_pp(points: &[Vec<f64>], c: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < c {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centers.last().unwrap()));
        }
    }
    centers
}

fn check_input(points: &[Vec<f64>], c: usize) -> Result<usize> {
    if c == 0 {
        return Err(Error::Mixture("at least one component is required".into()));
    }
    if points.len() < c {
        return Err(Error::Mixture(format!("{} points cannot support {c} components", points.len())));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Mixture("points must be finite and of equal dimension".into()));
    }
    Ok(d)
}

fn sample_mean(points: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for p in points {
        m.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= points.len() as f64);
    m
}

/// Single component: sample mean, unit weight.
fn single(points: &[Vec<f64>], d: usize, full: bool) -> GaussianMixture {
    let mean = sample_mean(points, d);
    let n = points.len() as f64;
    let var = points.iter().map(|p| sq_dist(p, &mean)).sum::<f64>() / (n * d.max(1) as f64);
    let cov = full.then(|| {
        let mut c = vec![0.0; d * d];
        for p in points {
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
                }
            }
        }
        vec![c]
    });
    let loglik = if d == 0 {
        0.0
    } else {
        -0.5 * n * d as f64 * ((2.0 * PI * var.max(f64::MIN_POSITIVE)).ln() + 1.0)
    };
    GaussianMixture {
        means: vec![mean],
        weights: vec![1.0],
        variances: vec![var],
        covariances: cov,
        loglik,
        loglik_trace: vec![loglik],
        iterations: 0,
        converged: true,
        reseeds: 0,
    }
}

/// Moves an empty component onto the point farthest from every mean.
fn reseed(points: &[Vec<f64>], means: &mut [Vec<f64>], weights: &mut [f64], empty: usize, reseeds: &mut usize) -> Result<()> {
    if *reseeds >= 1 {
        return Err(Error::Mixture(format!("component {empty} emptied again after re-seeding")));
    }
    *reseeds += 1;
    let far = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, means.iter().map(|m| sq_dist(p, m)).fold(f64::INFINITY, f64::min)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    log::warn!("mixture component {empty} is empty; re-seeding at point {far}");
    means[empty] = points[far].clone();
    let c = weights.len() as f64;
    weights.iter_mut().for_each(|w| *w = (*w + 1.0 / c) * 0.5);
    Ok(())
}

/// EM with one isotropic variance shared by all components.
pub struct IsotropicEm;

impl MixtureFitter for IsotropicEm {
    fn name(&self) -> &'static str {
        "isotropic"
    }

    fn fit(&self, points: &[Vec<f64>], c: usize, opts: &EmOptions) -> Result<GaussianMixture> {
        let d = check_input(points, c)?;
        if c == 1 || d == 0 {
            return Ok(single(points, d, false));
        }
        let n = points.len();
        let nf = n as f64;
        let df = d as f64;
        let mut means = kmeans_pp(points, c, opts.seed);
        let mut weights = vec![1.0 / c as f64; c];
        let spread = points.iter().map(|p| sq_dist(p, &sample_mean(points, d))).sum::<f64>() / (nf * df);
        let floor = 1e-12 * spread.max(f64::MIN_POSITIVE);
        let mut var = (points.iter().map(|p| means.iter().map(|m| sq_dist(p, m)).fold(f64::INFINITY, f64::min)).sum::<f64>() / (nf * df)).max(floor);
        if var <= floor {
            var = spread.max(floor);
        }
        let mut resp = vec![0.0; n * c];
        let mut trace = Vec::new();
        let mut reseeds = 0;
        let mut converged = false;
        let mut it = 0;
        let mut logp = vec![0.0; c];
        while it < opts.max_iter {
            // E step.
            let mut ll = 0.0;
            let norm = -0.5 * df * (2.0 * PI * var).ln();
            for (s, p) in points.iter().enumerate() {
                for k in 0..c {
                    logp[k] = weights[k].max(f64::MIN_POSITIVE).ln() + norm - sq_dist(p, &means[k]) / (2.0 * var);
                }
                let lse = log_sum_exp(&logp);
                ll += lse;
                for k in 0..c {
                    resp[s * c + k] = (logp[k] - lse).exp();
                }
            }
            trace.push(ll);
            it += 1;
            if trace.len() >= 2 {
                let prev = trace[trace.len() - 2];
                if (ll - prev).abs() <= opts.tol * ll.abs().max(1e-300) {
                    converged = true;
                    break;
                }
            }
            // M step.
            let mass: Vec<f64> = (0..c).map(|k| (0..n).map(|s| resp[s * c + k]).sum()).collect();
            if let Some(empty) = mass.iter().position(|&m| m < 1e-12) {
                reseed(points, &mut means, &mut weights, empty, &mut reseeds)?;
                continue;
            }
            for k in 0..c {
                let mut m = vec![0.0; d];
                for (s, p) in points.iter().enumerate() {
                    let r = resp[s * c + k];
                    m.iter_mut().zip(p).for_each(|(a, b)| *a += r * b);
                }
                m.iter_mut().for_each(|a| *a /= mass[k]);
                means[k] = m;
                weights[k] = mass[k] / nf;
            }
            let mut ss = 0.0;
            for (s, p) in points.iter().enumerate() {
                for k in 0..c {
                    ss += resp[s * c + k] * sq_dist(p, &means[k]);
                }
            }
            var = (ss / (nf * df)).max(floor);
        }
        Ok(GaussianMixture {
            means,
            weights,
            variances: vec![var; c],
            covariances: None,
            loglik: *trace.last().unwrap_or(&f64::NEG_INFINITY),
            loglik_trace: trace,
            iterations: it,
            converged,
            reseeds,
        })
    }
}

/// EM with a full covariance per component.
pub struct FullEm;

impl MixtureFitter for FullEm {
    fn name(&self) -> &'static str {
        "full"
    }

    fn fit(&self, points: &[Vec<f64>], c: usize, opts: &EmOptions) -> Result<GaussianMixture> {
        let d = check_input(points, c)?;
        if c == 1 || d == 0 {
            return Ok(single(points, d, true));
        }
        let n = points.len();
        let nf = n as f64;
        let mut means = kmeans_pp(points, c, opts.seed);
        let mut weights = vec![1.0 / c as f64; c];
        let center = sample_mean(points, d);
        let spread = points.iter().map(|p| sq_dist(p, &center)).sum::<f64>() / (nf * d as f64);
        let ridge = 1e-9 * spread.max(f64::MIN_POSITIVE);
        let init_var = (points.iter().map(|p| means.iter().map(|m| sq_dist(p, m)).fold(f64::INFINITY, f64::min)).sum::<f64>() / (nf * d as f64)).max(ridge);
        let mut covs: Vec<DMatrix<f64>> = vec![DMatrix::identity(d, d) * init_var; c];
        let mut resp = vec![0.0; n * c];
        let mut trace = Vec::new();
        let mut reseeds = 0;
        let mut converged = false;
        let mut it = 0;
        let mut logp = vec![0.0; c];
        while it < opts.max_iter {
            let factors: Vec<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> = covs
                .iter()
                .map(|s| {
                    let ch = nalgebra::Cholesky::new(s.clone()).ok_or_else(|| Error::Mixture("component covariance lost definiteness".into()))?;
                    let logdet = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                    Ok((ch, logdet))
                })
                .collect::<Result<_>>()?;
            let mut ll = 0.0;
            for (s, p) in points.iter().enumerate() {
                for k in 0..c {
                    let diff = DVector::from_iterator(d, p.iter().zip(&means[k]).map(|(a, b)| a - b));
                    let sol = factors[k].0.l().solve_lower_triangular(&diff).expect("triangular factor");
                    logp[k] = weights[k].max(f64::MIN_POSITIVE).ln() - 0.5 * (d as f64 * (2.0 * PI).ln() + factors[k].1 + sol.norm_squared());
                }
                let lse = log_sum_exp(&logp);
                ll += lse;
                for k in 0..c {
                    resp[s * c + k] = (logp[k] - lse).exp();
                }
            }
            trace.push(ll);
            it += 1;
            if trace.len() >= 2 && (ll - trace[trace.len() - 2]).abs() <= opts.tol * ll.abs().max(1e-300) {
                converged = true;
                break;
            }
            let mass: Vec<f64> = (0..c).map(|k| (0..n).map(|s| resp[s * c + k]).sum()).collect();
            if let Some(empty) = mass.iter().position(|&m| m < 1e-12) {
                reseed(points, &mut means, &mut weights, empty, &mut reseeds)?;
                covs[empty] = DMatrix::identity(d, d) * spread.max(ridge);
                continue;
            }
            for k in 0..c {
                let mut m = vec![0.0; d];
                for (s, p) in points.iter().enumerate() {
                    m.iter_mut().zip(p).for_each(|(a, b)| *a += resp[s * c + k] * b);
                }
                m.iter_mut().for_each(|a| *a /= mass[k]);
                let mut cov = DMatrix::<f64>::identity(d, d) * ridge;
                for (s, p) in points.iter().enumerate() {
                    let r = resp[s * c + k] / mass[k];
                    for i in 0..d {
                        for j in 0..d {
                            cov[(i, j)] += r * (p[i] - m[i]) * (p[j] - m[j]);
                        }
                    }
                }
                means[k] = m;
                weights[k] = mass[k] / nf;
                covs[k] = cov;
            }
        }
        Ok(GaussianMixture {
            means,
            weights,
            variances: covs.iter().map(|s| s.trace() / d as f64).collect(),
            covariances: Some(covs.iter().map(|s| s.transpose().as_slice().to_vec()).collect()),
            loglik: *trace.last().unwrap_or(&f64::NEG_INFINITY),
            loglik_trace: trace,
            iterations: it,
            converged,
            reseeds,
        })
    }
}

pub fn mixture_fitters() -> Registry<dyn MixtureFitter> {
    let mut r: Registry<dyn MixtureFitter> = Registry::new("mixture fitter");
    r.register("isotropic", Box::new(IsotropicEm));
    r.register("full", Box::new(FullEm));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn two_spikes(n: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut lab = Vec::new();
        for s in 0..n {
            let c = if rng.random::<f64>() < 0.3 { 1 } else { 0 };
            let base = if c == 1 { [sep, 0.0] } else { [0.0, 0.0] };
            let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            pts.push(vec![base[0] + z[0], base[1] + z[1]]);
            lab.push(c);
            let _ = s;
        }
        (pts, lab)
    }

    #[test]
    fn separated_spikes_recovered() {
        let (pts, _) = two_spikes(4000, 20.0, 3);
        for fitter in [&IsotropicEm as &dyn MixtureFitter, &FullEm] {
            let g = fitter.fit(&pts, 2, &EmOptions::default()).unwrap();
            let (lo, hi) = if g.means[0][0] < g.means[1][0] { (0, 1) } else { (1, 0) };
            assert!(g.means[lo][0].abs() < 0.2 && (g.means[hi][0] - 20.0).abs() < 0.2);
            assert!((g.weights[hi] - 0.3).abs() < 0.02);
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(g.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
        }
    }

    #[test]
    fn single_component_is_sample_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![2.0, 1.0]];
        let g = IsotropicEm.fit(&pts, 1, &EmOptions::default()).unwrap();
        assert_eq!(g.weights, vec![1.0]);
        assert!((g.means[0][0] - 2.0).abs() < 1e-15 && (g.means[0][1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(IsotropicEm.fit(&[vec![1.0]], 2, &EmOptions::default()).is_err());
    }
}

//! Metrics against ground truth and random-matrix reference curves.

use crate::basis::harmonics::{lm_index, sph_harm_all_dir};
use crate::basis::index::BasisIndexSet;
use crate::basis::radial::RadialBasis;
use crate::error::{Error, Result};
use crate::special::gauss_legendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FscCurve {
    pub shell_centers: Vec<f64>,
    pub values: Vec<f64>,
    /// Shells where either volume has no energy; their value is 0.
    pub empty: Vec<bool>,
    /// First shell center where the curve drops below 0.5.
    pub cutoff_freq: Option<f64>,
}

/// Fourier shell correlation on a `(2·n_shells+1)³` Cartesian grid over the
/// ball `|ξ| ≤ ω_max`, with shells of width `ω_max / n_shells`.
pub fn fsc(index: &BasisIndexSet, basis: &RadialBasis, a: &[Complex64], b: &[Complex64], n_shells: usize) -> Result<FscCurve> {
    if a.len() != index.p_hat() || b.len() != index.p_hat() {
        return Err(Error::Dimension {
            expected: index.p_hat(),
            got: a.len().min(b.len()),
            context: "FSC volumes",
        });
    }
    if n_shells == 0 {
        return Err(Error::Config("FSC needs at least one shell".into()));
    }
    let w = basis.omega_max();
    let h = w / n_shells as f64;
    let ns = n_shells as i64;
    let k_max = index.k_max();
    let planes: Vec<(Vec<Complex64>, Vec<f64>, Vec<f64>)> = (-ns..=ns)
        .into_par_iter()
        .map(|i| {
            let mut cross = vec![Complex64::new(0.0, 0.0); n_shells];
            let mut ea = vec![0.0; n_shells];
            let mut eb = vec![0.0; n_shells];
            for j in -ns..=ns {
                for k in -ns..=ns {
                    let xi = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                    if r > w * (1.0 + 1e-12) {
                        continue;
                    }
                    let shell = ((r / h) as usize).min(n_shells - 1);
                    let f = basis.eval_all(r.min(w));
                    let y = sph_harm_all_dir(k_max, xi);
                    let (mut va, mut vb) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for ((v, ca), cb) in index.v_indices().iter().zip(a).zip(b) {
                        let basis_val = y[lm_index(v.l, v.m)] * f[v.k];
                        va += ca * basis_val;
                        vb += cb * basis_val;
                    }
                    cross[shell] += va * vb.conj();
                    ea[shell] += va.norm_sqr();
                    eb[shell] += vb.norm_sqr();
                }
            }
            (cross, ea, eb)
        })
        .collect();
    let mut cross = vec![Complex64::new(0.0, 0.0); n_shells];
    let mut ea = vec![0.0; n_shells];
    let mut eb = vec![0.0; n_shells];
    for (c, x, y) in planes {
        for s in 0..n_shells {
            cross[s] += c[s];
            ea[s] += x[s];
            eb[s] += y[s];
        }
    }
    let scale = ea.iter().chain(&eb).fold(0.0f64, |m, v| m.max(*v));
    let mut values = Vec::with_capacity(n_shells);
    let mut empty = Vec::with_capacity(n_shells);
    for s in 0..n_shells {
        let denom = (ea[s] * eb[s]).sqrt();
        if denom <= 1e-300 || ea[s].min(eb[s]) <= 1e-28 * scale {
            values.push(0.0);
            empty.push(true);
        } else {
            values.push((cross[s].re / denom).clamp(-1.0, 1.0));
            empty.push(false);
        }
    }
    let shell_centers: Vec<f64> = (0..n_shells).map(|s| (s as f64 + 0.5) * h).collect();
    let cutoff_freq = values
        .iter()
        .zip(&empty)
        .position(|(v, e)| !e && *v < 0.5)
        .map(|s| shell_centers[s]);
    Ok(FscCurve {
        shell_centers,
        values,
        empty,
        cutoff_freq,
    })
}

/// `Re⟨a, e^{iθ} b⟩ / (‖a‖‖b‖)` at the phase `θ` that maximizes it, which is
/// `|⟨a, b⟩| / (‖a‖‖b‖)`.
pub fn correlation(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    let (ip, na, nb) = normalized_inner(a, b)?;
    Ok((ip.norm() / (na * nb)).min(1.0))
}

/// `Re⟨a, b⟩ / (‖a‖‖b‖)` without phase alignment. Unlike [`correlation`] it
/// separates `b` from `−b`, which matters when matching mean-subtracted class
/// volumes.
pub fn signed_correlation(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    let (ip, na, nb) = normalized_inner(a, b)?;
    Ok((ip.re / (na * nb)).clamp(-1.0, 1.0))
}

fn normalized_inner(a: &[Complex64], b: &[Complex64]) -> Result<(Complex64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
            context: "correlation operands",
        });
    }
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("correlation with a zero vector".into()));
    }
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok((ip, na, nb))
}

/// Marčenko–Pastur law for aspect ratio `γ = p/n ≤ 1` and noise variance `σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarchenkoPastur {
    pub gamma: f64,
    pub sigma2: f64,
}

impl MarchenkoPastur {
    pub fn new(gamma: f64, sigma2: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(sigma2 > 0.0) {
            return Err(Error::Domain(format!("MP law needs γ > 0 and σ² > 0, got γ = {gamma}, σ² = {sigma2}")));
        }
        if gamma > 1.0 {
            return Err(Error::Domain(format!("γ = {gamma} > 1 is not supported")));
        }
        Ok(Self { gamma, sigma2 })
    }

    /// Support edges `σ²(1 ± √γ)²`.
    pub fn edges(&self) -> (f64, f64) {
        let s = self.gamma.sqrt();
        (self.sigma2 * (1.0 - s).powi(2), self.sigma2 * (1.0 + s).powi(2))
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.edges();
        if x <= lo || x >= hi {
            return 0.0;
        }
        ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * self.sigma2 * self.gamma * x)
    }

    /// `∫_a^b density`, by Gauss–Legendre after `x = c + r sin t` which
    /// removes the square-root endpoint behaviour. Panels are graded toward
    /// the lower edge, where the `1/x` factor turns sharp as `γ → 1`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.edges();
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return 0.0;
        }
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        let ta = ((a - c) / r).clamp(-1.0, 1.0).asin();
        let tb = ((b - c) / r).clamp(-1.0, 1.0).asin();
        let mut cuts = vec![ta];
        cuts.extend((1..=60).rev().map(|j| -PI / 2.0 + PI * 0.5f64.powi(j)).filter(|&p| p > ta && p < tb));
        cuts.push(tb);
        let integrand = |t: f64| {
            let x = c + r * t.sin();
            // √((hi−x)(x−lo)) = r cos t and dx = r cos t dt.
            (r * t.cos()).powi(2) / (2.0 * PI * self.sigma2 * self.gamma * x)
        };
        cuts.windows(2)
            .map(|p| {
                let (t, w) = gauss_legendre(16, p[0], p[1]);
                t.iter().zip(&w).map(|(&t, &w)| integrand(t) * w).sum::<f64>()
            })
            .sum()
    }
}

/// Detection threshold `σ² √γ` for a spike `τ²`.
pub fn spike_threshold(gamma: f64, sigma2: f64) -> f64 {
    sigma2 * gamma.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeLimit {
    /// Limiting squared overlap between the top sample and population
    /// eigenvectors; 0 below threshold.
    pub correlation: f64,
    /// Limiting top sample eigenvalue; the bulk edge below threshold.
    pub eigenvalue: f64,
}

pub fn limiting_top_correlation(tau1sq: f64, sigma2: f64, gamma: f64) -> SpikeLimit {
    if tau1sq <= spike_threshold(gamma, sigma2) {
        return SpikeLimit {
            correlation: 0.0,
            eigenvalue: sigma2 * (1.0 + gamma.sqrt()).powi(2),
        };
    }
    let snr = tau1sq / sigma2;
    let a = snr * snr / gamma;
    SpikeLimit {
        correlation: ((a - 1.0) / (a + snr)).clamp(0.0, 1.0),
        eigenvalue: (tau1sq + sigma2) * (1.0 + sigma2 * gamma / tau1sq),
    }
}

/// Eigenvalues of the sample covariance `(1/n) X Xᵀ` of `n` real samples in
/// dimension `p` with covariance `σ² I + Σ τ_k² e_k e_kᵀ`.
pub fn sample_covariance_spectrum(p: usize, n: usize, sigma2: f64, spikes: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = sigma2.sqrt();
    let mut x = DMatrix::<f64>::from_fn(p, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    for (k, &t) in spikes.iter().enumerate() {
        let extra = t.sqrt();
        for j in 0..n {
            x[(k, j)] += extra * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let c = (&x * x.transpose()) / n as f64;
    let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Fraction of values per bin; sums to 1.
    pub mass: Vec<f64>,
    /// MP mass per bin when an overlay is requested.
    pub overlay: Option<Vec<f64>>,
}

impl Histogram {
    pub fn total_variation(&self) -> Option<f64> {
        self.overlay
            .as_ref()
            .map(|o| 0.5 * self.mass.iter().zip(o).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,mass,density,mp_mass\n");
        for i in 0..self.mass.len() {
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            let width = (hi - lo).max(f64::MIN_POSITIVE);
            let mp = self.overlay.as_ref().map_or(String::new(), |o| format!("{}", o[i]));
            let _ = writeln!(s, "{lo},{hi},{},{},{mp}", self.mass[i], self.mass[i] / width);
        }
        s
    }
}

/// Normalized histogram over `[min, max]` of the values, or over `range`.
pub fn eigen_histogram(eigvals: &[f64], bins: usize, range: Option<(f64, f64)>, overlay: Option<&MarchenkoPastur>) -> Result<Histogram> {
    if eigvals.is_empty() || bins == 0 {
        return Err(Error::Domain("histogram needs values and at least one bin".into()));
    }
    let (mut lo, mut hi) = range.unwrap_or_else(|| {
        let lo = eigvals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eigvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    if hi <= lo {
        let pad = lo.abs().max(1.0) * 1e-9;
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for &v in eigvals {
        if v < lo || v > hi {
            continue;
        }
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        total += 1;
    }
    let mass = counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect();
    let overlay = overlay.map(|mp| (0..bins).map(|i| mp.mass(edges[i], edges[i + 1])).collect());
    Ok(Histogram { edges, mass, overlay })
}

pub fn fsc_csv(curve: &FscCurve) -> String {
    let mut s = String::from("shell_center,fsc,empty\n");
    for i in 0..curve.values.len() {
        let _ = writeln!(s, "{},{},{}", curve.shell_centers[i], curve.values[i], curve.empty[i] as u8);
    }
    s
}

/// One-column-per-field CSV from `(name, value)` rows.
pub fn key_value_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mp_edges_and_normalization() {
        let mp = MarchenkoPastur::new(0.2, 1.0).unwrap();
        let (lo, hi) = mp.edges();
        assert!((lo - (1.0 - 0.2f64.sqrt()).powi(2)).abs() < 1e-15);
        assert!((hi - (1.0 + 0.2f64.sqrt()).powi(2)).abs() < 1e-15);
        assert!((lo - 0.3056).abs() < 1e-4 && (hi - 2.0944).abs() < 1e-4);
        assert!((mp.mass(lo, hi) - 1.0).abs() < 1e-6);
        assert_eq!(mp.density(lo - 0.01), 0.0);
        assert_eq!(mp.density(hi + 0.01), 0.0);
        assert!(MarchenkoPastur::new(1.5, 1.0).is_err());
    }

    #[test]
    fn mp_mass_matches_plain_quadrature_of_density() {
        let mp = MarchenkoPastur::new(0.5, 2.0).unwrap();
        let (a, b) = (1.0, 3.0);
        let (x, w) = gauss_legendre(4000, a, b);
        let direct: f64 = x.iter().zip(&w).map(|(x, w)| mp.density(*x) * w).sum();
        assert!((direct - mp.mass(a, b)).abs() < 1e-8);
    }

    #[test]
    fn spike_limits() {
        let g = 0.2;
        let at = limiting_top_correlation(spike_threshold(g, 1.0) * (1.0 + 1e-12), 1.0, g);
        assert!(at.correlation.abs() < 1e-9);
        assert!(limiting_top_correlation(1e8, 1.0, g).correlation > 0.999_999);
        assert_eq!(limiting_top_correlation(0.1, 1.0, g).correlation, 0.0);
    }

    #[test]
    fn correlation_contract() {
        let a: Vec<Complex64> = (0..7).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        assert!((correlation(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let rot: Vec<Complex64> = a.iter().map(|z| z * Complex64::from_polar(3.0, 1.1)).collect();
        assert!((correlation(&a, &rot).unwrap() - 1.0).abs() < 1e-12);
        let e0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e1 = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 2.0)];
        assert!(correlation(&e0, &e1).unwrap().abs() < 1e-12);
        assert!(correlation(&e0, &[Complex64::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn signed_correlation_separates_opposites() {
        let a: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64 - 2.0, 0.5)).collect();
        let neg: Vec<Complex64> = a.iter().map(|z| -z * 2.0).collect();
        assert!((signed_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((signed_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((correlation(&a, &neg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_masses() {
        let h = eigen_histogram(&[2.5], 4, None, None).unwrap();
        assert_eq!(h.mass.iter().filter(|&&m| m == 1.0).count(), 1);
        let vals: Vec<f64> = (0..100).map(|i| (i as f64).sqrt()).collect();
        let h = eigen_histogram(&vals, 7, None, None).unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h.to_csv().lines().count(), 8);
    }
}

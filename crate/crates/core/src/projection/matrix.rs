use super::rotation::Rotation;
use super::wigner::{wigner_d_all, WignerMatrix};
use crate::basis::harmonics::{lm_index, sph_harm_all};
use crate::basis::index::{v_block_dim, BasisIndexSet};
use crate::basis::volume::{FourierImage, FourierVolume};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Block-diagonal projection operator `P̂` for one rotation: block `k` maps
/// the `(k+1)(k+2)/2` volume coefficients of radial index `k` to the `k+1`
/// image coefficients of that index.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    k_max: usize,
    /// Row-major `(k+1) × d_k` blocks.
    blocks: Vec<Vec<Complex64>>,
}

/// Real values `√(2π) Y_ℓ^{m′}(π/2, 0)` for `ℓ ≤ lmax`, indexed by `lm_index`.
pub fn equator_weights(lmax: usize) -> Vec<f64> {
    sph_harm_all(lmax, 0.0, 0.0).iter().map(|y| (2.0 * PI).sqrt() * y.re).collect()
}

impl ProjectionMatrix {
    pub fn new(rot: &Rotation, k_max: usize) -> Self {
        let d = wigner_d_all(k_max, rot);
        Self::from_wigner(&d, &equator_weights(k_max), k_max)
    }

    /// Builds from precomputed Wigner matrices and equator weights.
    pub fn from_wigner(d: &[WignerMatrix], eq: &[f64], k_max: usize) -> Self {
        let mut blocks = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let cols = v_block_dim(k);
            let mut b = vec![Complex64::new(0.0, 0.0); (k + 1) * cols];
            for row in 0..=k {
                let mp = 2 * row as i64 - k as i64;
                for l in (k % 2..=k).step_by(2) {
                    if mp.unsigned_abs() as usize > l {
                        continue;
                    }
                    let w = eq[lm_index(l, mp)];
                    let li = l as i64;
                    let base = l * l.saturating_sub(1) / 2;
                    for m in -li..=li {
                        b[row * cols + base + (m + li) as usize] = d[l].get(mp, m) * w;
                    }
                }
            }
            blocks.push(b);
        }
        Self { k_max, blocks }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Block `k` as a row-major `(k+1) × d_k` slice.
    pub fn block(&self, k: usize) -> &[Complex64] {
        &self.blocks[k]
    }

    /// `P̂ v` on raw coefficient slices.
    pub fn apply_raw(&self, v: &[Complex64], out: &mut [Complex64]) {
        let mut vo = 0;
        let mut io = 0;
        for k in 0..=self.k_max {
            let cols = v_block_dim(k);
            let b = &self.blocks[k];
            for row in 0..=k {
                let r = &b[row * cols..(row + 1) * cols];
                out[io + row] = r.iter().zip(&v[vo..vo + cols]).map(|(a, x)| a * x).sum();
            }
            vo += cols;
            io += k + 1;
        }
    }

    /// `P̂ᴴ u` on raw coefficient slices.
    pub fn backproject_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let mut vo = 0;
        let mut io = 0;
        for k in 0..=self.k_max {
            let cols = v_block_dim(k);
            let b = &self.blocks[k];
            let o = &mut out[vo..vo + cols];
            o.fill(Complex64::new(0.0, 0.0));
            for row in 0..=k {
                let ur = u[io + row];
                for (oc, a) in o.iter_mut().zip(&b[row * cols..(row + 1) * cols]) {
                    *oc += a.conj() * ur;
                }
            }
            vo += cols;
            io += k + 1;
        }
    }

    fn check(&self, index: &BasisIndexSet) -> Result<()> {
        if index.k_max() != self.k_max {
            return Err(Error::Dimension {
                expected: self.k_max,
                got: index.k_max(),
                context: "projection matrix radial cutoff",
            });
        }
        Ok(())
    }

    pub fn apply(&self, index: &BasisIndexSet, vol: &FourierVolume) -> Result<FourierImage> {
        self.check(index)?;
        if vol.coeffs.len() != index.p_hat() {
            return Err(Error::Dimension {
                expected: index.p_hat(),
                got: vol.coeffs.len(),
                context: "volume coefficients",
            });
        }
        let mut img = FourierImage::zeros(index);
        self.apply_raw(&vol.coeffs, &mut img.coeffs);
        Ok(img)
    }

    pub fn backproject(&self, index: &BasisIndexSet, img: &FourierImage, omega_max: f64) -> Result<FourierVolume> {
        self.check(index)?;
        if img.coeffs.len() != index.q_hat() {
            return Err(Error::Dimension {
                expected: index.q_hat(),
                got: img.coeffs.len(),
                context: "image coefficients",
            });
        }
        let mut vol = FourierVolume::zeros(index, omega_max);
        self.backproject_raw(&img.coeffs, &mut vol.coeffs);
        Ok(vol)
    }

    /// Dense `P̂ᴴP̂` blocks, row-major `d_k × d_k`.
    pub fn gram_blocks(&self) -> Vec<Vec<Complex64>> {
        (0..=self.k_max)
            .map(|k| {
                let cols = v_block_dim(k);
                let b = &self.blocks[k];
                let mut g = vec![Complex64::new(0.0, 0.0); cols * cols];
                for row in 0..=k {
                    let r = &b[row * cols..(row + 1) * cols];
                    for i in 0..cols {
                        let ci = r[i].conj();
                        if ci == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for j in 0..cols {
                            g[i * cols + j] += ci * r[j];
                        }
                    }
                }
                g
            })
            .collect()
    }
}

/// `P̂` for one rotation; see [`ProjectionMatrix`].
pub fn projection_matrix(rot: &Rotation, index: &BasisIndexSet) -> ProjectionMatrix {
    ProjectionMatrix::new(rot, index.k_max())
}

pub fn apply_projection(p: &ProjectionMatrix, index: &BasisIndexSet, vol: &FourierVolume) -> Result<FourierImage> {
    p.apply(index, vol)
}

pub fn apply_backprojection(p: &ProjectionMatrix, index: &BasisIndexSet, img: &FourierImage, omega_max: f64) -> Result<FourierVolume> {
    p.backproject(index, img, omega_max)
}

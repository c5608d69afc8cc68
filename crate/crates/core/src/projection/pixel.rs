//! Maps between pixel images on an `N × N` grid over `[−1, 1]²` and image
//! coefficients: `Q2` evaluates the real-domain image basis on the in-disc
//! pixels, `Q1` is its least-squares left inverse.

use crate::basis::index::BasisIndexSet;
use crate::basis::radial::RadialBasis;
use crate::basis::transforms::{grid_center, i_pow};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Recorded in dataset metadata.
pub const PIXEL_CONVENTION: &str = "center(2i+1)/N-1;row=y;col=x;disc<=1";

#[derive(Clone, Debug)]
pub struct PixelMap {
    n: usize,
    k_max: usize,
    /// Flat `row·N + col` indices of in-disc pixels.
    disc: Vec<usize>,
    q2: DMatrix<Complex64>,
    q1_re: DMatrix<f64>,
    q1_im: DMatrix<f64>,
    c_q: f64,
}

/// Flat indices of pixels whose centers satisfy `‖x‖ ≤ 1`.
pub fn disc_pixels(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for row in 0..n {
        for col in 0..n {
            let (x, y) = (grid_center(col, n), grid_center(row, n));
            if x * x + y * y <= 1.0 {
                out.push(row * n + col);
            }
        }
    }
    out
}

impl PixelMap {
    pub fn build(n: usize, basis: &RadialBasis, index: &BasisIndexSet) -> Result<Self> {
        let k_max = index.k_max();
        if basis.k_max() != k_max {
            return Err(Error::Dimension {
                expected: k_max,
                got: basis.k_max(),
                context: "radial basis cutoff",
            });
        }
        let disc = disc_pixels(n);
        let q = disc.len();
        let q_hat = index.q_hat();
        if q < q_hat {
            return Err(Error::SingularPixelMap(format!("only {q} in-disc pixels for {q_hat} coefficients")));
        }
        let norm = 1.0 / (2.0 * PI * (2.0 * PI).sqrt());
        let mut q2 = DMatrix::<Complex64>::zeros(q, q_hat);
        let mut cache: HashMap<i64, Vec<Vec<f64>>> = HashMap::new();
        for (p, &flat) in disc.iter().enumerate() {
            let (row, col) = (flat / n, flat % n);
            let (x, y) = (grid_center(col, n), grid_center(row, n));
            let key = ((2 * col + 1) as i64 - n as i64).pow(2) + ((2 * row + 1) as i64 - n as i64).pow(2);
            let rho = (key as f64).sqrt() / n as f64;
            let h = cache.entry(key).or_insert_with(|| basis.hankel(k_max, rho));
            let phi = y.atan2(x);
            for (c, idx) in index.i_indices().iter().enumerate() {
                let ma = idx.m.unsigned_abs() as usize;
                q2[(p, c)] = i_pow(ma as i64) * Complex64::from_polar(norm * h[idx.k][ma], idx.m as f64 * phi);
            }
        }
        let gram = q2.adjoint() * &q2;
        let chol = nalgebra::Cholesky::new(gram.clone())
            .ok_or_else(|| Error::SingularPixelMap("Q2ᴴQ2 is not positive definite".into()))?;
        let diag_min = (0..q_hat).map(|i| chol.l()[(i, i)].re).fold(f64::INFINITY, f64::min);
        let diag_max = (0..q_hat).map(|i| chol.l()[(i, i)].re).fold(0.0, f64::max);
        if !(diag_min > 1e-7 * diag_max) {
            return Err(Error::SingularPixelMap(format!("Cholesky pivot ratio {:.3e}", diag_min / diag_max)));
        }
        let q1 = chol.solve(&q2.adjoint());
        let q1_re = q1.map(|z| z.re);
        let q1_im = q1.map(|z| z.im);
        Ok(Self {
            n,
            k_max,
            disc,
            q2,
            q1_re,
            q1_im,
            c_q: 4.0 * PI.powi(3) / q as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of in-disc pixels.
    pub fn q(&self) -> usize {
        self.disc.len()
    }

    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    pub fn disc(&self) -> &[usize] {
        &self.disc
    }

    pub fn q2(&self) -> &DMatrix<Complex64> {
        &self.q2
    }

    /// `Q1` assembled as a complex matrix.
    pub fn q1(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.q1_re.nrows(), self.q1_re.ncols(), |i, j| {
            Complex64::new(self.q1_re[(i, j)], self.q1_im[(i, j)])
        })
    }

    /// `Q1` applied to the in-disc pixels of one `N × N` image.
    pub fn image_to_coeffs(&self, pixels: &[f64]) -> Result<Vec<Complex64>> {
        if pixels.len() != self.n * self.n {
            return Err(Error::Dimension {
                expected: self.n * self.n,
                got: pixels.len(),
                context: "image pixel count",
            });
        }
        let q_hat = self.q1_re.nrows();
        let mut out = vec![Complex64::new(0.0, 0.0); q_hat];
        for (p, &flat) in self.disc.iter().enumerate() {
            let v = pixels[flat];
            if v == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += Complex64::new(self.q1_re[(i, p)], self.q1_im[(i, p)]) * v;
            }
        }
        Ok(out)
    }

    /// Batched [`PixelMap::image_to_coeffs`] for `f32` images stored
    /// contiguously; returns one coefficient vector per image.
    pub fn images_to_coeffs(&self, images: &[f32]) -> Result<Vec<Vec<Complex64>>> {
        let npix = self.n * self.n;
        if images.len() % npix != 0 {
            return Err(Error::Dimension {
                expected: npix,
                got: images.len() % npix,
                context: "image payload is not a whole number of images",
            });
        }
        let count = images.len() / npix;
        let q_hat = self.q1_re.nrows();
        let mut out = Vec::with_capacity(count);
        const CHUNK: usize = 512;
        for start in (0..count).step_by(CHUNK) {
            let len = CHUNK.min(count - start);
            let x = DMatrix::<f64>::from_fn(self.q(), len, |p, s| images[(start + s) * npix + self.disc[p]] as f64);
            let re = &self.q1_re * &x;
            let im = &self.q1_im * &x;
            for s in 0..len {
                out.push((0..q_hat).map(|i| Complex64::new(re[(i, s)], im[(i, s)])).collect());
            }
        }
        Ok(out)
    }

    /// Real part of `Q2 c` placed on an `N × N` image (zero outside the disc).
    pub fn coeffs_to_image(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut img = vec![0.0; self.n * self.n];
        for (p, &flat) in self.disc.iter().enumerate() {
            let v: Complex64 = (0..coeffs.len()).map(|c| self.q2[(p, c)] * coeffs[c]).sum();
            img[flat] = v.re;
        }
        img
    }

    /// `Q2 c` on the in-disc pixels, complex.
    pub fn synthesize_disc(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        (0..self.q()).map(|p| (0..coeffs.len()).map(|c| self.q2[(p, c)] * coeffs[c]).sum()).collect()
    }

    /// `Q1 Q1ᴴ`.
    pub fn noise_gram(&self) -> DMatrix<Complex64> {
        let q1 = self.q1();
        &q1 * q1.adjoint()
    }
}

pub fn build_pixel_map(n: usize, basis: &RadialBasis, index: &BasisIndexSet) -> Result<PixelMap> {
    PixelMap::build(n, basis, index)
}

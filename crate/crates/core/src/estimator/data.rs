use crate::basis::index::{p_hat_for, q_hat_for};
use crate::error::{Error, Result};
use crate::projection::matrix::ProjectionMatrix;
use crate::projection::pixel::PixelMap;
use crate::projection::rotation::Rotation;
use num_complex::Complex64;

/// Images mapped to coefficient space, with their rotations and the
/// coefficient-domain noise variance `σ² c_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientData {
    k_max: usize,
    rotations: Vec<Rotation>,
    /// Row-major `n × q̂`.
    images: Vec<Complex64>,
    noise_var: f64,
}

impl CoefficientData {
    pub fn new(k_max: usize, rotations: Vec<Rotation>, images: Vec<Complex64>, noise_var: f64) -> Result<Self> {
        let q = q_hat_for(k_max);
        if images.len() != rotations.len() * q {
            return Err(Error::Dimension {
                expected: rotations.len() * q,
                got: images.len(),
                context: "coefficient images",
            });
        }
        if rotations.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::Config(format!("noise variance {noise_var} must be nonnegative")));
        }
        Ok(Self {
            k_max,
            rotations,
            images,
            noise_var,
        })
    }

    /// Maps `n` stacked `N × N` images through `Q1`; `σ²` is the pixel noise
    /// variance and becomes `σ² c_q`.
    pub fn from_pixels(map: &PixelMap, rotations: Vec<Rotation>, pixels: &[f32], sigma2: f64) -> Result<Self> {
        let coeffs = map.images_to_coeffs(pixels)?;
        if coeffs.len() != rotations.len() {
            return Err(Error::Dimension {
                expected: rotations.len(),
                got: coeffs.len(),
                context: "images versus rotations",
            });
        }
        Self::new(map.k_max(), rotations, coeffs.into_iter().flatten().collect(), sigma2 * map.c_q())
    }

    /// Noiseless-by-construction data `Î_s = P̂_s x_s` (plus optional noise
    /// already folded into `images`), built directly in coefficient space.
    pub fn synthesize<F>(k_max: usize, rotations: Vec<Rotation>, noise_var: f64, mut volume_for: F) -> Result<Self>
    where
        F: FnMut(usize, &ProjectionMatrix, &mut [Complex64]),
    {
        let q = q_hat_for(k_max);
        let mut images = vec![Complex64::new(0.0, 0.0); rotations.len() * q];
        for (s, rot) in rotations.iter().enumerate() {
            let p = ProjectionMatrix::new(rot, k_max);
            volume_for(s, &p, &mut images[s * q..(s + 1) * q]);
        }
        Self::new(k_max, rotations, images, noise_var)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn p_hat(&self) -> usize {
        p_hat_for(self.k_max)
    }

    pub fn q_hat(&self) -> usize {
        q_hat_for(self.k_max)
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn image(&self, s: usize) -> &[Complex64] {
        let q = self.q_hat();
        &self.images[s * q..(s + 1) * q]
    }

    /// Variance `σ² c_q` of each coefficient of the image noise.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn set_noise_var(&mut self, v: f64) {
        self.noise_var = v;
    }

    pub fn projection(&self, s: usize) -> ProjectionMatrix {
        ProjectionMatrix::new(&self.rotations[s], self.k_max)
    }

    /// First `n` records.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            k_max: self.k_max,
            rotations: self.rotations[..n].to_vec(),
            images: self.images[..n * self.q_hat()].to_vec(),
            noise_var: self.noise_var,
        }
    }
}

/// Fixed-size index ranges used for chunked reductions; the order of
/// partial sums depends only on `n`, never on the thread count.
pub(crate) fn chunks(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    (0..n).step_by(size.max(1)).map(|s| s..(s + size).min(n)).collect()
}

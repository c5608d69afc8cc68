use crate::error::{Error, Result};
use crate::estimator::CoefficientData;
use crate::linalg::hermitian_eigen_desc;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Eigenvalues of the per-image design Gram below this are dropped from the
/// pseudo-inverse and the image is flagged.
pub const PINV_CUTOFF: f64 = 1e-8;

/// Least-squares coordinates of every image in the span of the top
/// eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSet {
    /// Row-major `n × r`.
    pub alphas: Vec<Complex64>,
    pub dim: usize,
    /// `‖Î_s − P̂_s μ − P̂_s V α_s‖`.
    pub residuals: Vec<f64>,
    /// The design for this image was rank deficient.
    pub flagged: Vec<bool>,
}

impl CoordinateSet {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn alpha(&self, s: usize) -> &[Complex64] {
        &self.alphas[s * self.dim..(s + 1) * self.dim]
    }

    /// Points in `ℝ^{2r}` as `(Re α₁, Im α₁, Re α₂, …)`.
    pub fn real_embedding(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|s| self.alpha(s).iter().flat_map(|z| [z.re, z.im]).collect()).collect()
    }

    pub fn mean(&self) -> Vec<Complex64> {
        let mut m = vec![Complex64::new(0.0, 0.0); self.dim];
        for s in 0..self.len() {
            m.iter_mut().zip(self.alpha(s)).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= self.len() as f64);
        m
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    /// One row per image: Re/Im of each coordinate, the residual, the flag
    /// and the true class when known.
    pub fn to_csv(&self, true_class: Option<&[u32]>) -> String {
        let mut out = String::from("image");
        for c in 0..self.dim {
            let _ = write!(out, ",re_{c},im_{c}");
        }
        out.push_str(",residual,flagged");
        if true_class.is_some() {
            out.push_str(",true_class");
        }
        out.push('\n');
        for s in 0..self.len() {
            let _ = write!(out, "{s}");
            for z in self.alpha(s) {
                let _ = write!(out, ",{:e},{:e}", z.re, z.im);
            }
            let _ = write!(out, ",{:e},{}", self.residuals[s], self.flagged[s] as u8);
            if let Some(t) = true_class {
                let _ = write!(out, ",{}", t[s]);
            }
            out.push('\n');
        }
        out
    }
}

/// Solves `Σ_c α_{s,c} P̂_s v_c ≈ Î_s − P̂_s μ` per image through the normal
/// equations, using a pseudo-inverse when the `r × r` Gram is degenerate.
pub fn estimate_coordinates(data: &CoefficientData, mu: &[Complex64], eigvecs: &DMatrix<Complex64>, r: usize) -> Result<CoordinateSet> {
    let p = data.p_hat();
    let q = data.q_hat();
    if mu.len() != p || eigvecs.nrows() != p {
        return Err(Error::Dimension {
            expected: p,
            got: if mu.len() != p { mu.len() } else { eigvecs.nrows() },
            context: "coordinate inputs",
        });
    }
    if r > eigvecs.ncols() {
        return Err(Error::Config(format!("{r} coordinates requested from {} eigenvectors", eigvecs.ncols())));
    }
    let cols: Vec<Vec<Complex64>> = (0..r).map(|c| eigvecs.column(c).iter().copied().collect()).collect();
    let zero = Complex64::new(0.0, 0.0);
    let rows: Vec<(Vec<Complex64>, f64, bool)> = (0..data.len())
        .into_par_iter()
        .map(|s| {
            let proj = data.projection(s);
            let mut target = vec![zero; q];
            proj.apply_raw(mu, &mut target);
            target.iter_mut().zip(data.image(s)).for_each(|(t, i)| *t = i - *t);
            let mut design = DMatrix::<Complex64>::zeros(q, r);
            let mut tmp = vec![zero; q];
            for (c, v) in cols.iter().enumerate() {
                proj.apply_raw(v, &mut tmp);
                design.column_mut(c).iter_mut().zip(&tmp).for_each(|(d, t)| *d = *t);
            }
            let gram = design.adjoint() * &design;
            let rhs = design.adjoint() * nalgebra::DVector::from_column_slice(&target);
            let (vals, vecs) = hermitian_eigen_desc(&gram);
            let mut alpha = nalgebra::DVector::<Complex64>::zeros(r);
            let mut flagged = false;
            for (j, &lam) in vals.iter().enumerate() {
                if lam > PINV_CUTOFF {
                    let u = vecs.column(j);
                    let coef = u.dotc(&rhs) / lam;
                    alpha += u * coef;
                } else {
                    flagged = true;
                }
            }
            let fit = &design * &alpha;
            let residual = target.iter().zip(fit.iter()).map(|(t, f)| (t - f).norm_sqr()).sum::<f64>().sqrt();
            (alpha.iter().copied().collect(), residual, flagged)
        })
        .collect();
    let mut out = CoordinateSet {
        alphas: Vec::with_capacity(data.len() * r),
        dim: r,
        residuals: Vec::with_capacity(data.len()),
        flagged: Vec::with_capacity(data.len()),
    };
    for (a, res, f) in rows {
        out.alphas.extend(a);
        out.residuals.push(res);
        out.flagged.push(f);
    }
    Ok(out)
}

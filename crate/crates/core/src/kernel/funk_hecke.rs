use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// `c(ℓ) = 2∫₀¹ P_ℓ(t)/√(1−t²) dt`: `π (ℓ! / (2^ℓ ((ℓ/2)!)²))²` for even
/// `ℓ`, zero for odd `ℓ`.
pub fn funk_hecke_coeff(l: usize) -> f64 {
    if l % 2 == 1 {
        return 0.0;
    }
    let lf = l as f64;
    let log_ratio = ln_gamma(lf + 1.0) - lf * std::f64::consts::LN_2 - 2.0 * ln_gamma(lf / 2.0 + 1.0);
    PI * (2.0 * log_ratio).exp()
}

/// `1 / (2π |ξ₁ × ξ₂|)`.
pub fn triangular_kernel(xi1: [f64; 3], xi2: [f64; 3]) -> Result<f64> {
    let c = [
        xi1[1] * xi2[2] - xi1[2] * xi2[1],
        xi1[2] * xi2[0] - xi1[0] * xi2[2],
        xi1[0] * xi2[1] - xi1[1] * xi2[0],
    ];
    let area = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let scale = (xi1.iter().map(|v| v * v).sum::<f64>() * xi2.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if area <= 1e-14 * scale || scale == 0.0 {
        return Err(Error::Domain("triangular kernel is singular for collinear arguments".into()));
    }
    Ok(1.0 / (2.0 * PI * area))
}

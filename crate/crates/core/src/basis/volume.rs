use super::index::BasisIndexSet;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Coefficients of a volume over the V̂ basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierVolume {
    pub k_max: usize,
    pub omega_max: f64,
    pub coeffs: Vec<Complex64>,
}

/// Coefficients of an image over the Î basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierImage {
    pub k_max: usize,
    pub coeffs: Vec<Complex64>,
}

impl FourierVolume {
    pub fn zeros(index: &BasisIndexSet, omega_max: f64) -> Self {
        Self {
            k_max: index.k_max(),
            omega_max,
            coeffs: vec![Complex64::new(0.0, 0.0); index.p_hat()],
        }
    }

    pub fn new(index: &BasisIndexSet, omega_max: f64, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), index.p_hat(), "coefficient vector length");
        Self {
            k_max: index.k_max(),
            omega_max,
            coeffs,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl FourierImage {
    pub fn zeros(index: &BasisIndexSet) -> Self {
        Self {
            k_max: index.k_max(),
            coeffs: vec![Complex64::new(0.0, 0.0); index.q_hat()],
        }
    }
}

/// The antilinear map `J` with `J c = c` exactly for coefficient vectors of
/// real-valued volumes: `(J c)_{kℓm} = (−1)^{ℓ+m} conj(c_{kℓ,−m})`.
pub fn conjugate_volume(index: &BasisIndexSet, c: &[Complex64]) -> Vec<Complex64> {
    index
        .v_indices()
        .iter()
        .map(|v| {
            let partner = index.v_position(super::VIndex { m: -v.m, ..*v });
            let sign = if (v.l as i64 + v.m).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            c[partner].conj() * sign
        })
        .collect()
}

/// Image analogue of [`conjugate_volume`]: `(J c)_{km} = (−1)^m conj(c_{k,−m})`.
pub fn conjugate_image(index: &BasisIndexSet, c: &[Complex64]) -> Vec<Complex64> {
    index
        .i_indices()
        .iter()
        .map(|i| {
            let partner = index.i_position(super::IIndex { m: -i.m, ..*i });
            let sign = if i.m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            c[partner].conj() * sign
        })
        .collect()
}

/// Largest deviation `|c − J c|` relative to `max |c|`.
pub fn real_symmetry_defect(index: &BasisIndexSet, c: &[Complex64]) -> f64 {
    let j = conjugate_volume(index, c);
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    c.iter().zip(&j).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
}

/// Projects onto coefficient vectors of real volumes: `(c + J c) / 2`.
pub fn real_part_volume(index: &BasisIndexSet, c: &[Complex64]) -> Vec<Complex64> {
    let j = conjugate_volume(index, c);
    c.iter().zip(&j).map(|(a, b)| (a + b) * 0.5).collect()
}

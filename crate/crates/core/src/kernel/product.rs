//! Expansion coefficients `C_{L,M}(conj(Y_i) Y_j) = ∫ conj(Y_i) Y_j conj(Y_L^M) dΩ`
//! of products of two spherical harmonics of degree `≤ K`.
//!
//! The `φ` integral forces `M = m_j − m_i` and leaves
//! `2π ∫ P̄_i P̄_j P̄_L^M dx`, a polynomial of degree `≤ 4K` in `x = cos θ`
//! once the `(1−x²)` powers pair up, so Gauss–Legendre with `2K + 1` nodes
//! is exact. With `P̄_ℓ^{−m} = (−1)^m P̄_ℓ^m` the coefficients are real.

use crate::basis::harmonics::{lm_count, lm_index, normalized_legendre};
use crate::special::gauss_legendre;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Entries below this magnitude are treated as structural zeros.
pub const PRODUCT_DROP_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct ShProductTable {
    l_max: usize,
    /// `offsets[p]..offsets[p+1]` is the slice of `values` for pair `p`.
    offsets: Vec<usize>,
    /// Smallest `L` stored for each pair; consecutive values step by 2.
    l_start: Vec<u16>,
    values: Vec<f64>,
}

fn signed_legendre(p: &[f64], l: usize, m: i64) -> f64 {
    let v = p[lm_index(l, m.abs())];
    if m < 0 && m % 2 != 0 {
        -v
    } else {
        v
    }
}

impl ShProductTable {
    /// Table for every ordered pair of harmonics with degree `≤ l_max`.
    pub fn new(l_max: usize) -> Self {
        let n_nodes = 2 * l_max + 2;
        let (x, w) = gauss_legendre(n_nodes, -1.0, 1.0);
        let top = 2 * l_max;
        let legendre: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                let mut p = vec![0.0; lm_count(top)];
                normalized_legendre(top, xi, &mut p);
                p
            })
            .collect();
        let n = lm_count(l_max);
        let degrees: Vec<(usize, i64)> = (0..=l_max)
            .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
            .collect();
        let rows: Vec<Vec<(u16, Vec<f64>)>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let (la, ma) = degrees[a];
                let mut row = Vec::with_capacity(n);
                let mut prod = vec![0.0; n_nodes];
                for &(lb, mb) in &degrees {
                    let big_m = mb - ma;
                    for (q, p) in legendre.iter().enumerate() {
                        prod[q] = 2.0 * PI * w[q] * signed_legendre(p, la, ma) * signed_legendre(p, lb, mb);
                    }
                    let mut lo = la.abs_diff(lb).max(big_m.unsigned_abs() as usize);
                    if (lo + la + lb) % 2 == 1 {
                        lo += 1;
                    }
                    let mut vals = Vec::new();
                    let mut l = lo;
                    while l <= la + lb {
                        let v: f64 = legendre.iter().zip(&prod).map(|(p, c)| c * signed_legendre(p, l, big_m)).sum();
                        vals.push(if v.abs() < PRODUCT_DROP_TOL { 0.0 } else { v });
                        l += 2;
                    }
                    row.push((lo as u16, vals));
                }
                row
            })
            .collect();
        let mut offsets = Vec::with_capacity(n * n + 1);
        let mut l_start = Vec::with_capacity(n * n);
        let mut values = Vec::new();
        offsets.push(0);
        for row in rows {
            for (lo, vals) in row {
                l_start.push(lo);
                values.extend(vals);
                offsets.push(values.len());
            }
        }
        Self {
            l_max,
            offsets,
            l_start,
            values,
        }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// `(L_start, values)` for `L = L_start, L_start + 2, …`; all other `L`
    /// vanish, as does every `M ≠ m_j − m_i`.
    pub fn coefficients(&self, li: usize, mi: i64, lj: usize, mj: i64) -> (usize, &[f64]) {
        let n = lm_count(self.l_max);
        let p = lm_index(li, mi) * n + lm_index(lj, mj);
        (self.l_start[p] as usize, &self.values[self.offsets[p]..self.offsets[p + 1]])
    }

    /// Single coefficient `C_{L,M}(conj(Y_{li}^{mi}) Y_{lj}^{mj})`.
    pub fn coefficient(&self, li: usize, mi: i64, lj: usize, mj: i64, l: usize, m: i64) -> f64 {
        if m != mj - mi || l < li.abs_diff(lj) || l > li + lj {
            return 0.0;
        }
        let (lo, vals) = self.coefficients(li, mi, lj, mj);
        if l < lo || (l - lo) % 2 == 1 {
            return 0.0;
        }
        vals[(l - lo) / 2]
    }

    /// Number of stored (possibly zero) coefficients.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Table of product coefficients for harmonics of degree `≤ k_max`.
pub fn sh_product_table(k_max: usize) -> ShProductTable {
    ShProductTable::new(k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::harmonics::{sph_harm_all, SphereQuadrature};
    use num_complex::Complex64;

    #[test]
    fn constant_product() {
        let t = ShProductTable::new(3);
        let c = t.coefficient(0, 0, 0, 0, 0, 0);
        assert!((c - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn selection_rule_example() {
        let t = ShProductTable::new(3);
        for l in 0..=6 {
            for m in -(l as i64)..=(l as i64) {
                let c = t.coefficient(2, 1, 3, 2, l, m);
                if m == 1 && [1, 3, 5].contains(&l) {
                    assert!(c.abs() > 1e-3, "l={l}");
                } else {
                    assert_eq!(c, 0.0, "l={l} m={m}");
                }
            }
        }
    }

    /// Direct sphere quadrature of `∫ conj(Y_a) Y_b conj(Y_L^M)` with a
    /// product rule, independent of the θ-only reduction.
    fn direct(la: usize, ma: i64, lb: usize, mb: i64, l: usize, m: i64) -> Complex64 {
        let top = la.max(lb).max(l);
        let q = SphereQuadrature::exact_for_degree(la + lb + l + 2);
        q.nodes()
            .map(|(ct, p, w)| {
                let y = sph_harm_all(top, ct, p);
                y[lm_index(la, ma)].conj() * y[lm_index(lb, mb)] * y[lm_index(l, m)].conj() * w
            })
            .sum()
    }

    #[test]
    fn matches_direct_sphere_quadrature() {
        let t = ShProductTable::new(5);
        for &(la, ma, lb, mb) in &[(2usize, 1i64, 3usize, 2i64), (5, 3, 4, -2), (1, -1, 1, 1), (4, 0, 2, -2)] {
            for l in 0..=la + lb {
                let m = mb - ma;
                if m.unsigned_abs() as usize > l {
                    continue;
                }
                let d = direct(la, ma, lb, mb, l, m);
                assert!(d.im.abs() < 1e-13);
                assert!((d.re - t.coefficient(la, ma, lb, mb, l, m)).abs() < 1e-12, "{la} {ma} {lb} {mb} {l}");
            }
        }
    }

    #[test]
    fn parseval_on_degree_five_product() {
        let t = ShProductTable::new(5);
        let (lo, vals) = t.coefficients(5, 3, 4, -2);
        assert!(lo <= 9);
        let energy: f64 = vals.iter().map(|v| v * v).sum();
        let q = SphereQuadrature::exact_for_degree(20);
        let direct: f64 = q
            .nodes()
            .map(|(ct, p, w)| {
                let y = sph_harm_all(5, ct, p);
                (y[lm_index(5, 3)] * y[lm_index(4, -2)]).norm_sqr() * w
            })
            .sum();
        assert!((energy - direct).abs() < 1e-10, "{energy} vs {direct}");
    }
}

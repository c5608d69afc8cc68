use super::funk_hecke::funk_hecke_coeff;
use super::product::ShProductTable;
use crate::basis::index::{angular_index, v_block_dim};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// Entries below this fraction of the block's largest magnitude are dropped.
pub const BLOCK_DROP_TOL: f64 = 1e-13;

/// Sparse block `L̂^{k1,k2}`, real symmetric, stored row-compressed.
///
/// Row `(i1, i2)` and column `(j1, j2)` are flattened as `i1·dim2 + i2`,
/// matching a row-major `dim1 × dim2` coefficient matrix. The block acts as
/// `(L̂Σ)_{i1 i2} = Σ L̂_{(i1,i2),(j1,j2)} Σ_{j1 j2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBlock {
    pub k1: usize,
    pub k2: usize,
    pub dim1: usize,
    pub dim2: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

/// Positions of block `k`, grouped by order `m` and ascending within a group.
fn positions_by_order(k: usize) -> (Vec<(usize, i64)>, Vec<Vec<usize>>) {
    let d = v_block_dim(k);
    let lm: Vec<(usize, i64)> = (0..d).map(|p| angular_index(k, p)).collect();
    let mut groups = vec![Vec::new(); 2 * k + 1];
    for (p, &(_, m)) in lm.iter().enumerate() {
        groups[(m + k as i64) as usize].push(p);
    }
    (lm, groups)
}

impl KernelBlock {
    pub fn dim(&self) -> usize {
        self.dim1 * self.dim2
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn fill_ratio(&self) -> f64 {
        self.nnz() as f64 / (self.dim() as f64).powi(2)
    }

    /// `(dim1·dim2)² / (k1 + k2 + 1)`.
    pub fn sparsity_bound(&self) -> f64 {
        (self.dim() as f64).powi(2) / (self.k1 + self.k2 + 1) as f64
    }

    pub fn satisfies_sparsity_bound(&self) -> bool {
        self.nnz() as f64 <= self.sparsity_bound()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    /// Entry `(r, c)`, zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(i) => vals[i],
            Err(_) => 0.0,
        }
    }

    /// Entry addressed by angular position pairs.
    pub fn entry(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> f64 {
        self.get(i1 * self.dim2 + i2, j1 * self.dim2 + j2)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| self.get(r, r)).collect()
    }

    /// Largest `|L_{rc} − L_{cr}|`.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.dim())
            .into_par_iter()
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| (v - self.get(c as usize, r)).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, v)| v * x[c as usize]).sum();
        });
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, v)| x[c as usize] * v).sum();
        });
    }

    /// Dense row-major copy; intended for small blocks.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r * n + c as usize] = v;
            }
        }
        out
    }

    pub fn check_shape(&self, k1: usize, k2: usize) -> Result<()> {
        let ok = self.k1 == k1
            && self.k2 == k2
            && self.dim1 == v_block_dim(k1)
            && self.dim2 == v_block_dim(k2)
            && self.row_ptr.len() == self.dim() + 1
            && self.cols.len() == self.vals.len()
            && self.row_ptr.last() == Some(&self.vals.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!("kernel block ({k1}, {k2}) has inconsistent layout")))
        }
    }
}

/// Assembles `L̂^{k1,k2}` from product coefficients:
/// `L̂_{(i1,i2),(j1,j2)} = Σ_L c(L) C_{L,M}(conj(a_{i1})a_{j1}) C_{L,M}(conj(a_{i2})a_{j2})`
/// with `M = m_{j1} − m_{i1} = m_{j2} − m_{i2}`.
pub fn assemble_block(k1: usize, k2: usize, table: &ShProductTable) -> Result<KernelBlock> {
    if k1.max(k2) > table.l_max() {
        return Err(Error::Dimension {
            expected: table.l_max(),
            got: k1.max(k2),
            context: "kernel block degree exceeds product table",
        });
    }
    let (lm1, _) = positions_by_order(k1);
    let (lm2, groups2) = positions_by_order(k2);
    let (d1, d2) = (lm1.len(), lm2.len());
    let c: Vec<f64> = (0..=2 * table.l_max()).map(funk_hecke_coeff).collect();
    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..d1 * d2)
        .into_par_iter()
        .map(|r| {
            let (i1, i2) = (r / d2, r % d2);
            let (li1, mi1) = lm1[i1];
            let (li2, mi2) = lm2[i2];
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for (j1, &(lj1, mj1)) in lm1.iter().enumerate() {
                let target = mi2 + mj1 - mi1;
                if target.unsigned_abs() as usize > k2 {
                    continue;
                }
                let (lo1, c1) = table.coefficients(li1, mi1, lj1, mj1);
                let hi1 = lo1 + 2 * c1.len();
                for &j2 in &groups2[(target + k2 as i64) as usize] {
                    let (lj2, mj2) = lm2[j2];
                    let (lo2, c2) = table.coefficients(li2, mi2, lj2, mj2);
                    let lo = lo1.max(lo2);
                    let hi = hi1.min(lo2 + 2 * c2.len());
                    let mut v = 0.0;
                    let mut l = lo;
                    while l < hi {
                        v += c[l] * c1[(l - lo1) / 2] * c2[(l - lo2) / 2];
                        l += 2;
                    }
                    if v != 0.0 {
                        cols.push((j1 * d2 + j2) as u32);
                        vals.push(v);
                    }
                }
            }
            (cols, vals)
        })
        .collect();
    let max = rows.iter().flat_map(|(_, v)| v).fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = BLOCK_DROP_TOL * max;
    let mut row_ptr = Vec::with_capacity(d1 * d2 + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for (rc, rv) in rows {
        for (c, v) in rc.into_iter().zip(rv) {
            if v.abs() >= cut {
                cols.push(c);
                vals.push(v);
            }
        }
        row_ptr.push(vals.len());
    }
    Ok(KernelBlock {
        k1,
        k2,
        dim1: d1,
        dim2: d2,
        row_ptr,
        cols,
        vals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_zero_zero_is_one_quarter() {
        let t = ShProductTable::new(2);
        let b = assemble_block(0, 0, &t).unwrap();
        assert_eq!(b.dim(), 1);
        assert!((b.get(0, 0) - 0.25).abs() < 1e-15);
        assert!(0.25 >= 1.0 / (2.0 * std::f64::consts::PI));
    }

    #[test]
    fn blocks_are_symmetric_with_sorted_columns() {
        let t = ShProductTable::new(5);
        for (k1, k2) in [(2, 2), (3, 5), (5, 3), (4, 4)] {
            let b = assemble_block(k1, k2, &t).unwrap();
            b.check_shape(k1, k2).unwrap();
            assert!(b.symmetry_defect() < 1e-12 * b.max_abs());
            for r in 0..b.dim() {
                let (cols, _) = b.row(r);
                assert!(cols.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn transposed_pair_swaps_factors() {
        let t = ShProductTable::new(4);
        let a = assemble_block(2, 4, &t).unwrap();
        let b = assemble_block(4, 2, &t).unwrap();
        for i1 in 0..a.dim1 {
            for i2 in 0..a.dim2 {
                for j1 in 0..a.dim1 {
                    for j2 in 0..a.dim2 {
                        let x = a.entry(i1, i2, j1, j2);
                        let y = b.entry(i2, i1, j2, j1);
                        assert!((x - y).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_degree_beyond_table() {
        let t = ShProductTable::new(2);
        assert!(assemble_block(3, 1, &t).is_err());
    }
}

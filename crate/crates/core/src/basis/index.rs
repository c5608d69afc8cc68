use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Index `(k, ℓ, m)` of a volume basis function `f_k(r) Y_ℓ^m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VIndex {
    pub k: usize,
    pub l: usize,
    pub m: i64,
}

/// Index `(k, m)` of an image basis function `f_k(r) e^{imφ} / √(2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IIndex {
    pub k: usize,
    pub m: i64,
}

/// Ordered index lists of the volume space V̂ and image space Î.
///
/// Entries sharing a radial index `k` are contiguous. Inside block `k` the
/// volume entry `(ℓ, m)` sits at `ℓ(ℓ+1)/2 + m` and the image entry `m` at
/// `(m + k)/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisIndexSet {
    k_max: usize,
    v: Vec<VIndex>,
    i: Vec<IIndex>,
    v_offsets: Vec<usize>,
    i_offsets: Vec<usize>,
}

/// Number of volume basis functions with radial index `k`.
pub const fn v_block_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Position of `(ℓ, m)` inside a volume block.
pub const fn angular_pos(l: usize, m: i64) -> usize {
    ((l * (l + 1) / 2) as i64 + m) as usize
}

/// Inverse of [`angular_pos`] within block `k`.
pub fn angular_index(k: usize, pos: usize) -> (usize, i64) {
    let mut l = k % 2;
    loop {
        let start = l * l.saturating_sub(1) / 2;
        let len = 2 * l + 1;
        if pos < start + len {
            return (l, pos as i64 - start as i64 - l as i64);
        }
        l += 2;
        debug_assert!(l <= k, "angular position {pos} out of range for block {k}");
    }
}

impl BasisIndexSet {
    pub fn new(k_max: usize) -> Self {
        let mut v = Vec::new();
        let mut i = Vec::new();
        let mut v_offsets = vec![0];
        let mut i_offsets = vec![0];
        for k in 0..=k_max {
            for l in (k % 2..=k).step_by(2) {
                for m in -(l as i64)..=(l as i64) {
                    v.push(VIndex { k, l, m });
                }
            }
            for m in (-(k as i64)..=(k as i64)).step_by(2) {
                i.push(IIndex { k, m });
            }
            v_offsets.push(v.len());
            i_offsets.push(i.len());
        }
        Self {
            k_max,
            v,
            i,
            v_offsets,
            i_offsets,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn p_hat(&self) -> usize {
        self.v.len()
    }

    pub fn q_hat(&self) -> usize {
        self.i.len()
    }

    pub fn v_indices(&self) -> &[VIndex] {
        &self.v
    }

    pub fn i_indices(&self) -> &[IIndex] {
        &self.i
    }

    /// Range of volume coefficients with radial index `k`.
    pub fn v_block(&self, k: usize) -> Range<usize> {
        self.v_offsets[k]..self.v_offsets[k + 1]
    }

    /// Range of image coefficients with radial index `k`.
    pub fn i_block(&self, k: usize) -> Range<usize> {
        self.i_offsets[k]..self.i_offsets[k + 1]
    }

    /// Global position of a volume index.
    pub fn v_position(&self, idx: VIndex) -> usize {
        self.v_offsets[idx.k] + angular_pos(idx.l, idx.m)
    }

    /// Global position of an image index.
    pub fn i_position(&self, idx: IIndex) -> usize {
        self.i_offsets[idx.k] + ((idx.m + idx.k as i64) / 2) as usize
    }
}

/// `(K+1)(K+2)(K+3)/6`.
pub const fn p_hat_for(k_max: usize) -> usize {
    (k_max + 1) * (k_max + 2) * (k_max + 3) / 6
}

/// `(K+1)(K+2)/2`.
pub const fn q_hat_for(k_max: usize) -> usize {
    (k_max + 1) * (k_max + 2) / 2
}

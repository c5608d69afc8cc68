use crate::basis::index::BasisIndexSet;
use crate::basis::volume::conjugate_volume;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Gaps examined at the top of the spectrum.
pub const RANK_SCAN: usize = 10;

/// Number of leading eigenvalues separated from the bulk.
///
/// `r` is the largest `i + 1` among the top gaps with `λ_i > 0`,
/// `λ_i ≥ min_ratio · λ_0` and `λ_i > (1 + δ) λ_{i+1}`, or 0 when no gap
/// qualifies. Taking the last qualifying gap keeps a weaker second spike
/// that sits behind a dominant one; the floor relative to `λ_0` keeps
/// ratios between near-zero residual eigenvalues out.
pub fn estimate_rank(eigvals: &[f64], delta: f64, min_ratio: f64) -> usize {
    let n = eigvals.len();
    if n < 2 || !(eigvals[0] > 0.0) {
        return 0;
    }
    let floor = min_ratio * eigvals[0];
    let tiny = 1e-12 * eigvals[0];
    (0..RANK_SCAN.min(n - 1))
        .filter(|&i| {
            let (a, b) = (eigvals[i], eigvals[i + 1]);
            a > 0.0 && a >= floor && a - b > delta * b.max(0.0) + tiny
        })
        .max()
        .map_or(0, |i| i + 1)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn median_abs_deviation(v: &[f64]) -> f64 {
    let mut w = v.to_vec();
    let m = median(&mut w);
    let mut d: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&mut d)
}

/// Multiplies each eigenvector by a unit phase so that it is, where
/// possible, the coefficient vector of a real volume (`J v = v`), then fixes
/// the remaining sign so the largest-magnitude entry has positive real part
/// (or positive imaginary part when that entry is purely imaginary).
///
/// Only global phases are applied, so the columns stay orthonormal.
pub fn fix_eigenvector_phases(index: &BasisIndexSet, vecs: &mut DMatrix<Complex64>, count: usize) {
    for c in 0..count.min(vecs.ncols()) {
        let v: Vec<Complex64> = vecs.column(c).iter().copied().collect();
        let jv = conjugate_volume(index, &v);
        // J v = e^{iφ} v for a real-symmetric eigenvector; e^{iφ/2} v is J-invariant.
        let overlap: Complex64 = v.iter().zip(&jv).map(|(a, b)| a.conj() * b).sum();
        let mut phase = if overlap.norm() > 1e-8 {
            Complex64::from_polar(1.0, 0.5 * overlap.arg())
        } else {
            Complex64::new(1.0, 0.0)
        };
        let lead = v
            .iter()
            .map(|z| z * phase)
            .fold(Complex64::new(0.0, 0.0), |a, z| if z.norm() > a.norm() * (1.0 + 1e-9) { z } else { a });
        let key = if lead.re.abs() >= 1e-6 * lead.norm() { lead.re } else { lead.im };
        if key < 0.0 {
            phase = -phase;
        }
        for r in 0..vecs.nrows() {
            vecs[(r, c)] *= phase;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spike_over_flat_tail() {
        let mut e = vec![10.0, 0.9];
        e.extend(std::iter::repeat_n(0.85, 30));
        assert_eq!(estimate_rank(&e, 0.5, 0.02), 1);
    }

    #[test]
    fn flat_spectrum_has_rank_zero() {
        assert_eq!(estimate_rank(&[1.0; 20], 0.5, 0.02), 0);
        assert_eq!(estimate_rank(&[0.0; 5], 0.5, 0.02), 0);
        assert_eq!(estimate_rank(&[3.0], 0.5, 0.02), 0);
    }

    #[test]
    fn two_spikes_over_signed_noise() {
        let mut e = vec![5.0, 3.0];
        e.extend((0..40).map(|i| 0.2 - 0.01 * i as f64));
        assert_eq!(estimate_rank(&e, 0.5, 0.02), 2);
    }

    #[test]
    fn tiny_bulk_gaps_do_not_win() {
        // Numerical bulk around zero with gaps far smaller than the spike's.
        let mut e = vec![1.0, 1e-6, 1e-12];
        e.extend((0..30).map(|i| -1e-7 * i as f64));
        assert_eq!(estimate_rank(&e, 0.5, 0.02), 1);
    }

    #[test]
    fn weaker_second_spike_behind_a_dominant_one_counts() {
        let mut e = vec![1.0, 0.17];
        e.extend((0..40).map(|i| 0.09 - 0.001 * i as f64));
        assert_eq!(estimate_rank(&e, 0.5, 0.02), 2);
        // Below the floor it is treated as residual.
        assert_eq!(estimate_rank(&e, 0.5, 0.2), 1);
    }

    #[test]
    fn weak_separation_is_rejected() {
        let mut e = vec![1.3, 1.0];
        e.extend((0..30).map(|i| 0.99 - 0.03 * i as f64));
        assert_eq!(estimate_rank(&e, 0.5, 0.02), 0);
    }

    #[test]
    fn phase_fix_makes_real_volume_vectors_invariant() {
        let index = BasisIndexSet::new(3);
        let p = index.p_hat();
        let raw: Vec<Complex64> = (0..p).map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())).collect();
        let real = crate::basis::volume::real_part_volume(&index, &raw);
        let n = real.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let rotated = Complex64::from_polar(1.0 / n, 2.1);
        let mut m = DMatrix::from_fn(p, 1, |r, _| real[r] * rotated);
        fix_eigenvector_phases(&index, &mut m, 1);
        let v: Vec<Complex64> = m.column(0).iter().copied().collect();
        let jv = conjugate_volume(&index, &v);
        let defect: f64 = v.iter().zip(&jv).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(defect < 1e-12);
        let back: Vec<Complex64> = real.iter().map(|z| z / n).collect();
        let agree: Complex64 = back.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((agree.norm() - 1.0).abs() < 1e-12 && agree.re.abs() > 0.999);
    }
}

mod common;

use common::brute_force_block;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tomocov::basis::index::{angular_index, v_block_dim};
use tomocov::kernel::*;
use tomocov::projection::rotation::sample_uniform_rotations;
use tomocov::projection::wigner::wigner_d_all;

#[test]
fn block_two_two_matches_brute_force_quadrature() {
    let table = ShProductTable::new(2);
    let block = assemble_block(2, 2, &table).unwrap();
    let oracle = brute_force_block(2);
    let n = block.dim();
    let scale = oracle.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    for r in 0..n {
        for c in 0..n {
            let want = oracle[r * n + c];
            let got = block.get(r, c);
            assert!(want.im.abs() < 1e-10 * scale);
            let err = (got - want.re).abs();
            assert!(err <= 1e-3 * want.re.abs().max(1e-9 * scale), "({r},{c}) {got} vs {}", want.re);
        }
    }
}

#[test]
fn block_zero_zero_matches_brute_force() {
    let oracle = brute_force_block(0);
    assert!((oracle[0].re - 0.25).abs() < 1e-10);
}

#[test]
fn small_blocks_respect_eigenvalue_floor_and_sparsity() {
    let provider = BlockProvider::new(6, None);
    for k1 in 0..=6 {
        for k2 in 0..=6 {
            let b = provider.block(k1, k2).unwrap();
            assert!(b.satisfies_sparsity_bound(), "({k1},{k2}) nnz {}", b.nnz());
            if k1 == k2 || (k1 + k2) % 3 == 0 {
                let s = block_spectral_stats(&b).unwrap();
                assert!(s.lambda_min >= 1.0 / (2.0 * PI) - 1e-6, "({k1},{k2}) {}", s.lambda_min);
            }
        }
    }
}

/// `U` on block `k`: `D^ℓ` acting on each degree-`ℓ` group.
fn block_rotation(k: usize, d: &[tomocov::projection::wigner::WignerMatrix]) -> Vec<Complex64> {
    let n = v_block_dim(k);
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for p in 0..n {
        let (l, m) = angular_index(k, p);
        for q in 0..n {
            let (l2, m2) = angular_index(k, q);
            if l == l2 {
                u[p * n + q] = d[l].get(m, m2);
            }
        }
    }
    u
}

fn matmul(a: &[Complex64], b: &[Complex64], n: usize, k: usize, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * m];
    for i in 0..n {
        for t in 0..k {
            let x = a[i * k + t];
            for j in 0..m {
                out[i * m + j] += x * b[t * m + j];
            }
        }
    }
    out
}

fn adjoint(a: &[Complex64], n: usize, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = a[i * m + j].conj();
        }
    }
    out
}

#[test]
fn blocks_commute_with_rotations() {
    let kmax = 4;
    let provider = BlockProvider::new(kmax, None);
    let rot = sample_uniform_rotations(1, 77)[0];
    let d = wigner_d_all(kmax, &rot);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k1 in 0..=kmax {
        for k2 in 0..=kmax {
            let b = provider.block(k1, k2).unwrap();
            let (d1, d2) = (b.dim1, b.dim2);
            let sigma: Vec<Complex64> = (0..d1 * d2).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let u1 = block_rotation(k1, &d);
            let u2h = adjoint(&block_rotation(k2, &d), d2, d2);
            let rotated = matmul(&matmul(&u1, &sigma, d1, d1, d2), &u2h, d1, d2, d2);
            let mut lhs = vec![Complex64::new(0.0, 0.0); d1 * d2];
            b.apply(&rotated, &mut lhs);
            let mut ls = vec![Complex64::new(0.0, 0.0); d1 * d2];
            b.apply(&sigma, &mut ls);
            let rhs = matmul(&matmul(&u1, &ls, d1, d1, d2), &u2h, d1, d2, d2);
            let diff: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let norm: f64 = sigma.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(diff <= 1e-8 * norm, "({k1},{k2}) {diff}");
        }
    }
}

#[test]
fn disk_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let provider = BlockProvider::new(4, Some(dir.path().to_path_buf()));
    let fresh = provider.block(3, 4).unwrap();
    let path = provider.cache_path(3, 4).unwrap();
    assert!(path.exists());
    let again = provider.block(3, 4).unwrap();
    assert_eq!(fresh, again);
    // A provider with a different cutoff must not reuse the file.
    let other = BlockProvider::new(5, Some(dir.path().to_path_buf()));
    assert_ne!(other.cache_path(3, 4), Some(path));
}

#[test]
fn lambda_max_tracks_linear_fit_for_moderate_k() {
    let provider = BlockProvider::new(6, None);
    for k in 4..=6 {
        let s = block_spectral_stats(&provider.block(k, k).unwrap()).unwrap();
        let fit = lambda_max_fit(k);
        assert!((s.lambda_max - fit).abs() <= 0.15 * fit, "k={k} {} vs {fit}", s.lambda_max);
        assert!(s.condition_number() <= condition_fit(k) * 1.15, "k={k} {}", s.condition_number());
    }
}

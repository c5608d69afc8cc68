mod common;

use common::{data_from_volumes, random_hermitian, random_vec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use tomocov::basis::index::BasisIndexSet;
use tomocov::estimator::covariance::{cg_budget, solve_block};
use tomocov::estimator::*;
use tomocov::kernel::BlockProvider;
use tomocov::linalg::{frobenius, hermitian_defect};
use tomocov::projection::rotation::sample_uniform_rotations;

#[test]
fn limiting_round_trip_recovers_random_hermitian() {
    let k = 4;
    let index = BasisIndexSet::new(k);
    let provider = BlockProvider::new(k, None);
    let sigma = random_hermitian(index.p_hat(), 3);
    let rhs = apply_limiting_l(&sigma, &index, &provider).unwrap();
    assert!(hermitian_defect(&rhs) < 1e-12);
    let problem = CovarianceProblem { index: &index, rhs: &rhs, data: None, blocks: Some(&provider) };
    let opts = CovarianceOptions { cg_tol: 1e-10, ..Default::default() };
    let est = solve_covariance(&problem, "limiting", &opts).unwrap();
    assert!(!est.solver_report.flagged);
    assert!(frobenius(&(&est.sigma - &sigma)) <= 1e-6 * frobenius(&sigma));
    assert!(est.eigvals.windows(2).all(|w| w[0] >= w[1]));
    let g = est.eigvecs.adjoint() * &est.eigvecs;
    assert!((g - DMatrix::<Complex64>::identity(index.p_hat(), index.p_hat())).iter().all(|z| z.norm() < 1e-8));
}

#[test]
fn block_iterations_stay_within_budget_up_to_six() {
    let k = 6;
    let index = BasisIndexSet::new(k);
    let provider = BlockProvider::new(k, None);
    let sigma = random_hermitian(index.p_hat(), 9);
    let rhs = apply_limiting_l(&sigma, &index, &provider).unwrap();
    for k1 in 0..=k {
        for k2 in k1..=k {
            let b = provider.block(k1, k2).unwrap();
            let r = tomocov::estimator::covariance::extract_block(&rhs, &index, k1, k2);
            let (_, rep) = solve_block(&b, &r, &CovarianceOptions::default());
            assert!(rep.converged);
            assert!(rep.iterations as f64 <= cg_budget(k1, k2), "({k1},{k2}) {} > {}", rep.iterations, cg_budget(k1, k2));
        }
    }
}

#[test]
fn empirical_operator_is_self_adjoint() {
    let k = 3;
    let data = data_from_volumes(k, 40, &[random_vec(20, 1)], 0.0, 4);
    let (a, b) = (random_hermitian(20, 5), random_hermitian(20, 6) * Complex64::new(0.3, 0.7));
    let la = apply_empirical_l(&data, &a);
    let lb = apply_empirical_l(&data, &b);
    let lhs = (la.adjoint() * &b).trace();
    let rhs = (a.adjoint() * &lb).trace();
    assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
}

#[test]
fn empirical_operator_matches_dense_definition() {
    let k = 2;
    let data = data_from_volumes(k, 7, &[random_vec(10, 1)], 0.0, 8);
    let sigma = random_hermitian(10, 2);
    let got = apply_empirical_l(&data, &sigma);
    let mut want = DMatrix::<Complex64>::zeros(10, 10);
    for s in 0..data.len() {
        let proj = data.projection(s);
        let q = data.q_hat();
        let pm = DMatrix::from_fn(q, 10, |i, j| {
            let mut e = vec![Complex64::new(0.0, 0.0); 10];
            e[j] = Complex64::new(1.0, 0.0);
            let mut out = vec![Complex64::new(0.0, 0.0); q];
            proj.apply_raw(&e, &mut out);
            out[i]
        });
        let g = pm.adjoint() * &pm;
        want += &g * &sigma * &g;
    }
    want /= Complex64::new(data.len() as f64, 0.0);
    assert!(frobenius(&(got - &want)) < 1e-12 * frobenius(&want));
}

#[test]
fn gradients_match_finite_differences() {
    let k = 2;
    let data = data_from_volumes(k, 30, &[random_vec(10, 11), random_vec(10, 12)], 0.05, 13);
    let mu = random_vec(10, 14);
    assert!(gradient_check_mean(&data, &mu, 1e-5) < 1e-6);
    let sigma = random_hermitian(10, 15);
    assert!(gradient_check_covariance(&data, &mu, &sigma, 1e-5) < 1e-6);
}

#[test]
fn empirical_mean_zeroes_gradient() {
    let k = 3;
    let data = data_from_volumes(k, 200, &[random_vec(20, 21)], 0.1, 22);
    let b = accumulate_mean(&data);
    let est = solve_mean(&data, &b, "empirical", &MeanOptions::default()).unwrap();
    assert!(!est.flagged);
    let g = tomocov::estimator::gradient::mean_gradient(&data, &est.mu);
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(g.iter().all(|z| z.norm() < 1e-6 * scale));
}

#[test]
fn identical_rotations_trigger_mean_guard() {
    let k = 3;
    let rot = sample_uniform_rotations(1, 2)[0];
    let x = random_vec(20, 3);
    let data = CoefficientData::synthesize(k, vec![rot; 50], 0.0, |_, p, out| p.apply_raw(&x, out)).unwrap();
    let b = accumulate_mean(&data);
    let est = solve_mean(&data, &b, "empirical", &MeanOptions::default()).unwrap();
    assert!(est.flagged && est.mu.iter().all(|z| z.norm() == 0.0));
    let lim = solve_mean(&data, &b, "limiting", &MeanOptions::default()).unwrap();
    assert!(lim.mu.iter().zip(&b).all(|(m, b)| *m == b * 2.0));
}

#[test]
fn single_image_triggers_covariance_guard() {
    let k = 2;
    let data = data_from_volumes(k, 1, &[random_vec(10, 1)], 0.0, 2);
    let index = BasisIndexSet::new(k);
    let rhs = random_hermitian(10, 3);
    let problem = CovarianceProblem { index: &index, rhs: &rhs, data: Some(&data), blocks: None };
    let est = solve_covariance(&problem, "empirical", &CovarianceOptions::default()).unwrap();
    assert!(est.solver_report.flagged);
    assert!(frobenius(&est.sigma) == 0.0);
}

#[test]
fn rhs_is_hermitian_and_reduction_is_thread_independent() {
    let k = 3;
    let data = data_from_volumes(k, 700, &[random_vec(20, 1), random_vec(20, 2)], 0.2, 3);
    let mu = random_vec(20, 4);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| accumulate_covariance_rhs(&data, &mu, NoiseTerm::Limiting));
    assert!(hermitian_defect(&a) < 1e-12 * frobenius(&a));
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = three.install(|| accumulate_covariance_rhs(&data, &mu, NoiseTerm::Limiting));
    assert_eq!(a, b);
    let la = one.install(|| apply_empirical_l(&data, &a));
    let lb = three.install(|| apply_empirical_l(&data, &a));
    assert_eq!(la, lb);
}

#[test]
fn unknown_solver_lists_available() {
    let index = BasisIndexSet::new(1);
    let rhs = DMatrix::<Complex64>::zeros(4, 4);
    let problem = CovarianceProblem { index: &index, rhs: &rhs, data: None, blocks: None };
    let err = solve_covariance(&problem, "magic", &CovarianceOptions::default()).unwrap_err();
    assert!(err.to_string().contains("limiting"));
}

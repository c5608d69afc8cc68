use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tomocov::estimator::CoefficientData;
use tomocov::io::{read_estimates, write_estimates};
use tomocov::pipeline::*;
use tomocov::projection::rotation::sample_uniform_rotations;
use tomocov::simulate::{desk, generate_dataset};

fn random_vec(p: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

struct TwoClass {
    data: CoefficientData,
    x: [Vec<Complex64>; 2],
    labels: Vec<usize>,
}

fn noiseless_two_class(k: usize, n: usize) -> TwoClass {
    let p = tomocov::basis::index::p_hat_for(k);
    let x = [random_vec(p, 1), random_vec(p, 2)];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let data = CoefficientData::synthesize(k, sample_uniform_rotations(n, 4), 0.0, |s, proj, out| proj.apply_raw(&x[labels[s]], out)).unwrap();
    TwoClass { data, x, labels }
}

fn exact_inputs(t: &TwoClass) -> (Vec<Complex64>, DMatrix<Complex64>, f64) {
    let mu: Vec<Complex64> = t.x[0].iter().zip(&t.x[1]).map(|(a, b)| (a + b) * 0.5).collect();
    let d: Vec<Complex64> = t.x[0].iter().zip(&t.x[1]).map(|(a, b)| a - b).collect();
    let dn = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v = DMatrix::from_column_slice(d.len(), 1, &d.iter().map(|z| z / dn).collect::<Vec<_>>());
    (mu, v, dn)
}

#[test]
fn noiseless_coordinates_take_two_values() {
    let t = noiseless_two_class(3, 40);
    let (mu, v, dn) = exact_inputs(&t);
    let coords = estimate_coordinates(&t.data, &mu, &v, 1).unwrap();
    for s in 0..40 {
        let want = if t.labels[s] == 0 { dn / 2.0 } else { -dn / 2.0 };
        assert!((coords.alpha(s)[0] - Complex64::new(want, 0.0)).norm() < 1e-9, "{s}: {}", coords.alpha(s)[0]);
        assert!(coords.residuals[s] < 1e-9);
        assert!(!coords.flagged[s]);
    }
}

#[test]
fn zero_eigenvector_flags_every_image() {
    let t = noiseless_two_class(2, 5);
    let (mu, v, _) = exact_inputs(&t);
    let coords = estimate_coordinates(&t.data, &mu, &(v * Complex64::new(0.0, 0.0)), 1).unwrap();
    assert_eq!(coords.flagged_count(), 5);
    assert!(coords.alphas.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
}

#[test]
fn exact_mixture_reconstructs_both_volumes() {
    let t = noiseless_two_class(3, 60);
    let (mu, v, _) = exact_inputs(&t);
    let coords = estimate_coordinates(&t.data, &mu, &v, 1).unwrap();
    for fitter in ["isotropic", "full"] {
        let mix = fit_mixture(&coords, 2, fitter, &EmOptions::default()).unwrap();
        let vols = reconstruct_volumes(&mu, &v, &mix);
        for x in &t.x {
            let best = vols
                .iter()
                .map(|w| w.iter().zip(x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "{fitter}: {best}");
        }
    }
}

#[test]
fn zero_mixture_means_give_the_mean_volume() {
    let mu = random_vec(10, 3);
    let v = DMatrix::<Complex64>::identity(10, 10);
    let mix = MixtureModel {
        fitter: "isotropic".into(),
        c: 3,
        means: vec![vec![Complex64::new(0.0, 0.0); 2]; 3],
        weights: vec![1.0 / 3.0; 3],
        variances: vec![1.0; 3],
        loglik: 0.0,
        loglik_trace: vec![],
        iterations: 0,
        converged: true,
        reseeds: 0,
    };
    assert!(reconstruct_volumes(&mu, &v, &mix).iter().all(|w| *w == mu));
}

#[test]
fn unknown_names_fail_validation() {
    let mut cfg = PipelineConfig::default();
    cfg.mixture = "kmeans".into();
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("isotropic") && err.contains("full"), "{err}");
    let mut cfg = PipelineConfig::default();
    cfg.covariance.guard_factor = 1.0;
    assert!(cfg.validate().is_err());
}

fn small_two_class(n: usize, snr: Option<f64>) -> tomocov::simulate::Simulated {
    let mut cfg = desk::two_class(n, snr, 5);
    cfg.k_max = 4;
    cfg.n_res = 6;
    cfg.n_pix = 25;
    generate_dataset(&cfg).unwrap()
}

#[test]
fn small_pipeline_finds_two_classes_and_is_deterministic() {
    let sim = small_two_class(1500, Some(0.5));
    let cfg = PipelineConfig::default();
    let out = run_pipeline(&sim.dataset, &cfg).unwrap();
    assert_eq!(out.report.rank_estimate, 1, "eigvals {:?}", &out.report.eigvals[..4]);
    assert_eq!(out.report.classes, 2);
    assert!(out.report.probabilities.iter().all(|w| (w - 0.5).abs() < 0.08), "{:?}", out.report.probabilities);
    let trace = &out.analysis.mixture.loglik_trace;
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    let m = out.analysis.coords.mean();
    let spread = out.analysis.mixture.means.iter().map(|c| c[0].norm()).fold(0.0, f64::max);
    assert!(m[0].norm() < 0.1 * spread, "coordinate mean {} vs spread {spread}", m[0]);

    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let again = one.install(|| run_pipeline(&sim.dataset, &cfg).unwrap());
    assert_eq!(serde_json::to_string(&out.report).unwrap(), serde_json::to_string(&again.report).unwrap());
}

#[test]
fn class_override_completes_on_two_class_data() {
    let sim = small_two_class(800, None);
    let mut cfg = PipelineConfig::default();
    cfg.classes = Some(3);
    let out = run_pipeline(&sim.dataset, &cfg).unwrap();
    assert_eq!(out.report.classes, 3);
    assert!(out.report.classes_overridden);
    assert!((out.report.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(out.analysis.volumes.len(), 3);
}

#[test]
fn estimates_round_trip_through_files() {
    let sim = small_two_class(300, Some(1.0));
    let cfg = PipelineConfig::default();
    let prep = prepare(&sim.dataset, &cfg).unwrap();
    let est = estimate(&prep.data, &prep.index, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.tmcv");
    write_estimates(&path, &est, 4, prep.sigma2, sim.dataset.fingerprint(), &cfg.hash()).unwrap();
    let (back, meta) = read_estimates(&path).unwrap();
    assert_eq!(back, est);
    assert_eq!(meta.config_hash, cfg.hash());
}

#[test]
fn stage_errors_carry_labels() {
    let mut sim = small_two_class(10, None);
    sim.dataset.meta.n_pix = 3;
    sim.dataset.images.truncate(10 * 9);
    let err = run_pipeline(&sim.dataset, &PipelineConfig::default()).err().unwrap();
    assert!(matches!(err, tomocov::Error::Stage { .. }), "{err}");
}

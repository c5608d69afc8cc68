use num_complex::Complex64;
use tomocov::basis::index::BasisIndexSet;
use tomocov::basis::radial::{default_quad_order, RadialBasis};
use tomocov::basis::volume::real_symmetry_defect;
use tomocov::basis::omega_max_for;
use tomocov::projection::matrix::ProjectionMatrix;
use tomocov::projection::pixel::PixelMap;
use tomocov::projection::rotation::{sample_uniform_rotations, Rotation};
use tomocov::simulate::phantom::weighted_fourier_energy;
use tomocov::simulate::*;

fn setup(k: usize, n_res: usize) -> (BasisIndexSet, RadialBasis) {
    let index = BasisIndexSet::new(k);
    let basis = RadialBasis::build(k, omega_max_for(n_res), default_quad_order(k)).unwrap();
    (index, basis)
}

#[test]
fn centered_blob_has_only_isotropic_coefficients() {
    let (index, basis) = setup(6, 8);
    let ph = Phantom::new(vec![Blob::new([0.0; 3], 1.0, 0.2)]);
    let c = phantom_to_coeffs(&ph, &basis, &index);
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (v, z) in index.v_indices().iter().zip(&c) {
        if v.l != 0 {
            assert!(z.norm() < 1e-10 * scale, "{v:?} {z}");
        }
    }
    assert!(scale > 0.0);
}

#[test]
fn coefficients_describe_a_real_volume_and_contract_energy() {
    let (index, basis) = setup(8, 10);
    let ph = desk::base_phantom();
    let c = phantom_to_coeffs(&ph, &basis, &index);
    assert!(real_symmetry_defect(&index, &c) < 1e-9);
    let energy: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let full = weighted_fourier_energy(&ph, &basis);
    assert!(energy <= full * (1.0 + 1e-8), "{energy} > {full}");
    assert!(energy > 0.5 * full);
}

#[test]
fn centered_blob_projections_ignore_rotation() {
    let ph = Phantom::new(vec![Blob::new([0.0; 3], 2.0, 0.15)]);
    let a = project_phantom_analytic(&ph, &Rotation::identity(), 33);
    for r in sample_uniform_rotations(5, 3) {
        let b = project_phantom_analytic(&ph, &r, 33);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }
}

#[test]
fn projected_mass_is_rotation_invariant() {
    // Compact enough that no mass leaves the [-1, 1]² grid under rotation.
    let ph = Phantom::new(vec![Blob::new([0.2, -0.1, 0.15], 1.0, 0.1), Blob::new([-0.25, 0.2, 0.0], 0.7, 0.12)]);
    let n = 129;
    let area = (2.0 / n as f64).powi(2);
    let masses: Vec<f64> = sample_uniform_rotations(4, 9)
        .iter()
        .map(|r| project_phantom_analytic(&ph, r, n).iter().sum::<f64>() * area)
        .collect();
    for m in &masses {
        assert!((m - masses[0]).abs() < 1e-6 * masses[0]);
        assert!((m - ph.mass()).abs() < 1e-3 * ph.mass());
    }
}

#[test]
fn pixel_projection_agrees_with_coefficient_projection() {
    let (index, basis) = setup(15, 17);
    let map = PixelMap::build(65, &basis, &index).unwrap();
    let ph = two_blob();
    let c = phantom_to_coeffs(&ph, &basis, &index);
    for rot in sample_uniform_rotations(3, 11) {
        let img = project_phantom_analytic(&ph, &rot, 65);
        let from_pixels = map.image_to_coeffs(&img).unwrap();
        let mut from_coeffs = vec![Complex64::new(0.0, 0.0); index.q_hat()];
        ProjectionMatrix::new(&rot, 15).apply_raw(&c, &mut from_coeffs);
        let err: f64 = from_pixels.iter().zip(&from_coeffs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = from_coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 0.05 * norm, "relative error {}", err / norm);
    }
}

fn two_blob() -> Phantom {
    Phantom::new(vec![Blob::new([0.2, -0.1, 0.3], 1.0, 0.2), Blob::new([-0.3, 0.25, 0.0], 0.7, 0.18)])
}

#[test]
fn noise_matches_requested_snr_and_corner_estimate() {
    let mut cfg = desk::two_class(400, Some(0.05), 7);
    cfg.k_max = 4;
    cfg.n_res = 6;
    cfg.n_pix = 33;
    let sim = generate_dataset(&cfg).unwrap();
    let noise = sim.truth.noise;
    assert!((noise.p_signal_het / noise_power(noise.sigma2, 33, 6) - 0.05).abs() < 1e-12);
    let est = estimate_sigma2_from_corners(&sim.dataset.images, 33);
    assert!((est / noise.sigma2 - 1.0).abs() < 0.02, "{est} vs {}", noise.sigma2);
    let realized = realized_snr_het(noise.p_signal_het, &sim.dataset.images, 33, 6);
    assert!((realized / 0.05 - 1.0).abs() < 0.02);
}

#[test]
fn noiseless_dataset_has_clean_corners() {
    let mut cfg = desk::two_class(20, None, 1);
    cfg.k_max = 3;
    cfg.n_res = 5;
    cfg.n_pix = 33;
    let sim = generate_dataset(&cfg).unwrap();
    assert_eq!(sim.truth.noise.sigma2, 0.0);
    assert!(estimate_sigma2_from_corners(&sim.dataset.images, 33) < 1e-4 * sim.truth.noise.p_signal);
}

#[test]
fn corner_estimate_ignores_disc_changes() {
    let n = 17;
    let mut imgs = vec![0f32; 3 * n * n];
    add_noise(&mut imgs, n, 1.0, 5);
    let before = estimate_sigma2_from_corners(&imgs, n);
    for s in 0..3 {
        for &f in &tomocov::projection::pixel::disc_pixels(n) {
            imgs[s * n * n + f] += 3.0;
        }
    }
    assert_eq!(before, estimate_sigma2_from_corners(&imgs, n));
}

#[test]
fn zero_heterogeneity_with_finite_snr_is_an_error() {
    let mut cfg = desk::two_class(10, Some(0.1), 1);
    cfg.k_max = 2;
    cfg.n_res = 4;
    cfg.n_pix = 17;
    if let Heterogeneity::Discrete { classes } = &mut cfg.heterogeneity {
        classes[1].phantom = classes[0].phantom.clone();
    }
    assert!(generate_dataset(&cfg).is_err());
}

fn small(mut cfg: SimConfig) -> SimConfig {
    cfg.k_max = 6;
    cfg.n_res = 8;
    cfg.n_pix = 33;
    cfg
}

#[test]
fn ground_truth_ranks_follow_the_population() {
    let two = generate_dataset(&small(desk::two_class(50, None, 1))).unwrap().truth;
    assert_eq!(two.sigma0_rank(1e-10), 1);
    let d: Vec<Complex64> = two.volumes[1].iter().zip(&two.volumes[0]).map(|(a, b)| a - b).collect();
    let dn = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let overlap: f64 = d.iter().zip(two.sigma0_eigvecs.column(0).iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm() / dn;
    assert!((overlap - 1.0).abs() < 1e-10);
    let three = generate_dataset(&small(desk::three_class(50, None, 1))).unwrap().truth;
    assert_eq!(three.sigma0_rank(1e-10), 2);
    let tri = generate_dataset(&small(desk::triangle(50, None, 1))).unwrap().truth;
    assert_eq!(tri.sigma0_rank(1e-10), 2);
    assert!((tri.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn class_frequencies_and_determinism() {
    let cfg = small(desk::three_class(3000, Some(0.1), 4));
    let mut cfg = cfg;
    cfg.k_max = 2;
    cfg.n_res = 4;
    cfg.n_pix = 9;
    let a = generate_dataset(&cfg).unwrap();
    for c in 0..3u32 {
        let f = a.truth.labels.iter().filter(|&&l| l == c).count() as f64 / 3000.0;
        assert!((f - 1.0 / 3.0).abs() < 3.0 / 3000f64.sqrt());
    }
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = one.install(|| generate_dataset(&cfg).unwrap());
    assert_eq!(a, b);
    // Changing the SNR keeps classes and geometry.
    cfg.snr_het = Some(1.0);
    let c = generate_dataset(&cfg).unwrap();
    assert_eq!(a.truth.labels, c.truth.labels);
    assert_eq!(a.dataset.rotations, c.dataset.rotations);
}

#[test]
fn files_round_trip() {
    let cfg = small(desk::triangle(30, Some(0.5), 2));
    let sim = generate_dataset(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sim.dataset.write(&dir.path().join("d.tmcv")).unwrap();
    sim.truth.write(&dir.path().join("t.tmcv")).unwrap();
    assert_eq!(tomocov::io::Dataset::read(&dir.path().join("d.tmcv")).unwrap().images, sim.dataset.images);
    assert_eq!(GroundTruth::read(&dir.path().join("t.tmcv")).unwrap(), sim.truth);
}

use num_complex::Complex64;
use proptest::prelude::*;
use tomocov::basis::index::BasisIndexSet;
use tomocov::estimator::estimate_rank;
use tomocov::estimator::{covariance_solvers, mean_solvers};
use tomocov::evaluate::{correlation, MarchenkoPastur};
use tomocov::io::{ArrayData, Container};
use tomocov::pipeline::{mixture_fitters, EmOptions};
use tomocov::projection::{ProjectionMatrix, Rotation};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, 2..40).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_is_scale_invariant(eig in spectrum(), scale in 1e-3f64..1e3) {
        let scaled: Vec<f64> = eig.iter().map(|v| v * scale).collect();
        prop_assert_eq!(estimate_rank(&eig, 0.5, 0.02), estimate_rank(&scaled, 0.5, 0.02));
    }

    #[test]
    fn rank_counts_only_positive_leading_values(eig in spectrum(), delta in 0.1f64..2.0) {
        let r = estimate_rank(&eig, delta, 0.02);
        prop_assert!(r <= 10 && r < eig.len());
        prop_assert!(eig[..r].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn stricter_gap_never_raises_rank(eig in spectrum(), d in 0.1f64..1.0, extra in 0.0f64..1.0) {
        prop_assert!(estimate_rank(&eig, d + extra, 0.02) <= estimate_rank(&eig, d, 0.02));
    }

    #[test]
    fn correlation_ignores_phase_and_scale(a in complex_vec(12), b in complex_vec(12), phase in 0.0f64..6.3, s in 0.01f64..100.0) {
        prop_assume!(a.iter().any(|z| z.norm() > 1e-3) && b.iter().any(|z| z.norm() > 1e-3));
        let rot = Complex64::from_polar(s, phase);
        let b2: Vec<Complex64> = b.iter().map(|z| z * rot).collect();
        let c = correlation(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - correlation(&a, &b2).unwrap()).abs() < 1e-12);
        prop_assert!((c - correlation(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mp_density_integrates_to_one(gamma in 0.01f64..1.0, sigma2 in 0.1f64..10.0) {
        let mp = MarchenkoPastur::new(gamma, sigma2).unwrap();
        let (lo, hi) = mp.edges();
        prop_assert!((mp.mass(lo, hi) - 1.0).abs() < 1e-6);
        prop_assert_eq!(mp.density(lo * 0.99), 0.0);
        prop_assert_eq!(mp.density(hi * 1.01), 0.0);
        let mid = 0.5 * (lo + hi);
        prop_assert!((mp.mass(lo, mid) + mp.mass(mid, hi) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn projection_is_adjoint_to_backprojection(q in prop::array::uniform4(-1.0f64..1.0), k in 0usize..6, seed in 0u64..1000) {
        prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let rot = Rotation::from_quaternion(q);
        let index = BasisIndexSet::new(k);
        let p = ProjectionMatrix::new(&rot, k);
        let v: Vec<Complex64> = (0..index.p_hat()).map(|i| Complex64::new(((seed + i as u64) as f64).sin(), ((seed * 3 + i as u64) as f64).cos())).collect();
        let u: Vec<Complex64> = (0..index.q_hat()).map(|i| Complex64::new(((seed + 7 * i as u64) as f64).cos(), (i as f64).sin())).collect();
        let mut pv = vec![Complex64::new(0.0, 0.0); index.q_hat()];
        let mut pu = vec![Complex64::new(0.0, 0.0); index.p_hat()];
        p.apply_raw(&v, &mut pv);
        p.backproject_raw(&u, &mut pu);
        let (lhs, rhs) = (dot(&pv, &u), dot(&v, &pu));
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn container_round_trips(
        f in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..50),
        g in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..50),
        u in prop::collection::vec(any::<u32>(), 0..50),
        w in prop::collection::vec(any::<u64>(), 0..50),
        z in complex_vec(20),
        tag in "[a-z]{1,8}",
        x in -1e6f64..1e6,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tmcv");
        let c = Container::new(&tag, serde_json::json!({ "x": x, "tag": tag }))
            .with("f", ArrayData::F64(f))
            .with("g", ArrayData::F32(g))
            .with("u", ArrayData::U32(u))
            .with("w", ArrayData::U64(w))
            .with("z", ArrayData::C64(z));
        c.write(&path).unwrap();
        let back = Container::read(&path).unwrap();
        prop_assert_eq!(&back.kind, &c.kind);
        prop_assert_eq!(&back.meta, &c.meta);
        prop_assert_eq!(&back.arrays, &c.arrays);
    }

    #[test]
    fn registries_resolve_exactly_their_names(name in "[a-z]{0,10}") {
        let means = mean_solvers();
        let covs = covariance_solvers();
        let fitters = mixture_fitters();
        prop_assert_eq!(means.get(&name).is_ok(), means.names().contains(&name.as_str()));
        prop_assert_eq!(covs.get(&name).is_ok(), covs.names().contains(&name.as_str()));
        prop_assert_eq!(fitters.get(&name).is_ok(), fitters.names().contains(&name.as_str()));
        for n in fitters.names() {
            prop_assert_eq!(fitters.get(n).unwrap().name(), n);
        }
        for n in covs.names() {
            prop_assert_eq!(covs.get(n).unwrap().name(), n);
        }
        for n in means.names() {
            prop_assert_eq!(means.get(n).unwrap().name(), n);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn em_log_likelihood_never_decreases(
        points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 30..120),
        c in 1usize..4,
        seed in 0u64..100,
    ) {
        let opts = EmOptions { seed, ..Default::default() };
        for fitter in ["isotropic", "full"] {
            let fit = mixture_fitters().get(fitter).unwrap().fit(&points, c, &opts);
            // A component emptied twice is a reported failure, not a bug.
            let Ok(fit) = fit else { continue };
            prop_assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            // A reseed restarts the ascent.
            if fit.reseeds > 0 {
                continue;
            }
            for w in fit.loglik_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{}: {:?}", fitter, fit.loglik_trace);
            }
        }
    }
}

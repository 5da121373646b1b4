use proptest::prelude::*;

use brw_core::extrapolate::ols;
use brw_core::{
    fit_growth, sample_medium, simulate, BoundaryPolicy, EngineParams, IntensityLaw, LatticePoint,
    LatticeWindow, MediumSpec, SourceConfiguration,
};

fn homogeneous(split: f64, death: f64) -> MediumSpec {
    MediumSpec::new(
        SourceConfiguration::EveryPoint,
        IntensityLaw::constant(split),
        IntensityLaw::constant(death),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_are_conserved(split in 0.0f64..3.0, death in 0.0f64..3.0, d in 1usize..=3, seed in any::<u64>()) {
        let window = LatticeWindow::new(d, 15, BoundaryPolicy::KillWithFlag).unwrap();
        let medium = sample_medium(&homogeneous(split, death), seed, &window).unwrap();
        let params = EngineParams { t_max: 3.0, particle_cap: 300, ..EngineParams::default() };
        let traj = simulate(&medium, &params, &LatticePoint::origin(d), seed).unwrap();
        let mut mu: i64 = 1;
        let mut steps = traj.mu_steps().iter().skip(1);
        for e in traj.events() {
            if e.kind.delta() == 0 {
                continue;
            }
            mu += e.kind.delta();
            let &(t, m) = steps.next().expect("one step per count change");
            prop_assert_eq!(t, e.time);
            prop_assert_eq!(i64::from(m), mu);
            prop_assert!(mu >= 0);
        }
        prop_assert!(steps.next().is_none());
        prop_assert!(traj.max_mu() <= params.particle_cap);
    }

    #[test]
    fn same_seed_same_events(seed in any::<u64>(), medium_seed in any::<u64>()) {
        let window = LatticeWindow::new(1, 41, BoundaryPolicy::Error).unwrap();
        let spec = MediumSpec::new(
            SourceConfiguration::EveryPoint,
            IntensityLaw::weibull(2.0, 2.26),
            IntensityLaw::weibull(2.0, 1.13),
        );
        let a = sample_medium(&spec, medium_seed, &window).unwrap();
        let b = sample_medium(&spec, medium_seed, &window).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        prop_assert_eq!(ca, cb);
        let params = EngineParams { t_max: 2.0, ..EngineParams::default() };
        let origin = LatticePoint::origin(1);
        prop_assert_eq!(
            simulate(&a, &params, &origin, seed).unwrap(),
            simulate(&b, &params, &origin, seed).unwrap()
        );
    }

    #[test]
    fn ols_is_scale_equivariant(
        ys in prop::collection::vec(0.0f64..10.0, 3..40),
        c in 1e-3f64..1e3,
    ) {
        let ts: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.05).collect();
        let shifted: Vec<f64> = ys.iter().map(|y| y + c.ln()).collect();
        let (s1, i1, r1) = ols(&ts, &ys).unwrap();
        let (s2, i2, r2) = ols(&ts, &shifted).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-9 * (1.0 + s1.abs()));
        prop_assert!((i2 - i1 - c.ln()).abs() <= 1e-9 * (1.0 + i1.abs()));
        prop_assert!((r1 - r2).abs() <= 1e-9);
    }

    #[test]
    fn growing_fits_predict_monotonically(seed in any::<u64>(), t in 0.0f64..10.0, dt in 0.0f64..5.0) {
        let window = LatticeWindow::new(1, 100, BoundaryPolicy::Error).unwrap();
        let medium = sample_medium(&homogeneous(2.0, 1.0), 0, &window).unwrap();
        let traj = simulate(&medium, &EngineParams::default(), &LatticePoint::origin(1), seed).unwrap();
        if let Ok(fit) = fit_growth(&traj, 0.05) {
            prop_assert_eq!(&fit, &fit_growth(&traj, 0.05).unwrap());
            if fit.slope > 0.0 {
                prop_assert!(fit.predict(t + dt) >= fit.predict(t));
            }
        }
    }
}

use proptest::prelude::*;
use ris_mc::channels::{decode_ensemble, encode_ensemble, generate_ensemble, ChannelModel};
use ris_mc::outer::{project_pair, project_to_circle, symmetrize};
use ris_mc::scattering::assemble_scattering;
use ris_mc::system::{circle_residual, mirror_residual};
use ris_mc::{dbm_to_watts, RisPhaseConfig, ScatteringDesign, SystemParams};

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_lands_on_circle(a in finite(), b in finite()) {
        let (x, y, _) = project_pair(a, b);
        prop_assert!((x * x + y * y - 1.0).abs() < 1e-12);
        // the projection never points away from the input
        prop_assert!(x * a + y * b >= 0.0);
    }

    #[test]
    fn projection_is_idempotent(a in finite(), b in finite()) {
        let (x, y, _) = project_pair(a, b);
        let (x2, y2, d) = project_pair(x, y);
        prop_assert!(!d);
        prop_assert!((x - x2).abs() < 1e-15 && (y - y2).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_is_idempotent_and_mirrored(v in prop::collection::vec(finite(), 1..40)) {
        let s = symmetrize(&v);
        prop_assert_eq!(mirror_residual(&s), 0.0);
        prop_assert_eq!(symmetrize(&s), s.clone());
        let total: f64 = v.iter().sum();
        let after: f64 = s.iter().sum();
        prop_assert!((total - after).abs() <= 1e-9 * (1.0 + total.abs()));
    }

    #[test]
    fn projected_symmetric_vectors_form_a_feasible_design(
        half in prop::collection::vec((finite(), finite()), 8)
    ) {
        let aa: Vec<f64> = half.iter().map(|p| p.0).chain(half.iter().rev().map(|p| p.0)).collect();
        let ab: Vec<f64> = half.iter().map(|p| p.1).chain(half.iter().rev().map(|p| p.1)).collect();
        let (x, y) = project_to_circle(&aa, &ab).unwrap();
        prop_assert!(circle_residual(&x, &y) < 1e-12);
        let d = ScatteringDesign::new(x, y).unwrap();
        prop_assert!(assemble_scattering(&d).losslessness_residual() < 1e-12);
    }

    #[test]
    fn ensemble_round_trips(seed in any::<u64>(), q in 1usize..3, e in 0usize..3, kappa in 0.0f64..10.0, rician in any::<bool>()) {
        let p = SystemParams::new(3, 2, 4, 12.5).with_noise(0.25).with_seed(seed ^ 1);
        let model = if rician { ChannelModel::Rician { k_factor: kappa } } else { ChannelModel::IidRayleigh };
        let ens = generate_ensemble(&p, q, e, model, seed).unwrap();
        prop_assert_eq!(decode_ensemble(&encode_ensemble(&ens)).unwrap(), ens);
    }

    #[test]
    fn phases_wrap_into_one_turn(t in prop::collection::vec(-1e4f64..1e4, 1..20)) {
        let ph = RisPhaseConfig::new(t.clone());
        for (w, orig) in ph.phases().iter().zip(&t) {
            prop_assert!((0.0..std::f64::consts::TAU).contains(w));
            let u = ris_mc::linalg::C64::from_polar(1.0, *orig);
            let v = ris_mc::linalg::C64::from_polar(1.0, *w);
            prop_assert!((u - v).norm() < 1e-9);
        }
    }

    #[test]
    fn dbm_conversion_is_monotone(a in -100.0f64..100.0, b in -100.0f64..100.0) {
        prop_assume!(a < b);
        prop_assert!(dbm_to_watts(a) < dbm_to_watts(b));
        prop_assert!((dbm_to_watts(a + 10.0) / dbm_to_watts(a) - 10.0).abs() < 1e-9);
    }
}

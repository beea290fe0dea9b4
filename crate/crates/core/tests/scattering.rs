use phonon_core::scattering::{
    asymmetry_map, eta, reflection_pair, scatter_closed_form, scatter_numeric, Direction, Hopping,
    Method, ScatterParams,
};
use proptest::prelude::*;

fn hopping() -> impl Strategy<Value = (Hopping, f64)> {
    prop_oneof![
        (-1.95f64..1.95).prop_map(|d| (Hopping::Nearest, d)),
        (-1.45f64..2.95).prop_map(|d| (Hopping::NextNearest, d)),
    ]
}

fn near_threshold(h: Hopping, d: f64) -> bool {
    h.thresholds().iter().any(|t| (d - t).abs() < 1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn no_defect_means_full_transmission((h, d) in hopping()) {
        prop_assume!(!near_threshold(h, d));
        let s = scatter_numeric(&ScatterParams::new(d, 0.0, h, Direction::LossToGain), 4).unwrap();
        prop_assert!(s.beta.norm() < 1e-10);
        prop_assert!((s.transmission.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn result_is_independent_of_window((h, d) in hopping(), gamma in -6.0f64..6.0) {
        prop_assume!(!near_threshold(h, d));
        let p = ScatterParams::new(d, gamma, h, Direction::GainToLoss);
        let small = scatter_numeric(&p, 2).unwrap();
        let large = scatter_numeric(&p, 12).unwrap();
        let scale = 1.0 + small.beta.norm() + small.transmission.norm();
        prop_assert!((small.beta - large.beta).norm() < 1e-10 * scale);
        prop_assert!((small.transmission - large.transmission).norm() < 1e-10 * scale);
    }

    #[test]
    fn swapping_gain_and_loss_reverses_direction((h, d) in hopping(), gamma in 0.05f64..6.0) {
        prop_assume!(!near_threshold(h, d));
        let lg = scatter_numeric(&ScatterParams::new(d, gamma, h, Direction::LossToGain), 2).unwrap();
        let mirrored = scatter_numeric(&ScatterParams::new(d, -gamma, h, Direction::GainToLoss), 2).unwrap();
        let scale = 1.0 + lg.beta.norm();
        prop_assert!((lg.beta - mirrored.beta).norm() < 1e-10 * scale);

        let pair = reflection_pair(d, gamma, h, Method::Numeric).unwrap();
        let flipped = reflection_pair(d, -gamma, h, Method::Numeric).unwrap();
        let a = eta(pair.loss_to_gain.beta, pair.gain_to_loss.beta, 30.0);
        let b = eta(flipped.loss_to_gain.beta, flipped.gain_to_loss.beta, 30.0);
        if let (Some(a), Some(b)) = (a, b) {
            prop_assert!((a + b).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn transmission_is_reciprocal((h, d) in hopping(), gamma in -6.0f64..6.0) {
        prop_assume!(!near_threshold(h, d));
        let pair = reflection_pair(d, gamma, h, Method::Numeric).unwrap();
        let (a, b) = (pair.loss_to_gain.transmission, pair.gain_to_loss.transmission);
        prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn closed_form_agrees_with_numeric(d in -1.95f64..1.95, gamma in -8.0f64..8.0) {
        for dir in [Direction::LossToGain, Direction::GainToLoss] {
            let cf = scatter_closed_form(d, gamma, dir).unwrap();
            let nu = scatter_numeric(&ScatterParams::new(d, gamma, Hopping::Nearest, dir), 2).unwrap();
            let scale = 1.0 + cf.beta.norm();
            prop_assert!((cf.beta - nu.beta).norm() < 1e-9 * scale);
            prop_assert!((cf.transmission - nu.transmission).norm() < 1e-9 * scale);
        }
    }
}

#[test]
fn map_skips_out_of_band_energies() {
    let deltas = [-2.5f64, -1.0, 0.0, 1.0, 2.5];
    let gammas = [0.0, 1.0, 2.0];
    let map = asymmetry_map(&deltas, &gammas, Hopping::Nearest, Method::ClosedForm, 30.0).unwrap();
    assert_eq!(map.points.len(), 9);
    assert_eq!(map.skipped, 6);
    assert!(map
        .points
        .iter()
        .filter(|p| p.gamma_rate == 0.0)
        .all(|p| p.indeterminate));
    assert!(map.points.iter().all(|p| p.eta.abs() <= 30.0));
}

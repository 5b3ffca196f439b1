use super::*;
use crate::optimize::SweepSpec;
use proptest::prelude::*;
use std::f64::consts::{E, LN_2, PI};

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn noncoherent_radial_examples() {
    assert_eq!(div_noncoherent_radial(3.0, 0.0, 1.0).unwrap(), 0.0);
    // kl(e^-1 || e^-4) by hand.
    let (p, q) = ((-1.0f64).exp(), (-4.0f64).exp());
    let direct = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    let got = div_noncoherent_radial(3.0, 4.0, 1.0).unwrap();
    assert!((got - direct).abs() < 1e-15, "{got} vs {direct}");
    assert!((got - 0.825_385_365_269_249_9).abs() < 1e-14);
}

#[test]
fn bound_examples() {
    assert_eq!(unquantized_kl_bound(0.0, 1.0).unwrap(), 0.0);
    assert!((unquantized_kl_bound(2.5, 2.5).unwrap() - (1.0 - LN_2)).abs() < 1e-15);
    assert!((exp_bound(0.0, 1.0).unwrap() - 2.0 / E).abs() < 1e-15);
    assert!((exp_bound(E, 1.0).unwrap() - (1.0 + 2.0 / E)).abs() < 1e-15);
    let slope = exp_bound(1e12, 1.0).unwrap() / 1e12;
    assert!((slope - 1.0 / E).abs() < 1e-11);
    let lb = coherent_radial_lower_bound(1e4, 0.95, 1.0).unwrap();
    assert!((lb - 0.895_790_461_368_799_5).abs() < 1e-12);
    let lb = coherent_radial_lower_bound(100.0, 0.5, 1.0).unwrap();
    assert!((lb - (0.25 - (1.0 / (2.0 * E) + LN_2) / 100.0)).abs() < 1e-15);
}

#[test]
fn percomponent_noncoherent_examples() {
    for xi2 in [0.1, 1.0, 30.0] {
        assert_eq!(div_percomponent_noncoherent(xi2, 0.0, 0.0, 1.0).unwrap(), 0.0);
    }
    let got = div_percomponent_noncoherent(1.0, 1.0, 1.0, 1.0).unwrap();
    // Q(1) and Q(sqrt 2) from the reference tables.
    let (p, q): (f64, f64) = (0.158_655_253_931_457_05, 0.078_649_603_525_142_57);
    let direct = 2.0 * (p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln());
    assert!((got - direct).abs() < 1e-14, "{got} vs {direct}");
    // Tied thresholds are a valid operating point.
    let t = 0.5 * (4.0 + 1.0);
    assert!(div_percomponent_noncoherent(4.0, t, t, 1.0).unwrap() > 0.0);
}

#[test]
fn coherent_radial_meets_marcum_bound_chain() {
    let v = div_coherent_radial(1e4, 0.95, 1.0, &quad()).unwrap() / 1e4;
    assert!(v >= 0.8957 && v <= 1.0 + CEILING_SLACK, "{v}");
    let v = div_coherent_radial(100.0, 0.5, 1.0, &quad()).unwrap() / 100.0;
    assert!(v >= coherent_radial_lower_bound(100.0, 0.5, 1.0).unwrap() && v <= 1.0, "{v}");
    assert_eq!(div_coherent_radial(0.0, 0.5, 1.0, &quad()).unwrap(), 0.0);
    let tiny = div_coherent_radial(1e-6, 0.5, 1.0, &quad()).unwrap() / 1e-6;
    assert!(tiny.is_finite() && tiny < 1.0);
    assert!(div_coherent_radial(1.0, 1.0, 1.0, &quad()).is_err());
}

#[test]
fn quadrature_matches_monte_carlo_fading_average() {
    let checked = QuadratureSpec {
        validate: true,
        ..quad()
    };
    div_coherent_radial(10.0, 0.7, 1.0, &checked).unwrap();
    div_coherent_radial(3.0, 0.4, 2.0, &checked).unwrap();
    div_percomponent_coherent(Complex64::new(2.0, 1.0), 0.6, 1.0, &checked).unwrap();
    symmetric_coherent_ratio(0.5, 1.0, &checked).unwrap();
}

#[test]
fn coherent_percomponent_beats_sign_quantizer() {
    let xi = Complex64::new(100.0, 0.0);
    let v = div_percomponent_coherent(xi, 0.9, 1.0, &quad()).unwrap() / 1e4;
    assert!(v > 2.0 / PI && v <= 1.0, "{v}");

    // Independent oracle: ten million direct draws of the complex fading.
    let scale = (2.0f64 * 1e4).sqrt();
    let (mean, se) = mc_fading_average(
        |h| Ok(component_kl(scale * h.re, 0.9)? + component_kl(scale * h.im, 0.9)?),
        10_000_000,
        17,
    )
    .unwrap();
    assert!((mean / 1e4 - v).abs() <= 4.0 * se / 1e4, "{v} vs {} +- {}", mean / 1e4, se / 1e4);

    // The phase of the probe does not matter.
    let w = div_percomponent_coherent(Complex64::from_polar(100.0, 0.7), 0.9, 1.0, &quad()).unwrap() / 1e4;
    assert!((v - w).abs() < 1e-12);
    assert_eq!(div_percomponent_coherent(Complex64::new(0.0, 0.0), 0.9, 1.0, &quad()).unwrap(), 0.0);
    assert!(div_percomponent_coherent(xi, 0.01, 1.0, &quad()).unwrap() > 0.0);
}

#[test]
fn symmetric_coherent_constant() {
    let v = cue_symmetric_coherent_limit(1.0, &quad()).unwrap();
    assert!((v / (2.0 / PI) - 1.0).abs() < 1e-3, "{v}");
    let v4 = cue_symmetric_coherent_limit(4.0, &quad()).unwrap();
    assert!((v4 / (2.0 / (4.0 * PI)) - 1.0).abs() < 1e-3, "{v4}");
}

#[test]
fn noncoherent_radial_search_approaches_inverse_e() {
    let r = cue_noncoherent_radial(1.0, &SweepSpec::default()).unwrap();
    let inv_e = (-1.0f64).exp();
    assert!(r.value >= inv_e - 5e-3 && r.value < inv_e, "{r:?}");
    assert!(r.supremum_at_infinity && r.bounds_hold(), "{r:?}");
    assert!(r.max_evaluated < 1.0);
    assert_eq!(r.probe_energy, 1e3);
    let Threshold::Tau { tau } = r.threshold else { panic!() };
    assert!((tau - 1e3).abs() < 5.0, "{tau}");
}

#[test]
fn noncoherent_radial_scales_with_noise() {
    let base = cue_noncoherent_radial(1.0, &SweepSpec::default()).unwrap();
    for c in [2.0, 0.25] {
        let scaled = cue_noncoherent_radial(c, &SweepSpec::default().scaled(c)).unwrap();
        assert!((scaled.value * c / base.value - 1.0).abs() < 1e-6, "{c}");
    }
}

#[test]
fn percomponent_noncoherent_search() {
    let joint = cue_percomponent_noncoherent(1.0, &SweepSpec::default(), false).unwrap();
    assert!(joint.value > 0.0 && joint.value < 1.0 && joint.bounds_hold(), "{joint:?}");
    assert!(!joint.supremum_at_infinity);
    let tied = cue_percomponent_noncoherent(1.0, &SweepSpec::default(), true).unwrap();
    assert!(tied.value > 0.0 && tied.value <= joint.value + 1e-12);
    let d = &tied.diagnostics[0];
    assert!((d.reference.unwrap() - 0.317_310_507_862_914_1).abs() < 1e-12);
}

#[test]
fn symmetric_noncoherent_is_zero() {
    let r = cue_symmetric_noncoherent(1.0, &SweepSpec::default()).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(r.bounds_hold());
}

#[test]
fn coherent_radial_search_prefers_larger_mu() {
    let sweep = SweepSpec {
        xi2_min: 1e2,
        xi2_max: 1e4,
        xi2_points: 9,
        ..SweepSpec::default()
    };
    let r = cue_coherent_radial(1.0, &[0.5, 0.95], &sweep, &quad()).unwrap();
    assert!(r.bounds_hold(), "{r:?}");
    assert_eq!(r.threshold, Threshold::Fraction { mu: 0.95 });
    assert!(r.supremum_at_infinity && r.value >= 0.8957);
}

#[test]
fn np_dominance() {
    let rep = np_radial_dominance_check(4.0, 1.0, 200, 1).unwrap();
    assert!(rep.worst_margin >= -1e-9, "{rep:?}");
    // Whole outer rings plus an angular slice of one ring: the only loss is
    // that slice, so the margin is small and never negative.
    assert!(rep.self_margin >= -1e-9 && rep.self_margin < 1e-2, "{rep:?}");
    assert!(rep.half_plane_divergence < 1e-12);
    assert!(rep.mass_deficit < 1e-12);
    assert!(rep.families.iter().all(|f| f.count == 40));
    assert!(np_radial_dominance_check(4.0, 1.0, 49, 1).is_err());
}

proptest! {
    #[test]
    fn radial_objective_obeys_closed_form_bounds(lx in -3.0f64..4.0, lt in -3.0f64..5.0, ls in -1.0f64..1.0) {
        let (xi2, tau, s2) = (10f64.powf(lx), 10f64.powf(lt), 10f64.powf(ls));
        let d = div_noncoherent_radial(xi2, tau, s2).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= unquantized_kl_bound(xi2, s2).unwrap() + 1e-12);
        prop_assert!(d <= exp_bound(xi2, s2).unwrap() + 1e-12);
        prop_assert!(d / xi2 < 1.0 / s2);
    }

    #[test]
    fn radial_objective_is_scale_free(lx in -2.0f64..3.0, lt in -2.0f64..3.0, c in 0.1f64..10.0) {
        let (xi2, tau) = (10f64.powf(lx), 10f64.powf(lt));
        let a = div_noncoherent_radial(xi2, tau, 1.0).unwrap();
        let b = div_noncoherent_radial(c * xi2, c * tau, c).unwrap();
        // Scaling moves the exponents by an ulp, which cancellation inside
        // the divergence amplifies to about 1e-11 at worst.
        prop_assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn shifted_threshold_dominates_neighbours(lx in 1.0f64..4.0) {
        let xi2 = 10f64.powf(lx);
        let tau = xi2 + 1.0;
        let at = div_noncoherent_radial(xi2, tau, 1.0).unwrap();
        prop_assert!(at >= div_noncoherent_radial(xi2, 0.5 * tau, 1.0).unwrap());
        prop_assert!(at >= div_noncoherent_radial(xi2, 2.0 * tau, 1.0).unwrap());
    }

    #[test]
    fn percomponent_thresholds_mirror(xi2 in 0.01f64..100.0, t in 0.0f64..20.0) {
        let a = div_percomponent_noncoherent(xi2, t, t, 1.0).unwrap();
        let b = div_percomponent_noncoherent(xi2, -t, -t, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-15);
        prop_assert!(a <= unquantized_kl_bound(xi2, 1.0).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn coherent_radial_obeys_bound_chain(lx in 0.0f64..4.0, mu in 0.05f64..0.95) {
        let xi2 = 10f64.powf(lx);
        let v = div_coherent_radial(xi2, mu, 1.0, &quad()).unwrap() / xi2;
        prop_assert!(v >= coherent_radial_lower_bound(xi2, mu, 1.0).unwrap() - 1e-12);
        prop_assert!(v <= 1.0 + CEILING_SLACK);
    }
}

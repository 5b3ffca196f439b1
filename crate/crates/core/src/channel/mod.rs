//! The fading channel `Y~ = H x + Z` and its one-bit quantizers.
//!
//! Conventions used throughout the crate:
//!
//! * `Z` is circularly-symmetric complex Gaussian with `E|Z|^2 = noise_var`
//!   (written `sigma^2`), and `H` is circularly-symmetric complex Gaussian with
//!   `E|H|^2 = 1`, so `|H|^2` is a unit-mean exponential.
//! * The real and imaginary parts of a circularly-symmetric complex Gaussian
//!   of variance `v` are independent `N(0, v/2)` variables.
//!
//! Given `X = x` and no knowledge of `H`, `Y~` is `CN(0, |x|^2 + sigma^2)`; given
//! `H = h` as well, `Y~` is `CN(h x, sigma^2)`. Every probability below is one of
//! these two laws pushed through a quantization region.

mod montecarlo;

pub use montecarlo::{mc_estimate, mc_fading_average, BitEstimate, McEstimate, MIN_TRIALS};

use num_complex::Complex64;
use serde::Serialize;

use crate::specfun::{gaussian_q, marcum_q1, Probability};
use crate::{Error, Result};

/// Noise variance and fading normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelParams {
    noise_var: f64,
    fading_var: f64,
}

impl ChannelParams {
    pub fn new(noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::domain(format!("noise variance must be positive, got {noise_var}")));
        }
        Ok(Self {
            noise_var,
            fading_var: 1.0,
        })
    }

    /// `sigma^2`.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// `E|H|^2`, always one.
    pub fn fading_var(&self) -> f64 {
        self.fading_var
    }
}

/// A one-bit quantization rule on the complex output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantizer {
    /// Output 1 iff `|y| >= threshold`.
    Radial { threshold: f64 },
    /// Two bits: `Re y >= t_re` and `Im y >= t_im`.
    PerComponent { t_re: f64, t_im: f64 },
    /// Two bits: the signs of `Re y` and `Im y`.
    SymmetricPerComponent,
    /// Output 1 iff `f(y | 0) / f(y | xi) <= lambda` for a probe with
    /// `|xi|^2 = probe_energy` (noncoherent densities).
    LikelihoodRegion { lambda: f64, probe_energy: f64 },
}

impl Quantizer {
    pub fn radial(threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::domain(format!("radial threshold must be >= 0, got {threshold}")));
        }
        Ok(Quantizer::Radial { threshold })
    }

    pub fn per_component(t_re: f64, t_im: f64) -> Result<Self> {
        if !(t_re.is_finite() && t_im.is_finite()) {
            return Err(Error::domain("per-component thresholds must be finite"));
        }
        Ok(Quantizer::PerComponent { t_re, t_im })
    }

    pub fn likelihood_region(lambda: f64, probe_energy: f64, params: &ChannelParams) -> Result<Self> {
        // Validates lambda against the probe.
        np_threshold(probe_energy, lambda, params)?;
        Ok(Quantizer::LikelihoodRegion {
            lambda,
            probe_energy,
        })
    }

    /// Number of output bits (1 or 2).
    pub fn bits(&self) -> usize {
        match self {
            Quantizer::Radial { .. } | Quantizer::LikelihoodRegion { .. } => 1,
            Quantizer::PerComponent { .. } | Quantizer::SymmetricPerComponent => 2,
        }
    }

    /// Per-component thresholds `(t_re, t_im)` for the two-bit quantizers.
    fn component_thresholds(&self) -> Option<(f64, f64)> {
        match *self {
            Quantizer::PerComponent { t_re, t_im } => Some((t_re, t_im)),
            Quantizer::SymmetricPerComponent => Some((0.0, 0.0)),
            _ => None,
        }
    }
}

/// Output laws of a one-bit quantizer under the probe and under silence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinaryLaw {
    /// `P(Y = 1 | X = xi)`.
    pub p_on: Probability,
    /// `P(Y = 1 | X = 0)`.
    pub p_off: Probability,
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

/// `P(|Y~| >= T | X = x) = exp(-T^2 / (|x|^2 + sigma^2))` without fading knowledge.
pub fn radial_prob_noncoherent(input_energy: f64, threshold: f64, params: &ChannelParams) -> Result<Probability> {
    check_nonneg("input energy", input_energy)?;
    check_nonneg("threshold", threshold)?;
    Ok(Probability::from_log_unchecked(
        -threshold * threshold / (input_energy + params.noise_var),
    ))
}

/// `P(|Y~| >= T | H = h, X = x) = Q1(sqrt(2/sigma^2) |h||x|, sqrt(2/sigma^2) T)`.
pub fn radial_prob_coherent(
    fading_mag: f64,
    input_mag: f64,
    threshold: f64,
    params: &ChannelParams,
) -> Result<Probability> {
    check_nonneg("fading magnitude", fading_mag)?;
    check_nonneg("input magnitude", input_mag)?;
    check_nonneg("threshold", threshold)?;
    let scale = (2.0 / params.noise_var).sqrt();
    marcum_q1(scale * fading_mag * input_mag, scale * threshold)
}

/// `P(Re Y~ >= T | X = x)` (equally `Im`) without fading knowledge: each
/// component is `N(0, (|x|^2 + sigma^2) / 2)`.
pub fn percomponent_prob_noncoherent(input_energy: f64, threshold: f64, params: &ChannelParams) -> Result<Probability> {
    check_nonneg("input energy", input_energy)?;
    check_finite("threshold", threshold)?;
    let std = (0.5 * (input_energy + params.noise_var)).sqrt();
    gaussian_q(threshold / std)
}

/// `P(Re Y~ >= T | H = h, X = x)` where `component_mean = Re(h x)`; the
/// component is `N(component_mean, sigma^2 / 2)`.
pub fn percomponent_prob_coherent(component_mean: f64, threshold: f64, params: &ChannelParams) -> Result<Probability> {
    check_finite("component mean", component_mean)?;
    check_finite("threshold", threshold)?;
    let std = (0.5 * params.noise_var).sqrt();
    gaussian_q((threshold - component_mean) / std)
}

/// Likelihood ratio `f(y | 0) / f(y | xi)` of the noncoherent output
/// densities, as a function of `|y|^2`.
pub fn likelihood_ratio(output_energy: f64, probe_energy: f64, params: &ChannelParams) -> Result<f64> {
    check_nonneg("output energy", output_energy)?;
    if !(probe_energy.is_finite() && probe_energy > 0.0) {
        return Err(Error::domain(format!("probe energy must be positive, got {probe_energy}")));
    }
    let s2 = params.noise_var;
    let snr = probe_energy / s2;
    Ok((1.0 + snr) * (-(output_energy / s2) * probe_energy / (s2 + probe_energy)).exp())
}

/// Radius `T` at which the likelihood ratio equals `lambda`, so that
/// `{y : f(y|0)/f(y|xi) <= lambda}` is exactly `{y : |y| >= T}`.
pub fn np_threshold(probe_energy: f64, lambda: f64, params: &ChannelParams) -> Result<f64> {
    if !(probe_energy.is_finite() && probe_energy > 0.0) {
        return Err(Error::domain(format!("probe energy must be positive, got {probe_energy}")));
    }
    let s2 = params.noise_var;
    let ceiling = 1.0 + probe_energy / s2;
    if !(lambda > 0.0 && lambda <= ceiling) {
        return Err(Error::domain(format!(
            "likelihood level {lambda} outside (0, {ceiling}]"
        )));
    }
    let arg = (1.0 + s2 / probe_energy) * (ceiling / lambda).ln();
    Ok(s2.sqrt() * arg.max(0.0).sqrt())
}

/// Analytic `P(bit = 1)` for each output bit of `quantizer`.
///
/// With `coherent`, `input` is the effective mean `h x` and the receiver
/// conditions on it; otherwise `input` is `x` and `H` is averaged out.
pub fn output_probabilities(
    quantizer: &Quantizer,
    input: Complex64,
    coherent: bool,
    params: &ChannelParams,
) -> Result<Vec<Probability>> {
    let energy = input.norm_sqr();
    match *quantizer {
        Quantizer::Radial { threshold } => Ok(vec![if coherent {
            radial_prob_coherent(1.0, input.norm(), threshold, params)?
        } else {
            radial_prob_noncoherent(energy, threshold, params)?
        }]),
        Quantizer::LikelihoodRegion { lambda, probe_energy } => {
            let threshold = np_threshold(probe_energy, lambda, params)?;
            output_probabilities(&Quantizer::Radial { threshold }, input, coherent, params)
        }
        Quantizer::PerComponent { .. } | Quantizer::SymmetricPerComponent => {
            let (t_re, t_im) = quantizer.component_thresholds().expect("two-bit quantizer");
            if coherent {
                Ok(vec![
                    percomponent_prob_coherent(input.re, t_re, params)?,
                    percomponent_prob_coherent(input.im, t_im, params)?,
                ])
            } else {
                Ok(vec![
                    percomponent_prob_noncoherent(energy, t_re, params)?,
                    percomponent_prob_noncoherent(energy, t_im, params)?,
                ])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn params(s2: f64) -> ChannelParams {
        ChannelParams::new(s2).unwrap()
    }

    #[test]
    fn params_reject_bad_noise() {
        assert!(ChannelParams::new(0.0).is_err());
        assert!(ChannelParams::new(-1.0).is_err());
        assert!(ChannelParams::new(f64::NAN).is_err());
        assert_eq!(params(2.0).fading_var(), 1.0);
    }

    #[test]
    fn radial_noncoherent_examples() {
        let p = params(1.0);
        let v = radial_prob_noncoherent(0.0, 1.0, &p).unwrap();
        assert!((v.value() - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(v.log_value(), -1.0);
        assert_eq!(radial_prob_noncoherent(7.0, 0.0, &p).unwrap().value(), 1.0);
        assert_eq!(radial_prob_noncoherent(3.0, 2.0, &p).unwrap().log_value(), -1.0);
        assert!(radial_prob_noncoherent(-1.0, 2.0, &p).is_err());
    }

    #[test]
    fn radial_coherent_examples() {
        for s2 in [0.5, 1.0, 3.0] {
            let p = params(s2);
            for t in [0.2, 1.0, 2.5] {
                let silent = radial_prob_coherent(1.7, 0.0, t, &p).unwrap();
                assert!((silent.value() - (-t * t / s2).exp()).abs() < 1e-15);
            }
            assert_eq!(radial_prob_coherent(0.8, 1.2, 0.0, &p).unwrap().value(), 1.0);
        }
        // |h||x| = 1, T = 1, sigma^2 = 2 gives Q1(1, 1).
        let q = radial_prob_coherent(1.0, 1.0, 1.0, &params(2.0)).unwrap();
        assert!((q.value() - 0.732_879_803_796_820_2).abs() < 1e-14);
    }

    #[test]
    fn percomponent_examples() {
        let p = params(1.0);
        for e in [0.0, 1.0, 50.0] {
            assert_eq!(percomponent_prob_noncoherent(e, 0.0, &p).unwrap().value(), 0.5);
        }
        let a = percomponent_prob_noncoherent(1.0, 1.0, &p).unwrap().value();
        assert!((a - 0.158_655_253_931_457_05).abs() < 1e-15);
        let b = percomponent_prob_noncoherent(0.0, 1.0, &p).unwrap().value();
        assert!((b - 0.078_649_603_525_142_57).abs() < 1e-15);

        assert_eq!(percomponent_prob_coherent(0.7, 0.7, &p).unwrap().value(), 0.5);
        assert_eq!(percomponent_prob_coherent(0.0, 0.0, &p).unwrap().value(), 0.5);
        let c = percomponent_prob_coherent(1.0, 0.0, &params(2.0)).unwrap().value();
        assert!((c - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn likelihood_ratio_examples() {
        let p = params(1.0);
        assert_eq!(likelihood_ratio(0.0, 3.0, &p).unwrap(), 4.0);
        assert!((likelihood_ratio(2.0, 1.0, &p).unwrap() - 2.0 / E).abs() < 1e-15);
        assert_eq!(likelihood_ratio(1e6, 1.0, &p).unwrap(), 0.0);
        assert!(likelihood_ratio(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn np_threshold_examples() {
        let p = params(1.0);
        assert_eq!(np_threshold(1.0, 2.0, &p).unwrap(), 0.0);
        assert!((np_threshold(1.0, 1.0, &p).unwrap() - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        assert!(np_threshold(1.0, 4.0, &p).is_err());
        assert!(np_threshold(1.0, 0.0, &p).is_err());
        assert!(Quantizer::likelihood_region(5.0, 1.0, &p).is_err());
    }

    #[test]
    fn likelihood_region_maps_to_radial_probability() {
        let p = params(1.0);
        let q = Quantizer::likelihood_region(1.0, 1.0, &p).unwrap();
        let got = output_probabilities(&q, Complex64::new(0.0, 0.0), false, &p).unwrap();
        // T^2 = 2 ln 2, so P(|Y| >= T | 0) = exp(-2 ln 2).
        assert!((got[0].value() - 0.25).abs() < 1e-15, "{}", got[0].value());
    }

    proptest! {
        #[test]
        fn radial_noncoherent_monotone(e in 0.0f64..100.0, de in 0.0f64..10.0, t in 0.0f64..20.0, dt in 0.0f64..2.0, s2 in 0.1f64..10.0) {
            let p = params(s2);
            let base = radial_prob_noncoherent(e, t, &p).unwrap().value();
            prop_assert!(radial_prob_noncoherent(e + de, t, &p).unwrap().value() >= base);
            prop_assert!(radial_prob_noncoherent(e, t + dt, &p).unwrap().value() <= base);
        }

        #[test]
        fn coherent_dominates_silent_law(h in 0.0f64..5.0, x in 0.0f64..5.0, t in 0.0f64..8.0, s2 in 0.1f64..4.0) {
            let p = params(s2);
            let on = radial_prob_coherent(h, x, t, &p).unwrap().value();
            let off = radial_prob_noncoherent(0.0, t, &p).unwrap().value();
            prop_assert!(on >= off - 1e-15);
            if h * x == 0.0 {
                prop_assert!((on - off).abs() <= 1e-15);
            }
        }

        #[test]
        fn np_region_is_radial(probe in 0.01f64..50.0, frac in 0.01f64..1.0, y2 in 0.0f64..200.0, s2 in 0.2f64..5.0) {
            let p = params(s2);
            let lambda = frac * (1.0 + probe / s2);
            let t = np_threshold(probe, lambda, &p).unwrap();
            let lr = likelihood_ratio(y2, probe, &p).unwrap();
            // Skip points within rounding of the boundary.
            prop_assume!((y2 - t * t).abs() > 1e-9 * (1.0 + y2));
            prop_assert_eq!(lr <= lambda, y2 >= t * t);
        }

        #[test]
        fn noncoherent_depends_only_on_energy(r in 0.0f64..5.0, theta in 0.0f64..6.3, t in 0.0f64..5.0) {
            let p = params(1.0);
            let q = Quantizer::Radial { threshold: t };
            let a = output_probabilities(&q, Complex64::new(r, 0.0), false, &p).unwrap();
            let b = output_probabilities(&q, Complex64::from_polar(r, theta), false, &p).unwrap();
            // |x e^{i theta}|^2 can differ from r^2 in the last bit.
            prop_assert!((a[0].value() - b[0].value()).abs() <= 1e-15);
        }
    }
}

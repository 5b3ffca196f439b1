//! Finite-power capacity of the noncoherent channel with a radial one-bit
//! quantizer, over on-off inputs.
//!
//! Restricting to on-off inputs makes [`capacity_noncoherent`] a lower bound
//! on the capacity with the quantizer optimized per power level. At low power
//! `C(P)/P` climbs towards the capacity per unit-energy.

use serde::Serialize;

use crate::channel::{radial_prob_noncoherent, BinaryLaw, ChannelParams};
use crate::cue::BoundCheck;
use crate::optimize::{log_grid, maximize_2d, SweepSpec};
use crate::specfun::{binary_entropy, Probability};
use crate::{Error, Result};

/// Input that sends amplitude `on_level` with probability `on_prob` and 0
/// otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OnOffInput {
    on_level: f64,
    on_prob: f64,
}

impl OnOffInput {
    pub fn new(on_level: f64, on_prob: f64) -> Result<Self> {
        if !(on_level.is_finite() && on_level > 0.0) {
            return Err(Error::domain(format!("on-level must be positive, got {on_level}")));
        }
        if !(on_prob > 0.0 && on_prob <= 1.0) {
            return Err(Error::domain(format!("on-probability must lie in (0, 1], got {on_prob}")));
        }
        Ok(Self { on_level, on_prob })
    }

    /// The on-off input of average power `power` with on-energy `on_energy`.
    pub fn with_power(power: f64, on_energy: f64) -> Result<Self> {
        if !(power > 0.0 && on_energy >= power) {
            return Err(Error::domain(format!(
                "on-energy {on_energy} must be at least the power {power}"
            )));
        }
        Self::new(on_energy.sqrt(), power / on_energy)
    }

    pub fn on_level(&self) -> f64 {
        self.on_level
    }

    pub fn on_prob(&self) -> f64 {
        self.on_prob
    }

    /// Average power `p A^2`.
    pub fn power(&self) -> f64 {
        self.on_prob * self.on_level * self.on_level
    }
}

/// `I(X; Y)` of the binary-input binary-output channel in nats:
/// `H_b(p p_on + (1-p) p_off) - p H_b(p_on) - (1-p) H_b(p_off)`.
pub fn mutual_info_binary(input: &OnOffInput, law: &BinaryLaw) -> f64 {
    if law.p_on == law.p_off {
        // Output independent of input; skip the rounding of the entropy sum.
        return 0.0;
    }
    let p = input.on_prob;
    let marginal = Probability::mix(p, law.p_on, law.p_off);
    let i = binary_entropy(marginal) - p * binary_entropy(law.p_on) - (1.0 - p) * binary_entropy(law.p_off);
    i.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityResult {
    pub power: f64,
    pub sigma_sq: f64,
    /// Best mutual information found, in nats per channel use.
    pub capacity: f64,
    pub input: OnOffInput,
    /// Radial threshold as `tau = T^2`.
    pub threshold_sq: f64,
    /// The best on-energy sat on the largest grid value.
    pub on_energy_at_edge: bool,
    pub checks: Vec<BoundCheck>,
    pub evaluations: usize,
}

impl CapacityResult {
    pub fn per_unit_power(&self) -> f64 {
        self.capacity / self.power
    }

    pub fn checks_hold(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

fn on_off_rate(power: f64, on_energy: f64, tau: f64, params: &ChannelParams) -> Result<f64> {
    let input = OnOffInput::with_power(power, on_energy)?;
    on_off_rate_at(&input, tau, params)
}

fn on_off_rate_at(input: &OnOffInput, tau: f64, params: &ChannelParams) -> Result<f64> {
    let t = tau.sqrt();
    let a2 = input.on_level * input.on_level;
    let law = BinaryLaw {
        p_on: radial_prob_noncoherent(a2, t, params)?,
        p_off: radial_prob_noncoherent(0.0, t, params)?,
    };
    Ok(mutual_info_binary(input, &law))
}

/// Maximizes `I(X; Y)` over on-off inputs of average power `power` and radial
/// thresholds.
///
/// The power constraint is imposed with equality, `p = P / A^2`; the search
/// runs over the on-energy `A^2` (the sweep's probe-energy axis, floored at
/// `P`) and `tau = T^2` (the threshold axis). A recorded check confirms that
/// lowering `p` below `P/A^2` does not help at the optimum.
pub fn capacity_noncoherent(power: f64, sigma_sq: f64, sweep: &SweepSpec) -> Result<CapacityResult> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::domain(format!("power must be positive, got {power}")));
    }
    let params = ChannelParams::new(sigma_sq)?;
    let sweep = sweep.validated()?;
    let lo = sweep.xi2_min.max(power);
    let hi = sweep.xi2_max.max(10.0 * lo);
    let energies = log_grid(lo, hi, sweep.xi2_points);
    let m = maximize_2d(
        |a2, tau| on_off_rate(power, a2, tau, &params),
        &energies,
        &sweep.tau_grid(),
        sweep.rel_tol,
        sweep.max_iter,
    )?;
    let input = OnOffInput::with_power(power, m.x)?;
    let reduced = OnOffInput::new(input.on_level, input.on_prob * (1.0 - 1e-3))?;
    let at_reduced = on_off_rate_at(&reduced, m.y, &params)?;
    let checks = vec![
        BoundCheck::lower("capacity >= 0", m.value, 0.0, 0.0),
        BoundCheck::upper("capacity <= ln 2", m.value, std::f64::consts::LN_2, 0.0),
        BoundCheck::upper("power constraint active", at_reduced, m.value, 1e-12),
    ];
    Ok(CapacityResult {
        power,
        sigma_sq,
        capacity: m.value,
        input,
        threshold_sq: m.y,
        on_energy_at_edge: m.x_at_upper_edge,
        checks,
        evaluations: m.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cue::cue_noncoherent_radial;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn law(on: f64, off: f64) -> BinaryLaw {
        BinaryLaw {
            p_on: Probability::from_value(on).unwrap(),
            p_off: Probability::from_value(off).unwrap(),
        }
    }

    /// Plain-arithmetic mutual information as an oracle.
    fn naive_mi(p: f64, on: f64, off: f64) -> f64 {
        let h = |x: f64| {
            let t = |y: f64| if y > 0.0 { -y * y.ln() } else { 0.0 };
            t(x) + t(1.0 - x)
        };
        h(p * on + (1.0 - p) * off) - p * h(on) - (1.0 - p) * h(off)
    }

    #[test]
    fn mutual_information_examples() {
        let x = OnOffInput::new(1.0, 0.3).unwrap();
        assert_eq!(mutual_info_binary(&x, &law(0.4, 0.4)), 0.0);
        let x = OnOffInput::new(1.0, 0.5).unwrap();
        assert!((mutual_info_binary(&x, &law(1.0, 0.0)) - LN_2).abs() < 1e-15);
        let x = OnOffInput::new(1.0, 0.1).unwrap();
        let (on, off) = ((-1.0f64).exp(), (-4.0f64).exp());
        let got = mutual_info_binary(&x, &law(on, off));
        assert!((got - naive_mi(0.1, on, off)).abs() < 1e-15);
        assert!((got - 0.059_988_833_752_978_02).abs() < 1e-14, "{got}");
    }

    #[test]
    fn input_validation() {
        assert!(OnOffInput::new(0.0, 0.5).is_err());
        assert!(OnOffInput::new(1.0, 0.0).is_err());
        assert!(OnOffInput::new(1.0, 1.5).is_err());
        assert!(OnOffInput::with_power(2.0, 1.0).is_err());
        let x = OnOffInput::with_power(0.5, 4.0).unwrap();
        assert!((x.power() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn slope_grows_towards_capacity_per_unit_energy() {
        let sweep = SweepSpec::default();
        let cue = cue_noncoherent_radial(1.0, &sweep).unwrap().value;
        let mut last = 0.0;
        for power in [1.0, 0.1, 0.01] {
            let c = capacity_noncoherent(power, 1.0, &sweep).unwrap();
            assert!(c.checks_hold(), "{c:?}");
            assert!(!c.on_energy_at_edge);
            assert!(c.capacity <= LN_2);
            let ratio = c.per_unit_power();
            assert!(ratio >= last && ratio <= cue + 1e-9, "P={power}: {ratio} vs {last}, {cue}");
            last = ratio;
        }
    }

    #[test]
    fn optimum_is_locally_stable() {
        let c = capacity_noncoherent(0.1, 1.0, &SweepSpec::default()).unwrap();
        let params = ChannelParams::new(1.0).unwrap();
        let tol = 1e-6 * c.capacity;
        let (a, p, tau) = (c.input.on_level(), c.input.on_prob(), c.threshold_sq);
        for f in [0.99, 1.01] {
            // Moving A with p tied to the power, p alone downwards, and T.
            let x = OnOffInput::with_power(0.1, (a * f).powi(2)).unwrap();
            assert!(on_off_rate_at(&x, tau, &params).unwrap() <= c.capacity + tol);
            let t = (tau.sqrt() * f).powi(2);
            assert!(on_off_rate_at(&c.input, t, &params).unwrap() <= c.capacity + tol);
        }
        let x = OnOffInput::new(a, p * 0.99).unwrap();
        assert!(on_off_rate_at(&x, tau, &params).unwrap() <= c.capacity + tol);
    }

    #[test]
    fn capacity_increases_with_power() {
        let sweep = SweepSpec::default();
        let mut last = 0.0;
        for power in [0.01, 0.1, 1.0, 10.0] {
            let c = capacity_noncoherent(power, 1.0, &sweep).unwrap().capacity;
            assert!(c >= last);
            last = c;
        }
    }

    proptest! {
        #[test]
        fn mutual_information_matches_naive(p in 0.01f64..1.0, on in 0.0f64..1.0, off in 0.0f64..1.0) {
            let x = OnOffInput::new(1.0, p).unwrap();
            let got = mutual_info_binary(&x, &law(on, off));
            prop_assert!(got >= 0.0 && got <= LN_2 + 1e-15);
            prop_assert!((got - naive_mi(p, on, off).max(0.0)).abs() < 1e-13);
        }
    }
}

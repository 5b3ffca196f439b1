//! Capacity per unit-energy: the divergence-per-energy objectives, their
//! fading averages, closed-form bounds, and the searches over probe energy
//! and threshold.
//!
//! Every objective is a relative entropy `D(P_{Y|X=xi} || P_{Y|X=0})` between
//! the quantizer's output laws. Dividing by `|xi|^2` and taking the supremum
//! gives the capacity per unit-energy; see [`search`] for the optimizers.
//!
//! All quantities depend on the probe only through `r = |xi|^2 / sigma^2` and
//! on thresholds only through their ratio to `sigma^2` (or `sigma`), so results
//! at noise variance `c sigma^2` are those at `sigma^2` scaled by `1/c`.

mod np;
mod search;

pub use np::{
    np_radial_dominance_check, NpFamilyStats, NpReport, MIN_REGION_SAMPLES, NP_ANGULAR_CELLS, NP_RADIAL_CELLS,
};
pub use search::{
    cue_coherent_radial, cue_noncoherent_radial, cue_percomponent_coherent, cue_percomponent_noncoherent,
    cue_symmetric_coherent, cue_symmetric_coherent_limit, cue_symmetric_noncoherent, symmetric_coherent_ratio,
};

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{mc_fading_average, percomponent_prob_noncoherent, ChannelParams};
use crate::quadrature::{converged_expectation, QuadratureSpec};
use crate::specfun::{binary_kl, gaussian_q, marcum_q1, Probability};
use crate::{Error, Result};

/// Slack allowed on the `1/sigma^2` ceiling.
pub const CEILING_SLACK: f64 = 1e-9;

/// Which channel/quantizer pair a result describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CueCase {
    CoherentRadial,
    NoncoherentRadial,
    PercomponentCoherent,
    PercomponentNoncoherent,
    SymmetricCoherent,
    SymmetricNoncoherent,
}

impl CueCase {
    pub const ALL: [CueCase; 6] = [
        CueCase::CoherentRadial,
        CueCase::NoncoherentRadial,
        CueCase::PercomponentCoherent,
        CueCase::PercomponentNoncoherent,
        CueCase::SymmetricCoherent,
        CueCase::SymmetricNoncoherent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CueCase::CoherentRadial => "coherent-radial",
            CueCase::NoncoherentRadial => "noncoherent-radial",
            CueCase::PercomponentCoherent => "percomponent-coherent",
            CueCase::PercomponentNoncoherent => "percomponent-noncoherent",
            CueCase::SymmetricCoherent => "symmetric-coherent",
            CueCase::SymmetricNoncoherent => "symmetric-noncoherent",
        }
    }
}

impl std::str::FromStr for CueCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CueCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown case `{s}`")))
    }
}

/// The optimizing threshold of a search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    /// Radial threshold given as `tau = T^2`.
    Tau { tau: f64 },
    /// Per-component thresholds.
    Pair { t_re: f64, t_im: f64 },
    /// Threshold proportional to the faded probe: `T = mu |h xi|` (radial)
    /// or `T_R = mu Re(h xi)`, `T_I = mu Im(h xi)` (per-component).
    Fraction { mu: f64 },
    /// Sign quantizer, no free threshold.
    Zero,
}

/// One recorded inequality and whether the computed value honors it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `true` for `value <= bound`, `false` for `value >= bound`.
    pub is_upper: bool,
    pub satisfied: bool,
}

impl BoundCheck {
    pub fn upper(name: impl Into<String>, value: f64, bound: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            is_upper: true,
            satisfied: value <= bound + slack,
        }
    }

    /// Strict `value < bound`.
    pub fn strict_upper(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            is_upper: true,
            satisfied: value < bound,
        }
    }

    pub fn lower(name: impl Into<String>, value: f64, bound: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            is_upper: false,
            satisfied: value >= bound - slack,
        }
    }
}

/// A reported number that is not asserted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub note: String,
}

impl Diagnostic {
    pub fn new(name: impl Into<String>, value: f64, reference: Option<f64>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            note: note.into(),
        }
    }
}

/// Outcome of a capacity-per-unit-energy search.
///
/// A failed entry in `bound_checks` means the computation contradicts a
/// proven inequality; callers should treat it as a hard failure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CueResult {
    pub case: CueCase,
    pub sigma_sq: f64,
    /// Best divergence per unit energy found, in nats.
    pub value: f64,
    /// `|xi|^2` at the best point.
    pub probe_energy: f64,
    pub threshold: Threshold,
    pub bound_checks: Vec<BoundCheck>,
    /// The objective was still increasing at the largest probe energy, so
    /// `value` is a lower estimate of a supremum approached as `|xi| -> inf`.
    pub supremum_at_infinity: bool,
    /// Largest `|xi|^2` on the search grid.
    pub largest_probe_energy: f64,
    /// Largest objective value seen at any evaluated point.
    pub max_evaluated: f64,
    pub evaluations: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl CueResult {
    pub fn bounds_hold(&self) -> bool {
        self.bound_checks.iter().all(|c| c.satisfied)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &BoundCheck> {
        self.bound_checks.iter().filter(|c| !c.satisfied)
    }
}

fn check_sigma(sigma_sq: f64) -> Result<ChannelParams> {
    ChannelParams::new(sigma_sq)
}

fn check_probe(probe_energy: f64) -> Result<()> {
    if probe_energy.is_finite() && probe_energy >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("probe energy must be finite and >= 0, got {probe_energy}")))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("mu must lie in (0, 1), got {mu}")))
    }
}

/// `|xi|^2/sigma^2 - ln(1 + |xi|^2/sigma^2)`: the divergence of the unquantized
/// noncoherent channel, which no quantizer can exceed.
pub fn unquantized_kl_bound(probe_energy: f64, sigma_sq: f64) -> Result<f64> {
    check_probe(probe_energy)?;
    check_sigma(sigma_sq)?;
    let r = probe_energy / sigma_sq;
    Ok(r - r.ln_1p())
}

/// `|xi|^2 / (e sigma^2) + 2/e`, an upper bound on the radial noncoherent
/// divergence whose slope gives the `1/(e sigma^2)` limit.
pub fn exp_bound(probe_energy: f64, sigma_sq: f64) -> Result<f64> {
    check_probe(probe_energy)?;
    check_sigma(sigma_sq)?;
    let inv_e = (-1.0f64).exp();
    Ok(probe_energy / sigma_sq * inv_e + 2.0 * inv_e)
}

/// Lower bound on the coherent radial divergence per unit energy with
/// `T = mu |h||xi|`, from the Marcum bound:
/// `mu^2/sigma^2 - (mu^2 / (2e (1-mu)^2) + ln 2) / |xi|^2`.
pub fn coherent_radial_lower_bound(probe_energy: f64, mu: f64, sigma_sq: f64) -> Result<f64> {
    check_mu(mu)?;
    check_sigma(sigma_sq)?;
    if !(probe_energy.is_finite() && probe_energy > 0.0) {
        return Err(Error::domain("probe energy must be positive"));
    }
    let slack = mu * mu / (2.0 * std::f64::consts::E * (1.0 - mu).powi(2)) + std::f64::consts::LN_2;
    Ok(mu * mu / sigma_sq - slack / probe_energy)
}

/// Radial quantizer without fading knowledge, threshold `tau = T^2`:
/// `kl(exp(-tau/(|xi|^2+sigma^2)) || exp(-tau/sigma^2))`.
pub fn div_noncoherent_radial(probe_energy: f64, threshold_sq: f64, sigma_sq: f64) -> Result<f64> {
    check_probe(probe_energy)?;
    if !(threshold_sq.is_finite() && threshold_sq >= 0.0) {
        return Err(Error::domain(format!("threshold must be finite and >= 0, got {threshold_sq}")));
    }
    check_sigma(sigma_sq)?;
    // Works with tau directly so the exponents stay exact.
    let on = Probability::from_log_unchecked(-threshold_sq / (probe_energy + sigma_sq));
    let off = Probability::from_log_unchecked(-threshold_sq / sigma_sq);
    Ok(binary_kl(on, off))
}

/// Radial quantizer with fading knowledge and `T = mu |h||xi|`, averaged over
/// `|H|^2 ~ Exp(1)`.
pub fn div_coherent_radial(probe_energy: f64, mu: f64, sigma_sq: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_probe(probe_energy)?;
    check_mu(mu)?;
    check_sigma(sigma_sq)?;
    let quad = quad.validated()?;
    if probe_energy == 0.0 {
        return Ok(0.0);
    }
    let r = probe_energy / sigma_sq;
    let f = |g: f64| coherent_radial_kl(g, r, mu);
    let avg = converged_expectation(quad.nodes, 0.0, f, |g| g * r)?;
    if quad.validate {
        cross_check("coherent radial", avg, |h: Complex64| f(h.norm_sqr()))?;
    }
    Ok(avg)
}

/// Divergence given `|H|^2 = g`, with `r = |xi|^2/sigma^2`.
fn coherent_radial_kl(g: f64, r: f64, mu: f64) -> Result<f64> {
    let a = (2.0 * g * r).sqrt();
    let on = marcum_q1(a, mu * a)?;
    let off = Probability::from_log_unchecked(-mu * mu * g * r);
    Ok(binary_kl(on, off))
}

/// Per-component quantizer without fading knowledge: the two component
/// divergences add because `Re Y~` and `Im Y~` are independent given `X`.
pub fn div_percomponent_noncoherent(probe_energy: f64, t_re: f64, t_im: f64, sigma_sq: f64) -> Result<f64> {
    check_probe(probe_energy)?;
    let params = check_sigma(sigma_sq)?;
    let mut total = 0.0;
    for t in [t_re, t_im] {
        let on = percomponent_prob_noncoherent(probe_energy, t, &params)?;
        let off = percomponent_prob_noncoherent(0.0, t, &params)?;
        total += binary_kl(on, off);
    }
    Ok(total)
}

/// Per-component quantizer with fading knowledge and thresholds
/// `T_R = mu Re(h xi)`, `T_I = mu Im(h xi)`, averaged over `H`.
///
/// By circular symmetry only `|xi|` matters. Each of `Re(H xi)` and
/// `Im(H xi)` is `N(0, |xi|^2/2)`, so `m^2 / |xi|^2` is Gamma(1/2); the
/// average runs over that variable with both signs of `m` summed.
pub fn div_percomponent_coherent(probe: Complex64, mu: f64, sigma_sq: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(probe.re.is_finite() && probe.im.is_finite()) {
        return Err(Error::domain("probe must be finite"));
    }
    check_mu(mu)?;
    check_sigma(sigma_sq)?;
    let quad = quad.validated()?;
    let probe_energy = probe.norm_sqr();
    if probe_energy == 0.0 {
        return Ok(0.0);
    }
    let r = probe_energy / sigma_sq;
    let avg = converged_expectation(quad.nodes, -0.5, |g| component_pair_kl(g, r, mu), |g| 2.0 * g * r)?;
    if quad.validate {
        // Direct draws of the complex fading; `xi` real without loss.
        let scale = (2.0 * r).sqrt();
        cross_check("coherent per-component", avg, |h: Complex64| {
            Ok(component_kl(scale * h.re, mu)? + component_kl(scale * h.im, mu)?)
        })?;
    }
    Ok(avg)
}

/// Divergence of one component whose normalized mean is `v = m sqrt(2)/sigma`:
/// `kl(Q(-(1-mu) v) || Q(mu v))`.
fn component_kl(v: f64, mu: f64) -> Result<f64> {
    let on = gaussian_q(-(1.0 - mu) * v)?;
    let off = gaussian_q(mu * v)?;
    Ok(binary_kl(on, off))
}

/// Both signs of a component with `m^2/|xi|^2 = g`; the sum is even in the
/// mean and hence smooth in `g`.
fn component_pair_kl(g: f64, r: f64, mu: f64) -> Result<f64> {
    let v = (2.0 * g * r).sqrt();
    Ok(component_kl(v, mu)? + component_kl(-v, mu)?)
}

/// Sign quantizer with fading knowledge at `r = |xi|^2/sigma^2`: both
/// components give `kl(Q(v) || 1/2)`, and the two signs of `v` agree.
fn symmetric_coherent_divergence(r: f64, quad: &QuadratureSpec) -> Result<f64> {
    let f = |g: f64| -> Result<f64> {
        let p = gaussian_q((2.0 * g * r).sqrt())?;
        Ok(2.0 * binary_kl(p, Probability::HALF))
    };
    let avg = converged_expectation(quad.nodes, -0.5, f, |g| 2.0 * g * r)?;
    if quad.validate {
        let scale = (2.0 * r).sqrt();
        cross_check("symmetric coherent", avg, |h: Complex64| {
            let a = gaussian_q(scale * h.re)?;
            let b = gaussian_q(scale * h.im)?;
            Ok(binary_kl(a, Probability::HALF) + binary_kl(b, Probability::HALF))
        })?;
    }
    Ok(avg)
}

/// Draws used when cross-checking a fading average by Monte Carlo.
pub const VALIDATION_DRAWS: u64 = 1_000_000;
const VALIDATION_SEED: u64 = 0x5EED_F00D;

fn cross_check<F>(what: &str, quadrature: f64, f: F) -> Result<()>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    let (mean, se) = mc_fading_average(f, VALIDATION_DRAWS, VALIDATION_SEED)?;
    let tol = 4.0 * se + 1e-12 * quadrature.abs();
    if (mean - quadrature).abs() > tol {
        return Err(Error::numerical(format!(
            "{what}: quadrature {quadrature} disagrees with Monte Carlo {mean} (std error {se})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;

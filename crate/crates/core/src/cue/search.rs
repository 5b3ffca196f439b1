//! Searches over probe energy and threshold.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use super::{
    check_mu, check_sigma, coherent_radial_lower_bound, div_coherent_radial, div_noncoherent_radial,
    div_percomponent_coherent, div_percomponent_noncoherent, exp_bound, symmetric_coherent_divergence,
    unquantized_kl_bound, BoundCheck, CueCase, CueResult, Diagnostic, Threshold, CEILING_SLACK,
};
use crate::optimize::{log_grid, maximize_1d, maximize_2d, Max1d, SweepSpec};
use crate::quadrature::QuadratureSpec;
use crate::specfun::gaussian_q;
use crate::{Error, Result};

/// Running maximum of nonnegative objective values, shared across threads.
/// For nonnegative floats the bit patterns order like the values.
struct MaxTracker(AtomicU64);

impl MaxTracker {
    fn new() -> Self {
        Self(AtomicU64::new(0))
    }

    fn observe(&self, v: f64) -> f64 {
        if v > 0.0 {
            self.0.fetch_max(v.to_bits(), Ordering::Relaxed);
        }
        v
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }
}

fn ceiling_checks(value: f64, max_evaluated: f64, sigma_sq: f64) -> Vec<BoundCheck> {
    vec![
        BoundCheck::upper("value <= 1/sigma^2", value, 1.0 / sigma_sq, CEILING_SLACK),
        BoundCheck::upper("every evaluated point <= 1/sigma^2", max_evaluated, 1.0 / sigma_sq, CEILING_SLACK),
    ]
}

/// Radial quantizer without fading knowledge: maximizes
/// `div_noncoherent_radial(|xi|^2, tau) / |xi|^2` over the sweep, with the
/// sweep's threshold axis read as `tau = T^2`.
///
/// The objective keeps growing with `|xi|^2`, so the result normally carries
/// `supremum_at_infinity` and `value` is the best point on the grid.
pub fn cue_noncoherent_radial(sigma_sq: f64, sweep: &SweepSpec) -> Result<CueResult> {
    check_sigma(sigma_sq)?;
    let sweep = sweep.validated()?;
    let tracker = MaxTracker::new();
    let objective = |xi2: f64, tau: f64| Ok(tracker.observe(div_noncoherent_radial(xi2, tau, sigma_sq)? / xi2));
    let m = maximize_2d(objective, &sweep.xi2_grid(), &sweep.tau_grid(), sweep.rel_tol, sweep.max_iter)?;
    let max_evaluated = tracker.get();

    let d = div_noncoherent_radial(m.x, m.y, sigma_sq)?;
    let mut bound_checks = vec![
        BoundCheck::upper("divergence <= unquantized divergence", d, unquantized_kl_bound(m.x, sigma_sq)?, 1e-12),
        BoundCheck::upper("divergence <= |xi|^2/(e sigma^2) + 2/e", d, exp_bound(m.x, sigma_sq)?, 1e-12),
        BoundCheck::strict_upper("every evaluated point < 1/sigma^2", max_evaluated, 1.0 / sigma_sq),
    ];
    bound_checks.push(BoundCheck::upper("value <= 1/sigma^2", m.value, 1.0 / sigma_sq, CEILING_SLACK));

    let at_shifted = div_noncoherent_radial(m.x, m.x + sigma_sq, sigma_sq)? / m.x;
    let diagnostics = vec![
        Diagnostic::new(
            "limit 1/(e sigma^2)",
            m.value,
            Some((-1.0f64).exp() / sigma_sq),
            "large-probe limit of the exponential bound",
        ),
        Diagnostic::new(
            "objective at tau = |xi|^2 + sigma^2",
            at_shifted,
            Some(m.value),
            "same probe energy, closed-form threshold",
        ),
        Diagnostic::new(
            "threshold at grid edge",
            f64::from(u8::from(m.y_at_edge)),
            None,
            "1 if the best tau sat on the first or last grid point",
        ),
    ];
    Ok(CueResult {
        case: CueCase::NoncoherentRadial,
        sigma_sq,
        value: m.value,
        probe_energy: m.x,
        threshold: Threshold::Tau { tau: m.y },
        bound_checks,
        supremum_at_infinity: m.x_at_upper_edge,
        largest_probe_energy: sweep.xi2_max,
        max_evaluated,
        evaluations: m.evaluations,
        diagnostics,
    })
}

/// Best over a list of `mu` of a one-dimensional search in `|xi|^2`.
/// Returns the winning `mu`, its search outcome, and every per-`mu` outcome.
fn best_over_mu<F>(mus: &[f64], xs: &[f64], rel_tol: f64, objective: F) -> Result<(f64, Max1d, Vec<(f64, Max1d)>)>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if mus.is_empty() {
        return Err(Error::usage("mu schedule is empty"));
    }
    for &mu in mus {
        check_mu(mu)?;
    }
    let mut all = Vec::with_capacity(mus.len());
    for &mu in mus {
        all.push((mu, maximize_1d(|x| objective(x, mu), xs, rel_tol)?));
    }
    let mut best = 0;
    for k in 1..all.len() {
        if all[k].1.value > all[best].1.value {
            best = k;
        }
    }
    Ok((all[best].0, all[best].1, all))
}

/// Radial quantizer with fading knowledge and `T = mu |h||xi|`: for each
/// `mu`, maximizes the fading-averaged divergence per unit energy over the
/// sweep's probe energies and keeps the best.
pub fn cue_coherent_radial(
    sigma_sq: f64,
    mu_schedule: &[f64],
    sweep: &SweepSpec,
    quad: &QuadratureSpec,
) -> Result<CueResult> {
    check_sigma(sigma_sq)?;
    let sweep = sweep.validated()?;
    let quad = quad.validated()?;
    let tracker = MaxTracker::new();
    let objective = |xi2: f64, mu: f64| Ok(tracker.observe(div_coherent_radial(xi2, mu, sigma_sq, &quad)? / xi2));
    let (mu, m, all) = best_over_mu(mu_schedule, &sweep.xi2_grid(), sweep.rel_tol, objective)?;
    let max_evaluated = tracker.get();

    let mut bound_checks = ceiling_checks(m.value, max_evaluated, sigma_sq);
    for (mu_k, mk) in &all {
        bound_checks.push(BoundCheck::lower(
            format!("Marcum lower bound chain at mu = {mu_k}"),
            mk.value,
            coherent_radial_lower_bound(mk.x, *mu_k, sigma_sq)?,
            1e-12,
        ));
    }
    let diagnostics = all
        .iter()
        .map(|(mu_k, mk)| {
            Diagnostic::new(
                format!("best value at mu = {mu_k}"),
                mk.value,
                Some(mu_k * mu_k / sigma_sq),
                "large-probe limit mu^2/sigma^2",
            )
        })
        .collect();
    Ok(CueResult {
        case: CueCase::CoherentRadial,
        sigma_sq,
        value: m.value,
        probe_energy: m.x,
        threshold: Threshold::Fraction { mu },
        bound_checks,
        supremum_at_infinity: m.at_upper_edge,
        largest_probe_energy: sweep.xi2_max,
        max_evaluated,
        evaluations: all.iter().map(|(_, mk)| mk.evaluations).sum(),
        diagnostics,
    })
}

/// Per-component quantizer with fading knowledge and thresholds proportional
/// to the faded probe's components.
pub fn cue_percomponent_coherent(
    sigma_sq: f64,
    mu_schedule: &[f64],
    sweep: &SweepSpec,
    quad: &QuadratureSpec,
) -> Result<CueResult> {
    check_sigma(sigma_sq)?;
    let sweep = sweep.validated()?;
    let quad = quad.validated()?;
    let tracker = MaxTracker::new();
    let objective = |xi2: f64, mu: f64| {
        let probe = Complex64::new(xi2.sqrt(), 0.0);
        Ok(tracker.observe(div_percomponent_coherent(probe, mu, sigma_sq, &quad)? / xi2))
    };
    let (mu, m, all) = best_over_mu(mu_schedule, &sweep.xi2_grid(), sweep.rel_tol, objective)?;
    let max_evaluated = tracker.get();

    let symmetric = 2.0 / (std::f64::consts::PI * sigma_sq);
    let mut diagnostics = vec![Diagnostic::new(
        "compared with the sign quantizer 2/(pi sigma^2)",
        m.value,
        Some(symmetric),
        "the threshold schedule is an assumption; beating the sign quantizer measures it",
    )];
    diagnostics.extend(all.iter().map(|(mu_k, mk)| {
        Diagnostic::new(format!("best value at mu = {mu_k}"), mk.value, None, "")
    }));
    Ok(CueResult {
        case: CueCase::PercomponentCoherent,
        sigma_sq,
        value: m.value,
        probe_energy: m.x,
        threshold: Threshold::Fraction { mu },
        bound_checks: ceiling_checks(m.value, max_evaluated, sigma_sq),
        supremum_at_infinity: m.at_upper_edge,
        largest_probe_energy: sweep.xi2_max,
        max_evaluated,
        evaluations: all.iter().map(|(_, mk)| mk.evaluations).sum(),
        diagnostics,
    })
}

/// Per-component quantizer without fading knowledge, `T_R = T_I = T`.
///
/// By default maximizes jointly over `|xi|^2` and `T`, the sweep's threshold
/// axis supplying `T` (negative thresholds mirror positive ones). With
/// `tied_thresholds` the threshold is tied to `T = (|xi|^2 + sigma^2)/2` and only
/// `|xi|^2` is searched. The comparison with `2 Q(1)/sigma^2` is reported as a
/// diagnostic, never asserted.
pub fn cue_percomponent_noncoherent(sigma_sq: f64, sweep: &SweepSpec, tied_thresholds: bool) -> Result<CueResult> {
    check_sigma(sigma_sq)?;
    let sweep = sweep.validated()?;
    let tracker = MaxTracker::new();
    let (value, xi2, t, at_edge, evaluations) = if tied_thresholds {
        let tied = |xi2: f64| 0.5 * (xi2 + sigma_sq);
        let objective = |xi2: f64| {
            let t = tied(xi2);
            Ok(tracker.observe(div_percomponent_noncoherent(xi2, t, t, sigma_sq)? / xi2))
        };
        let m = maximize_1d(objective, &sweep.xi2_grid(), sweep.rel_tol)?;
        (m.value, m.x, tied(m.x), m.at_upper_edge, m.evaluations)
    } else {
        let objective = |xi2: f64, t: f64| Ok(tracker.observe(div_percomponent_noncoherent(xi2, t, t, sigma_sq)? / xi2));
        let m = maximize_2d(objective, &sweep.xi2_grid(), &sweep.tau_grid(), sweep.rel_tol, sweep.max_iter)?;
        (m.value, m.x, m.y, m.x_at_upper_edge, m.evaluations)
    };
    let max_evaluated = tracker.get();
    let d = value * xi2;
    let bound_checks = vec![
        BoundCheck::lower("value > 0", value, f64::MIN_POSITIVE, 0.0),
        BoundCheck::strict_upper("every evaluated point < 1/sigma^2", max_evaluated, 1.0 / sigma_sq),
        BoundCheck::upper("divergence <= unquantized divergence", d, unquantized_kl_bound(xi2, sigma_sq)?, 1e-12),
    ];
    let reference = 2.0 * gaussian_q(1.0)?.value() / sigma_sq;
    let diagnostics = vec![Diagnostic::new(
        "compared with 2 Q(1)/sigma^2",
        value,
        Some(reference),
        if tied_thresholds {
            "thresholds tied to (|xi|^2 + sigma^2)/2; reported only"
        } else {
            "joint optimum; reported only"
        },
    )];
    Ok(CueResult {
        case: CueCase::PercomponentNoncoherent,
        sigma_sq,
        value,
        probe_energy: xi2,
        threshold: Threshold::Pair { t_re: t, t_im: t },
        bound_checks,
        supremum_at_infinity: at_edge,
        largest_probe_energy: sweep.xi2_max,
        max_evaluated,
        evaluations,
        diagnostics,
    })
}

/// `D / |xi|^2` for the sign quantizer with fading knowledge.
pub fn symmetric_coherent_ratio(probe_energy: f64, sigma_sq: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_sigma(sigma_sq)?;
    if !(probe_energy.is_finite() && probe_energy > 0.0) {
        return Err(Error::domain("probe energy must be positive"));
    }
    let quad = quad.validated()?;
    Ok(symmetric_coherent_divergence(probe_energy / sigma_sq, &quad)? / probe_energy)
}

/// Small-probe slope of the sign quantizer with fading knowledge.
///
/// Evaluates the ratio at `|xi| = 1e-2 sigma` and `1e-3 sigma`; the ratio is
/// affine in `|xi|^2` to leading order, so one Richardson step removes the
/// first correction.
pub fn cue_symmetric_coherent_limit(sigma_sq: f64, quad: &QuadratureSpec) -> Result<f64> {
    let coarse = symmetric_coherent_ratio(1e-4 * sigma_sq, sigma_sq, quad)?;
    let fine = symmetric_coherent_ratio(1e-6 * sigma_sq, sigma_sq, quad)?;
    if (coarse - fine).abs() > 1e-3 * fine.abs() {
        return Err(Error::numerical(format!(
            "small-probe extrapolation unstable: {coarse} vs {fine}"
        )));
    }
    Ok((100.0 * fine - coarse) / 99.0)
}

/// [`cue_symmetric_coherent_limit`] packaged as a [`CueResult`].
pub fn cue_symmetric_coherent(sigma_sq: f64, quad: &QuadratureSpec) -> Result<CueResult> {
    let value = cue_symmetric_coherent_limit(sigma_sq, quad)?;
    Ok(CueResult {
        case: CueCase::SymmetricCoherent,
        sigma_sq,
        value,
        probe_energy: 0.0,
        threshold: Threshold::Zero,
        bound_checks: ceiling_checks(value, value, sigma_sq),
        supremum_at_infinity: false,
        largest_probe_energy: 1e-4 * sigma_sq,
        max_evaluated: value,
        evaluations: 2,
        diagnostics: vec![Diagnostic::new(
            "compared with 2/(pi sigma^2)",
            value,
            Some(2.0 / (std::f64::consts::PI * sigma_sq)),
            "extrapolated to |xi| -> 0",
        )],
    })
}

/// Sign quantizer without fading knowledge: both output laws are fair coins
/// for every input, so every probe on the sweep gives zero divergence.
pub fn cue_symmetric_noncoherent(sigma_sq: f64, sweep: &SweepSpec) -> Result<CueResult> {
    check_sigma(sigma_sq)?;
    let sweep = sweep.validated()?;
    let xs = log_grid(sweep.xi2_min, sweep.xi2_max, sweep.xi2_points);
    let mut worst = 0.0f64;
    for &xi2 in &xs {
        worst = worst.max(div_percomponent_noncoherent(xi2, 0.0, 0.0, sigma_sq)? / xi2);
    }
    Ok(CueResult {
        case: CueCase::SymmetricNoncoherent,
        sigma_sq,
        value: worst,
        probe_energy: sweep.xi2_max,
        threshold: Threshold::Zero,
        bound_checks: vec![BoundCheck::upper("divergence = 0 at every probe", worst, 0.0, 0.0)],
        supremum_at_infinity: false,
        largest_probe_energy: sweep.xi2_max,
        max_evaluated: worst,
        evaluations: xs.len(),
        diagnostics: Vec::new(),
    })
}

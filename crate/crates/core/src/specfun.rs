//! Scalar special functions: the Gaussian tail, the first-order Marcum Q
//! function, and binary entropy / relative entropy in nats.
//!
//! Everything that ends up inside a divergence is carried as a
//! [`Probability`], which keeps `p`, `ln p` and `ln(1 - p)` side by side.
//! Binary divergences between quantizer output laws routinely involve
//! probabilities like `exp(-10^4)`; those have a perfectly good logarithm
//! even though the value itself underflows, and the divergence only ever
//! needs the logarithm.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use serde::Serialize;

use crate::{Error, Result};

/// A probability together with its logarithm and the logarithm of its
/// complement.
///
/// `value == exp(log_value)` whenever the exponential does not underflow,
/// and `log_value == -inf` exactly when the probability is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probability {
    value: f64,
    log_value: f64,
    log_complement: f64,
}

impl Probability {
    pub const ZERO: Probability = Probability {
        value: 0.0,
        log_value: f64::NEG_INFINITY,
        log_complement: 0.0,
    };

    pub const ONE: Probability = Probability {
        value: 1.0,
        log_value: 0.0,
        log_complement: f64::NEG_INFINITY,
    };

    pub const HALF: Probability = Probability {
        value: 0.5,
        log_value: -LN_2,
        log_complement: -LN_2,
    };

    /// Builds a probability from its linear value.
    pub fn from_value(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self::from_value_unchecked(p))
    }

    /// Builds a probability from `ln p`, which must lie in `[-inf, 0]`.
    pub fn from_log(log_p: f64) -> Result<Self> {
        if log_p.is_nan() || log_p > 0.0 {
            return Err(Error::domain(format!("log-probability {log_p} outside [-inf, 0]")));
        }
        Ok(Self::from_log_unchecked(log_p))
    }

    /// Builds a probability from `ln(1 - p)`. Accurate when `p` is close to one.
    pub fn from_log_complement(log_q: f64) -> Result<Self> {
        if log_q.is_nan() || log_q > 0.0 {
            return Err(Error::domain(format!("log-probability {log_q} outside [-inf, 0]")));
        }
        Ok(Self::from_log_complement_unchecked(log_q))
    }

    pub(crate) fn from_value_unchecked(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self {
            value: p,
            log_value: p.ln(),
            log_complement: (-p).ln_1p(),
        }
    }

    pub(crate) fn from_log_unchecked(log_p: f64) -> Self {
        let log_p = log_p.min(0.0);
        Self {
            value: log_p.exp(),
            log_value: log_p,
            log_complement: log1m_exp(log_p),
        }
    }

    pub(crate) fn from_log_complement_unchecked(log_q: f64) -> Self {
        let flipped = Self::from_log_unchecked(log_q);
        flipped.complement_probability()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }

    /// `1 - p`, computed from the stored logarithm.
    pub fn complement(&self) -> f64 {
        self.log_complement.exp()
    }

    pub fn log_complement(&self) -> f64 {
        self.log_complement
    }

    /// The probability of the opposite outcome.
    pub fn complement_probability(&self) -> Self {
        Self {
            value: self.complement(),
            log_value: self.log_complement,
            log_complement: self.log_value,
        }
    }

    /// `w * p + (1 - w) * q`, keeping both tails accurate.
    pub fn mix(weight: f64, p: Probability, q: Probability) -> Self {
        debug_assert!((0.0..=1.0).contains(&weight));
        let (lw, lw1) = (weight.ln(), (-weight).ln_1p());
        let log_value = log_add_exp(lw + p.log_value, lw1 + q.log_value);
        let log_complement = log_add_exp(lw + p.log_complement, lw1 + q.log_complement);
        // Keep whichever side was computed without cancellation.
        if log_value <= -LN_2 {
            Self {
                value: log_value.exp(),
                log_value,
                log_complement: log1m_exp(log_value),
            }
        } else {
            Self {
                value: -log_complement.exp_m1(),
                log_value: log1m_exp(log_complement),
                log_complement,
            }
        }
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
pub(crate) fn log1m_exp(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Upper tail of the standard normal law, `Q(z) = P(N(0,1) > z)`.
///
/// For `z > 8` the logarithm comes from the continued fraction
/// `Q(z) = phi(z) / (z + 1/(z + 2/(z + 3/(z + ...))))`, so `log_value` stays
/// accurate far beyond the point where the value underflows.
pub fn gaussian_q(z: f64) -> Result<Probability> {
    if !z.is_finite() {
        return Err(Error::domain(format!("gaussian_q argument {z} is not finite")));
    }
    if z >= 0.0 {
        let log_tail = log_upper_tail(z);
        Ok(Probability::from_log_unchecked(log_tail))
    } else {
        let log_tail = log_upper_tail(-z);
        Ok(Probability::from_log_complement_unchecked(log_tail))
    }
}

const CF_SWITCH: f64 = 8.0;
const CF_TERMS: u32 = 80;

fn log_upper_tail(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z <= CF_SWITCH {
        (0.5 * libm::erfc(z * FRAC_1_SQRT_2)).ln()
    } else {
        let mut t = z;
        for k in (1..=CF_TERMS).rev() {
            t = z + f64::from(k) / t;
        }
        -0.5 * z * z - 0.5 * (2.0 * PI).ln() - t.ln()
    }
}

/// First-order Marcum Q function `Q1(a, b)`: the probability that a
/// noncentral chi-square variable with two degrees of freedom and
/// noncentrality `a^2` exceeds `b^2`.
///
/// Evaluated through the Poisson mixture
/// `Q1(a, b) = sum_k Pois(k; a^2/2) * P(Pois(b^2/2) <= k)`, which is the same
/// thing as `P(N_y <= N_x)` for independent Poisson counts with means
/// `y = b^2/2` and `x = a^2/2`. Both the sum and its complement are
/// accumulated from positive terms, and the smaller of the two is returned,
/// so the result is accurate in both tails.
pub fn marcum_q1(a: f64, b: f64) -> Result<Probability> {
    if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
        return Err(Error::domain(format!(
            "marcum_q1 needs finite nonnegative arguments, got ({a}, {b})"
        )));
    }
    if b == 0.0 {
        return Ok(Probability::ONE);
    }
    if a == 0.0 {
        return Ok(Probability::from_log_unchecked(-0.5 * b * b));
    }
    Ok(poisson_race(0.5 * a * a, 0.5 * b * b))
}

const POISSON_TAIL_SIGMAS: f64 = 13.0;
const SERIES_REL_TOL: f64 = 1e-18;
const MAX_EXP: f64 = 700.0;

/// `P(N_y <= N_x)` for independent Poisson counts with means `x` and `y`.
fn poisson_race(x: f64, y: f64) -> Probability {
    // Window holding all but ~1e-35 of the mass of Pois(x).
    let spread = POISSON_TAIL_SIGMAS * x.sqrt() + 25.0;
    let lo = (x - spread).floor().max(0.0) as u64;
    let hi = (x + spread).ceil() as u64;
    let len = (hi - lo + 1) as usize;

    let px = poisson_window(x, lo, hi, 0.0);
    // Terms of Pois(y) over the same window, scaled by exp(-scale) so the
    // largest of them is O(1) no matter how far y sits from the window.
    let anchor = (y.floor() as u64).clamp(lo, hi);
    let scale = ln_poisson_pmf(anchor, y);
    let py = poisson_window(y, lo, hi, scale);

    let lo_f = lo as f64;
    let hi_f = hi as f64;
    let inv_scale = (-scale).exp();
    let unit_ok = -scale < MAX_EXP;

    // cdf_lo: scaled P(N_y <= lo). tail_hi: scaled P(N_y > hi).
    let (cdf_lo, tail_hi) = if lo_f <= y {
        let mut sum = py[0];
        let mut term = py[0];
        let mut j = lo;
        while j > 0 {
            term *= j as f64 / y;
            sum += term;
            j -= 1;
            if term <= SERIES_REL_TOL * sum || term < f64::MIN_POSITIVE {
                break;
            }
        }
        let cdf_lo = Some(sum);
        let tail_hi = if hi_f >= y {
            Some(upper_tail_scaled(py[len - 1], hi, y))
        } else if unit_ok {
            let cdf_hi: f64 = sum + py[1..].iter().sum::<f64>();
            Some((inv_scale - cdf_hi).max(0.0))
        } else {
            None
        };
        (cdf_lo, tail_hi)
    } else {
        let tail = upper_tail_scaled(py[len - 1], hi, y);
        let cdf_lo = if unit_ok {
            let tail_lo: f64 = tail + py[1..].iter().sum::<f64>();
            Some((inv_scale - tail_lo).max(0.0))
        } else {
            None
        };
        (cdf_lo, Some(tail))
    };

    let log_s = cdf_lo.map(|start| {
        let mut cdf = start;
        let mut acc = px[0] * cdf;
        for i in 1..len {
            cdf += py[i];
            acc += px[i] * cdf;
        }
        acc.ln() + scale
    });
    let log_c = tail_hi.map(|start| {
        let mut tail = start;
        let mut acc = px[len - 1] * tail;
        for i in (0..len - 1).rev() {
            tail += py[i + 1];
            acc += px[i] * tail;
        }
        acc.ln() + scale
    });

    match (log_s, log_c) {
        (Some(ls), Some(lc)) if ls <= lc => Probability::from_log_unchecked(ls),
        (Some(_), Some(lc)) | (None, Some(lc)) => Probability::from_log_complement_unchecked(lc),
        (Some(ls), None) => Probability::from_log_unchecked(ls),
        (None, None) => unreachable!("one of the two sums is always direct"),
    }
}

/// Scaled pmf `Pois(k; mean) * exp(-scale)` for `k` in `lo..=hi`, by
/// recurrence outward from the mode (clamped into the window).
fn poisson_window(mean: f64, lo: u64, hi: u64, scale: f64) -> Vec<f64> {
    let len = (hi - lo + 1) as usize;
    let mut out = vec![0.0; len];
    let anchor = (mean.floor() as u64).clamp(lo, hi);
    let start = (ln_poisson_pmf(anchor, mean) - scale).exp();
    let a = (anchor - lo) as usize;
    out[a] = start;
    let mut term = start;
    // Terms below the normal range stay zero: they cannot move the sums,
    // and subnormal arithmetic is very slow.
    for i in a + 1..len {
        term *= mean / (lo + i as u64) as f64;
        if term < f64::MIN_POSITIVE {
            break;
        }
        out[i] = term;
    }
    term = start;
    for i in (0..a).rev() {
        term *= (lo + i as u64 + 1) as f64 / mean;
        if term < f64::MIN_POSITIVE {
            break;
        }
        out[i] = term;
    }
    out
}

/// Scaled `P(N > k)` for `N ~ Pois(mean)` given the scaled pmf at `k >= mean`.
fn upper_tail_scaled(pmf_k: f64, k: u64, mean: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = pmf_k;
    let mut j = k;
    loop {
        j += 1;
        term *= mean / j as f64;
        sum += term;
        if term <= SERIES_REL_TOL * sum || term < f64::MIN_POSITIVE {
            break;
        }
    }
    sum
}

/// `ln Pois(k; mean)` via Loader's saddle-point form, which keeps full
/// relative accuracy for very large `k` and `mean`.
pub(crate) fn ln_poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0 {
        return -mean;
    }
    let kf = k as f64;
    -stirling_error(k) - deviance(kf, mean) - 0.5 * (2.0 * PI * kf).ln()
}

/// `ln k! - [(k + 1/2) ln k - k + ln sqrt(2 pi)]`.
fn stirling_error(k: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = k as f64;
    if k <= 15 {
        let ln_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
        return ln_fact - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if k > 500 {
        (S0 - S1 / nn) / n
    } else if k > 80 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if k > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `k ln(k / mean) + mean - k`, without cancellation when `k ~ mean`.
fn deviance(k: f64, mean: f64) -> f64 {
    if (k - mean).abs() < 0.1 * (k + mean) {
        let v = (k - mean) / (k + mean);
        let mut s = (k - mean) * v;
        let mut ej = 2.0 * k * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        k * (k / mean).ln() + mean - k
    }
}

/// `1 - (exp(-(a-b)^2/2) - exp(-(a+b)^2/2)) / 2`, a lower bound on
/// `Q1(a, b)` valid for `a > b >= 0`.
pub fn marcum_lower_bound(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || b < 0.0 || a <= b {
        return Err(Error::domain(format!(
            "marcum_lower_bound requires a > b >= 0, got ({a}, {b})"
        )));
    }
    let near = (-0.5 * (a - b) * (a - b)).exp();
    let far = (-0.5 * (a + b) * (a + b)).exp();
    Ok(1.0 - 0.5 * (near - far))
}

/// Binary entropy in nats, zero at both endpoints.
pub fn binary_entropy(p: Probability) -> f64 {
    let on = if p.log_value == f64::NEG_INFINITY {
        0.0
    } else {
        -p.value * p.log_value
    };
    let off = if p.log_complement == f64::NEG_INFINITY {
        0.0
    } else {
        -p.complement() * p.log_complement
    };
    on + off
}

/// Relative entropy `D(Bern(p) || Bern(q))` in nats.
///
/// Uses `0 ln(0/q) = 0` and `p ln(p/0) = +inf`. Only logarithms of `q` enter,
/// so `q = exp(-1e6)` is as good an input as `q = 0.3`.
pub fn binary_kl(p: Probability, q: Probability) -> f64 {
    let on = if p.log_value == f64::NEG_INFINITY {
        0.0
    } else if q.log_value == f64::NEG_INFINITY {
        return f64::INFINITY;
    } else {
        p.value * (p.log_value - q.log_value)
    };
    let off = if p.log_complement == f64::NEG_INFINITY {
        0.0
    } else if q.log_complement == f64::NEG_INFINITY {
        return f64::INFINITY;
    } else {
        p.complement() * (p.log_complement - q.log_complement)
    };
    (on + off).max(0.0)
}

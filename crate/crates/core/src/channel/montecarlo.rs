//! Seeded Monte Carlo for the quantized channel.
//!
//! Trials are split into fixed-size chunks; chunk `k` draws from a ChaCha8
//! stream selected by `k`, so the estimate depends only on `(seed, trials)`
//! and not on how rayon schedules the chunks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{likelihood_ratio, np_threshold, ChannelParams, Quantizer};
use crate::specfun::Probability;
use crate::{Error, Result};

/// Smallest accepted trial count.
pub const MIN_TRIALS: u64 = 10_000;

const CHUNK: u64 = 1 << 16;

/// Empirical frequency of one output bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BitEstimate {
    pub estimate: Probability,
    /// Binomial standard error `sqrt(p (1 - p) / n)` at the empirical `p`.
    pub std_error: f64,
}

impl BitEstimate {
    /// `(analytic - estimate) / std_error`; zero when both agree exactly.
    pub fn z_score(&self, analytic: f64) -> f64 {
        let diff = analytic - self.estimate.value();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    pub seed: u64,
    /// One entry per quantizer output bit.
    pub bits: Vec<BitEstimate>,
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Circularly-symmetric complex Gaussian with `E|W|^2 = var`.
fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::usage(format!(
            "Monte Carlo needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

/// Runs `body` over `trials` draws in parallel chunks and sums the per-chunk
/// accumulators.
fn run_chunks<A, F>(trials: u64, seed: u64, zero: A, body: F) -> A
where
    A: Copy + Send + Sync + std::ops::Add<Output = A>,
    F: Fn(&mut ChaCha8Rng, u64, &mut A) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(seed, k);
            let n = CHUNK.min(trials - k * CHUNK);
            let mut acc = zero;
            body(&mut rng, n, &mut acc);
            acc
        })
        .collect();
    // Fixed summation order keeps floating-point accumulators reproducible.
    parts.into_iter().fold(zero, |a, b| a + b)
}

#[derive(Clone, Copy, Default)]
struct Counts([u64; 2]);

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

/// Empirical `P(bit = 1)` for each output bit of `quantizer`.
///
/// With `coherent`, `input` is the effective mean `h x` and only the noise is
/// drawn; otherwise `input` is `x` and a fresh `H` is drawn per trial.
pub fn mc_estimate(
    quantizer: &Quantizer,
    input: Complex64,
    coherent: bool,
    trials: u64,
    seed: u64,
    params: &ChannelParams,
) -> Result<McEstimate> {
    check_trials(trials)?;
    if !(input.re.is_finite() && input.im.is_finite()) {
        return Err(Error::domain("channel input must be finite"));
    }
    let s2 = params.noise_var();
    // Resolve the decision rule once; the likelihood test stays a likelihood
    // test so it checks the radial reduction rather than assuming it.
    enum Rule {
        Radial(f64),
        Likelihood { lambda: f64, probe: f64 },
        Components(f64, f64),
    }
    let rule = match *quantizer {
        Quantizer::Radial { threshold } => Rule::Radial(threshold * threshold),
        Quantizer::LikelihoodRegion { lambda, probe_energy } => {
            np_threshold(probe_energy, lambda, params)?;
            Rule::Likelihood {
                lambda,
                probe: probe_energy,
            }
        }
        Quantizer::PerComponent { t_re, t_im } => Rule::Components(t_re, t_im),
        Quantizer::SymmetricPerComponent => Rule::Components(0.0, 0.0),
    };
    let counts = run_chunks(trials, seed, Counts::default(), |rng, n, acc| {
        for _ in 0..n {
            let mean = if coherent {
                input
            } else {
                complex_gaussian(rng, params.fading_var()) * input
            };
            let y = mean + complex_gaussian(rng, s2);
            match rule {
                Rule::Radial(t2) => acc.0[0] += u64::from(y.norm_sqr() >= t2),
                Rule::Likelihood { lambda, probe } => {
                    let lr = likelihood_ratio(y.norm_sqr(), probe, params).expect("validated probe");
                    acc.0[0] += u64::from(lr <= lambda);
                }
                Rule::Components(tr, ti) => {
                    acc.0[0] += u64::from(y.re >= tr);
                    acc.0[1] += u64::from(y.im >= ti);
                }
            }
        }
    });
    let n = trials as f64;
    let bits = counts.0[..quantizer.bits()]
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            BitEstimate {
                estimate: Probability::from_value(p).expect("frequency in [0, 1]"),
                std_error: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect();
    Ok(McEstimate { trials, seed, bits })
}

#[derive(Clone, Copy, Default)]
struct Moments(f64, f64);

impl std::ops::Add for Moments {
    type Output = Moments;
    fn add(self, o: Moments) -> Moments {
        Moments(self.0 + o.0, self.1 + o.1)
    }
}

/// Sample mean and standard error of `f(H)` for `H ~ CN(0, 1)`.
pub fn mc_fading_average<F>(f: F, trials: u64, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    check_trials(trials)?;
    let failed = std::sync::Mutex::new(None);
    let m = run_chunks(trials, seed, Moments::default(), |rng, n, acc| {
        for _ in 0..n {
            match f(complex_gaussian(rng, 1.0)) {
                Ok(v) => {
                    acc.0 += v;
                    acc.1 += v * v;
                }
                Err(e) => {
                    failed.lock().expect("poisoned").get_or_insert(e);
                    return;
                }
            }
        }
    });
    if let Some(e) = failed.into_inner().expect("poisoned") {
        return Err(e);
    }
    let n = trials as f64;
    let mean = m.0 / n;
    let var = (m.1 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

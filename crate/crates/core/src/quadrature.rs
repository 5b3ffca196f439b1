//! Quadrature for expectations over gamma-distributed fading variables.
//!
//! Under Rayleigh fading `|H|^2` is a unit-mean exponential, so
//! `E[f(|H|^2)] = int_0^inf f(g) e^{-g} dg`. A single real Gaussian
//! component `U` enters through `U^2 / 2`, a Gamma(1/2) variable with density
//! `g^{-1/2} e^{-g} / sqrt(pi)`. Weights here are normalized to probability
//! measures.
//!
//! The divergence integrands are analytic on `[0, inf)` but have complex
//! singularities at a distance of order `sigma^2/|xi|^2` from the origin,
//! which a plain Gauss–Laguerre rule resolves only slowly. [`FadingRule`]
//! therefore covers `[0, 8]` with Gauss–Legendre panels that halve in width
//! towards zero and leaves only the tail `[8, inf)` to a shifted Laguerre
//! rule.

use serde::Serialize;

use crate::{Error, Result};

/// Quadrature settings for fading averages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Node count of the base rule; the convergence check doubles it.
    pub nodes: usize,
    /// Also cross-check fading averages against Monte Carlo draws.
    pub validate: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 64,
            validate: false,
        }
    }
}

impl QuadratureSpec {
    pub const MIN_NODES: usize = 16;
    /// Largest change allowed when the node count is doubled.
    pub const DOUBLING_TOL: f64 = 1e-6;

    pub fn validated(self) -> Result<Self> {
        if self.nodes < Self::MIN_NODES {
            return Err(Error::usage(format!(
                "quadrature needs at least {} nodes, got {}",
                Self::MIN_NODES,
                self.nodes
            )));
        }
        Ok(self)
    }
}

/// Nodes and probability weights for `g^alpha e^{-g} / Gamma(alpha + 1)` on `[0, inf)`.
#[derive(Clone, Debug)]
pub struct GaussLaguerre {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLaguerre {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 || alpha <= -1.0 {
            return Err(Error::domain(format!("bad Laguerre rule: n={n}, alpha={alpha}")));
        }
        let nf = n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut z = 0.0f64;
        for i in 0..n {
            // Initial guesses (Numerical Recipes, gaulag); Newton does the rest.
            z = match i {
                0 => (1.0 + alpha) * (3.0 + 0.92 * alpha) / (1.0 + 2.4 * nf + 1.8 * alpha),
                1 => z + (15.0 + 6.25 * alpha) / (1.0 + 0.9 * alpha + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + ((1.0 + 2.55 * ai) / (1.9 * ai) + 1.26 * ai * alpha / (1.0 + 3.5 * ai))
                        * (z - nodes[i - 2])
                        / (1.0 + 0.3 * alpha)
                }
            };
            let mut step = f64::INFINITY;
            for _ in 0..100 {
                let (pn, pn1) = laguerre_pair(n, alpha, z);
                let deriv = (nf * pn - (nf + alpha) * pn1) / z;
                step = pn / deriv;
                z -= step;
                if step.abs() <= 4.0 * f64::EPSILON * z.abs() {
                    break;
                }
            }
            // Near the root the step can dither at the rounding level.
            if !(step.abs() <= 1e-11 * z.abs()) {
                return Err(Error::numerical(format!(
                    "Laguerre node {i} of {n} did not converge"
                )));
            }
            nodes.push(z);
            weights.push(christoffel_weight(n, alpha, z));
        }
        Ok(Self {
            alpha,
            nodes,
            weights,
        })
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("Legendre rule needs at least one node"));
        }
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut deriv = 1.0;
            for _ in 0..100 {
                let (pn, pn1) = legendre_pair(n, z);
                deriv = nf * (z * pn - pn1) / (z * z - 1.0);
                let step = pn / deriv;
                z -= step;
                if step.abs() <= 4.0 * f64::EPSILON {
                    break;
                }
            }
            let (pn, pn1) = legendre_pair(n, z);
            deriv = if z.abs() < 1.0 { nf * (z * pn - pn1) / (z * z - 1.0) } else { deriv };
            let w = 2.0 / ((1.0 - z * z) * deriv * deriv);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (1.0, 0.0);
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * jf - 1.0) * x * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

/// Composite probability rule for Exp(1) (`alpha = 0`) or Gamma(1/2)
/// (`alpha = -1/2`).
///
/// The head `[0, 8]` (in `u = sqrt(g)` for Gamma(1/2), which removes the
/// `g^{-1/2}` factor) is split into panels `[c 2^{-k-1}, c 2^{-k}]` for
/// `k < 30` plus `[0, c 2^{-30}]`, each with `max(n/4, 8)` Legendre points;
/// the tail `[8, inf)` uses the `n`-point Laguerre rule shifted to 8.
#[derive(Clone, Debug)]
pub struct FadingRule {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FadingRule {
    /// Split point between the panels and the Laguerre tail.
    pub const SPLIT: f64 = 8.0;
    const PANELS: i32 = 30;

    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let half = alpha == -0.5;
        if !(alpha == 0.0 || half) {
            return Err(Error::domain(format!("fading rules exist for alpha = 0 or -1/2, got {alpha}")));
        }
        let legendre = GaussLegendre::new((n / 4).max(8))?;
        let tail = GaussLaguerre::new(n, 0.0)?;
        let (mut nodes, mut weights) = (Vec::new(), Vec::new());

        // Head, in the variable s = g (Exp) or s = sqrt(g) (Gamma(1/2)).
        let top = if half { Self::SPLIT.sqrt() } else { Self::SPLIT };
        let mut edges = vec![0.0];
        edges.extend((0..=Self::PANELS).rev().map(|k| top * 2f64.powi(-k)));
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let (mid, rad) = (0.5 * (hi + lo), 0.5 * (hi - lo));
            for (&x, &w) in legendre.nodes.iter().zip(&legendre.weights) {
                let s = mid + rad * x;
                if half {
                    // 2 e^{-u^2} du / sqrt(pi) at g = u^2.
                    nodes.push(s * s);
                    weights.push(rad * w * 2.0 * (-s * s).exp() / std::f64::consts::PI.sqrt());
                } else {
                    nodes.push(s);
                    weights.push(rad * w * (-s).exp());
                }
            }
        }
        // Tail: int_c^inf f(g) p(g) dg = e^{-c} E[f(c + G) rho(c + G)] with
        // G ~ Exp(1), rho = 1 for Exp(1) and rho(g) = (pi g)^{-1/2} for Gamma(1/2).
        let c = Self::SPLIT;
        for (&t, &w) in tail.nodes.iter().zip(&tail.weights) {
            let g = c + t;
            let density = if half { (std::f64::consts::PI * g).sqrt().recip() } else { 1.0 };
            nodes.push(g);
            weights.push(w * (-c).exp() * density);
        }
        Ok(Self { alpha, nodes, weights })
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `(L_n^alpha(x), L_{n-1}^alpha(x))` by the three-term recurrence.
fn laguerre_pair(n: usize, alpha: f64, x: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (1.0, 0.0);
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * jf - 1.0 + alpha - x) * p2 - (jf - 1.0 + alpha) * p3) / jf;
    }
    (p1, p2)
}

/// `1 / sum_k phat_k(x)^2` over the orthonormal Laguerre polynomials
/// `phat_0..phat_{n-1}`; a sum of squares, so no cancellation.
fn christoffel_weight(n: usize, alpha: f64, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut sum = 1.0;
    for k in 0..n - 1 {
        let kf = k as f64;
        let diag = 2.0 * kf + alpha + 1.0;
        let off_next = ((kf + 1.0) * (kf + 1.0 + alpha)).sqrt();
        let off_prev = (kf * (kf + alpha)).sqrt();
        let next = ((x - diag) * cur - off_prev * prev) / off_next;
        prev = cur;
        cur = next;
        sum += cur * cur;
    }
    1.0 / sum
}

/// `E[f(G)]` for `G ~ Gamma(alpha + 1)`, `alpha` in `{0, -1/2}`, evaluated
/// with the [`FadingRule`]s of `n` and `2n` nodes.
///
/// Nodes whose weight times `envelope(g)` falls below `1e-25` of the
/// envelope's own average are skipped; `envelope` must dominate `|f|`.
/// Fails when doubling the node count moves the result by more than
/// [`QuadratureSpec::DOUBLING_TOL`] relative, plus a rounding floor of
/// `1e-12` times the envelope's average (integrands far below their envelope
/// carry cancellation noise of that size).
pub fn converged_expectation<F, E>(n: usize, alpha: f64, f: F, envelope: E) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    E: Fn(f64) -> f64,
{
    let (coarse, _) = pruned_expectation(&*rule(n, alpha)?, &f, &envelope)?;
    let (fine, mean_envelope) = pruned_expectation(&*rule(2 * n, alpha)?, &f, &envelope)?;
    let scale = fine.abs().max(coarse.abs());
    if (fine - coarse).abs() > QuadratureSpec::DOUBLING_TOL * scale + 1e-12 * mean_envelope {
        return Err(Error::numerical(format!(
            "fading average did not converge: {coarse} with {n} nodes, {fine} with {} nodes",
            2 * n
        )));
    }
    Ok(fine)
}

/// Returns the pruned sum and the envelope's average.
fn pruned_expectation<F, E>(rule: &FadingRule, f: &F, envelope: &E) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
    E: Fn(f64) -> f64,
{
    let mean_envelope = rule.integrate(envelope);
    let cutoff = 1e-25 * mean_envelope;
    let mut acc = 0.0;
    for (&g, &w) in rule.nodes.iter().zip(&rule.weights) {
        if w * envelope(g) < cutoff {
            continue;
        }
        acc += w * f(g)?;
    }
    Ok((acc, mean_envelope))
}

fn rule(n: usize, alpha: f64) -> Result<std::sync::Arc<FadingRule>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<FadingRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (n, alpha.to_bits());
    if let Some(hit) = cache.lock().expect("rule cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let built = Arc::new(FadingRule::new(n, alpha)?);
    cache
        .lock()
        .expect("rule cache poisoned")
        .insert(key, built.clone());
    Ok(built)
}

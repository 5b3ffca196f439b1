//! Numerical check that radial regions are optimal among one-bit quantizers
//! of the noncoherent output.
//!
//! The output plane is cut into polar cells. Both output laws are circularly
//! symmetric, so each cell's probability is exact. A candidate region is
//! built by ranking cells with a family-specific score and adding them in
//! order until the region's on-probability equals that of the best radial
//! quantizer; the last cell is cut by angle, which takes the same fraction of
//! both laws. Every candidate is therefore a genuine region with matched
//! on-probability, and its divergence is compared with the radial one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_sigma, div_noncoherent_radial};
use crate::optimize::{log_grid, maximize_1d};
use crate::specfun::{binary_kl, Probability};
use crate::{Error, Result};

pub const NP_RADIAL_CELLS: usize = 256;
pub const NP_ANGULAR_CELLS: usize = 64;
/// Smallest accepted number of random regions.
pub const MIN_REGION_SAMPLES: usize = 50;

const FAMILIES: [&str; 5] = ["half-plane", "sector", "random-union", "noisy-radial", "annulus"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NpFamilyStats {
    pub family: String,
    pub count: usize,
    pub worst_margin: f64,
    pub largest_divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NpReport {
    pub probe_energy: f64,
    pub sigma_sq: f64,
    pub seed: u64,
    /// Best radial threshold as `tau = T^2`.
    pub radial_threshold_sq: f64,
    /// On-probability every candidate region is matched to.
    pub on_probability: f64,
    pub radial_divergence: f64,
    pub regions: usize,
    /// Smallest `radial_divergence - candidate divergence` over the random regions.
    pub worst_margin: f64,
    pub worst_family: String,
    /// Margin of the region built from whole outer rings (the discretized
    /// radial region itself).
    pub self_margin: f64,
    /// Divergence of the half-plane `Re y >= 0`.
    pub half_plane_divergence: f64,
    /// Largest probability mass missing from the grid under either law.
    pub mass_deficit: f64,
    pub families: Vec<NpFamilyStats>,
}

struct PolarGrid {
    on: Vec<f64>,
    off: Vec<f64>,
    radius: Vec<f64>,
    angle: Vec<f64>,
    outer: f64,
}

impl PolarGrid {
    fn new(probe_energy: f64, sigma_sq: f64) -> Self {
        let v_on = probe_energy + sigma_sq;
        let outer = 8.0 * v_on.sqrt();
        let edges: Vec<f64> = (0..=NP_RADIAL_CELLS)
            .map(|i| outer * i as f64 / NP_RADIAL_CELLS as f64)
            .collect();
        // Ring mass exp(-a/v) - exp(-b/v), written to avoid cancellation.
        let ring = |i: usize, v: f64| {
            let (a, b) = (edges[i] * edges[i], edges[i + 1] * edges[i + 1]);
            (-a / v).exp() * -(-(b - a) / v).exp_m1() / NP_ANGULAR_CELLS as f64
        };
        let n = NP_RADIAL_CELLS * NP_ANGULAR_CELLS;
        let mut grid = PolarGrid {
            on: Vec::with_capacity(n),
            off: Vec::with_capacity(n),
            radius: Vec::with_capacity(n),
            angle: Vec::with_capacity(n),
            outer,
        };
        for i in 0..NP_RADIAL_CELLS {
            let (p_on, p_off) = (ring(i, v_on), ring(i, sigma_sq));
            for j in 0..NP_ANGULAR_CELLS {
                grid.on.push(p_on);
                grid.off.push(p_off);
                grid.radius.push(0.5 * (edges[i] + edges[i + 1]));
                grid.angle.push((j as f64 + 0.5) * std::f64::consts::TAU / NP_ANGULAR_CELLS as f64);
            }
        }
        grid
    }

    fn mass_deficit(&self) -> f64 {
        let on: f64 = self.on.iter().sum();
        let off: f64 = self.off.iter().sum();
        (1.0 - on).abs().max((1.0 - off).abs())
    }

    /// Off-probability of the region that takes cells in decreasing score
    /// until the on-probability reaches `beta`.
    fn matched_off_probability(&self, score: &[f64], beta: f64) -> f64 {
        let mut order: Vec<usize> = (0..score.len()).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let (mut acc_on, mut acc_off) = (0.0, 0.0);
        for c in order {
            if acc_on + self.on[c] >= beta {
                if self.on[c] > 0.0 {
                    acc_off += (beta - acc_on) / self.on[c] * self.off[c];
                }
                return acc_off;
            }
            acc_on += self.on[c];
            acc_off += self.off[c];
        }
        acc_off
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn random_score(grid: &PolarGrid, family: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = grid.on.len();
    let tau = std::f64::consts::TAU;
    match family {
        0 => {
            let theta = rng.random::<f64>() * tau;
            (0..n).map(|c| grid.radius[c] * (grid.angle[c] - theta).cos()).collect()
        }
        1 => {
            let centre = rng.random::<f64>() * tau;
            let half_width = std::f64::consts::PI * (0.0625 + 0.9375 * rng.random::<f64>());
            (0..n)
                .map(|c| {
                    let d = angular_distance(grid.angle[c], centre);
                    let r = grid.radius[c] / grid.outer;
                    if d <= half_width {
                        2.0 + r
                    } else {
                        -d
                    }
                })
                .collect()
        }
        2 => (0..n).map(|_| rng.random::<f64>()).collect(),
        3 => {
            let noise = 0.01 + 0.29 * rng.random::<f64>();
            (0..n)
                .map(|c| grid.radius[c] / grid.outer + noise * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        _ => {
            let centre = 0.5 * grid.outer * rng.random::<f64>();
            (0..n).map(|c| -(grid.radius[c] - centre).abs()).collect()
        }
    }
}

/// Compares the best radial quantizer at probe energy `|xi|^2` with
/// `region_samples` seeded non-radial regions of matched on-probability.
pub fn np_radial_dominance_check(probe_energy: f64, sigma_sq: f64, region_samples: usize, seed: u64) -> Result<NpReport> {
    check_sigma(sigma_sq)?;
    if !(probe_energy.is_finite() && probe_energy > 0.0) {
        return Err(Error::domain("probe energy must be positive"));
    }
    if region_samples < MIN_REGION_SAMPLES {
        return Err(Error::usage(format!(
            "need at least {MIN_REGION_SAMPLES} regions, got {region_samples}"
        )));
    }

    // Best radial threshold at this probe energy.
    let v_on = probe_energy + sigma_sq;
    let taus = log_grid(1e-3 * sigma_sq, 64.0 * v_on, 64);
    let best = maximize_1d(|tau| div_noncoherent_radial(probe_energy, tau, sigma_sq), &taus, 1e-10)?;
    let tau = best.x;
    let beta_p = Probability::from_log(-tau / v_on)?;
    let beta = beta_p.value();
    let radial = best.value;

    let grid = PolarGrid::new(probe_energy, sigma_sq);
    let mass_deficit = grid.mass_deficit();
    if mass_deficit > 1e-6 {
        return Err(Error::numerical(format!("polar grid misses {mass_deficit} of the probability mass")));
    }
    let divergence = |p_off: f64| -> Result<f64> { Ok(binary_kl(beta_p, Probability::from_value(p_off.min(1.0))?)) };

    let outer_first: Vec<f64> = grid.radius.clone();
    let self_margin = radial - divergence(grid.matched_off_probability(&outer_first, beta))?;
    let half_plane: f64 = (0..grid.on.len())
        .filter(|&c| grid.angle[c].cos() >= 0.0)
        .map(|c| grid.off[c])
        .sum::<f64>();
    let half_plane_on: f64 = (0..grid.on.len())
        .filter(|&c| grid.angle[c].cos() >= 0.0)
        .map(|c| grid.on[c])
        .sum::<f64>();
    let half_plane_divergence = binary_kl(
        Probability::from_value(half_plane_on.min(1.0))?,
        Probability::from_value(half_plane.min(1.0))?,
    );

    let margins: Vec<(usize, f64, f64)> = (0..region_samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let family = k as usize % FAMILIES.len();
            let score = random_score(&grid, family, &mut rng);
            let d = divergence(grid.matched_off_probability(&score, beta))?;
            Ok((family, radial - d, d))
        })
        .collect::<Result<_>>()?;

    let mut families: Vec<NpFamilyStats> = FAMILIES
        .iter()
        .map(|f| NpFamilyStats {
            family: (*f).to_string(),
            count: 0,
            worst_margin: f64::INFINITY,
            largest_divergence: 0.0,
        })
        .collect();
    let (mut worst_margin, mut worst_family) = (f64::INFINITY, 0);
    for &(family, margin, d) in &margins {
        let s = &mut families[family];
        s.count += 1;
        s.worst_margin = s.worst_margin.min(margin);
        s.largest_divergence = s.largest_divergence.max(d);
        if margin < worst_margin {
            worst_margin = margin;
            worst_family = family;
        }
    }
    Ok(NpReport {
        probe_energy,
        sigma_sq,
        seed,
        radial_threshold_sq: tau,
        on_probability: beta,
        radial_divergence: radial,
        regions: region_samples,
        worst_margin,
        worst_family: FAMILIES[worst_family].to_string(),
        self_margin,
        half_plane_divergence,
        mass_deficit,
        families,
    })
}

//! Derivative-free maximization: a coarse logarithmic grid followed by
//! coordinate-wise golden-section refinement in log coordinates.

use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Grid and refinement settings for the probe-energy / threshold searches.
///
/// Both axes are logarithmic. `threshold` means `tau = T^2` for radial
/// quantizers, `T` for per-component ones, and the on-level squared for the
/// capacity search; each caller documents its own use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub xi2_min: f64,
    pub xi2_max: f64,
    pub xi2_points: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_points: usize,
    /// Relative tolerance of the golden-section stage.
    pub rel_tol: f64,
    /// Maximum number of coordinate sweeps in the refinement stage.
    pub max_iter: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            xi2_min: 1e-2,
            xi2_max: 1e3,
            xi2_points: 41,
            tau_min: 1e-2,
            tau_max: 1e4,
            tau_points: 49,
            rel_tol: 1e-6,
            max_iter: 40,
        }
    }
}

impl SweepSpec {
    pub const MIN_POINTS: usize = 8;

    pub fn validated(self) -> Result<Self> {
        let axes = [
            ("xi2", self.xi2_min, self.xi2_max, self.xi2_points),
            ("tau", self.tau_min, self.tau_max, self.tau_points),
        ];
        for (name, lo, hi, n) in axes {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::usage(format!(
                    "{name} grid bounds must satisfy 0 < min < max, got [{lo}, {hi}]"
                )));
            }
            if n < Self::MIN_POINTS {
                return Err(Error::usage(format!(
                    "{name} grid needs at least {} points, got {n}",
                    Self::MIN_POINTS
                )));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) || self.max_iter == 0 {
            return Err(Error::usage("refinement tolerance must be in (0, 1) with max_iter > 0"));
        }
        Ok(self)
    }

    /// The same sweep with both axes multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            xi2_min: self.xi2_min * factor,
            xi2_max: self.xi2_max * factor,
            tau_min: self.tau_min * factor,
            tau_max: self.tau_max * factor,
            ..self
        }
    }

    pub fn xi2_grid(&self) -> Vec<f64> {
        log_grid(self.xi2_min, self.xi2_max, self.xi2_points)
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        log_grid(self.tau_min, self.tau_max, self.tau_points)
    }
}

/// `n` points evenly spaced in `ln` between `lo` and `hi`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`. Returns the best point seen.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Outcome of a one-coordinate maximization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Max1d {
    pub x: f64,
    pub value: f64,
    /// The grid maximum sat on the largest `x`; `x` was then held there.
    pub at_upper_edge: bool,
    pub at_lower_edge: bool,
    pub evaluations: usize,
}

/// Grid stage plus golden-section refinement on `ln x`, as in [`maximize_2d`].
pub fn maximize_1d<F>(f: F, xs: &[f64], rel_tol: f64) -> Result<Max1d>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let mut best = 0;
    for k in 1..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    let at_upper_edge = best == xs.len() - 1;
    let mut out = Max1d {
        x: xs[best],
        value: values[best],
        at_upper_edge,
        at_lower_edge: best == 0,
        evaluations: values.len(),
    };
    if at_upper_edge || xs.len() < 2 {
        return Ok(out);
    }
    let step = (xs[xs.len() - 1] / xs[0]).ln() / (xs.len() - 1) as f64;
    let bounds = (xs[0].ln(), xs[xs.len() - 1].ln());
    let (lx, value) = refine_axis(
        |t| f(t.exp()),
        xs[best].ln(),
        values[best],
        step,
        bounds,
        rel_tol,
        &mut out.evaluations,
    )?;
    out.x = lx.exp();
    out.value = value;
    Ok(out)
}

/// Outcome of a two-coordinate maximization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Max2d {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    /// The grid maximum sat on the largest `x`; `x` was then held there.
    pub x_at_upper_edge: bool,
    pub y_at_edge: bool,
    pub evaluations: usize,
}

/// Maximizes `f(x, y)` over the product grid, then refines each coordinate
/// in turn by golden section on `ln x` / `ln y` within one grid step of the
/// incumbent. Grid evaluation runs in parallel; ties go to the smaller
/// `(x, y)` so the result does not depend on scheduling.
pub fn maximize_2d<F>(f: F, xs: &[f64], ys: &[f64], rel_tol: f64, max_iter: usize) -> Result<Max2d>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let cells: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|i| (0..ys.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| f(xs[i], ys[j]))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for k in 1..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    let (bi, bj) = cells[best];
    let x_at_upper_edge = bi == xs.len() - 1;
    let y_at_edge = bj == 0 || bj == ys.len() - 1;
    let mut evaluations = values.len();

    let step = |grid: &[f64]| (grid[grid.len() - 1] / grid[0]).ln() / (grid.len() - 1) as f64;
    let (x_step, y_step) = (step(xs), step(ys));
    let (x_bounds, y_bounds) = ((xs[0].ln(), xs[xs.len() - 1].ln()), (ys[0].ln(), ys[ys.len() - 1].ln()));

    let (mut lx, mut ly, mut value) = (xs[bi].ln(), ys[bj].ln(), values[best]);
    let tol = rel_tol;
    for _ in 0..max_iter {
        let before = (lx, ly, value);
        let x_now = if x_at_upper_edge { xs[bi] } else { lx.exp() };
        let (ny, vy) = refine_axis(
            |t| f(x_now, t.exp()),
            ly,
            value,
            y_step,
            y_bounds,
            tol,
            &mut evaluations,
        )?;
        ly = ny;
        value = vy;
        if !x_at_upper_edge {
            let (nx, vx) = refine_axis(
                |t| f(t.exp(), ly.exp()),
                lx,
                value,
                x_step,
                x_bounds,
                tol,
                &mut evaluations,
            )?;
            lx = nx;
            value = vx;
        }
        let moved = (lx - before.0).abs().max((ly - before.1).abs());
        let gained = (value - before.2).abs() / value.abs().max(f64::MIN_POSITIVE);
        if moved <= tol && gained <= tol {
            break;
        }
    }
    Ok(Max2d {
        x: if x_at_upper_edge { xs[bi] } else { lx.exp() },
        y: ly.exp(),
        value,
        x_at_upper_edge,
        y_at_edge,
        evaluations,
    })
}

/// One golden-section pass in log coordinates, never returning a point
/// worse than the incumbent.
fn refine_axis<F>(
    mut f: F,
    at: f64,
    incumbent: f64,
    step: f64,
    bounds: (f64, f64),
    tol: f64,
    evaluations: &mut usize,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo = (at - step).max(bounds.0);
    let hi = (at + step).min(bounds.1);
    let (t, v) = golden_max(
        |t| {
            *evaluations += 1;
            f(t)
        },
        lo,
        hi,
        tol,
        200,
    )?;
    Ok(if v > incumbent { (t, v) } else { (at, incumbent) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = log_grid(1e-2, 1e3, 41);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[40], 1e3);
        assert!((g[20] - 10f64.powf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_interior_maximum() {
        let (x, v) = golden_max(|x| Ok(-(x - 1.3) * (x - 1.3) + 2.0), 0.0, 4.0, 1e-10, 200).unwrap();
        assert!((x - 1.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn maximize_2d_smooth_bump() {
        let f = |x: f64, y: f64| {
            let (u, v) = (x.ln() - 0.7, y.ln() + 1.1);
            Ok(3.0 - u * u - 2.0 * v * v - 0.5 * u * v)
        };
        let xs = log_grid(1e-2, 1e2, 17);
        let ys = log_grid(1e-3, 1e1, 17);
        let m = maximize_2d(f, &xs, &ys, 1e-9, 60).unwrap();
        // Stationary point of the quadratic: solve 2u + 0.5v = 0, 4v + 0.5u = 0.
        assert!((m.x.ln() - 0.7).abs() < 1e-6, "{m:?}");
        assert!((m.y.ln() + 1.1).abs() < 1e-6, "{m:?}");
        assert!(!m.x_at_upper_edge && !m.y_at_edge);
    }

    #[test]
    fn maximize_2d_pins_increasing_axis() {
        let f = |x: f64, y: f64| Ok(1.0 - 1.0 / x - (y.ln() - 1.0).powi(2));
        let xs = log_grid(1.0, 1e3, 10);
        let ys = log_grid(1e-1, 1e2, 10);
        let m = maximize_2d(f, &xs, &ys, 1e-9, 60).unwrap();
        assert!(m.x_at_upper_edge);
        assert_eq!(m.x, 1e3);
        assert!((m.y.ln() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maximize_1d_interior_and_edge() {
        let xs = log_grid(1e-2, 1e2, 17);
        let m = maximize_1d(|x| Ok(-(x.ln() - 0.3).powi(2)), &xs, 1e-10).unwrap();
        assert!((m.x.ln() - 0.3).abs() < 1e-6 && !m.at_upper_edge && !m.at_lower_edge);
        let m = maximize_1d(|x| Ok(-1.0 / x), &xs, 1e-10).unwrap();
        assert!(m.at_upper_edge);
        assert_eq!(m.x, 1e2);
    }

    #[test]
    fn sweep_validation() {
        assert!(SweepSpec::default().validated().is_ok());
        let bad = SweepSpec { xi2_points: 4, ..Default::default() };
        assert!(bad.validated().is_err());
        let bad = SweepSpec { tau_min: 5.0, tau_max: 1.0, ..Default::default() };
        assert!(bad.validated().is_err());
        let bad = SweepSpec { xi2_min: 0.0, ..Default::default() };
        assert!(bad.validated().is_err());
    }
}

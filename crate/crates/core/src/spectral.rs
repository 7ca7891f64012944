//! The two-agent toy equation `u'(t) = -u(t - tau) - u(t - sigma)`.
//!
//! Its characteristic equation `lambda + e^{-lambda tau} + e^{-lambda sigma} = 0`
//! has a root `lambda = i omega` exactly when `2 sin(omega sigma) = omega` and
//! `(tau + sigma) omega = (2m + 1) pi`, which forces `omega <= 2` and both
//! delays above `1/2`. Hence `min(sigma, tau) <= 1/2` is a stability
//! criterion, and the curves traced here bound it.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::dde::{self, FnRhs, InitialHistory, StateLookup, Trajectory};
use crate::error::{config, domain, Result};
use crate::exec::Exec;

/// Residual tolerance every emitted [`HopfPoint`] satisfies.
pub const HOPF_TOL: f64 = 1e-9;

/// `|lambda + e^{-lambda tau} + e^{-lambda sigma}|`.
pub fn char_residual(re: f64, im: f64, tau: f64, sigma: f64) -> f64 {
    let l = Complex64::new(re, im);
    (l + (-l * tau).exp() + (-l * sigma).exp()).norm()
}

/// Point `(tau, sigma)` where `i omega` is a characteristic root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfPoint {
    pub tau: f64,
    pub sigma: f64,
    pub omega: f64,
    pub m: u32,
}

impl HopfPoint {
    /// Residuals of `(tau + sigma) omega = (2m+1) pi`, `2 sin(omega delay) = omega`
    /// (worse of the two delays), `cos(omega tau) + cos(omega sigma) = 0` and
    /// `sin(omega tau) + sin(omega sigma) = omega`.
    pub fn residuals(&self) -> [f64; 4] {
        let (w, t, s) = (self.omega, self.tau, self.sigma);
        [
            ((t + s) * w - (2 * self.m + 1) as f64 * PI).abs(),
            (2.0 * (w * s).sin() - w).abs().max((2.0 * (w * t).sin() - w).abs()),
            ((w * t).cos() + (w * s).cos()).abs(),
            ((w * t).sin() + (w * s).sin() - w).abs(),
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.residuals().iter().all(|r| *r <= HOPF_TOL) && self.sigma > 0.5 && self.tau > 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfOptions {
    /// Largest branch shift `k` in `sigma = (asin(omega/2) + 2 pi k) / omega`.
    pub max_k: u32,
    /// Keep only `sigma <= tau`.
    pub order_filter: bool,
}

impl Default for HopfOptions {
    fn default() -> Self {
        Self { max_k: 2, order_filter: true }
    }
}

/// `n` uniform frequencies in `(0, 2]`, ending exactly at 2.
pub fn default_omega_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| if k == n { 2.0 } else { 2.0 * k as f64 / n as f64 }).collect()
}

/// Each branch `(k, side)` as an `omega`-ordered polyline.
pub fn hopf_branches(m: u32, omega_grid: &[f64], opts: &HopfOptions) -> Vec<Vec<HopfPoint>> {
    let mut branches = Vec::new();
    for k in 0..=opts.max_k {
        for side in 0..2 {
            let mut line = Vec::new();
            for &w in omega_grid {
                if !(w > 0.0 && w <= 2.0) {
                    continue;
                }
                // at omega = 2 both sides give the same point
                if side == 1 && w == 2.0 {
                    continue;
                }
                let a = (w / 2.0).asin();
                let base = if side == 0 { a } else { PI - a };
                let sigma = (base + 2.0 * PI * k as f64) / w;
                let tau = (2 * m + 1) as f64 * PI / w - sigma;
                let p = HopfPoint { tau, sigma, omega: w, m };
                if tau > 0.0 && (!opts.order_filter || sigma <= tau) && p.is_valid() {
                    line.push(p);
                }
            }
            line.sort_by(|a, b| a.omega.total_cmp(&b.omega));
            if !line.is_empty() {
                branches.push(line);
            }
        }
    }
    branches
}

/// All points of the `m`-th family, sorted by `omega`.
pub fn hopf_curve(m: u32, omega_grid: &[f64], opts: &HopfOptions) -> Vec<HopfPoint> {
    let mut pts: Vec<HopfPoint> = hopf_branches(m, omega_grid, opts).into_iter().flatten().collect();
    pts.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.sigma.total_cmp(&b.sigma)));
    pts
}

/// The sufficient criterion `min(sigma, tau) <= 1/2`.
pub fn guaranteed_stable(tau: f64, sigma: f64) -> bool {
    tau.min(sigma) <= 0.5
}

/// CSV rows `tau, sigma, omega, m`.
pub fn write_curve_csv<W: Write>(mut w: W, pts: &[HopfPoint]) -> Result<()> {
    writeln!(w, "tau, sigma, omega, m")?;
    for p in pts {
        writeln!(w, "{:.16e}, {:.16e}, {:.16e}, {}", p.tau, p.sigma, p.omega, p.m)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellClass {
    GuaranteedStable,
    HopfBoundary,
    Unknown,
}

impl CellClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellClass::GuaranteedStable => "guaranteed-stable",
            CellClass::HopfBoundary => "hopf-boundary",
            CellClass::Unknown => "unknown",
        }
    }
}

/// Cell classification of a rectangle in the `(tau, sigma)` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub tau_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub resolution: usize,
    /// Row-major: `cells[i * resolution + j]` is tau cell `i`, sigma cell `j`.
    pub cells: Vec<CellClass>,
}

impl StabilityGrid {
    fn width(&self) -> (f64, f64) {
        let r = self.resolution as f64;
        ((self.tau_range.1 - self.tau_range.0) / r, (self.sigma_range.1 - self.sigma_range.0) / r)
    }

    /// Center of cell `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let (wt, ws) = self.width();
        (self.tau_range.0 + (i as f64 + 0.5) * wt, self.sigma_range.0 + (j as f64 + 0.5) * ws)
    }

    /// Cell containing `(tau, sigma)`, if inside the grid.
    pub fn cell_of(&self, tau: f64, sigma: f64) -> Option<(usize, usize)> {
        let (wt, ws) = self.width();
        let fi = (tau - self.tau_range.0) / wt;
        let fj = (sigma - self.sigma_range.0) / ws;
        let n = self.resolution as f64;
        if !(fi >= 0.0 && fi <= n && fj >= 0.0 && fj <= n) {
            return None;
        }
        let clamp = |f: f64| (f.floor() as usize).min(self.resolution - 1);
        Some((clamp(fi), clamp(fj)))
    }

    pub fn class(&self, i: usize, j: usize) -> CellClass {
        self.cells[i * self.resolution + j]
    }

    /// CSV rows `tau, sigma, class` at cell centers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau, sigma, class")?;
        for i in 0..self.resolution {
            for j in 0..self.resolution {
                let (t, s) = self.center(i, j);
                writeln!(w, "{t:.16e}, {s:.16e}, {}", self.class(i, j).as_str())?;
            }
        }
        Ok(())
    }
}

/// Classifies a `resolution x resolution` grid. A cell is guaranteed stable
/// when every point in it satisfies the criterion, a Hopf boundary when one
/// of `branches` passes through it, and unknown otherwise.
pub fn stability_grid(
    tau_range: (f64, f64),
    sigma_range: (f64, f64),
    resolution: usize,
    branches: &[Vec<HopfPoint>],
    exec: Exec,
) -> Result<StabilityGrid> {
    if resolution == 0 {
        return Err(config("grid resolution must be positive"));
    }
    for (name, (lo, hi)) in [("tau", tau_range), ("sigma", sigma_range)] {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(config(format!("{name} range [{lo}, {hi}] must be a positive interval")));
        }
    }
    let mut grid = StabilityGrid { tau_range, sigma_range, resolution, cells: Vec::new() };
    let (wt, ws) = grid.width();
    let mut hit = vec![false; resolution * resolution];
    let step = 0.25 * wt.min(ws);
    for line in branches {
        for (p, q) in line.iter().zip(line.iter().skip(1)).chain(line.last().map(|p| (p, p))) {
            let len = ((q.tau - p.tau).powi(2) + (q.sigma - p.sigma).powi(2)).sqrt();
            let n = (len / step).ceil().max(1.0) as usize;
            for r in 0..=n {
                let th = r as f64 / n as f64;
                let (t, s) = (p.tau + th * (q.tau - p.tau), p.sigma + th * (q.sigma - p.sigma));
                if let Some((i, j)) = grid.cell_of(t, s) {
                    hit[i * resolution + j] = true;
                }
            }
        }
    }
    grid.cells = exec.map_range(resolution * resolution, |idx| {
        let (i, j) = (idx / resolution, idx % resolution);
        let tau_max = tau_range.0 + (i + 1) as f64 * wt;
        let sigma_max = sigma_range.0 + (j + 1) as f64 * ws;
        if tau_max <= 0.5 || sigma_max <= 0.5 {
            CellClass::GuaranteedStable
        } else if hit[idx] {
            CellClass::HopfBoundary
        } else {
            CellClass::Unknown
        }
    });
    Ok(grid)
}

/// Integrates the toy equation from the constant history `u = 1`
/// (or `history` when given) with step `h`.
pub fn simulate_toy(
    tau: f64,
    sigma: f64,
    h: f64,
    horizon: f64,
    history: Option<InitialHistory>,
) -> Result<Trajectory> {
    if !(tau >= 0.0 && sigma >= 0.0) {
        return Err(domain("toy delays must be >= 0"));
    }
    let span = tau.max(sigma);
    let history = match history {
        Some(h) => h,
        None => InitialHistory::constant(span, vec![1.0])?,
    };
    let rhs = FnRhs::new(1, move |_t, s: &StateLookup<'_>, out: &mut [f64]| {
        out[0] = -s.delayed(tau)[0] - s.delayed(sigma)[0];
    });
    dde::integrate(&[tau, sigma], history, &rhs, h, horizon)
}

/// `max |u|` over knots in `[a, b]`.
pub fn window_amplitude(traj: &Trajectory, a: f64, b: f64) -> f64 {
    traj.times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= a && t <= b)
        .map(|(k, _)| traj.knot_state(k)[0].abs())
        .fold(0.0, f64::max)
}

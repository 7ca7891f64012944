//! Observables of simulated runs: diameters, spreads, communication weights,
//! the Lyapunov–Krasovskii functionals and checks of the estimates they obey.
//!
//! Maxima over continuous time windows are taken on the knot grid refined by
//! dense output (default factor 4), so they are lower estimates of the true
//! suprema.

mod lemmas;
mod series;

use std::ops::Range;

pub use lemmas::{verify_lemma_inequalities, InequalityCheck, LemmaOptions, LemmaReport};
pub use series::{decay_rate_fit, envelope_check, EnvelopeCheck, ObservableSeries};

use crate::dde::InitialHistory;
use crate::error::{domain, Result};
use crate::models::{ModelKind, ModelSpec, Simulation};

/// Default refinement of the knot grid for window maxima.
pub const DEFAULT_REFINE: usize = 4;

/// Which half of a second-order state an observable reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Position,
    Velocity,
}

fn block_range(spec: &ModelSpec, block: Block) -> Result<Range<usize>> {
    let nd = spec.n_agents * spec.dim;
    match (block, spec.kind) {
        (Block::Position, _) => Ok(0..nd),
        (Block::Velocity, ModelKind::SecondOrder) => Ok(nd..2 * nd),
        (Block::Velocity, ModelKind::FirstOrder) => Err(domain("first-order models have no velocities")),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest pairwise Euclidean distance among `points` (flat, `dim` entries
/// per point).
pub fn diameter(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    let mut best: f64 = 0.0;
    for i in 0..n {
        let a = &points[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            best = best.max(dist(a, &points[j * dim..(j + 1) * dim]));
        }
    }
    best
}

/// Same as [`diameter`], applied to velocities.
pub fn velocity_diameter(velocities: &[f64], dim: usize) -> f64 {
    diameter(velocities, dim)
}

/// Largest distance between a point of `a` and a point of `b`.
pub fn cross_diameter(a: &[f64], b: &[f64], dim: usize) -> f64 {
    if dim == 1 {
        let (amin, amax) = min_max(a);
        let (bmin, bmax) = min_max(b);
        return (amax - bmin).max(bmax - amin).max(0.0);
    }
    let mut best: f64 = 0.0;
    for p in a.chunks_exact(dim) {
        for q in b.chunks_exact(dim) {
            best = best.max(dist(p, q));
        }
    }
    best
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// `[lo, hi]` split at every knot inside it, each piece cut into `refine`.
fn refined_times(knots: &[f64], lo: f64, hi: f64, refine: usize) -> Vec<f64> {
    let mut base = vec![lo];
    base.extend(knots.iter().copied().filter(|&t| t > lo && t < hi));
    if hi > lo {
        base.push(hi);
    }
    let refine = refine.max(1);
    let mut out = Vec::with_capacity(base.len() * refine);
    for w in base.windows(2) {
        for r in 0..refine {
            out.push(w[0] + (w[1] - w[0]) * r as f64 / refine as f64);
        }
    }
    out.push(*base.last().unwrap());
    out
}

fn all_knots(sim: &Simulation) -> Vec<f64> {
    let mut k: Vec<f64> = sim.traj.history().knot_times().iter().copied().filter(|&t| t < 0.0).collect();
    k.extend_from_slice(sim.traj.times());
    k
}

/// Agent vectors of `block` at each of `times`, flattened.
fn cloud(sim: &Simulation, block: Block, times: &[f64], derivative: bool) -> Result<Vec<f64>> {
    let range = block_range(&sim.spec, block)?;
    let mut state = vec![0.0; sim.spec.state_dim()];
    let mut out = Vec::with_capacity(times.len() * range.len());
    for &t in times {
        if derivative {
            sim.traj.sample_derivative_into(t, &mut state)?;
        } else {
            sim.traj.sample_into(t, &mut state)?;
        }
        out.extend_from_slice(&state[range.clone()]);
    }
    Ok(out)
}

fn max_norm(v: &[f64], dim: usize) -> f64 {
    v.chunks_exact(dim).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

/// Spread of the initial data: the largest distance between any agent's
/// history at any time in `[-tau, 0]` and any agent's history at any other
/// time, on the history knot grid refined `refine` times.
pub fn initial_spread(spec: &ModelSpec, history: &InitialHistory, block: Block, refine: usize) -> Result<f64> {
    let range = block_range(spec, block)?;
    let times = refined_times(history.knot_times(), -spec.tau, 0.0, refine);
    let mut pts = Vec::with_capacity(times.len() * range.len());
    for &t in &times {
        pts.extend_from_slice(&history.eval(t)?[range.clone()]);
    }
    Ok(diameter(&pts, spec.dim))
}

/// `Delta^K`: largest distance between an agent at any time in `[-tau, K sigma]`
/// and an agent at any time in `[(K-1) sigma, K sigma]`. `K = 0` gives the
/// initial spread.
pub fn windowed_spread(sim: &Simulation, block: Block, k: usize, refine: usize) -> Result<f64> {
    let spec = &sim.spec;
    if !(spec.sigma > 0.0) {
        return Err(domain("windowed spreads need sigma > 0"));
    }
    if k == 0 {
        return initial_spread(spec, sim.traj.history(), block, refine);
    }
    let end = k as f64 * spec.sigma;
    check_horizon(sim, end)?;
    let knots = all_knots(sim);
    let wide = cloud(sim, block, &refined_times(&knots, -spec.tau, end, refine), false)?;
    let narrow = cloud(sim, block, &refined_times(&knots, end - spec.sigma, end, refine), false)?;
    Ok(cross_diameter(&wide, &narrow, spec.dim))
}

/// `M^K`: largest agent speed (rate of change of `block`) over
/// `[(K-1) sigma, K sigma]`, for `K >= 1`.
pub fn window_speed(sim: &Simulation, block: Block, k: usize, refine: usize) -> Result<f64> {
    let spec = &sim.spec;
    if !(spec.sigma > 0.0) || k == 0 {
        return Err(domain("window speeds need sigma > 0 and K >= 1"));
    }
    let end = k as f64 * spec.sigma;
    check_horizon(sim, end)?;
    let times = refined_times(sim.traj.times(), end - spec.sigma, end, refine);
    let pts = cloud(sim, block, &times, true)?;
    Ok(max_norm(&pts, spec.dim))
}

fn check_horizon(sim: &Simulation, t: f64) -> Result<()> {
    let hz = sim.traj.horizon();
    if t > hz * (1.0 + 1e-12) {
        return Err(domain(format!("window end {t} lies beyond the horizon {hz}")));
    }
    Ok(())
}

/// Smallest communication weight at time `t`.
pub fn min_weight(sim: &Simulation, t: f64) -> Result<f64> {
    Ok(sim.comm_weights(t)?.min_off_diagonal())
}

/// Diameter of `block` at every forward knot.
pub fn diameter_series(sim: &Simulation, block: Block) -> Result<ObservableSeries> {
    let range = block_range(&sim.spec, block)?;
    let traj = &sim.traj;
    let values = (0..traj.knot_count()).map(|k| diameter(&traj.knot_state(k)[range.clone()], sim.spec.dim)).collect();
    let label = match block {
        Block::Position => "d_x",
        Block::Velocity => "d_v",
    };
    ObservableSeries::new(label, traj.times().to_vec(), values)
}

/// `max_i |d/dt block_i|` at every forward knot.
pub fn speed_series(sim: &Simulation, block: Block) -> Result<ObservableSeries> {
    let range = block_range(&sim.spec, block)?;
    let traj = &sim.traj;
    let values = (0..traj.knot_count()).map(|k| max_norm(&traj.knot_derivative(k)[range.clone()], sim.spec.dim)).collect();
    let label = match block {
        Block::Position => "max_speed",
        Block::Velocity => "max_accel",
    };
    ObservableSeries::new(label, traj.times().to_vec(), values)
}

/// Smallest communication weight at every forward knot.
pub fn min_weight_series(sim: &Simulation) -> Result<ObservableSeries> {
    let times = sim.traj.times().to_vec();
    let values = times.iter().map(|&t| min_weight(sim, t)).collect::<Result<Vec<_>>>()?;
    ObservableSeries::new("min_weight", times, values)
}

/// Piecewise-linear speed profile with its running integral.
struct SpeedProfile {
    times: Vec<f64>,
    speed: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SpeedProfile {
    fn new(series: &ObservableSeries) -> Self {
        let mut cumulative = Vec::with_capacity(series.len());
        cumulative.push(0.0);
        for k in 1..series.len() {
            let dt = series.times[k] - series.times[k - 1];
            cumulative.push(cumulative[k - 1] + 0.5 * dt * (series.values[k] + series.values[k - 1]));
        }
        Self { times: series.times.clone(), speed: series.values.clone(), cumulative }
    }

    /// Index `j` with `times[j] <= t < times[j + 1]` (clamped).
    fn segment(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).clamp(1, self.times.len().max(2) - 1) - 1
    }

    fn speed_at(&self, t: f64) -> f64 {
        if self.times.len() == 1 {
            return self.speed[0];
        }
        let j = self.segment(t);
        let th = ((t - self.times[j]) / (self.times[j + 1] - self.times[j])).clamp(0.0, 1.0);
        self.speed[j] + th * (self.speed[j + 1] - self.speed[j])
    }

    /// `int_0^t speed`.
    fn cumulative_at(&self, t: f64) -> f64 {
        if self.times.len() == 1 || t <= 0.0 {
            return 0.0;
        }
        let j = self.segment(t);
        if t == self.times[j] {
            return self.cumulative[j];
        }
        self.cumulative[j] + 0.5 * (t - self.times[j]) * (self.speed[j] + self.speed_at(t))
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        self.cumulative_at(b) - self.cumulative_at(a)
    }

    /// `int_{[t - 2 tau]^+}^t e^{-(t - s)} int_s^t speed dr ds`, trapezoid in `s`.
    fn memory_term(&self, t: f64, tau: f64) -> f64 {
        let lo = (t - 2.0 * tau).max(0.0);
        if !(t > lo) {
            return 0.0;
        }
        let mt = self.cumulative_at(t);
        let g = |s: f64, ms: f64| (-(t - s)).exp() * (mt - ms);
        let j0 = self.times.partition_point(|&s| s <= lo);
        let mut prev = (lo, g(lo, self.cumulative_at(lo)));
        let mut acc = 0.0;
        for j in j0..self.times.len() {
            let s = self.times[j];
            if s >= t {
                break;
            }
            let cur = (s, g(s, self.cumulative[j]));
            acc += 0.5 * (cur.0 - prev.0) * (cur.1 + prev.1);
            prev = cur;
        }
        acc + 0.5 * (t - prev.0) * prev.1
    }
}

/// Lyapunov–Krasovskii functional of one block: `F` on positions for
/// first-order runs, `G` on velocities for second-order runs.
pub struct Lyapunov<'a> {
    sim: &'a Simulation,
    block: Block,
    beta: f64,
    profile: SpeedProfile,
    diam: ObservableSeries,
}

impl<'a> Lyapunov<'a> {
    pub fn new(sim: &'a Simulation, block: Block, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!("beta must be positive, got {beta}")));
        }
        let profile = SpeedProfile::new(&speed_series(sim, block)?);
        let diam = diameter_series(sim, block)?;
        Ok(Self { sim, block, beta, profile, diam })
    }

    /// Value at `t in [0, T]`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("the functional is defined for t >= 0, got {t}")));
        }
        let range = block_range(&self.sim.spec, self.block)?;
        let state = self.sim.traj.sample(t)?;
        let d = diameter(&state[range], self.sim.spec.dim);
        Ok(d + self.beta * self.profile.memory_term(t, self.sim.spec.tau))
    }

    /// Values at every forward knot.
    pub fn series(&self) -> Result<ObservableSeries> {
        let tau = self.sim.spec.tau;
        let values: Vec<f64> = self
            .diam
            .times
            .iter()
            .zip(&self.diam.values)
            .map(|(&t, &d)| {
                let extra = self.beta * self.profile.memory_term(t, tau);
                debug_assert!(extra >= 0.0);
                d + extra
            })
            .collect();
        let label = match self.block {
            Block::Position => "F",
            Block::Velocity => "G",
        };
        ObservableSeries::new(label, self.diam.times.clone(), values)
    }

    pub(crate) fn speed_integral(&self, a: f64, b: f64) -> f64 {
        self.profile.integral(a, b)
    }
}

/// `F(t)` for a run; for second-order runs this is the position functional.
pub fn lyapunov_f(sim: &Simulation, beta: f64, t: f64) -> Result<f64> {
    Lyapunov::new(sim, Block::Position, beta)?.at(t)
}

/// `G(t)` for a second-order run.
pub fn lyapunov_g(sim: &Simulation, beta: f64, t: f64) -> Result<f64> {
    Lyapunov::new(sim, Block::Velocity, beta)?.at(t)
}

/// The standard observable set: `d_x`, `max_speed`, `min_weight`, `F` for
/// first-order runs; `d_x`, `d_v`, `max_speed`, `max_accel`, `min_weight`,
/// `G` for second-order runs.
pub fn standard_observables(sim: &Simulation, beta: f64) -> Result<Vec<ObservableSeries>> {
    let mut out = vec![diameter_series(sim, Block::Position)?];
    match sim.spec.kind {
        ModelKind::FirstOrder => {
            out.push(speed_series(sim, Block::Position)?);
            out.push(min_weight_series(sim)?);
            out.push(Lyapunov::new(sim, Block::Position, beta)?.series()?);
        }
        ModelKind::SecondOrder => {
            out.push(diameter_series(sim, Block::Velocity)?);
            out.push(speed_series(sim, Block::Position)?);
            out.push(speed_series(sim, Block::Velocity)?);
            out.push(min_weight_series(sim)?);
            out.push(Lyapunov::new(sim, Block::Velocity, beta)?.series()?);
        }
    }
    Ok(out)
}

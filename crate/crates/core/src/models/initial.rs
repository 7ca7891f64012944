//! Initial-history generators.
//!
//! Random histories draw values at a few control times and join them with
//! cosine easing, which stays inside the sampling box and is C1 with a known
//! derivative. Second-order positions are the exact integral of the velocity
//! curve, so the compatibility `x' = v` holds by construction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelKind, ModelSpec};
use crate::dde::InitialHistory;
use crate::error::{config, Result};

/// Sampling box for random histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct RandomBox {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub control_knots: usize,
}

impl Default for RandomBox {
    fn default() -> Self {
        Self { position: [-1.0, 1.0], velocity: [-0.1, 0.1], control_knots: 8 }
    }
}

impl RandomBox {
    fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("position", self.position), ("velocity", self.velocity)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(config(format!("{name} box [{lo}, {hi}] is not a finite interval")));
            }
        }
        if self.control_knots == 0 {
            return Err(config("controlKnots must be >= 1"));
        }
        Ok(())
    }
}

/// Cosine-eased curve through `values` at equally spaced times on `[-span, 0]`.
struct Eased<'a> {
    span: f64,
    values: &'a [f64],
}

impl Eased<'_> {
    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let m = self.values.len() - 1;
        let len = self.span / m as f64;
        let u = ((t + self.span) / len).clamp(0.0, m as f64);
        let k = (u.floor() as usize).min(m - 1);
        (k, u - k as f64, len)
    }

    fn value(&self, t: f64) -> f64 {
        if self.values.len() == 1 || self.span == 0.0 {
            return self.values[self.values.len() - 1];
        }
        let (k, th, _) = self.segment(t);
        let (a, b) = (self.values[k], self.values[k + 1]);
        a + (b - a) * 0.5 * (1.0 - (PI * th).cos())
    }

    fn slope(&self, t: f64) -> f64 {
        if self.values.len() == 1 || self.span == 0.0 {
            return 0.0;
        }
        let (k, th, len) = self.segment(t);
        let (a, b) = (self.values[k], self.values[k + 1]);
        (b - a) * 0.5 * PI * (PI * th).sin() / len
    }

    /// Integral from `-span` to `t`.
    fn integral(&self, t: f64) -> f64 {
        if self.values.len() == 1 || self.span == 0.0 {
            return self.values[0] * (t + self.span);
        }
        let (k, th, len) = self.segment(t);
        let full: f64 = (0..k).map(|j| 0.5 * len * (self.values[j] + self.values[j + 1])).sum();
        let (a, b) = (self.values[k], self.values[k + 1]);
        full + len * (a * th + (b - a) * 0.5 * (th - (PI * th).sin() / PI))
    }
}

/// Seeded random history on `[-tau, 0]` inside `bounds`.
///
/// The same `(spec, h, seed, bounds)` always gives the same history.
pub fn random_history(spec: &ModelSpec, h: f64, seed: u64, bounds: &RandomBox) -> Result<InitialHistory> {
    spec.validate()?;
    bounds.validate()?;
    let nd = spec.n_agents * spec.dim;
    let knots = if spec.tau == 0.0 { 1 } else { bounds.control_knots + 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |[lo, hi]: [f64; 2]| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let span = spec.tau;
    match spec.kind {
        ModelKind::FirstOrder => {
            let ctrl: Vec<Vec<f64>> =
                (0..nd).map(|_| (0..knots).map(|_| draw(bounds.position)).collect()).collect();
            InitialHistory::from_fn_with_derivative(
                span,
                h,
                nd,
                |t, out| {
                    for (o, c) in out.iter_mut().zip(&ctrl) {
                        *o = Eased { span, values: c }.value(t);
                    }
                },
                |t, out| {
                    for (o, c) in out.iter_mut().zip(&ctrl) {
                        *o = Eased { span, values: c }.slope(t);
                    }
                },
            )
        }
        ModelKind::SecondOrder => {
            let anchors: Vec<f64> = (0..nd).map(|_| draw(bounds.position)).collect();
            let ctrl: Vec<Vec<f64>> =
                (0..nd).map(|_| (0..knots).map(|_| draw(bounds.velocity)).collect()).collect();
            InitialHistory::from_fn_with_derivative(
                span,
                h,
                2 * nd,
                |t, out| {
                    for (k, c) in ctrl.iter().enumerate() {
                        let e = Eased { span, values: c };
                        out[k] = anchors[k] + e.integral(t);
                        out[nd + k] = e.value(t);
                    }
                },
                |t, out| {
                    for (k, c) in ctrl.iter().enumerate() {
                        let e = Eased { span, values: c };
                        out[k] = e.value(t);
                        out[nd + k] = e.slope(t);
                    }
                },
            )
        }
    }
}

/// Constant history for first-order models; for second-order models agents
/// move with constant velocity and sit at `positions` at `t = 0`.
pub fn constant_history(spec: &ModelSpec, positions: &[f64], velocities: Option<&[f64]>) -> Result<InitialHistory> {
    spec.validate()?;
    let nd = spec.n_agents * spec.dim;
    if positions.len() != nd {
        return Err(config(format!("expected {nd} position entries, got {}", positions.len())));
    }
    match spec.kind {
        ModelKind::FirstOrder => InitialHistory::constant(spec.tau, positions.to_vec()),
        ModelKind::SecondOrder => {
            let v = velocities.ok_or_else(|| config("second-order models need velocities"))?;
            if v.len() != nd {
                return Err(config(format!("expected {nd} velocity entries, got {}", v.len())));
            }
            if spec.tau == 0.0 {
                return InitialHistory::constant(0.0, [positions, v].concat());
            }
            let times = vec![-spec.tau, 0.0];
            let mut values: Vec<f64> = positions.iter().zip(v).map(|(p, v)| p - v * spec.tau).collect();
            values.extend_from_slice(v);
            values.extend_from_slice(positions);
            values.extend_from_slice(v);
            InitialHistory::from_knots(times, values, 2 * nd)
        }
    }
}

/// Smooth oscillating preset: agent `i` starts near `-1 + 2i/(N-1)` on the
/// first axis and oscillates with the given amplitude and angular frequency,
/// each agent with its own phase.
pub fn sinusoid_history(spec: &ModelSpec, amplitude: f64, frequency: f64, h: f64) -> Result<InitialHistory> {
    spec.validate()?;
    let (n, d) = (spec.n_agents, spec.dim);
    let nd = n * d;
    let offset = |i: usize, c: usize| if c == 0 { -1.0 + 2.0 * i as f64 / (n as f64 - 1.0) } else { 0.0 };
    let phase = |i: usize, c: usize| i as f64 + 0.5 * c as f64;
    match spec.kind {
        ModelKind::FirstOrder => InitialHistory::from_fn_with_derivative(
            spec.tau,
            h,
            nd,
            |t, out| {
                for k in 0..nd {
                    let (i, c) = (k / d, k % d);
                    out[k] = offset(i, c) + amplitude * (frequency * t + phase(i, c)).sin();
                }
            },
            |t, out| {
                for k in 0..nd {
                    let (i, c) = (k / d, k % d);
                    out[k] = amplitude * frequency * (frequency * t + phase(i, c)).cos();
                }
            },
        ),
        ModelKind::SecondOrder => InitialHistory::from_fn_with_derivative(
            spec.tau,
            h,
            2 * nd,
            |t, out| {
                for k in 0..nd {
                    let (i, c) = (k / d, k % d);
                    let arg = frequency * t + phase(i, c);
                    out[k] = offset(i, c) + amplitude * arg.sin();
                    out[nd + k] = amplitude * frequency * arg.cos();
                }
            },
            |t, out| {
                for k in 0..nd {
                    let (i, c) = (k / d, k % d);
                    let arg = frequency * t + phase(i, c);
                    out[k] = amplitude * frequency * arg.cos();
                    out[nd + k] = -amplitude * frequency * frequency * arg.sin();
                }
            },
        ),
    }
}

/// History from tabulated full states (one state vector per knot, last knot
/// at `t = 0`).
pub fn tabulated_history(spec: &ModelSpec, times: Vec<f64>, states: &[Vec<f64>]) -> Result<InitialHistory> {
    spec.validate()?;
    let dim = spec.state_dim();
    if states.len() != times.len() {
        return Err(config("tabulated history needs one state per time"));
    }
    if let Some(bad) = states.iter().position(|s| s.len() != dim) {
        return Err(config(format!("tabulated state {bad} has wrong length (expected {dim})")));
    }
    InitialHistory::from_knots(times, states.concat(), dim)
}

//! Fixed-step method-of-steps integration for systems with constant discrete
//! delays.
//!
//! Each step is a classical four-stage Runge–Kutta step. Delayed states are
//! read from the dense record of everything computed so far: the initial
//! history on `[-span, 0]` and cubic Hermite interpolation between forward
//! knots, using the right-hand side stored at every knot. Every nonzero lag
//! must be at least twice the step, so a delayed lookup never reaches into
//! the step being computed.

mod hermite;
mod history;
mod trajectory;

use std::borrow::Cow;

pub use history::{history_intervals, HistorySource, InitialHistory, MIN_HISTORY_INTERVALS};
pub use trajectory::Trajectory;

use crate::error::{config, Error, Result};
use trajectory::DenseView;

/// Access to the current stage state and to delayed states.
pub struct StateLookup<'a> {
    t: f64,
    current: &'a [f64],
    dense: DenseView<'a>,
}

impl<'a> StateLookup<'a> {
    pub fn time(&self) -> f64 {
        self.t
    }

    /// State at the current stage time.
    pub fn current(&self) -> &[f64] {
        self.current
    }

    /// State at `t - lag`; `lag == 0` yields the current stage state.
    pub fn delayed(&self, lag: f64) -> Cow<'_, [f64]> {
        if lag == 0.0 {
            return Cow::Borrowed(self.current);
        }
        let mut out = vec![0.0; self.current.len()];
        self.dense
            .fill(self.t - lag, &mut out, false)
            .expect("delayed lookup inside the computed record");
        Cow::Owned(out)
    }
}

/// Right-hand side of a delay system `y'(t) = f(t, y(t), y(t - lag_1), ...)`.
pub trait DelayedRhs: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, lookup: &StateLookup<'_>, out: &mut [f64]);
}

/// Adapts a closure into a [`DelayedRhs`].
pub struct FnRhs<F> {
    dim: usize,
    f: F,
}

impl<F> FnRhs<F>
where
    F: Fn(f64, &StateLookup<'_>, &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> DelayedRhs for FnRhs<F>
where
    F: Fn(f64, &StateLookup<'_>, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, lookup: &StateLookup<'_>, out: &mut [f64]) {
        (self.f)(t, lookup, out)
    }
}

/// Checks step size and lags against the lookup precondition.
pub fn check_step(lags: &[f64], h: f64, span: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(config(format!("step size must be positive, got {h}")));
    }
    for &lag in lags {
        if !(lag >= 0.0 && lag.is_finite()) {
            return Err(config(format!("delays must be finite and >= 0, got {lag}")));
        }
        if lag > span * (1.0 + 1e-12) + 1e-15 {
            return Err(config(format!("delay {lag} exceeds the history length {span}")));
        }
        if lag > 0.0 && h > lag / 2.0 * (1.0 + 1e-12) {
            return Err(config(format!(
                "step {h} too large for delay {lag}: need h <= delay/2 so lookups never enter the current step"
            )));
        }
    }
    Ok(())
}

/// Integrates `rhs` from the initial `history` up to `horizon`.
pub fn integrate<R>(
    lags: &[f64],
    history: InitialHistory,
    rhs: &R,
    h: f64,
    horizon: f64,
) -> Result<Trajectory>
where
    R: DelayedRhs + ?Sized,
{
    let dim = rhs.dim();
    if history.dim() != dim {
        return Err(config(format!(
            "history dimension {} does not match system dimension {dim}",
            history.dim()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(config(format!("horizon must be positive, got {horizon}")));
    }
    check_step(lags, h, history.span())?;

    let steps = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * dim);
    let mut derivs = Vec::with_capacity((steps + 1) * dim);
    times.push(0.0);
    states.extend_from_slice(history.terminal());
    derivs.resize(dim, 0.0);

    let eval = |t: f64, y: &[f64], times: &[f64], states: &[f64], derivs: &[f64], out: &mut [f64]| {
        let lookup = StateLookup {
            t,
            current: y,
            dense: DenseView { history: &history, step: h, times, states, derivs, dim },
        };
        rhs.eval(t, &lookup, out);
    };

    {
        let mut f0 = vec![0.0; dim];
        eval(0.0, &states[..dim], &times, &states, &derivs, &mut f0);
        check_finite(0.0, &f0, "right-hand side")?;
        derivs[..dim].copy_from_slice(&f0);
    }

    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut f_next = vec![0.0; dim];

    for n in 0..steps {
        let t = times[n];
        let t_next = if n + 1 == steps { horizon } else { (n + 1) as f64 * h };
        let dt = t_next - t;
        {
            let y = &states[n * dim..(n + 1) * dim];
            let k1 = &derivs[n * dim..(n + 1) * dim];
            for i in 0..dim {
                stage[i] = y[i] + 0.5 * dt * k1[i];
            }
            eval(t + 0.5 * dt, &stage, &times, &states, &derivs, &mut k2);
            for i in 0..dim {
                stage[i] = y[i] + 0.5 * dt * k2[i];
            }
            eval(t + 0.5 * dt, &stage, &times, &states, &derivs, &mut k3);
            for i in 0..dim {
                stage[i] = y[i] + dt * k3[i];
            }
            eval(t_next, &stage, &times, &states, &derivs, &mut k4);
            for i in 0..dim {
                next[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        check_finite(t_next, &next, "state")?;
        times.push(t_next);
        states.extend_from_slice(&next);
        // placeholder until the right-hand side at the new knot is known;
        // lookups never reach the newest knot
        derivs.extend_from_slice(&k4);
        eval(t_next, &next, &times, &states, &derivs, &mut f_next);
        check_finite(t_next, &f_next, "right-hand side")?;
        derivs[(n + 1) * dim..].copy_from_slice(&f_next);
    }

    Ok(Trajectory { dim, lags: lags.to_vec(), history, step: h, times, states, derivs })
}

fn check_finite(t: f64, v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration { time: t, reason: format!("non-finite {what}") })
    }
}

use std::io::Write;

use crate::error::{domain, Result};

use super::hermite;
use super::history::InitialHistory;

/// Read-only dense view over history plus the knots computed so far.
#[derive(Clone, Copy)]
pub(crate) struct DenseView<'a> {
    pub history: &'a InitialHistory,
    pub step: f64,
    pub times: &'a [f64],
    pub states: &'a [f64],
    pub derivs: &'a [f64],
    pub dim: usize,
}

impl<'a> DenseView<'a> {
    fn knot(&self, data: &'a [f64], k: usize) -> &'a [f64] {
        &data[k * self.dim..(k + 1) * self.dim]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        let mut k = ((t / self.step).floor().max(0.0) as usize).min(n - 2);
        while k > 0 && self.times[k] > t {
            k -= 1;
        }
        while k + 2 < n && self.times[k + 1] <= t {
            k += 1;
        }
        let (a, b) = (self.times[k], self.times[k + 1]);
        (k, ((t - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Writes the state (or its derivative) at `t` into `out`. Callers
    /// guarantee `t` lies within history or computed knots.
    pub fn fill(&self, t: f64, out: &mut [f64], derivative: bool) -> Result<()> {
        let last = *self.times.last().expect("at least one knot");
        if t < 0.0 || (t == 0.0 && !derivative) {
            return self.history.fill(t, out, derivative);
        }
        if t >= last {
            let tol = 1e-12 * last.abs().max(1.0);
            if t > last + tol {
                return Err(domain(format!("t = {t} lies beyond the computed horizon {last}")));
            }
            let k = self.times.len() - 1;
            out.copy_from_slice(self.knot(if derivative { self.derivs } else { self.states }, k));
            return Ok(());
        }
        let (k, theta) = self.locate(t);
        let dt = self.times[k + 1] - self.times[k];
        hermite::fill(
            theta,
            dt,
            self.knot(self.states, k),
            self.knot(self.derivs, k),
            self.knot(self.states, k + 1),
            self.knot(self.derivs, k + 1),
            out,
            derivative,
        );
        Ok(())
    }
}

/// A completed integration: history on `[-span, 0]` plus knots on `[0, T]`
/// with a uniform step (the last step may be shorter to land on `T`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub(crate) dim: usize,
    pub(crate) lags: Vec<f64>,
    pub(crate) history: InitialHistory,
    pub(crate) step: f64,
    pub(crate) times: Vec<f64>,
    pub(crate) states: Vec<f64>,
    pub(crate) derivs: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn view(&self) -> DenseView<'_> {
        DenseView {
            history: &self.history,
            step: self.step,
            times: &self.times,
            states: &self.states,
            derivs: &self.derivs,
            dim: self.dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn history(&self) -> &InitialHistory {
        &self.history
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Earliest time the trajectory can be queried at.
    pub fn start(&self) -> f64 {
        -self.history.span()
    }

    /// Knot times on `[0, T]`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn knot_count(&self) -> usize {
        self.times.len()
    }

    pub fn knot_state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Right-hand side recorded at knot `k`.
    pub fn knot_derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    fn check_range(&self, t: f64) -> Result<()> {
        let tol = 1e-12 * self.horizon().abs().max(1.0);
        if !(t >= self.start() - tol && t <= self.horizon() + tol) {
            return Err(domain(format!(
                "t = {t} lies outside the trajectory [{}, {}]",
                self.start(),
                self.horizon()
            )));
        }
        Ok(())
    }

    /// Dense state at `t`: history on `[-span, 0]`, cubic Hermite between knots.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(t, &mut out)?;
        Ok(out)
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.check_range(t)?;
        self.view().fill(t, out, false)
    }

    /// Dense derivative at `t`. At `t = 0` this is the right-hand side at the
    /// first knot; for `t < 0` the derivative of the history representation.
    pub fn sample_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.sample_derivative_into(t, &mut out)?;
        Ok(out)
    }

    pub fn sample_derivative_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.check_range(t)?;
        self.view().fill(t, out, true)
    }

    /// Writes knots as CSV rows `t, agent, component, value`.
    ///
    /// `label` maps a state index to `(agent, component)`. Every
    /// `every`-th forward knot is written (the last knot always is); history
    /// knots are written when `include_history` is set.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        every: usize,
        include_history: bool,
        label: impl Fn(usize) -> (usize, usize),
    ) -> Result<()> {
        writeln!(w, "t, agent, component, value")?;
        let every = every.max(1);
        let row = |w: &mut W, t: f64, state: &[f64]| -> Result<()> {
            for (idx, v) in state.iter().enumerate() {
                let (agent, comp) = label(idx);
                writeln!(w, "{t:.16e}, {agent}, {comp}, {v:.16e}")?;
            }
            Ok(())
        };
        if include_history {
            let ht = self.history.knot_times();
            for k in 0..ht.len().saturating_sub(1) {
                row(&mut w, ht[k], self.history.knot_value(k))?;
            }
        }
        let n = self.times.len();
        for k in 0..n {
            if k % every == 0 || k + 1 == n {
                row(&mut w, self.times[k], self.knot_state(k))?;
            }
        }
        Ok(())
    }
}

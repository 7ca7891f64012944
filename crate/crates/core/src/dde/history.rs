use crate::error::{config, domain, Result};

use super::hermite;

/// Minimum number of history intervals regardless of the step size.
pub const MIN_HISTORY_INTERVALS: usize = 64;

/// Where a history came from; decides the default compatibility tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistorySource {
    Analytic,
    Tabulated,
}

/// Initial data on `[-span, 0]`, stored as knots with slopes and evaluated by
/// cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct InitialHistory {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    source: HistorySource,
}

/// Number of intervals used to sample an analytic history of length `span`
/// for an integration with step `h`.
pub fn history_intervals(span: f64, h: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    MIN_HISTORY_INTERVALS.max((span / h).ceil() as usize)
}

fn check_span(span: f64, dim: usize) -> Result<()> {
    if !(span.is_finite() && span >= 0.0) {
        return Err(config(format!("history span must be finite and >= 0, got {span}")));
    }
    if dim == 0 {
        return Err(config("history dimension must be >= 1"));
    }
    Ok(())
}

impl InitialHistory {
    /// A constant history equal to `state` on `[-span, 0]`.
    pub fn constant(span: f64, state: Vec<f64>) -> Result<Self> {
        check_span(span, state.len())?;
        let dim = state.len();
        let (times, values, slopes) = if span == 0.0 {
            (vec![0.0], state, vec![0.0; dim])
        } else {
            let mut values = state.clone();
            values.extend_from_slice(&state);
            (vec![-span, 0.0], values, vec![0.0; 2 * dim])
        };
        Ok(Self { dim, times, values, slopes, source: HistorySource::Analytic })
    }

    /// Samples `f` on a uniform grid over `[-span, 0]`; knot slopes come from
    /// fourth-order centered differences of `f` itself.
    pub fn from_fn<F>(span: f64, h: f64, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]),
    {
        let n = history_intervals(span, h);
        let dx = if n > 0 { span / n as f64 } else { 1e-3 };
        let delta = dx.min(1e-3);
        let mut a = vec![0.0; dim];
        let mut b = vec![0.0; dim];
        let mut c = vec![0.0; dim];
        let mut d = vec![0.0; dim];
        Self::from_fn_with_derivative(span, h, dim, &f, |t, out| {
            f(t + 2.0 * delta, &mut a);
            f(t + delta, &mut b);
            f(t - delta, &mut c);
            f(t - 2.0 * delta, &mut d);
            for k in 0..out.len() {
                out[k] = (-a[k] + 8.0 * b[k] - 8.0 * c[k] + d[k]) / (12.0 * delta);
            }
        })
    }

    /// Samples `f` and its derivative `df` on a uniform grid over `[-span, 0]`.
    pub fn from_fn_with_derivative<F, D>(span: f64, h: f64, dim: usize, f: F, mut df: D) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]),
        D: FnMut(f64, &mut [f64]),
    {
        check_span(span, dim)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(config(format!("step size must be positive, got {h}")));
        }
        let n = history_intervals(span, h);
        let times: Vec<f64> = if n == 0 {
            vec![0.0]
        } else {
            (0..=n).map(|k| -span + span * k as f64 / n as f64).collect()
        };
        let mut values = vec![0.0; times.len() * dim];
        let mut slopes = vec![0.0; times.len() * dim];
        for (k, &t) in times.iter().enumerate() {
            // pin the last knot to exactly zero
            let t = if k + 1 == times.len() { 0.0 } else { t };
            f(t, &mut values[k * dim..(k + 1) * dim]);
            df(t, &mut slopes[k * dim..(k + 1) * dim]);
        }
        let mut times = times;
        *times.last_mut().unwrap() = 0.0;
        let hist = Self { dim, times, values, slopes, source: HistorySource::Analytic };
        hist.check_finite()?;
        Ok(hist)
    }

    /// History from tabulated knots (`values` is knot-major, `dim` entries per
    /// knot). The last knot must sit at `t = 0`; slopes are estimated with
    /// second-order nonuniform finite differences.
    pub fn from_knots(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        if n == 0 || dim == 0 || values.len() != n * dim {
            return Err(config("tabulated history needs knots with one state vector each"));
        }
        if times[n - 1] != 0.0 {
            return Err(config("tabulated history must end at t = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config("tabulated history times must be strictly increasing"));
        }
        let mut slopes = vec![0.0; n * dim];
        if n >= 2 {
            for k in 0..n {
                let (i0, i1, i2) = if k == 0 {
                    (0, 1, 2.min(n - 1))
                } else if k == n - 1 {
                    (n.saturating_sub(3), n - 2, n - 1)
                } else {
                    (k - 1, k, k + 1)
                };
                for c in 0..dim {
                    let y = |i: usize| values[i * dim + c];
                    slopes[k * dim + c] = if i2 == i1 || i0 == i1 {
                        (y(i1.max(i2)) - y(i0.min(i1))) / (times[i1.max(i2)] - times[i0.min(i1)])
                    } else {
                        three_point_slope(
                            times[k],
                            (times[i0], y(i0)),
                            (times[i1], y(i1)),
                            (times[i2], y(i2)),
                        )
                    };
                }
            }
        }
        let hist = Self { dim, times, values, slopes, source: HistorySource::Tabulated };
        hist.check_finite()?;
        Ok(hist)
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().chain(&self.slopes).any(|v| !v.is_finite()) {
            return Err(config("history contains non-finite values"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the history interval, i.e. the largest delay it can serve.
    pub fn span(&self) -> f64 {
        -self.times[0]
    }

    pub fn source(&self) -> HistorySource {
        self.source
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn knot_value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn knot_slope(&self, k: usize) -> &[f64] {
        &self.slopes[k * self.dim..(k + 1) * self.dim]
    }

    /// State at `t = 0`.
    pub fn terminal(&self) -> &[f64] {
        self.knot_value(self.times.len() - 1)
    }

    /// Shifts every state component by `shift` (componentwise, cycled over
    /// `shift.len()`).
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v += shift[i % self.dim % shift.len()];
        }
        out
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let span = self.span();
        let tol = 1e-12 * span.max(1.0);
        if !(t >= -span - tol && t <= tol) {
            return Err(domain(format!("t = {t} lies outside the history [{}, 0]", -span)));
        }
        let n = self.times.len();
        if n == 1 {
            return Ok((0, 0.0));
        }
        let t = t.clamp(-span, 0.0);
        let idx = self.times.partition_point(|&s| s <= t).clamp(1, n - 1);
        let (a, b) = (self.times[idx - 1], self.times[idx]);
        Ok((idx - 1, ((t - a) / (b - a)).clamp(0.0, 1.0)))
    }

    pub(crate) fn fill(&self, t: f64, out: &mut [f64], derivative: bool) -> Result<()> {
        let (k, theta) = self.locate(t)?;
        if self.times.len() == 1 {
            out.copy_from_slice(if derivative { self.knot_slope(0) } else { self.knot_value(0) });
            return Ok(());
        }
        let dt = self.times[k + 1] - self.times[k];
        hermite::fill(
            theta,
            dt,
            self.knot_value(k),
            self.knot_slope(k),
            self.knot_value(k + 1),
            self.knot_slope(k + 1),
            out,
            derivative,
        );
        Ok(())
    }

    /// History state at `t in [-span, 0]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.fill(t, &mut out, false)?;
        Ok(out)
    }

    /// Derivative of the history representation at `t in [-span, 0]`.
    pub fn eval_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.fill(t, &mut out, true)?;
        Ok(out)
    }
}

fn three_point_slope(t: f64, (t0, y0): (f64, f64), (t1, y1): (f64, f64), (t2, y2): (f64, f64)) -> f64 {
    // derivative of the quadratic through the three points, evaluated at t
    let l0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let l1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let l2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
    y0 * l0 + y1 * l1 + y2 * l2
}

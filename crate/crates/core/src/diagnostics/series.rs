use std::io::Write;

use serde::Serialize;

use crate::certificates::Envelope;
use crate::error::{domain, Result};

/// A nonnegative observable sampled at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if times.len() != values.len() {
            return Err(domain(format!("{label}: {} times but {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain(format!("{label}: times must be strictly increasing")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(domain(format!("{label}: value {v} is not finite and nonnegative")));
        }
        Ok(Self { label, times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Rows `t, label, value`, keeping every `every`-th sample and the last.
    pub fn write_csv<W: Write>(&self, mut w: W, every: usize) -> Result<()> {
        writeln!(w, "t, label, value")?;
        let every = every.max(1);
        let n = self.len();
        for k in 0..n {
            if k % every == 0 || k + 1 == n {
                writeln!(w, "{:.16e}, {}, {:.16e}", self.times[k], self.label, self.values[k])?;
            }
        }
        Ok(())
    }

    /// Linear interpolation between samples.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let n = self.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return Err(domain(format!("{}: t = {t} outside the sampled range", self.label)));
        }
        let j = self.times.partition_point(|&s| s < t);
        if j < n && self.times[j] == t {
            return Ok(self.values[j]);
        }
        let (a, b) = (j - 1, j);
        let th = (t - self.times[a]) / (self.times[b] - self.times[a]);
        Ok(self.values[a] + th * (self.values[b] - self.values[a]))
    }
}

/// Fitted exponential decay rate: the negated least-squares slope of
/// `ln(value)` against time.
///
/// With `window = None`, fits the last half of the samples whose value
/// exceeds `1e-12`.
pub fn decay_rate_fit(series: &ObservableSeries, window: Option<(f64, f64)>) -> Result<f64> {
    let pts: Vec<(f64, f64)> = match window {
        Some((a, b)) => {
            let sel: Vec<(f64, f64)> = series
                .times
                .iter()
                .zip(&series.values)
                .filter(|(t, _)| **t >= a && **t <= b)
                .map(|(t, v)| (*t, *v))
                .collect();
            if let Some((t, _)) = sel.iter().find(|(_, v)| !(*v > 0.0)) {
                return Err(domain(format!("nonpositive value at t = {t} inside the fit window")));
            }
            sel
        }
        None => {
            let pos: Vec<(f64, f64)> = series
                .times
                .iter()
                .zip(&series.values)
                .filter(|(_, v)| **v > 1e-12)
                .map(|(t, v)| (*t, *v))
                .collect();
            let skip = pos.len() / 2;
            pos[skip..].to_vec()
        }
    };
    if pts.len() < 2 {
        return Err(domain("decay fit needs at least two positive samples"));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &pts {
        sxy += (t - mt) * (v.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return Err(domain("decay fit window has a single time"));
    }
    Ok(-(sxy / sxx))
}

/// Outcome of comparing a series against an exponential envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EnvelopeCheck {
    pub checked: usize,
    pub violations: usize,
    /// Largest `value / bound` seen (1 means touching the envelope).
    pub max_ratio: f64,
    pub worst_time: Option<f64>,
}

/// Counts samples with `t >= onset` and `value > bound(t) (1 + slack)`.
pub fn envelope_check(series: &ObservableSeries, envelope: &Envelope, slack: f64) -> EnvelopeCheck {
    let mut out = EnvelopeCheck { checked: 0, violations: 0, max_ratio: 0.0, worst_time: None };
    // tolerate onset rounding on the knot grid
    let onset = envelope.onset - 1e-12 * envelope.onset.max(1.0);
    for (&t, &v) in series.times.iter().zip(&series.values) {
        if t < onset {
            continue;
        }
        out.checked += 1;
        let bound = envelope.bound(t.max(envelope.onset));
        if v > bound * (1.0 + slack) {
            out.violations += 1;
        }
        let ratio = if bound > 0.0 { v / bound } else if v > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > out.max_ratio {
            out.max_ratio = ratio;
            out.worst_time = Some(t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> ObservableSeries {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 / 100.0).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        ObservableSeries::new("x", times, values).unwrap()
    }

    #[test]
    fn fits_exact_exponential() {
        let s = series(|t| (-2.0 * t).exp());
        assert!((decay_rate_fit(&s, None).unwrap() - 2.0).abs() < 1e-9);
        assert!((decay_rate_fit(&s, Some((0.0, 10.0))).unwrap() - 2.0).abs() < 1e-9);
        assert!(decay_rate_fit(&series(|_| 3.0), None).unwrap().abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_zeros_in_window() {
        let s = series(|t| if t < 5.0 { 1.0 } else { 0.0 });
        assert!(decay_rate_fit(&s, Some((0.0, 10.0))).is_err());
    }

    #[test]
    fn validation_and_csv() {
        assert!(ObservableSeries::new("x", vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(ObservableSeries::new("x", vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        let s = ObservableSeries::new("d_x", vec![0.0, 0.5], vec![2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t, label, value\n0.0000000000000000e0, d_x, 2.0000000000000000e0\n"));
        assert_eq!(s.interpolate(0.25).unwrap(), 1.5);
    }

    #[test]
    fn envelope_counts_violations() {
        let s = series(|t| (-t).exp());
        let env = Envelope { amplitude: 1.0, rate: 1.0, onset: 0.0, position_drift: None };
        assert_eq!(envelope_check(&s, &env, 1e-12).violations, 0);
        let tight = Envelope { rate: 1.5, ..env };
        assert!(envelope_check(&s, &tight, 1e-3).violations > 0);
    }
}

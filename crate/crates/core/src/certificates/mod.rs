//! Closed-form constants and sufficient-condition certificates for consensus
//! (first order) and flocking (second order).
//!
//! Certificates search the free parameters on logarithmic grids: `beta` on
//! `[beta_min, 100 beta_min]` and, for flocking, `C` in `(1e-4, psi(dx0))`.
//! Ties go to the smallest feasible `beta`, then the largest feasible `C`.
//! The influence function is replaced by its nonincreasing rearrangement
//! (running minimum) before any condition is evaluated.

mod constants;

use serde::{Deserialize, Serialize};

pub use constants::{
    beta_min, cal_w, cal_z, halanay_gamma, halanay_residual, lambert_w, linear_threshold, memory_weight,
    tau_limit, window_count, z_closed_form, z_sequence, CROSS_CHECK_TOL,
};

use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::influence::InfluenceFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Consensus,
    Flocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

/// Search settings shared by both certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ScanOptions {
    pub beta_points: usize,
    /// Upper end of the beta grid as a multiple of its lower end.
    pub beta_span: f64,
    pub c_points: usize,
    pub c_min: f64,
    /// Use this beta instead of scanning.
    pub beta: Option<f64>,
    /// Record every grid point in the certificate.
    pub trace: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { beta_points: 64, beta_span: 100.0, c_points: 256, c_min: 1e-4, beta: None, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateInputs {
    pub sigma: f64,
    pub tau: f64,
    pub delta_x0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_v0: Option<f64>,
    pub influence: String,
}

/// Constants evaluated at the chosen (or smallest admissible) beta.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Constants {
    #[serde(rename = "K")]
    pub k: usize,
    pub z_k: f64,
    pub z_k_minus_1: f64,
    pub cal_z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cal_w: Option<f64>,
}

/// Halanay data for consensus certificates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Rates {
    pub eta: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub decay_rate: f64,
}

/// `value(t) <= amplitude * exp(-rate (t - onset))` for `t >= onset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Envelope {
    pub amplitude: f64,
    pub rate: f64,
    pub onset: f64,
    /// Flocking only: `sup d_x <= d_x(0) + position_drift`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_drift: Option<f64>,
}

impl Envelope {
    pub fn bound(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * (t - self.onset)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TracePoint {
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub kind: CertificateKind,
    pub inputs: CertificateInputs,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Rates>,
    /// Right side minus left side of the main condition at the reported
    /// parameters (best over the scan when not certified).
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// `(K, Z^K, Z^{K-1})`; `sigma = tau = 0` uses `K = 0`, `Z^0 = 1`, `Z^{-1} = 0`.
fn windows(sigma: f64, tau: f64) -> Result<(usize, f64, f64)> {
    if !(sigma >= 0.0 && sigma.is_finite() && tau.is_finite()) {
        return Err(domain(format!("delays must be finite and >= 0 (sigma = {sigma}, tau = {tau})")));
    }
    if sigma > tau {
        return Err(Error::Hypothesis(format!("sigma must not exceed tau (sigma = {sigma}, tau = {tau})")));
    }
    if sigma == 0.0 {
        if tau == 0.0 {
            return Ok((0, 1.0, 0.0));
        }
        return Err(Error::Hypothesis(format!(
            "outside theorem hypotheses as stated: K = ceil(2 tau / sigma) is undefined for sigma = 0 < tau = {tau}"
        )));
    }
    let k = window_count(sigma, tau)?;
    let z = z_sequence(sigma, k)?;
    let prev = if k >= 1 { z[k - 1] } else { 0.0 };
    Ok((k, z[k], prev))
}

fn beta_grid(tau: f64, opts: &ScanOptions) -> Result<Vec<f64>> {
    if let Some(b) = opts.beta {
        if !(b > 0.0 && b.is_finite()) {
            return Err(domain(format!("beta override must be positive, got {b}")));
        }
        return Ok(vec![b]);
    }
    if opts.beta_points == 0 || !(opts.beta_span >= 1.0) {
        return Err(domain("beta grid needs at least one point and span >= 1"));
    }
    let lo = match beta_min(tau)? {
        b if b > 0.0 => b,
        _ => 1.0,
    };
    Ok(log_grid(lo, lo * opts.beta_span, opts.beta_points))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| match k {
            0 => lo,
            k if k + 1 == n => hi,
            k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn beta_admissible(tau: f64, beta: f64) -> bool {
    4.0 * tau <= beta * (2.0 * (-2.0 * tau).exp() - 1.0) * (1.0 + 1e-12)
}

fn check_spread(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(domain(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn not_admissible(kind: CertificateKind, inputs: CertificateInputs) -> Certificate {
    Certificate {
        kind,
        inputs,
        verdict: Verdict::NotCertified,
        reason: Some("no admissible β".into()),
        beta: None,
        c: None,
        constants: None,
        rates: None,
        margin: f64::NEG_INFINITY,
        envelope: None,
        trace: None,
    }
}

/// Consensus certificate for the first-order system.
pub fn certify_consensus(
    sigma: f64,
    tau: f64,
    delta_x0: f64,
    influence: &InfluenceFunction,
    opts: &ScanOptions,
    exec: Exec,
) -> Result<Certificate> {
    check_spread("delta_x0", delta_x0)?;
    let (k, zk, zk1) = windows(sigma, tau)?;
    let inputs = CertificateInputs {
        sigma,
        tau,
        delta_x0,
        delta_v0: None,
        influence: influence.describe(),
    };
    if tau >= tau_limit() {
        return Ok(not_admissible(CertificateKind::Consensus, inputs));
    }
    let psi = influence.rearrange();
    let mw = memory_weight(tau);
    let e2 = (2.0 * tau).exp();
    let betas = beta_grid(tau, opts)?;
    let points = exec.map(&betas, |&beta| {
        let cz = zk + zk1 * beta * mw;
        let lhs = 4.0 * tau + beta * (-(-2.0 * tau).exp_m1());
        let arg = (1.0 + tau - sigma + e2 / beta) * cz * delta_x0;
        let rhs = psi.eval_unchecked(arg);
        let feasible = beta_admissible(tau, beta) && lhs < rhs;
        TracePoint { beta, c: None, lhs, rhs, feasible }
    });
    let best = points.iter().find(|p| p.feasible).or_else(|| {
        points.iter().max_by(|a, b| (a.rhs - a.lhs).total_cmp(&(b.rhs - b.lhs)))
    });
    let p = best.expect("nonempty beta grid").clone();
    let constants = Constants { k, z_k: zk, z_k_minus_1: zk1, cal_z: zk + zk1 * p.beta * mw, cal_w: None };
    let mut cert = Certificate {
        kind: CertificateKind::Consensus,
        inputs,
        verdict: Verdict::NotCertified,
        reason: None,
        beta: Some(p.beta),
        c: None,
        constants: Some(constants.clone()),
        rates: None,
        margin: p.rhs - p.lhs,
        envelope: None,
        trace: opts.trace.then(|| points.clone()),
    };
    if !p.feasible {
        cert.reason = Some(if beta_admissible(tau, p.beta) {
            "condition fails on the whole beta grid".into()
        } else {
            "beta override violates the admissibility condition".into()
        });
        return Ok(cert);
    }
    let alpha = 4.0 * tau;
    let gamma = p.beta * (-(-2.0 * tau).exp_m1());
    let eta = p.rhs;
    let rate = halanay_gamma(alpha, gamma, eta, tau)?;
    cert.verdict = Verdict::Certified;
    cert.rates = Some(Rates { eta, alpha, gamma, decay_rate: rate });
    cert.envelope = Some(Envelope {
        amplitude: constants.cal_z * delta_x0,
        rate,
        onset: 2.0 * tau,
        position_drift: None,
    });
    Ok(cert)
}

/// Flocking certificate for the second-order system.
pub fn certify_flocking(
    sigma: f64,
    tau: f64,
    delta_x0: f64,
    delta_v0: f64,
    influence: &InfluenceFunction,
    opts: &ScanOptions,
    exec: Exec,
) -> Result<Certificate> {
    check_spread("delta_x0", delta_x0)?;
    check_spread("delta_v0", delta_v0)?;
    let (k, zk, zk1) = windows(sigma, tau)?;
    let inputs = CertificateInputs {
        sigma,
        tau,
        delta_x0,
        delta_v0: Some(delta_v0),
        influence: influence.describe(),
    };
    if tau >= tau_limit() {
        return Ok(not_admissible(CertificateKind::Flocking, inputs));
    }
    let cal_w_val = if k >= 1 { cal_w(sigma, k)? } else { 0.0 };
    let psi = influence.rearrange();
    let c_max = psi.eval_unchecked(delta_x0);
    if !(c_max > opts.c_min) || opts.c_points == 0 {
        return Err(domain(format!(
            "C grid is empty: psi(delta_x0) = {c_max} does not exceed cMin = {}",
            opts.c_min
        )));
    }
    let cs = log_grid(opts.c_min, c_max, opts.c_points);
    let mw = memory_weight(tau);
    let decay = -(-2.0 * tau).exp_m1();
    let betas = beta_grid(tau, opts)?;
    let rows = exec.map(&betas, |&beta| {
        let cz = zk + zk1 * beta * mw;
        let admissible = beta_admissible(tau, beta);
        cs.iter()
            .map(|&c| {
                let ect = (c * tau).exp();
                let lhs = ect * (4.0 * tau * ect + beta * decay) + c;
                let tail = ect / c * (1.0 + (2.0 * tau + c * sigma).exp() / beta + ect * (tau - sigma));
                let arg = delta_x0 + cal_w_val * delta_v0 + tail * cz * delta_v0;
                let rhs = psi.eval_unchecked(arg);
                TracePoint { beta, c: Some(c), lhs, rhs, feasible: admissible && lhs <= rhs }
            })
            .collect::<Vec<_>>()
    });
    let chosen = rows.iter().find_map(|row| row.iter().rev().find(|p| p.feasible));
    let p = chosen
        .or_else(|| {
            rows.iter()
                .flatten()
                .max_by(|a, b| (a.rhs - a.lhs).total_cmp(&(b.rhs - b.lhs)))
        })
        .expect("nonempty grid")
        .clone();
    let c = p.c.expect("flocking points carry C");
    let cz = zk + zk1 * p.beta * mw;
    let mut cert = Certificate {
        kind: CertificateKind::Flocking,
        inputs,
        verdict: Verdict::NotCertified,
        reason: None,
        beta: Some(p.beta),
        c: Some(c),
        constants: Some(Constants { k, z_k: zk, z_k_minus_1: zk1, cal_z: cz, cal_w: Some(cal_w_val) }),
        rates: None,
        margin: p.rhs - p.lhs,
        envelope: None,
        trace: opts.trace.then(|| rows.iter().flatten().cloned().collect()),
    };
    if !p.feasible {
        cert.reason = Some("condition fails on the whole (beta, C) grid".into());
        return Ok(cert);
    }
    cert.verdict = Verdict::Certified;
    cert.envelope = Some(Envelope {
        amplitude: cz * delta_v0,
        rate: c,
        onset: 2.0 * tau,
        position_drift: Some((2.0 * c * tau).exp() * cz * delta_v0 / c),
    });
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> InfluenceFunction {
        InfluenceFunction::unit()
    }

    #[test]
    fn linear_diagonal_threshold() {
        let opts = ScanOptions::default();
        let ok = certify_consensus(0.1, 0.1, 1.0, &unit(), &opts, Exec::Sequential).unwrap();
        assert!(ok.is_certified());
        let b = beta_min(0.1).unwrap();
        assert_eq!(ok.beta, Some(b));
        let reduced = 0.4 * (-0.2f64).exp() / (2.0 * (-0.2f64).exp() - 1.0);
        assert!((reduced - 0.5138).abs() < 1e-4);
        assert!((1.0 - ok.margin - reduced).abs() < 1e-12);
        let rates = ok.rates.as_ref().unwrap();
        assert!(rates.alpha + rates.gamma < rates.eta);
        assert!(rates.decay_rate > 0.0 && rates.decay_rate < rates.eta);
        assert!(halanay_residual(rates.decay_rate, rates.alpha, rates.gamma, rates.eta, 0.1).abs() <= 1e-12);

        for tau in [0.14, 0.155] {
            assert!(certify_consensus(tau, tau, 3.0, &unit(), &opts, Exec::Sequential).unwrap().is_certified());
        }
        for tau in [0.16, 0.2, 0.3] {
            assert!(!certify_consensus(tau, tau, 3.0, &unit(), &opts, Exec::Sequential).unwrap().is_certified());
        }
        let far = certify_consensus(0.4, 0.4, 1.0, &unit(), &opts, Exec::Sequential).unwrap();
        assert_eq!(far.reason.as_deref(), Some("no admissible β"));
    }

    #[test]
    fn zero_delay_always_certifies() {
        let psi = InfluenceFunction::power_law(3.0).unwrap();
        let c = certify_consensus(0.0, 0.0, 1e4, &psi, &ScanOptions::default(), Exec::Sequential).unwrap();
        assert!(c.is_certified());
        let r = c.rates.unwrap();
        assert_eq!(r.decay_rate, r.eta);
        assert!(matches!(
            certify_consensus(0.0, 0.1, 1.0, &unit(), &ScanOptions::default(), Exec::Sequential),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn flocking_examples() {
        let opts = ScanOptions::default();
        let sqrt = InfluenceFunction::power_law(0.5).unwrap();
        let c = certify_flocking(0.0, 0.0, 1.0, 1.0, &sqrt, &opts, Exec::Sequential).unwrap();
        assert!(c.is_certified());
        let cc = c.c.unwrap();
        assert!(cc < sqrt.eval(1.0 + 1.0 / cc).unwrap());

        let still = certify_flocking(0.05, 0.05, 1.0, 0.0, &sqrt, &opts, Exec::Sequential).unwrap();
        assert!(still.is_certified());

        let steep = InfluenceFunction::power_law(2.0).unwrap();
        let no = certify_flocking(0.0, 0.0, 1e3, 1.0, &steep, &opts, Exec::Sequential);
        match no {
            Ok(c) => assert!(!c.is_certified()),
            Err(Error::Domain(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let psi = InfluenceFunction::power_law(0.5).unwrap();
        let opts = ScanOptions { trace: true, ..Default::default() };
        let a = certify_flocking(0.03, 0.05, 0.5, 0.02, &psi, &opts, Exec::Sequential).unwrap();
        let b = certify_flocking(0.03, 0.05, 0.5, 0.02, &psi, &opts, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn certificate_serializes() {
        let c = certify_consensus(0.05, 0.1, 1.0, &unit(), &ScanOptions::default(), Exec::Sequential).unwrap();
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["kind"], "consensus");
        assert_eq!(v["verdict"], "certified");
        assert_eq!(v["constants"]["K"], 4);
        assert!(v["rates"]["Gamma"].as_f64().unwrap() > 0.0);
    }
}

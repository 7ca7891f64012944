use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use super::{write_text, RunConfig};
use crate::certificates::{beta_min, certify_consensus, certify_flocking, Certificate};
use crate::diagnostics::{
    decay_rate_fit, envelope_check, initial_spread, standard_observables, verify_lemma_inequalities, Block,
    EnvelopeCheck, LemmaOptions, LemmaReport, DEFAULT_REFINE,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::models::{simulate, validate_initial_data, ModelKind};

/// Relative slack used when comparing a run against its envelope.
pub const ENVELOPE_SLACK: f64 = 1e-3;

/// Flocking position bound `sup d_x <= d_x(0) + drift` on a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PositionBound {
    pub bound: f64,
    pub sup_diameter: f64,
    pub holds: bool,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub kind: ModelKind,
    pub n_agents: usize,
    pub dim: usize,
    pub sigma: f64,
    pub tau: f64,
    pub seed: u64,
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub knots: usize,
    pub delta_x0: f64,
    pub delta_v0: Option<f64>,
    pub initial_diameter: f64,
    pub final_diameter: f64,
    pub initial_velocity_diameter: Option<f64>,
    pub final_velocity_diameter: Option<f64>,
    /// Fitted decay rate of `d_x` (first order) or `d_v` (second order).
    pub fitted_rate: Option<f64>,
    /// Beta used by the functional series and the lemma checks.
    pub beta: f64,
    pub certified: Option<bool>,
    pub certificate_error: Option<String>,
    /// Samples above the certified envelope; `None` without a certificate.
    pub envelope_violations: Option<usize>,
    pub envelope: Option<EnvelopeCheck>,
    pub position_bound: Option<PositionBound>,
    pub lemma: Option<LemmaReport>,
}

/// Runs `cfg`, writes every artifact into `out` and returns the summary.
///
/// Files: `trajectory.csv`, one CSV per observable (`d_x.csv`, `F.csv`, ...),
/// `certificate.json` when a certificate was requested, and `summary.json`.
pub fn run_simulation(cfg: &RunConfig, out: &Path, exec: Exec) -> Result<Summary> {
    let spec = &cfg.model;
    let history = cfg.build_history(cfg.seed)?;
    validate_initial_data(spec, &history, None)?;
    let dx0 = initial_spread(spec, &history, Block::Position, DEFAULT_REFINE)?;
    let dv0 = match spec.kind {
        ModelKind::FirstOrder => None,
        ModelKind::SecondOrder => Some(initial_spread(spec, &history, Block::Velocity, DEFAULT_REFINE)?),
    };

    let mut cert: Option<Certificate> = None;
    let mut cert_error = None;
    if cfg.analysis.certificate {
        let mut opts = cfg.analysis.scan.clone();
        opts.beta = opts.beta.or(cfg.analysis.beta);
        let res = match dv0 {
            None => certify_consensus(spec.sigma, spec.tau, dx0, &spec.influence, &opts, exec),
            Some(dv0) => certify_flocking(spec.sigma, spec.tau, dx0, dv0, &spec.influence, &opts, exec),
        };
        match res {
            Ok(c) => cert = Some(c),
            Err(e @ (Error::Hypothesis(_) | Error::Domain(_))) => cert_error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    let beta = cfg
        .analysis
        .beta
        .or_else(|| cert.as_ref().and_then(|c| c.beta))
        .or_else(|| beta_min(spec.tau).ok().filter(|b| *b > 0.0))
        .unwrap_or(1.0);

    let sim = simulate(spec, history, cfg.sim.h, cfg.sim.horizon)?;

    fs::create_dir_all(out)?;
    let every = cfg.sim.output_every;
    sim.write_csv(BufWriter::new(fs::File::create(out.join("trajectory.csv"))?), every)?;
    let observables = standard_observables(&sim, beta)?;
    for s in &observables {
        s.write_csv(BufWriter::new(fs::File::create(out.join(format!("{}.csv", s.label)))?), every)?;
    }
    let find = |label: &str| observables.iter().find(|s| s.label == label);
    let dx = find("d_x").expect("standard observables include d_x");
    let dv = find("d_v");
    let aligned = match spec.kind {
        ModelKind::FirstOrder => dx,
        ModelKind::SecondOrder => dv.expect("second-order observables include d_v"),
    };

    let mut envelope = None;
    let mut position_bound = None;
    if let Some(env) = cert.as_ref().filter(|c| c.is_certified()).and_then(|c| c.envelope.as_ref()) {
        envelope = Some(envelope_check(aligned, env, ENVELOPE_SLACK));
        if let Some(drift) = env.position_drift {
            let bound = dx.values[0] + drift;
            let sup = dx.values.iter().copied().fold(0.0, f64::max);
            position_bound = Some(PositionBound { bound, sup_diameter: sup, holds: sup <= bound * (1.0 + ENVELOPE_SLACK) });
        }
    }
    let envelope_violations = envelope
        .as_ref()
        .map(|e| e.violations + usize::from(position_bound.as_ref().is_some_and(|p| !p.holds)));

    let lemma = if cfg.analysis.lemma_check {
        Some(verify_lemma_inequalities(&sim, beta, &LemmaOptions::default())?)
    } else {
        None
    };

    if let Some(c) = &cert {
        write_text(&out.join("certificate.json"), &serde_json::to_string_pretty(c)?)?;
    }
    let summary = Summary {
        kind: spec.kind,
        n_agents: spec.n_agents,
        dim: spec.dim,
        sigma: spec.sigma,
        tau: spec.tau,
        seed: cfg.seed,
        h: cfg.sim.h,
        horizon: cfg.sim.horizon,
        knots: dx.len(),
        delta_x0: dx0,
        delta_v0: dv0,
        initial_diameter: dx.values[0],
        final_diameter: *dx.values.last().expect("nonempty series"),
        initial_velocity_diameter: dv.map(|s| s.values[0]),
        final_velocity_diameter: dv.and_then(|s| s.values.last().copied()),
        fitted_rate: decay_rate_fit(aligned, None).ok(),
        beta,
        certified: cert.as_ref().map(Certificate::is_certified),
        certificate_error: cert_error,
        envelope_violations,
        envelope,
        position_bound,
        lemma,
    };
    write_text(&out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

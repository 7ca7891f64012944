//! Delayed right-hand sides of the first-order (Hegselmann–Krause) and
//! second-order (Cucker–Smale) alignment systems.
//!
//! Agent `i` reacts at time `t` to its own state at `t - sigma` and to every
//! other agent's state at `t - tau`, weighted by
//! `a_ij(t) = psi(|x_i(t - sigma) - x_j(t - tau)|) / (N - 1)`.
//!
//! State layout: first-order runs store `[x_1, ..., x_N]`; second-order runs
//! store the position block followed by the velocity block,
//! `[x_1, ..., x_N, v_1, ..., v_N]`.

mod initial;

use serde::{Deserialize, Serialize};

pub use initial::{constant_history, random_history, sinusoid_history, tabulated_history, RandomBox};

use crate::dde::{self, DelayedRhs, HistorySource, InitialHistory, StateLookup, Trajectory};
use crate::error::{config, domain, Error, Result};
use crate::influence::InfluenceFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Opinion dynamics, consensus.
    FirstOrder,
    /// Position/velocity dynamics, flocking.
    SecondOrder,
}

/// Model parameters: `n_agents` agents in `dim` dimensions with reaction
/// delay `sigma` and total delay `tau >= sigma` (transmission delay
/// `tau - sigma`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelSpec {
    pub n_agents: usize,
    pub dim: usize,
    pub sigma: f64,
    pub tau: f64,
    pub kind: ModelKind,
    pub influence: InfluenceFunction,
}

impl ModelSpec {
    pub fn new(
        n_agents: usize,
        dim: usize,
        sigma: f64,
        tau: f64,
        kind: ModelKind,
        influence: InfluenceFunction,
    ) -> Result<Self> {
        let spec = Self { n_agents, dim, sigma, tau, kind, influence };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(config(format!("need at least 2 agents, got {}", self.n_agents)));
        }
        if self.dim < 1 {
            return Err(config("dimension must be >= 1"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(config(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !self.tau.is_finite() {
            return Err(config(format!("tau must be finite, got {}", self.tau)));
        }
        if self.sigma > self.tau {
            return Err(config(format!(
                "sigma must not exceed tau (sigma = {}, tau = {})",
                self.sigma, self.tau
            )));
        }
        Ok(())
    }

    /// Transmission delay `tau - sigma`.
    pub fn transmission_delay(&self) -> f64 {
        self.tau - self.sigma
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            ModelKind::FirstOrder => self.n_agents * self.dim,
            ModelKind::SecondOrder => 2 * self.n_agents * self.dim,
        }
    }

    pub fn lags(&self) -> [f64; 2] {
        [self.sigma, self.tau]
    }

    /// Slice of the position block of a full state vector.
    pub fn positions<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[..self.n_agents * self.dim]
    }

    /// Slice of the velocity block; `None` for first-order models.
    pub fn velocities<'a>(&self, state: &'a [f64]) -> Option<&'a [f64]> {
        match self.kind {
            ModelKind::FirstOrder => None,
            ModelKind::SecondOrder => Some(&state[self.n_agents * self.dim..]),
        }
    }

    /// Maps a state index to `(agent, component)`; second-order velocity
    /// components are numbered `dim..2*dim`.
    pub fn label(&self, idx: usize) -> (usize, usize) {
        let nd = self.n_agents * self.dim;
        if idx < nd {
            (idx / self.dim, idx % self.dim)
        } else {
            ((idx - nd) / self.dim, self.dim + (idx - nd) % self.dim)
        }
    }
}

/// Communication weights at one time; diagonal entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.entries.iter().enumerate().filter(move |(k, _)| k / n != k % n).map(|(_, &v)| v)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.off_diagonal().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.off_diagonal().fold(f64::INFINITY, f64::min)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Weights from positions at `t - sigma` (`pos_sigma`) and `t - tau` (`pos_tau`).
pub fn weights_from_positions(spec: &ModelSpec, pos_sigma: &[f64], pos_tau: &[f64]) -> WeightMatrix {
    let (n, d) = (spec.n_agents, spec.dim);
    let inv = 1.0 / (n as f64 - 1.0);
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let xi = &pos_sigma[i * d..(i + 1) * d];
        for j in 0..n {
            if i != j {
                let xj = &pos_tau[j * d..(j + 1) * d];
                entries[i * n + j] = spec.influence.eval_unchecked(distance(xi, xj)) * inv;
            }
        }
    }
    WeightMatrix { n, entries }
}

/// `out_i = sum_{j != i} a_ij (q_j^tau - q_i^sigma)` with weights built from
/// positions `p`.
fn alignment(
    spec: &ModelSpec,
    p_sigma: &[f64],
    p_tau: &[f64],
    q_sigma: &[f64],
    q_tau: &[f64],
    out: &mut [f64],
) {
    let (n, d) = (spec.n_agents, spec.dim);
    let inv = 1.0 / (n as f64 - 1.0);
    out.fill(0.0);
    for i in 0..n {
        let pi = &p_sigma[i * d..(i + 1) * d];
        let qi = &q_sigma[i * d..(i + 1) * d];
        let oi = &mut out[i * d..(i + 1) * d];
        for j in 0..n {
            if i == j {
                continue;
            }
            let pj = &p_tau[j * d..(j + 1) * d];
            let a = spec.influence.eval_unchecked(distance(pi, pj)) * inv;
            let qj = &q_tau[j * d..(j + 1) * d];
            for c in 0..d {
                oi[c] += a * (qj[c] - qi[c]);
            }
        }
    }
}

/// Full state derivative given the current state and the states at
/// `t - sigma` and `t - tau`.
pub fn rhs_from_states(
    spec: &ModelSpec,
    current: &[f64],
    at_sigma: &[f64],
    at_tau: &[f64],
    out: &mut [f64],
) {
    let nd = spec.n_agents * spec.dim;
    match spec.kind {
        ModelKind::FirstOrder => alignment(spec, at_sigma, at_tau, at_sigma, at_tau, out),
        ModelKind::SecondOrder => {
            let (dx, dv) = out.split_at_mut(nd);
            dx.copy_from_slice(&current[nd..]);
            alignment(
                spec,
                &at_sigma[..nd],
                &at_tau[..nd],
                &at_sigma[nd..],
                &at_tau[nd..],
                dv,
            );
        }
    }
}

struct ModelRhs<'a>(&'a ModelSpec);

impl DelayedRhs for ModelRhs<'_> {
    fn dim(&self) -> usize {
        self.0.state_dim()
    }

    fn eval(&self, _t: f64, lookup: &StateLookup<'_>, out: &mut [f64]) {
        let at_sigma = lookup.delayed(self.0.sigma);
        let at_tau = lookup.delayed(self.0.tau);
        rhs_from_states(self.0, lookup.current(), &at_sigma, &at_tau, out);
    }
}

/// A model together with one integrated trajectory.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: ModelSpec,
    pub traj: Trajectory,
}

/// Integrates the model with step `h` up to `horizon`.
pub fn simulate(spec: &ModelSpec, history: InitialHistory, h: f64, horizon: f64) -> Result<Simulation> {
    spec.validate()?;
    if history.dim() != spec.state_dim() {
        return Err(config(format!(
            "history has dimension {}, model needs {}",
            history.dim(),
            spec.state_dim()
        )));
    }
    let traj = dde::integrate(&spec.lags(), history, &ModelRhs(spec), h, horizon)?;
    Ok(Simulation { spec: spec.clone(), traj })
}

impl Simulation {
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        self.traj.sample(t)
    }

    pub fn positions_at(&self, t: f64) -> Result<Vec<f64>> {
        let mut s = self.traj.sample(t)?;
        s.truncate(self.spec.n_agents * self.spec.dim);
        Ok(s)
    }

    pub fn velocities_at(&self, t: f64) -> Result<Vec<f64>> {
        if self.spec.kind != ModelKind::SecondOrder {
            return Err(domain("velocities exist only for second-order models"));
        }
        let s = self.traj.sample(t)?;
        Ok(s[self.spec.n_agents * self.spec.dim..].to_vec())
    }

    fn delayed_pair(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(t >= 0.0) {
            return Err(domain(format!("weights are defined for t >= 0, got {t}")));
        }
        Ok((self.traj.sample(t - self.spec.sigma)?, self.traj.sample(t - self.spec.tau)?))
    }

    /// Communication weights `a_ij(t)`.
    pub fn comm_weights(&self, t: f64) -> Result<WeightMatrix> {
        let (s, k) = self.delayed_pair(t)?;
        Ok(weights_from_positions(&self.spec, self.spec.positions(&s), self.spec.positions(&k)))
    }

    /// Right-hand side re-evaluated from the dense trajectory at `t`.
    pub fn rhs_at(&self, t: f64) -> Result<Vec<f64>> {
        let (s, k) = self.delayed_pair(t)?;
        let cur = self.traj.sample(t)?;
        let mut out = vec![0.0; self.spec.state_dim()];
        rhs_from_states(&self.spec, &cur, &s, &k, &mut out);
        Ok(out)
    }

    /// Trajectory CSV with rows `t, agent, component, value`.
    pub fn write_csv<W: std::io::Write>(&self, w: W, every: usize) -> Result<()> {
        self.traj.write_csv(w, every, false, |i| self.spec.label(i))
    }
}

/// Outcome of [`validate_initial_data`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub max_residual: f64,
    pub worst_agent: usize,
    pub worst_time: f64,
    pub tolerance: f64,
}

/// Default compatibility tolerance for second-order histories.
pub fn default_compat_tolerance(source: HistorySource) -> f64 {
    match source {
        HistorySource::Analytic => 1e-8,
        HistorySource::Tabulated => 1e-4,
    }
}

/// Checks finiteness and, for second-order models, that the history's
/// position slope matches its velocity at every knot.
pub fn validate_initial_data(
    spec: &ModelSpec,
    history: &InitialHistory,
    tolerance: Option<f64>,
) -> Result<ValidationReport> {
    spec.validate()?;
    if history.dim() != spec.state_dim() {
        return Err(config("history dimension does not match the model"));
    }
    if history.span() + 1e-12 < spec.tau {
        return Err(config(format!(
            "history covers [{}, 0] but tau = {}",
            -history.span(),
            spec.tau
        )));
    }
    let tolerance = tolerance.unwrap_or_else(|| default_compat_tolerance(history.source()));
    let mut report = ValidationReport { max_residual: 0.0, worst_agent: 0, worst_time: 0.0, tolerance };
    let times = history.knot_times();
    for (k, &t) in times.iter().enumerate() {
        let value = history.knot_value(k);
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::InitialData { agent: 0, time: t, residual: f64::INFINITY });
        }
        if spec.kind != ModelKind::SecondOrder || times.len() == 1 {
            continue;
        }
        let slope = history.knot_slope(k);
        let nd = spec.n_agents * spec.dim;
        for i in 0..spec.n_agents {
            let r = distance(&slope[i * spec.dim..(i + 1) * spec.dim], &value[nd + i * spec.dim..nd + (i + 1) * spec.dim]);
            if r > report.max_residual {
                report.max_residual = r;
                report.worst_agent = i;
                report.worst_time = t;
            }
        }
    }
    if report.max_residual > tolerance {
        return Err(Error::InitialData {
            agent: report.worst_agent,
            time: report.worst_time,
            residual: report.max_residual,
        });
    }
    Ok(report)
}

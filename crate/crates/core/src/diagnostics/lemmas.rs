//! Numerical checks of the a-priori estimates behind the consensus and
//! flocking proofs. Violations are reported, never raised.

use serde::Serialize;

use super::{
    block_range, diameter, initial_spread, speed_series, window_speed, windowed_spread, Block, Lyapunov,
    ObservableSeries, DEFAULT_REFINE,
};
use crate::certificates::{cal_w, memory_weight, window_count, z_sequence};
use crate::error::{domain, Result};
use crate::models::{ModelKind, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InequalityCheck {
    pub name: String,
    pub samples: usize,
    /// `max(0, lhs - rhs) / (rhs + 1e-9 * scale)` over all samples.
    pub max_violation: f64,
    pub max_abs_violation: f64,
    pub worst_time: Option<f64>,
}

impl InequalityCheck {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), samples: 0, max_violation: 0.0, max_abs_violation: 0.0, worst_time: None }
    }

    fn record(&mut self, t: f64, lhs: f64, rhs: f64, scale: f64) {
        self.samples += 1;
        let excess = (lhs - rhs).max(0.0);
        let denom = (rhs + 1e-9 * scale).max(f64::MIN_POSITIVE);
        let rel = excess / denom;
        if rel > self.max_violation || (self.worst_time.is_none() && excess == 0.0) {
            if rel > self.max_violation {
                self.max_violation = rel;
            }
            self.worst_time = Some(t);
        }
        self.max_abs_violation = self.max_abs_violation.max(excess);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaReport {
    pub tolerance: f64,
    pub checks: Vec<InequalityCheck>,
}

impl LemmaReport {
    pub fn get(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.max_violation).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_violation() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaOptions {
    pub refine: usize,
    pub tolerance: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self { refine: DEFAULT_REFINE, tolerance: 1e-4 }
    }
}

/// Evaluates the estimates on the run's knot grid.
///
/// Checks on the aligned block (positions for first-order runs, velocities
/// for second-order runs):
/// - `derivative-bound`: `max|u'(t)| <= d(t - tau) + int_{t-tau}^{t-sigma} max|u'|` for `t >= tau`;
/// - `windowed-spread[K=k]`: `Delta^k <= Z^k Delta^0`;
/// - `window-speed[K=k]`: `M^k <= Delta^{k-1}`;
/// - `functional-bound`: functional `<= calZ Delta^0` on `[0, 2 tau]`;
/// - `functional-dominates-diameter`.
///
/// Second-order runs add `position-growth`
/// (`d_x(t) <= d_x(0) + int_0^t d_v`) and `bootstrap-position`
/// (`|x_j(tau) - x_i(2 tau - sigma)| <= Delta^0_x + W Delta^0_v`).
/// The window-indexed checks need `sigma > 0` and are skipped otherwise.
pub fn verify_lemma_inequalities(sim: &Simulation, beta: f64, opts: &LemmaOptions) -> Result<LemmaReport> {
    let spec = &sim.spec;
    let block = match spec.kind {
        ModelKind::FirstOrder => Block::Position,
        ModelKind::SecondOrder => Block::Velocity,
    };
    let range = block_range(spec, block)?;
    let (sigma, tau, dim) = (spec.sigma, spec.tau, spec.dim);
    let refine = opts.refine.max(1);
    let traj = &sim.traj;
    let horizon = traj.horizon();
    let delta0 = initial_spread(spec, traj.history(), block, refine)?;
    let lyap = Lyapunov::new(sim, block, beta)?;
    let functional = lyap.series()?;
    let diam: ObservableSeries = super::diameter_series(sim, block)?;
    let speed = speed_series(sim, block)?;
    let mut checks = Vec::new();

    let mut deriv = InequalityCheck::new("derivative-bound");
    let mut state = vec![0.0; spec.state_dim()];
    for (k, &t) in traj.times().iter().enumerate() {
        if t < tau {
            continue;
        }
        traj.sample_into(t - tau, &mut state)?;
        let rhs = diameter(&state[range.clone()], dim) + lyap.speed_integral(t - tau, t - sigma);
        deriv.record(t, speed.values[k], rhs, delta0);
    }
    checks.push(deriv);

    let mut dom = InequalityCheck::new("functional-dominates-diameter");
    for (k, &t) in functional.times.iter().enumerate() {
        dom.record(t, diam.values[k], functional.values[k], delta0);
    }
    checks.push(dom);

    let windows = if sigma > 0.0 { Some(window_count(sigma, tau)?) } else { None };
    let (cal_z_val, z) = match windows {
        Some(kk) => {
            let z = z_sequence(sigma, kk)?;
            let cz = if kk >= 1 { z[kk] + z[kk - 1] * beta * memory_weight(tau) } else { z[0] };
            (Some(cz), z)
        }
        None if tau == 0.0 => (Some(1.0), vec![1.0]),
        None => (None, Vec::new()),
    };

    if let Some(kk) = windows {
        let mut prev = delta0;
        for k in 1..=kk {
            if k as f64 * sigma > horizon * (1.0 + 1e-12) {
                break;
            }
            let dk = windowed_spread(sim, block, k, refine)?;
            let mk = window_speed(sim, block, k, refine)?;
            let mut c = InequalityCheck::new(format!("windowed-spread[K={k}]"));
            c.record(k as f64 * sigma, dk, z[k] * delta0, delta0);
            checks.push(c);
            let mut c = InequalityCheck::new(format!("window-speed[K={k}]"));
            c.record(k as f64 * sigma, mk, prev, delta0);
            checks.push(c);
            prev = dk;
        }
    }

    if let Some(cz) = cal_z_val {
        let mut c = InequalityCheck::new("functional-bound");
        let end = 2.0 * tau * (1.0 + 1e-12);
        for (k, &t) in functional.times.iter().enumerate() {
            if t > end {
                break;
            }
            c.record(t, functional.values[k], cz * delta0, delta0);
        }
        checks.push(c);
    }

    if spec.kind == ModelKind::SecondOrder {
        let dx = super::diameter_series(sim, Block::Position)?;
        let dx0 = initial_spread(spec, traj.history(), Block::Position, refine)?;
        let scale = dx0.max(delta0);
        let mut growth = InequalityCheck::new("position-growth");
        let mut acc = 0.0;
        for k in 0..dx.len() {
            if k > 0 {
                acc += 0.5 * (diam.times[k] - diam.times[k - 1]) * (diam.values[k] + diam.values[k - 1]);
            }
            growth.record(dx.times[k], dx.values[k], dx.values[0] + acc, scale);
        }
        checks.push(growth);

        if let Some(kk) = windows.filter(|&k| k >= 1) {
            if 2.0 * tau - sigma <= horizon {
                let nd = spec.n_agents * dim;
                let a = traj.sample(tau)?;
                let b = traj.sample(2.0 * tau - sigma)?;
                let lhs = super::cross_diameter(&a[..nd], &b[..nd], dim);
                let mut c = InequalityCheck::new("bootstrap-position");
                c.record(tau, lhs, dx0 + cal_w(sigma, kk)? * delta0, scale);
                checks.push(c);
            }
        }
    }

    if checks.iter().any(|c| !c.max_violation.is_finite()) {
        return Err(domain("non-finite inequality residual"));
    }
    Ok(LemmaReport { tolerance: opts.tolerance, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::InitialHistory;
    use crate::influence::InfluenceFunction;
    use crate::models::{random_history, simulate, ModelSpec, RandomBox};

    #[test]
    fn equilibrium_has_zero_residuals() {
        let spec = ModelSpec::new(3, 2, 0.05, 0.1, ModelKind::FirstOrder, InfluenceFunction::unit()).unwrap();
        let hist = InitialHistory::constant(0.1, vec![0.5; 6]).unwrap();
        let sim = simulate(&spec, hist, 0.01, 1.0).unwrap();
        let rep = verify_lemma_inequalities(&sim, 1.0, &LemmaOptions::default()).unwrap();
        assert_eq!(rep.max_violation(), 0.0);
        assert!(rep.get("windowed-spread[K=4]").is_some());
    }

    #[test]
    fn random_runs_respect_the_estimates() {
        let psi = InfluenceFunction::power_law(0.5).unwrap();
        let spec = ModelSpec::new(4, 2, 0.03, 0.07, ModelKind::FirstOrder, psi.clone()).unwrap();
        let hist = random_history(&spec, 0.005, 11, &RandomBox::default()).unwrap();
        let sim = simulate(&spec, hist, 0.005, 3.0).unwrap();
        let rep = verify_lemma_inequalities(&sim, 0.5, &LemmaOptions::default()).unwrap();
        assert!(rep.passed(), "{rep:#?}");

        let spec2 = ModelSpec::new(4, 2, 0.03, 0.07, ModelKind::SecondOrder, psi).unwrap();
        let hist2 = random_history(&spec2, 0.005, 12, &RandomBox::default()).unwrap();
        let sim2 = simulate(&spec2, hist2, 0.005, 3.0).unwrap();
        let rep2 = verify_lemma_inequalities(&sim2, 0.5, &LemmaOptions::default()).unwrap();
        assert!(rep2.passed(), "{rep2:#?}");
        assert!(rep2.get("bootstrap-position").is_some());
        assert!(rep2.get("position-growth").is_some());
    }
}

//! Batches of seeded runs.
//!
//! Each run is simulated, handed to an analysis closure and dropped, so a
//! batch never holds more than one trajectory per worker.

use crate::error::Result;
use crate::exec::Exec;
use crate::models::{random_history, simulate, ModelSpec, RandomBox, Simulation};

/// One seeded random-history run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeededRun {
    pub spec: ModelSpec,
    pub bounds: RandomBox,
    pub seed: u64,
    pub h: f64,
    pub horizon: f64,
}

impl SeededRun {
    pub fn simulate(&self) -> Result<Simulation> {
        let hist = random_history(&self.spec, self.h, self.seed, &self.bounds)?;
        simulate(&self.spec, hist, self.h, self.horizon)
    }
}

/// Simulates every run and applies `analyze`; results keep input order.
pub fn run_batch<R, F>(runs: &[SeededRun], exec: Exec, analyze: F) -> Vec<Result<R>>
where
    R: Send,
    F: Fn(&SeededRun, &Simulation) -> Result<R> + Sync + Send,
{
    exec.map(runs, |run| {
        let sim = run.simulate()?;
        analyze(run, &sim)
    })
}

//! Stochastic solvers and the trial/batch drivers.
//!
//! Initial conditions: both Langevin variants start at the box midpoint,
//! the delay-line machine at vacuum `c = s = 0`, and the measurement-feedback
//! machine at `μ = 0`, `σ = ½`. Langevin variants clamp into the box on every
//! step and, unless `keep_best` is off, report the best iterate they visited;
//! the two machines only clamp when the final amplitudes are decoded.

mod dynamics;
mod params;
mod schedule;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dynamics::{
    decode_amplitudes, decode_dl, decode_mf, dl_diffusion, dl_drift, measured_mean_from_increment,
    mf_diffusion, mf_encoded_drift, mf_measured_mean, step_dl_ccvm, step_langevin, step_mf_ccvm,
    step_pumped_langevin, DIVERGENCE_LIMIT,
};
pub use params::{
    DlParams, LangevinParams, MfParams, PumpedLangevinParams, Readout, SolverKind, SolverParams,
};
pub use schedule::Schedule;

use crate::error::{Error, Result};
use crate::problem::{BoxQpInstance, SolutionVector};
use crate::rng;
use dynamics::Workspace;

/// Final internal state of a trial, before decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverState {
    Amplitudes {
        c: Vec<f64>,
    },
    Quadratures {
        c: Vec<f64>,
        s: Vec<f64>,
    },
    MeanField {
        mu: Vec<f64>,
        sigma: Vec<f64>,
        mu_tilde: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub x: SolutionVector,
    pub raw_final_state: SolverState,
    pub seed: u64,
    pub n_iter_used: usize,
}

/// A trial that stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub seed: u64,
    pub iteration: Option<usize>,
    pub message: String,
}

pub type TrialOutcome = std::result::Result<TrialResult, TrialFailure>;

/// Runs one trial from the solver's initial condition for `n_iter` steps.
pub fn run_trial(inst: &BoxQpInstance, params: &SolverParams, seed: u64) -> Result<TrialResult> {
    params.validate()?;
    let n = inst.n();
    let mut rng = rng::seeded(seed);
    let mut ws = Workspace::new(n);
    let n_iter = params.n_iter();
    let dt = params.dt();

    let (x, state) = match params {
        SolverParams::Langevin(p) => {
            let mut c = inst.midpoint();
            let mut best = BestIterate::new(p.keep_best, n);
            for k in 0..n_iter {
                best.stage(&c);
                dynamics::langevin_step_ws(&mut c, inst, p, &mut rng, k, &mut ws)?;
                best.offer(ws.start_objective);
            }
            (best.finish(inst, &c)?, SolverState::Amplitudes { c })
        }
        SolverParams::PumpedLangevin(p) => {
            let mut c = inst.midpoint();
            let mut best = BestIterate::new(p.keep_best, n);
            for k in 0..n_iter {
                let t = k as f64 * dt;
                best.stage(&c);
                dynamics::pumped_step_ws(&mut c, inst, p, t, &mut rng, k, &mut ws)?;
                best.offer(ws.start_objective);
            }
            (best.finish(inst, &c)?, SolverState::Amplitudes { c })
        }
        SolverParams::DlCcvm(p) => {
            let mut c = vec![0.0; n];
            let mut s = vec![0.0; n];
            ws.gain = p.coupling_gain(inst);
            for k in 0..n_iter {
                let t = k as f64 * dt;
                dynamics::dl_step_ws(&mut c, &mut s, inst, p, t, &mut rng, k, &mut ws)?;
            }
            (
                decode_dl(&c, p.saturation(), inst)?,
                SolverState::Quadratures { c, s },
            )
        }
        SolverParams::MfCcvm(p) => {
            let mut mu = vec![0.0; n];
            let mut sigma = vec![0.5; n];
            let mut mu_tilde = vec![0.0; n];
            for k in 0..n_iter {
                let t = k as f64 * dt;
                dynamics::mf_step_ws(
                    &mut mu,
                    &mut sigma,
                    &mut mu_tilde,
                    inst,
                    p,
                    t,
                    &mut rng,
                    k,
                    &mut ws,
                )?;
            }
            (
                decode_mf(p.readout.select(&mu, &mu_tilde), p.s_sat, inst)?,
                SolverState::MeanField {
                    mu,
                    sigma,
                    mu_tilde,
                },
            )
        }
    };
    debug_assert!(inst.contains(&x.x));
    Ok(TrialResult {
        x,
        raw_final_state: state,
        seed,
        n_iter_used: n_iter,
    })
}

/// Tracks the best iterate of a Langevin trajectory. Every iterate is
/// already inside the box, so any of them is a valid answer.
struct BestIterate {
    enabled: bool,
    staged: Vec<f64>,
    best: Vec<f64>,
    best_objective: f64,
}

impl BestIterate {
    fn new(enabled: bool, n: usize) -> Self {
        Self {
            enabled,
            staged: vec![0.0; if enabled { n } else { 0 }],
            best: Vec::new(),
            best_objective: f64::NEG_INFINITY,
        }
    }

    fn stage(&mut self, c: &[f64]) {
        if self.enabled {
            self.staged.copy_from_slice(c);
        }
    }

    /// `objective` belongs to the staged state.
    fn offer(&mut self, objective: f64) {
        if self.enabled && objective > self.best_objective {
            self.best_objective = objective;
            self.best.clone_from(&self.staged);
        }
    }

    fn finish(self, inst: &BoxQpInstance, last: &[f64]) -> Result<SolutionVector> {
        let last = inst.solution(last.to_vec())?;
        if self.enabled && !self.best.is_empty() {
            let best = inst.solution(self.best)?;
            if best.objective > last.objective {
                return Ok(best);
            }
        }
        Ok(last)
    }
}

fn outcome(inst: &BoxQpInstance, params: &SolverParams, seed: u64) -> TrialOutcome {
    run_trial(inst, params, seed).map_err(|e| TrialFailure {
        seed,
        iteration: match e {
            Error::Divergence { iteration, .. } => Some(iteration),
            _ => None,
        },
        message: e.to_string(),
    })
}

/// How a batch is scheduled; results never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Runs `n_trials` independent trials; trial `k` uses
/// [`rng::child_seed`]`(master_seed, k)`.
pub fn run_batch(
    inst: &BoxQpInstance,
    params: &SolverParams,
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<TrialOutcome>> {
    run_batch_with(inst, params, n_trials, master_seed, Execution::Parallel)
}

pub fn run_batch_with(
    inst: &BoxQpInstance,
    params: &SolverParams,
    n_trials: usize,
    master_seed: u64,
    execution: Execution,
) -> Result<Vec<TrialOutcome>> {
    Ok(
        run_batch_timed(inst, params, n_trials, master_seed, execution)?
            .into_iter()
            .map(|(o, _)| o)
            .collect(),
    )
}

/// Like [`run_batch_with`], also returning each trial's wall time in seconds.
pub fn run_batch_timed(
    inst: &BoxQpInstance,
    params: &SolverParams,
    n_trials: usize,
    master_seed: u64,
    execution: Execution,
) -> Result<Vec<(TrialOutcome, f64)>> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    params.validate()?;
    let one = |k: usize| {
        let seed = rng::child_seed(master_seed, k as u64);
        let start = Instant::now();
        let o = outcome(inst, params, seed);
        (o, start.elapsed().as_secs_f64())
    };
    Ok(match execution {
        Execution::Serial => (0..n_trials).map(one).collect(),
        Execution::Parallel => (0..n_trials).into_par_iter().map(one).collect(),
    })
}

#[cfg(test)]
mod tests;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats;
use crate::error::Result;
use crate::model::{norm, sample_dataset, ConstraintSet, LossSpec, ModelSpec};
use crate::optimizer::{sup_gap, OptimizerConfig};
use crate::rng::derive_seed;

/// Everything needed to run one trial apart from its seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialConfig {
    pub model: ModelSpec,
    pub constraints: ConstraintSet,
    pub loss: LossSpec,
    pub n: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Zero wall-clock fields so that reruns are byte-identical.
    pub reproducible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub trial_seed: u64,
    /// Absent when the trial failed.
    pub sup_value: Option<f64>,
    pub argmax_w_norm: Option<f64>,
    pub argmax_b: Option<f64>,
    pub runtime_ms: u64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub config: TrialConfig,
    pub master_seed: u64,
    pub trials: Vec<TrialRecord>,
    pub mean_sup: f64,
    pub sd_sup: f64,
    pub created_at: u64,
    pub code_version: String,
}

impl PartialEq for TrialConfig {
    fn eq(&self, o: &Self) -> bool {
        self.model == o.model
            && self.constraints == o.constraints
            && self.loss.name() == o.loss.name()
            && self.loss.lipschitz == o.loss.lipschitz
            && self.n == o.n
            && self.optimizer == o.optimizer
    }
}

impl TrialBatch {
    /// Values of the successful trials in index order.
    pub fn sup_values(&self) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.sup_value).collect()
    }

    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.sup_value.is_none()).count()
    }

    /// Standard error of `mean_sup`.
    pub fn se_mean(&self) -> f64 {
        let k = self.sup_values().len();
        if k == 0 {
            f64::NAN
        } else {
            self.sd_sup / (k as f64).sqrt()
        }
    }

    pub(crate) fn from_trials(config: TrialConfig, master_seed: u64, trials: Vec<TrialRecord>, created_at: u64) -> Self {
        let v: Vec<f64> = trials.iter().filter_map(|t| t.sup_value).collect();
        TrialBatch {
            config,
            master_seed,
            mean_sup: stats::mean(&v),
            sd_sup: stats::sd(&v),
            trials,
            created_at,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// One dataset and its supremum; seeds the data and the optimizer from `trial_seed`.
pub fn run_trial(config: &TrialConfig, index: usize, trial_seed: u64, opts: RunOptions) -> TrialRecord {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<_> {
        let data = sample_dataset(&config.model, config.n, trial_seed)?;
        sup_gap(&data, &config.model, &config.loss, &config.constraints, &config.optimizer, trial_seed)
    }));
    let runtime_ms = if opts.reproducible { 0 } else { start.elapsed().as_millis() as u64 };
    let failed = |msg: String| TrialRecord {
        index,
        trial_seed,
        sup_value: None,
        argmax_w_norm: None,
        argmax_b: None,
        runtime_ms,
        converged: false,
        error: Some(msg),
    };
    match outcome {
        Ok(Ok(r)) => TrialRecord {
            index,
            trial_seed,
            sup_value: Some(r.value),
            argmax_w_norm: Some(norm(&r.argmax_w)),
            argmax_b: Some(r.argmax_b),
            runtime_ms,
            converged: r.converged,
            error: None,
        },
        Ok(Err(e)) => failed(e.to_string()),
        Err(p) => failed(format!(
            "panic: {}",
            p.downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_default()
        )),
    }
}

/// Run `m` independent trials in parallel; results are ordered by index and
/// do not depend on the thread count.
pub fn run_trials(config: &TrialConfig, m: usize, master_seed: u64, opts: RunOptions) -> Result<TrialBatch> {
    config.optimizer.validate()?;
    let trials: Vec<TrialRecord> = (0..m)
        .into_par_iter()
        .map(|i| run_trial(config, i, derive_seed(master_seed, i as u64), opts))
        .collect();
    let created_at = if opts.reproducible {
        0
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
    };
    for t in trials.iter().filter(|t| t.error.is_some()) {
        log::warn!("trial {} failed: {}", t.index, t.error.as_deref().unwrap_or(""));
    }
    Ok(TrialBatch::from_trials(config.clone(), master_seed, trials, created_at))
}

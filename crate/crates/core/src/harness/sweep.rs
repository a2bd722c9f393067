use serde::{Deserialize, Serialize};

use super::stats;
use super::trials::{run_trials, RunOptions, TrialConfig};
use crate::analytics::{k_constants, KRequest};
use crate::bounds::{best_residual, BoundInput, Mode};
use crate::error::{Error, Result};
use crate::model::{ConstraintSet, Covariance, LinkKind, LossSpec, ModelSpec};
use crate::optimizer::OptimizerConfig;
use crate::rng::derive_seed;

/// Smallest eigenvalue kept when a geometric spectrum decays below it.
const SPECTRUM_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: usize,
    pub n: usize,
    /// `tr Σ / λ_max(Σ)`.
    pub effective_rank: f64,
    pub mean_sup: f64,
    pub se_mean: f64,
    pub rademacher: f64,
    /// Best residual at the preset δ.
    pub residual: f64,
    pub residual_name: String,
    pub failures: usize,
}

impl SweepRow {
    pub fn within_rademacher(&self) -> bool {
        self.mean_sup <= self.rademacher + 3.0 * self.se_mean
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Effective-rank sweep: Spearman correlation of `mean_sup` with `n` per
    /// effective rank. Proportional sweep: one entry, the log-log slope of
    /// the residual against `n`.
    pub trend: Vec<(f64, f64)>,
}

/// Eigenvalues `r^k`, `k < dim`, with `Σ r^k = d_star` (largest eigenvalue 1).
pub fn geometric_spectrum(dim: usize, d_star: f64) -> Result<Vec<f64>> {
    if dim == 0 || !(1.0..=dim as f64).contains(&d_star) {
        return Err(Error::InvalidArgument(format!("effective rank {d_star} not in [1, {dim}]")));
    }
    let total = |r: f64| (0..dim).map(|k| r.powi(k as i32)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < d_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    Ok((0..dim).map(|k| r.powi(k as i32).max(SPECTRUM_FLOOR)).collect())
}

fn row_for(config: &TrialConfig, m: usize, seed: u64, delta: f64, opts: RunOptions) -> Result<SweepRow> {
    let batch = run_trials(config, m, seed, opts)?;
    let k = k_constants(&config.model, &KRequest::default())?;
    let input = BoundInput::new(
        config.model.clone(),
        config.constraints,
        config.loss.lipschitz,
        config.n,
        delta,
        k,
        Mode::Poincare,
    )?;
    let report = best_residual(&input)?;
    let (residual, residual_name) = report
        .best
        .map(|b| (b.residual, format!("{}/{}", b.name, b.mode.as_str())))
        .unwrap_or((f64::INFINITY, "none".into()));
    Ok(SweepRow {
        dim: config.model.dim(),
        n: config.n,
        effective_rank: config.model.cov_trace() / config.model.cov_lambda_max(),
        mean_sup: batch.mean_sup,
        se_mean: batch.se_mean(),
        rademacher: report.rademacher_expectation_bound,
        residual,
        residual_name,
        failures: batch.failures(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveRankPreset {
    pub dim: usize,
    pub effective_ranks: Vec<f64>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub r_w: f64,
    pub r_b: f64,
    pub delta: f64,
    pub link: LinkKind,
    pub optimizer: OptimizerConfig,
}

impl Default for EffectiveRankPreset {
    fn default() -> Self {
        EffectiveRankPreset {
            dim: 20,
            effective_ranks: vec![1.0, 2.0, 5.0, 10.0],
            ns: vec![50, 100, 200, 400],
            trials: 100,
            r_w: 1.0,
            r_b: 0.5,
            delta: 0.1,
            link: LinkKind::Logistic,
            optimizer: OptimizerConfig { restarts: 8, ..Default::default() },
        }
    }
}

/// Unbiased model with geometric spectral decay; an effective rank of one
/// uses a one-dimensional input.
pub fn effective_rank_sweep(preset: &EffectiveRankPreset, seed: u64, opts: RunOptions) -> Result<SweepTable> {
    let mut rows = Vec::new();
    let mut trend = Vec::new();
    let mut idx = 0u64;
    for &d_star in &preset.effective_ranks {
        let (dim, spectrum) = if d_star == 1.0 {
            (1, vec![1.0])
        } else {
            (preset.dim, geometric_spectrum(preset.dim, d_star)?)
        };
        let model = ModelSpec::new(dim, Covariance::Diagonal(spectrum), vec![0.0; dim], 0.0, None, preset.link)?;
        let mut group = Vec::new();
        for &n in &preset.ns {
            let config = TrialConfig {
                model: model.clone(),
                constraints: ConstraintSet::new(preset.r_w, preset.r_b)?,
                loss: LossSpec::logistic(),
                n,
                optimizer: preset.optimizer.clone(),
            };
            let row = row_for(&config, preset.trials, derive_seed(seed, idx), preset.delta, opts)?;
            idx += 1;
            log::info!("effective rank {d_star}, n {n}: mean_sup {:.5}", row.mean_sup);
            group.push(row);
        }
        let ns: Vec<f64> = group.iter().map(|r| r.n as f64).collect();
        let means: Vec<f64> = group.iter().map(|r| r.mean_sup).collect();
        trend.push((d_star, stats::spearman(&ns, &means)));
        rows.extend(group);
    }
    Ok(SweepTable { rows, trend })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProportionalPreset {
    pub sizes: Vec<usize>,
    pub r1: f64,
    pub r_b: f64,
    pub trials: usize,
    pub delta: f64,
    pub link: LinkKind,
    pub optimizer: OptimizerConfig,
}

impl Default for ProportionalPreset {
    fn default() -> Self {
        ProportionalPreset {
            sizes: vec![50, 100, 200],
            r1: 1.0,
            r_b: 0.0,
            trials: 300,
            delta: 0.1,
            link: LinkKind::Logistic,
            optimizer: OptimizerConfig { restarts: 8, ..Default::default() },
        }
    }
}

/// `d = n`, `Σ = I/d`, `R_w = √d·R₁`, `θ₁ = (1, …, 1)` so that the signal
/// variance stays one.
pub fn proportional_sweep(preset: &ProportionalPreset, seed: u64, opts: RunOptions) -> Result<SweepTable> {
    let mut rows = Vec::new();
    for (i, &d) in preset.sizes.iter().enumerate() {
        let model = ModelSpec::spherical(1.0 / d as f64, vec![1.0; d], 0.0, preset.link)?;
        let config = TrialConfig {
            model,
            constraints: ConstraintSet::new((d as f64).sqrt() * preset.r1, preset.r_b)?,
            loss: LossSpec::logistic(),
            n: d,
            optimizer: preset.optimizer.clone(),
        };
        let row = row_for(&config, preset.trials, derive_seed(seed, i as u64), preset.delta, opts)?;
        log::info!("d = n = {d}: mean_sup {:.5}, residual {:.5}", row.mean_sup, row.residual);
        rows.push(row);
    }
    let ln_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ln_r: Vec<f64> = rows.iter().map(|r| r.residual.ln()).collect();
    let slope = if rows.len() >= 2 && ln_r.iter().all(|v| v.is_finite()) {
        stats::ols_slope(&ln_n, &ln_r)
    } else {
        f64::NAN
    };
    Ok(SweepTable { rows, trend: vec![(f64::NAN, slope)] })
}

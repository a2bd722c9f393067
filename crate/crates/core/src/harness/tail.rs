use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::stats;
use super::trials::TrialBatch;
use crate::analytics::KConstants;
use crate::bounds::{report_with, BoundInput, Functionals, Mode, Outcome};
use crate::error::{Error, Result};

pub const DEFAULT_DELTAS: [f64; 4] = [0.5, 0.2, 0.1, 0.05];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TailCheckOptions {
    pub deltas: Vec<f64>,
    pub level: f64,
    /// Divide `level` by the number of non-control rows.
    pub bonferroni: bool,
    pub min_trials: usize,
    pub allow_small: bool,
    /// Estimate the mean on the first half and count exceedances on the second.
    pub split: bool,
    /// Scale applied to the best residual for the negative-control row.
    pub negative_control: Option<f64>,
}

impl Default for TailCheckOptions {
    fn default() -> Self {
        TailCheckOptions {
            deltas: DEFAULT_DELTAS.to_vec(),
            level: 0.01,
            bonferroni: true,
            min_trials: 100,
            allow_small: false,
            split: false,
            negative_control: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PASS" => Some(Verdict::Pass),
            "FAIL" => Some(Verdict::Fail),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub delta: f64,
    /// `best`, `negative_control`, or `<entry>/<mode>`.
    pub residual_name: String,
    pub residual: f64,
    pub exceed: usize,
    pub m: usize,
    pub rate: f64,
    pub pvalue: f64,
    pub verdict: Verdict,
}

impl TailRow {
    pub fn is_control(&self) -> bool {
        self.residual_name == "negative_control"
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailCheckResult {
    pub rows: Vec<TailRow>,
    pub mean_sup: f64,
    pub se_mean: f64,
    /// Level applied to each non-control row.
    pub row_level: f64,
    pub split: bool,
}

impl TailCheckResult {
    /// Every non-control row passes.
    pub fn passed(&self) -> bool {
        self.rows.iter().filter(|r| !r.is_control()).all(|r| r.verdict == Verdict::Pass)
    }

    pub fn control_rows(&self) -> impl Iterator<Item = &TailRow> {
        self.rows.iter().filter(|r| r.is_control())
    }
}

/// `P(X ≥ k)` for `X ~ Bin(m, p)`.
pub fn binomial_upper_tail(k: usize, m: usize, p: f64) -> f64 {
    if k == 0 || p >= 1.0 {
        return 1.0;
    }
    if k > m || p <= 0.0 {
        return 0.0;
    }
    Binomial::new(p, m as u64).map_or(f64::NAN, |b| b.sf(k as u64 - 1))
}

/// Count how often `sup − mean` exceeds `2·SE + residual` and test the
/// rate against δ with an exact one-sided binomial test.
pub fn tail_check(batch: &TrialBatch, kconst: &KConstants, opts: &TailCheckOptions) -> Result<TailCheckResult> {
    let values = batch.sup_values();
    if values.len() < opts.min_trials && !opts.allow_small {
        return Err(Error::InsufficientTrials { got: values.len(), min: opts.min_trials });
    }
    if values.len() < 2 || (opts.split && values.len() < 4) {
        return Err(Error::InsufficientTrials { got: values.len(), min: 4 });
    }
    let (est, test) = if opts.split {
        values.split_at(values.len() / 2)
    } else {
        (&values[..], &values[..])
    };
    let mean = stats::mean(est);
    let se = stats::se(est);

    let cfg = &batch.config;
    let template = BoundInput::new(
        cfg.model.clone(),
        cfg.constraints,
        cfg.loss.lipschitz,
        cfg.n,
        opts.deltas.first().copied().unwrap_or(0.5),
        kconst.clone(),
        Mode::Poincare,
    )?;
    let functionals = Functionals::compute(&cfg.model);

    let mut pending: Vec<(f64, String, f64)> = Vec::new();
    for &delta in &opts.deltas {
        let report = report_with(&template.with_delta(delta), functionals.clone());
        report.inputs.validate()?;
        let Some(best) = report.best.as_ref() else {
            continue;
        };
        pending.push((delta, "best".into(), best.residual));
        for e in &report.entries {
            if let Outcome::Applicable { value, .. } = e.outcome {
                pending.push((delta, format!("{}/{}", e.name, e.mode.as_str()), value));
            }
        }
        if let Some(scale) = opts.negative_control {
            pending.push((delta, "negative_control".into(), best.residual * scale));
        }
    }
    let tested = pending.iter().filter(|p| p.1 != "negative_control").count().max(1);
    let row_level = if opts.bonferroni { opts.level / tested as f64 } else { opts.level };

    let m = test.len();
    let rows = pending
        .into_iter()
        .map(|(delta, name, residual)| {
            let threshold = mean + 2.0 * se + residual;
            let exceed = test.iter().filter(|&&v| v >= threshold).count();
            let pvalue = binomial_upper_tail(exceed, m, delta);
            let level = if name == "negative_control" { opts.level } else { row_level };
            TailRow {
                delta,
                residual_name: name,
                residual,
                exceed,
                m,
                rate: exceed as f64 / m as f64,
                pvalue,
                verdict: if pvalue < level { Verdict::Fail } else { Verdict::Pass },
            }
        })
        .collect();
    Ok(TailCheckResult { rows, mean_sup: mean, se_mean: se, row_level, split: opts.split })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_tail_matches_direct_sum() {
        let (m, p) = (20usize, 0.3f64);
        let pmf = |k: usize| {
            let mut c = 1.0;
            for i in 0..k {
                c *= (m - i) as f64 / (i + 1) as f64;
            }
            c * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32)
        };
        for k in 0..=m {
            let direct: f64 = (k..=m).map(pmf).sum();
            assert!((binomial_upper_tail(k, m, p) - direct).abs() < 1e-12, "k={k}");
        }
        assert_eq!(binomial_upper_tail(0, 10, 0.5), 1.0);
        assert_eq!(binomial_upper_tail(11, 10, 0.5), 0.0);
    }
}

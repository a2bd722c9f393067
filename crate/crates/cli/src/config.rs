use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use isoperi::analytics::KRequest;
use isoperi::harness::{EffectiveRankPreset, FICheckOptions, ProportionalPreset, DEFAULT_DELTAS};
use isoperi::model::{ConstraintSet, Covariance, LinkKind, LossSpec, ModelSpec};
use isoperi::optimizer::OptimizerConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleConfig {
    pub instances: usize,
    pub resolution: usize,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { instances: 20, resolution: 41, tolerance: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub constraints: ConstraintSet,
    pub loss: LossSpec,
    pub n: usize,
    pub trials: usize,
    pub deltas: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub constants: KRequest,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Binomial test level per tail row before the Bonferroni split.
    pub level: f64,
    pub split: bool,
    /// Scale of the negative-control residual.
    pub control_scale: f64,
    pub fi: FICheckOptions,
    /// Tolerated FI failures before the check counts as failed.
    pub fi_max_failures: usize,
    pub effective_rank: EffectiveRankPreset,
    pub proportional: ProportionalPreset,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec::new(
                5,
                Covariance::Spherical(0.2),
                vec![1.0, 0.5, 0.0, -0.5, 0.3],
                0.0,
                None,
                LinkKind::Logistic,
            )
            .expect("default model is valid"),
            constraints: ConstraintSet { r_w: 1.0, r_b: 0.5 },
            loss: LossSpec::logistic(),
            n: 200,
            trials: 500,
            deltas: DEFAULT_DELTAS.to_vec(),
            optimizer: OptimizerConfig { audit: false, ..Default::default() },
            constants: KRequest::default(),
            master_seed: 0,
            out_dir: PathBuf::from("isoperi-out"),
            level: 0.01,
            split: false,
            control_scale: 0.05,
            fi: FICheckOptions::default(),
            fi_max_failures: 2,
            effective_rank: EffectiveRankPreset::default(),
            proportional: ProportionalPreset::default(),
            oracle: OracleConfig::default(),
        }
    }
}

/// Objects merge key by key; the model is replaced whole because its
/// fields must agree in dimension.
fn merge(base: &mut Value, over: Value, key: Option<&str>) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) if key != Some("model") => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, Some(&k)),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply `a.b.c=value`; the value is parsed as JSON, else taken as a string.
fn set_path(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects key=value, got `{assignment}`"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| anyhow!("`{}` is not an object", keys[..i].join(".")))?;
        if i + 1 == keys.len() {
            obj.insert(k.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let over: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if !over.is_object() {
                bail!("{} must hold a JSON object", p.display());
            }
            merge(&mut value, over, None);
        }
        for s in sets {
            set_path(&mut value, s)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ConstraintSet::new(self.constraints.r_w, self.constraints.r_b)?;
        self.optimizer.validate()?;
        if self.n == 0 || self.trials == 0 {
            bail!("n and trials must be positive");
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            bail!("deltas must lie in (0, 1]");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            bail!("level must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Create `dir` and prove it accepts files before any computation starts.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let probe = dir.join(".isoperi-write-probe");
    std::fs::write(&probe, b"").with_context(|| format!("{} is not writable", dir.display()))?;
    std::fs::remove_file(&probe).ok();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_overrides_nested_fields() {
        let cfg = RunConfig::load(None, &["model.theta0=0.5".into(), "constraints.r_b=2".into(), "n=30".into()]).unwrap();
        assert_eq!(cfg.model.theta0(), 0.5);
        assert_eq!(cfg.constraints.r_b, 2.0);
        assert_eq!(cfg.n, 30);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(RunConfig::load(None, &["deltas=[0]".into()]).is_err());
        assert!(RunConfig::load(None, &["model.theta1=[1]".into()]).is_err());
        assert!(RunConfig::load(None, &["nonsense".into()]).is_err());
    }

    #[test]
    fn file_model_replaces_default() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(
            &p,
            r#"{"model": {"dim": 2, "covariance": {"kind": "spherical", "value": 1.0},
                "theta1": [1, 0], "theta0": 0, "link": "probit"}, "trials": 7}"#,
        )
        .unwrap();
        let cfg = RunConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(cfg.model.dim(), 2);
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.n, 200);
    }
}

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use isoperi::analytics::{k_constants, KConstants};
use isoperi::bounds::{best_residual, report_with, BoundInput, BoundReport, Functionals, Mode, Outcome};
use isoperi::harness::{
    effective_rank_sweep, fi_check, proportional_sweep, run_trials, save_batch, tail_check, write_tail_csv, RunOptions,
    SweepTable, TailCheckOptions, TailCheckResult, Verdict,
};
use isoperi::model::{sample_dataset, LossSpec};
use isoperi::optimizer::{grid_oracle_sup, sup_gap, GRID_MAX_DIM};
use isoperi::rng::derive_seed;

use crate::config::RunConfig;
use crate::svg::{render, TailPlot};

/// Whether every check that is expected to pass did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
}

fn constants(cfg: &RunConfig) -> Result<KConstants> {
    let k = k_constants(&cfg.model, &cfg.constants)?;
    for note in &k.notes {
        log::warn!("{note}");
    }
    Ok(k)
}

fn bound_input(cfg: &RunConfig, k: &KConstants, delta: f64) -> Result<BoundInput> {
    Ok(BoundInput::new(
        cfg.model.clone(),
        cfg.constraints,
        cfg.loss.lipschitz,
        cfg.n,
        delta,
        k.clone(),
        Mode::Poincare,
    )?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_report(r: &BoundReport) {
    println!("delta = {}", r.inputs.delta);
    println!("  {:<16} {:<11} residual", "entry", "mode");
    for e in &r.entries {
        let cell = match &e.outcome {
            Outcome::Applicable { value, log_value, .. } if value.is_finite() => format!("{value:.6e}"),
            Outcome::Applicable { log_value, .. } => format!("exp({log_value:.3}) (overflow)"),
            Outcome::Inapplicable { message, .. } => format!("inapplicable: {message}"),
        };
        println!("  {:<16} {:<11} {}", e.name, e.mode.as_str(), cell);
    }
    match &r.best {
        Some(b) => println!("  best: {} ({}) = {:.6e}", b.name, b.mode.as_str(), b.residual),
        None => println!("  best: none applicable"),
    }
    println!("  rademacher expectation bound: {:.6e}", r.rademacher_expectation_bound);
}

pub fn bounds(cfg: &RunConfig, out: &Path) -> Result<Status> {
    let k = constants(cfg)?;
    let mut reports = Vec::new();
    for &delta in &cfg.deltas {
        let r = best_residual(&bound_input(cfg, &k, delta)?)?;
        if r.best.as_ref().is_some_and(|b| !b.residual.is_finite()) {
            log::warn!("every applicable residual at delta {delta} overflows; see log_value");
        }
        print_report(&r);
        reports.push(r);
    }
    write_json(&out.join("bounds.json"), &reports)?;
    Ok(Status::Ok)
}

fn envelope(input: &BoundInput, f: &Functionals, m: usize, offset: f64) -> Vec<(f64, f64)> {
    let lo = (1.0 / m as f64).max(1e-6).ln();
    let hi = 0.9f64.ln();
    (0..=40)
        .filter_map(|i| {
            let delta = (hi + (lo - hi) * i as f64 / 40.0).exp();
            let r = report_with(&input.with_delta(delta), f.clone());
            r.best.map(|b| (offset + b.residual, delta))
        })
        .collect()
}

fn print_tail(t: &TailCheckResult) {
    println!(
        "mean_sup = {:.6}, SE = {:.2e}, per-row level = {:.2e}{}",
        t.mean_sup,
        t.se_mean,
        t.row_level,
        if t.split { " (split batch)" } else { "" }
    );
    println!("  {:>5} {:<26} {:>11} {:>7} {:>9} {:>10}  verdict", "delta", "residual", "value", "exceed", "rate", "p-value");
    for r in &t.rows {
        println!(
            "  {:>5} {:<26} {:>11.4e} {:>7} {:>9.4} {:>10.3e}  {}",
            r.delta,
            r.residual_name,
            r.residual,
            r.exceed,
            r.rate,
            r.pvalue,
            r.verdict.as_str()
        );
    }
}

pub fn verify(cfg: &RunConfig, out: &Path, negative_control: bool, opts: RunOptions) -> Result<Status> {
    let k = constants(cfg)?;
    let trial_cfg = isoperi::harness::TrialConfig {
        model: cfg.model.clone(),
        constraints: cfg.constraints,
        loss: cfg.loss.clone(),
        n: cfg.n,
        optimizer: cfg.optimizer.clone(),
    };
    let batch = run_trials(&trial_cfg, cfg.trials, cfg.master_seed, opts)?;
    save_batch(&batch, &out.join("batch.jsonl"))?;
    if batch.failures() > 0 {
        log::warn!("{} of {} trials failed", batch.failures(), batch.trials.len());
    }
    let tail_opts = TailCheckOptions {
        deltas: cfg.deltas.clone(),
        level: cfg.level,
        split: cfg.split,
        negative_control: negative_control.then_some(cfg.control_scale),
        ..Default::default()
    };
    let tail = tail_check(&batch, &k, &tail_opts)?;
    write_tail_csv(&tail.rows, &out.join("tail.csv"))?;
    print_tail(&tail);

    let input = bound_input(cfg, &k, cfg.deltas[0])?;
    let f = Functionals::compute(&cfg.model);
    let guard = 2.0 * tail.se_mean;
    let env = envelope(&input, &f, batch.trials.len(), guard);
    let marks: Vec<(f64, f64)> = tail
        .rows
        .iter()
        .filter(|r| r.residual_name == "best")
        .map(|r| (guard + r.residual, r.delta))
        .collect();
    let deviations: Vec<f64> = batch.sup_values().iter().map(|v| v - tail.mean_sup).collect();
    let title = format!("tail of sup − mean, M = {}, n = {}", batch.trials.len(), cfg.n);
    let svg = render(&TailPlot { title: &title, deviations: &deviations, envelope: &env, marks: &marks });
    fs::write(out.join("tail.svg"), svg)?;

    if negative_control && tail.control_rows().all(|r| r.verdict == Verdict::Pass) {
        log::warn!("negative control was not rejected at any delta");
    }
    Ok(if tail.passed() { Status::Ok } else { Status::CheckFailed })
}

pub fn fi(cfg: &RunConfig, out: &Path) -> Result<Status> {
    let k = constants(cfg)?;
    let opts = isoperi::harness::FICheckOptions { seed: cfg.master_seed, ..cfg.fi.clone() };
    let r = fi_check(&cfg.model, &k, &opts)?;
    println!("c = {}, c* = {}", r.c, r.c_star);
    println!("  {:>3} {:>10} {:>10} {:>8} {:>10} {:>10} {:>8}  verdict", "fn", "Var", "E Γ_P", "ratio", "Ent", "2 E Γ_LS", "ratio");
    for row in &r.rows {
        println!(
            "  {:>3} {:>10.4e} {:>10.4e} {:>8.4} {:>10.4e} {:>10.4e} {:>8.4}  {}",
            row.index,
            row.variance,
            row.energy_p,
            row.ratio_p,
            row.entropy,
            2.0 * row.energy_ls,
            row.ratio_ls,
            if row.pass_p && row.pass_ls { "PASS" } else { "FAIL" }
        );
    }
    let failures = r.rows.iter().filter(|x| !(x.pass_p && x.pass_ls)).count();
    println!("{} of {} functions pass", r.rows.len() - failures, r.rows.len());
    write_json(&out.join("fi_check.json"), &r)?;
    Ok(if failures > cfg.fi_max_failures { Status::CheckFailed } else { Status::Ok })
}

fn write_sweep(table: &SweepTable, out: &Path, stem: &str) -> Result<()> {
    write_json(&out.join(format!("{stem}.json")), table)?;
    let mut csv = String::from("dim,n,effective_rank,mean_sup,se_mean,rademacher,residual,residual_name\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.dim, r.n, r.effective_rank, r.mean_sup, r.se_mean, r.rademacher, r.residual, r.residual_name
        ));
    }
    fs::write(out.join(format!("{stem}.csv")), csv)?;
    Ok(())
}

fn print_sweep(table: &SweepTable) {
    println!(
        "  {:>4} {:>5} {:>7} {:>10} {:>9} {:>10} {:>10}  residual",
        "dim", "n", "d*", "mean_sup", "SE", "rademacher", "value"
    );
    for r in &table.rows {
        println!(
            "  {:>4} {:>5} {:>7.3} {:>10.5} {:>9.2e} {:>10.5} {:>10.5}  {}{}",
            r.dim,
            r.n,
            r.effective_rank,
            r.mean_sup,
            r.se_mean,
            r.rademacher,
            r.residual,
            r.residual_name,
            if r.within_rademacher() { "" } else { "  (above rademacher bound)" }
        );
    }
}

pub fn sweep_effective_rank(cfg: &RunConfig, out: &Path, opts: RunOptions) -> Result<Status> {
    let table = effective_rank_sweep(&cfg.effective_rank, cfg.master_seed, opts)?;
    print_sweep(&table);
    for (d_star, rho) in &table.trend {
        println!("  d* = {d_star}: Spearman(n, mean_sup) = {rho:.3}");
    }
    write_sweep(&table, out, "sweep_effective_rank")?;
    Ok(Status::Ok)
}

pub fn sweep_proportional(cfg: &RunConfig, out: &Path, opts: RunOptions) -> Result<Status> {
    let table = proportional_sweep(&cfg.proportional, cfg.master_seed, opts)?;
    print_sweep(&table);
    println!("  log-log slope of residual vs n: {:.4}", table.trend[0].1);
    write_sweep(&table, out, "sweep_proportional")?;
    Ok(Status::Ok)
}

pub fn oracle(cfg: &RunConfig, out: &Path) -> Result<Status> {
    if cfg.model.dim() > GRID_MAX_DIM {
        bail!("oracle needs dimension ≤ {GRID_MAX_DIM}, config has {}", cfg.model.dim());
    }
    let mut csv = String::from("instance,loss,sup_gap,grid,rel_gap\n");
    let mut worst = 0.0f64;
    for i in 0..cfg.oracle.instances {
        let seed = derive_seed(cfg.master_seed, i as u64);
        let data = sample_dataset(&cfg.model, cfg.n, seed)?;
        for loss in [LossSpec::logistic(), LossSpec::hinge()] {
            let opt = sup_gap(&data, &cfg.model, &loss, &cfg.constraints, &cfg.optimizer, seed)?.value;
            let grid = grid_oracle_sup(&data, &cfg.model, &loss, &cfg.constraints, cfg.oracle.resolution)?;
            let rel = (opt - grid).abs() / grid.max(1e-3);
            worst = worst.max(rel);
            println!("  {i:>3} {:<8} sup_gap {opt:.8} grid {grid:.8} rel {rel:.2e}", loss.name());
            csv.push_str(&format!("{i},{},{opt},{grid},{rel}\n", loss.name()));
        }
    }
    println!("max relative gap: {worst:.3e} (tolerance {:.1e})", cfg.oracle.tolerance);
    fs::write(out.join("oracle.csv"), csv)?;
    Ok(if worst <= cfg.oracle.tolerance { Status::Ok } else { Status::CheckFailed })
}

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tail::{TailRow, Verdict};
use super::trials::{TrialBatch, TrialConfig, TrialRecord};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// First line of a batch file; one `TrialRecord` per line follows.
#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    config: TrialConfig,
    master_seed: u64,
    trials: usize,
    mean_sup: f64,
    sd_sup: f64,
    created_at: u64,
    code_version: String,
}

pub fn write_batch<W: Write>(batch: &TrialBatch, mut w: W) -> Result<()> {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        config: batch.config.clone(),
        master_seed: batch.master_seed,
        trials: batch.trials.len(),
        mean_sup: batch.mean_sup,
        sd_sup: batch.sd_sup,
        created_at: batch.created_at,
        code_version: batch.code_version.clone(),
    };
    let enc = |e: serde_json::Error| Error::Io(e.to_string());
    writeln!(w, "{}", serde_json::to_string(&header).map_err(enc)?)?;
    for t in &batch.trials {
        writeln!(w, "{}", serde_json::to_string(t).map_err(enc)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch<R: Read>(r: R) -> Result<TrialBatch> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })??;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported schema version {}", header.schema_version),
        });
    }
    let mut trials = Vec::with_capacity(header.trials);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TrialRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        trials.push(t);
    }
    if trials.len() != header.trials {
        return Err(Error::Parse {
            line: trials.len() + 2,
            msg: format!("header announces {} trials, found {}", header.trials, trials.len()),
        });
    }
    Ok(TrialBatch {
        config: header.config,
        master_seed: header.master_seed,
        trials,
        mean_sup: header.mean_sup,
        sd_sup: header.sd_sup,
        created_at: header.created_at,
        code_version: header.code_version,
    })
}

pub fn save_batch(batch: &TrialBatch, path: &Path) -> Result<()> {
    write_batch(batch, BufWriter::new(File::create(path)?))
}

pub fn load_batch(path: &Path) -> Result<TrialBatch> {
    read_batch(File::open(path)?)
}

const TAIL_HEADER: &str = "delta,residual_name,residual,exceed,M,rate,pvalue,verdict";

pub fn write_tail_csv(rows: &[TailRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(TAIL_HEADER.split(',')).map_err(io)?;
    for r in rows {
        w.write_record([
            r.delta.to_string(),
            r.residual_name.clone(),
            r.residual.to_string(),
            r.exceed.to_string(),
            r.m.to_string(),
            r.rate.to_string(),
            r.pvalue.to_string(),
            r.verdict.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tail_csv(path: &Path) -> Result<Vec<TailRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .iter()
        .map(String::from)
        .collect();
    if header.join(",") != TAIL_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header {}", header.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let bad = |msg: String| Error::Parse { line, msg };
        let f = |k: usize| -> Result<f64> { rec[k].parse().map_err(|_| bad(format!("bad number {:?}", &rec[k]))) };
        let u = |k: usize| -> Result<usize> { rec[k].parse().map_err(|_| bad(format!("bad count {:?}", &rec[k]))) };
        rows.push(TailRow {
            delta: f(0)?,
            residual_name: rec[1].to_string(),
            residual: f(2)?,
            exceed: u(3)?,
            m: u(4)?,
            rate: f(5)?,
            pvalue: f(6)?,
            verdict: Verdict::parse(&rec[7]).ok_or_else(|| bad(format!("bad verdict {:?}", &rec[7])))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_trials, RunOptions};
    use crate::model::{ConstraintSet, LinkKind, LossSpec, ModelSpec};
    use crate::optimizer::OptimizerConfig;

    fn small_batch() -> TrialBatch {
        let config = TrialConfig {
            model: ModelSpec::spherical(1.0, vec![0.5, -0.2], 0.1, LinkKind::Logistic).unwrap(),
            constraints: ConstraintSet::new(1.0, 0.5).unwrap(),
            loss: LossSpec::logistic(),
            n: 30,
            optimizer: OptimizerConfig { restarts: 4, ..Default::default() },
        };
        run_trials(&config, 5, 9, RunOptions { reproducible: true }).unwrap()
    }

    #[test]
    fn jsonl_round_trip() {
        let batch = small_batch();
        let mut buf = Vec::new();
        write_batch(&batch, &mut buf).unwrap();
        assert_eq!(read_batch(&buf[..]).unwrap(), batch);
    }

    #[test]
    fn parse_error_names_the_line() {
        let batch = small_batch();
        let mut buf = Vec::new();
        write_batch(&batch, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text = text.replacen("\"index\":2", "\"index\":\"two\"", 1);
        match read_batch(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_batch(truncated.as_bytes()), Err(Error::Parse { .. })));
    }
}

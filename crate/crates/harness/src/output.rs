//! Result files: `ensemble.csv`, `summary.json`, `manifest.json`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use solnft::stats::{EnsembleTable, Quantity};

use crate::config::ScenarioConfig;
use crate::error::HarnessError;
use crate::runner::{ExperimentResult, Layout};

pub const ENSEMBLE_FILE: &str = "ensemble.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Column names of `ensemble.csv`.
pub fn ensemble_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "pulse",
        "checkpoint_span",
        "z",
        "eigenvalue",
        "lambda_tx_re",
        "lambda_tx_im",
        "lambda_rx_re",
        "lambda_rx_im",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["sent", "mbr", "gae"] {
        for q in Quantity::ALL {
            h.push(format!("{prefix}_{}", q.name()));
        }
    }
    h.extend(["trace_integral_re", "trace_integral_im", "symbol_errors", "symbols"].map(String::from));
    h
}

/// Writes the ensemble table as CSV; absent values are empty fields.
pub fn write_ensemble<W: Write>(table: &EnsembleTable, w: W) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ensemble_header())?;
    for r in table.rows() {
        let mut rec: Vec<String> = vec![
            r.pulse.to_string(),
            r.checkpoint.to_string(),
            r.z.to_string(),
            r.eigenvalue.to_string(),
            r.lambda_tx.re.to_string(),
            r.lambda_tx.im.to_string(),
            r.lambda_rx.re.to_string(),
            r.lambda_rx.im.to_string(),
        ];
        rec.extend(r.sent.iter().map(f64::to_string));
        rec.extend(r.mbr.iter().map(f64::to_string));
        match &r.gae {
            Some(g) => rec.extend(g.iter().map(f64::to_string)),
            None => rec.extend(std::iter::repeat_n(String::new(), Quantity::ALL.len())),
        }
        match r.trace_integral {
            Some(i) => rec.extend([i.re.to_string(), i.im.to_string()]),
            None => rec.extend([String::new(), String::new()]),
        }
        rec.push(r.symbol_errors.to_string());
        rec.push(r.symbols.to_string());
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    master_seed: u64,
    config: &'a ScenarioConfig,
    layout: &'a Layout,
}

/// Writes all three result files into `dir`, creating it when needed.
pub fn write_outputs(result: &ExperimentResult, cfg: &ScenarioConfig, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_ensemble(&result.table, fs::File::create(dir.join(ENSEMBLE_FILE))?)?;
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&result.summary)?)?;
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: cfg.master_seed,
        config: cfg,
        layout: &result.layout,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

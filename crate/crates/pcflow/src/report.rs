//! Report documents (JSON) and the diagnostics CSV schema.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{DiagnosticsRecord, EstimateReport, RunOutcome};
use crate::identity::CaseOutcome;

/// Build identifier baked in at compile time (git describe when available).
pub fn build_id() -> &'static str {
    option_env!("PCFLOW_BUILD_ID").unwrap_or(concat!("pcflow-", env!("CARGO_PKG_VERSION")))
}

#[derive(Serialize)]
pub struct VerifyReport<'a> {
    pub build: &'static str,
    pub config: &'a RunConfig,
    pub cases: Vec<CaseOutcome>,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct RunReport<'a> {
    pub build: &'static str,
    pub config: &'a RunConfig,
    pub outcome: RunOutcome,
    pub records: usize,
    pub final_t: f64,
}

#[derive(Serialize)]
pub struct EstimateDoc<'a> {
    pub build: &'static str,
    pub source_csv: &'a str,
    pub monitor_bound: f64,
    /// How sup|Ric+S| was obtained ("run" in-process, "max_curv_proxy" when
    /// rebuilt from a CSV, which does not carry that column).
    pub k_ric_source: &'a str,
    pub monitors: EstimateReport,
}

pub fn to_json_pretty<T: Serialize>(doc: &T) -> Result<String> {
    serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Format(format!("JSON serialization failed: {e}")))
}

pub const CSV_HEADER: &str = "t,dt,max_curv,max_torsion_sq,max_phi_sq,d1,d2,scaled1,scaled2,pluriclosed_residual,hs_residual,min_eig";

/// Write the diagnostics CSV with exactly the documented columns.
pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.t,
            r.dt,
            r.max_curv,
            r.max_torsion_sq,
            r.max_phi_sq,
            r.d1,
            r.d2,
            r.scaled1,
            r.scaled2,
            r.pluriclosed_residual,
            r.hs_residual,
            r.min_eig
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a diagnostics CSV back. The in-memory record also carries
/// max|Ric+S|, which is not part of the CSV schema; reading substitutes
/// max_curv as a proxy scale for the torsion monitor.
pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Format(format!(
            "unexpected CSV header '{}'",
            header.trim()
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("CSV row {}: {e}", i + 2)))?;
        if vals.len() != 12 {
            return Err(Error::Format(format!(
                "CSV row {}: expected 12 columns, got {}",
                i + 2,
                vals.len()
            )));
        }
        records.push(DiagnosticsRecord {
            t: vals[0],
            dt: vals[1],
            max_curv: vals[2],
            max_torsion_sq: vals[3],
            max_phi_sq: vals[4],
            d1: vals[5],
            d2: vals[6],
            scaled1: vals[7],
            scaled2: vals[8],
            pluriclosed_residual: vals[9],
            hs_residual: vals[10],
            min_eig: vals[11],
            max_ric_s: vals[2],
        });
    }
    Ok(records)
}

//! CSV result files: a `#`-prefixed TOML echo of the configuration followed
//! by one row per sample.

use std::io::Write;

use lf_core::harness::{ExperimentConfig, ExperimentResult};
use serde::{Deserialize, Serialize};

pub const HEADER: [&str; 7] = [
    "t",
    "observable_name",
    "value",
    "attempts",
    "successes",
    "wall_ms",
    "realization_id",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub t: u64,
    pub observable_name: String,
    pub value: f64,
    pub attempts: u64,
    pub successes: u64,
    pub wall_ms: f64,
    pub realization_id: u32,
}

pub fn write_csv<W: Write>(mut w: W, cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<(), String> {
    let echo = toml::to_string(cfg).map_err(|e| e.to_string())?;
    writeln!(w, "# lf {}", env!("CARGO_PKG_VERSION")).map_err(|e| e.to_string())?;
    for line in echo.lines() {
        writeln!(w, "# {line}").map_err(|e| e.to_string())?;
    }
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    csv.write_record(HEADER).map_err(|e| e.to_string())?;
    for s in &result.series {
        for r in &s.rows {
            csv.serialize(CsvRow {
                t: r.t,
                observable_name: s.observable.to_string(),
                value: r.value,
                attempts: r.attempts,
                successes: r.successes,
                wall_ms: r.wall_ms,
                realization_id: s.realization,
            })
            .map_err(|e| e.to_string())?;
        }
    }
    csv.flush().map_err(|e| e.to_string())
}

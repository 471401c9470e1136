use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{MetricSummary, RunReport};
use crate::error::{Error, Result};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Wall-clock record, kept apart from the deterministic artifacts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub command: String,
    pub wall_seconds: f64,
}

pub fn write_timing(dir: impl AsRef<Path>, command: &str, wall_seconds: f64) -> Result<()> {
    write_json(dir.as_ref().join("timing.json"), &Timing { command: command.to_string(), wall_seconds })
}

pub(crate) fn metrics_csv(m: &MetricSummary) -> String {
    let mut s = String::from("k,exact_match,round_trip,coverage\n");
    for (i, k) in m.ks.iter().enumerate() {
        let _ = writeln!(s, "{k},{},{},{}", m.exact[i], m.round_trip[i], m.coverage[i]);
    }
    s
}

/// `report.json`, `metrics.csv` and, when requested, `predictions.jsonl`.
pub fn write_eval_outputs(dir: impl AsRef<Path>, report: &RunReport) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(dir.join("report.json"), report)?;
    let csv = dir.join("metrics.csv");
    std::fs::write(&csv, metrics_csv(&report.metrics)).map_err(|e| Error::io(&csv, e))?;
    if report.config.dump_predictions {
        let path = dir.join("predictions.jsonl");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for r in &report.results {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

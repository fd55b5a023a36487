//! Report records: a JSON document per scenario plus a flat CSV view.

use std::collections::BTreeMap;
use std::path::Path;

use regkit::elemental::LadderReport;
use regkit::solvers::ExperimentReport;
use regkit::transversal::ConstantsReport;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{CliError, Result};

pub const TOOL: &str = "regkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of the flat CSV form.
pub const CSV_HEADER: [&str; 6] = ["scenario", "key", "value", "bound", "budget", "used"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub budget: usize,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsReport>,
    /// Ladder report per set name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ladders: BTreeMap<String, LadderReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentReport>,
    /// Every check whose failure makes the command exit with status 2.
    pub assertions: Vec<Assertion>,
    /// Seconds; only present when requested, so that reports stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl ReportRecord {
    pub fn new(scenario: &str, seed: u64, budget: usize, delta: f64) -> Self {
        ReportRecord {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            scenario: scenario.to_string(),
            seed,
            budget,
            delta,
            constants: None,
            ladders: BTreeMap::new(),
            experiment: None,
            assertions: Vec::new(),
            wall_time: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.holds)
    }

    pub fn failures(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.holds).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Flat rows: one per labelled estimate (value, bound, budget, used) and
    /// one per other scalar leaf. Witness coordinates are omitted.
    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        let tree = serde_json::to_value(self).expect("report serializes");
        let mut rows = Vec::new();
        flatten(&self.scenario, "", &tree, &mut rows);
        rows
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.csv_rows())
    }
}

fn scalar(v: &Json) -> String {
    match v {
        Json::Null => String::new(),
        Json::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_estimate(m: &serde_json::Map<String, Json>) -> bool {
    m.contains_key("value") && m.contains_key("bound") && m.contains_key("budget")
}

fn flatten(scenario: &str, prefix: &str, v: &Json, out: &mut Vec<[String; 6]>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Json::Object(m) if is_estimate(m) => out.push([
            scenario.to_string(),
            prefix.to_string(),
            scalar(&m["value"]),
            scalar(&m["bound"]),
            scalar(&m["budget"]),
            m.get("used").map(scalar).unwrap_or_default(),
        ]),
        Json::Object(m) => {
            for (k, child) in m {
                if k != "witness" {
                    flatten(scenario, &key(k), child, out);
                }
            }
        }
        Json::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(scenario, &key(&i.to_string()), child, out);
            }
        }
        leaf => out.push([
            scenario.to_string(),
            prefix.to_string(),
            scalar(leaf),
            String::new(),
            String::new(),
            String::new(),
        ]),
    }
}

pub fn rows_to_csv(rows: &[[String; 6]]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Read a JSON report back.
pub fn parse_report(text: &str) -> Result<ReportRecord> {
    let r: ReportRecord = serde_json::from_str(text).map_err(|e| CliError::Report(e.to_string()))?;
    if r.tool != TOOL {
        return Err(CliError::Report(format!("not a {TOOL} report (tool {:?})", r.tool)));
    }
    Ok(r)
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_of_an_empty_record() {
        let r = ReportRecord::new("x", 3, 10, 0.5);
        assert_eq!(parse_report(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn rejects_foreign_json() {
        assert!(parse_report("{\"tool\": 1}").is_err());
        assert!(parse_report("[]").is_err());
    }

    #[test]
    fn csv_has_fixed_header() {
        let csv = ReportRecord::new("x", 3, 10, 0.5).to_csv();
        assert!(csv.starts_with("scenario,key,value,bound,budget,used\n"));
        assert!(csv.contains("x,seed,3,,,"));
    }
}

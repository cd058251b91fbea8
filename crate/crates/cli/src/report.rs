//! Report envelope shared by every command, rendered as JSON or RFC-4180 CSV.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct Truncations {
    /// q-series truncation order T
    pub q_series: Option<i64>,
    /// theta sums stop from a tail bound
    pub theta_n: &'static str,
    /// samples per period for loop ODEs
    pub ode_k: Option<usize>,
    pub torus_n: Option<usize>,
    pub degree_cap: Option<usize>,
}

impl Default for Truncations {
    fn default() -> Self {
        Self { q_series: None, theta_n: "auto", ode_k: None, torus_n: None, degree_cap: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub format: Format,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub truncations: Truncations,
}

impl RunConfig {
    pub fn new(format: Format, seed: Option<u64>) -> Self {
        Self { format, seed, tolerances: BTreeMap::new(), truncations: Truncations::default() }
    }
}

/// A named bound; `value < bound` passes.
#[derive(Debug, Clone, Serialize)]
pub struct Contract {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    /// library version
    pub version: &'static str,
    pub run_config: RunConfig,
    /// which computation path produced each reported quantity
    pub provenance: BTreeMap<String, String>,
    pub result: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
    pub contracts: Vec<Contract>,
}

impl Report {
    pub fn new(command: &str, run_config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            version: ellhol::VERSION,
            run_config,
            provenance: BTreeMap::new(),
            result: Map::new(),
            table: None,
            contracts: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.result.insert(key.into(), v.into());
        self
    }

    pub fn source(&mut self, key: &str, path: &str) -> &mut Self {
        self.provenance.insert(key.into(), path.into());
        self
    }

    pub fn contract(&mut self, name: &str, value: f64, bound: f64) -> &mut Self {
        self.run_config.tolerances.insert(name.into(), bound);
        self.contracts.push(Contract { name: name.into(), value, bound, ok: value < bound });
        self
    }

    /// Boolean contract recorded as value 0 (holds) or 1 (violated) against bound 1.
    pub fn require(&mut self, name: &str, holds: bool) -> &mut Self {
        self.contracts.push(Contract { name: name.into(), value: if holds { 0.0 } else { 1.0 }, bound: 1.0, ok: holds });
        self
    }

    pub fn ok(&self) -> bool {
        self.contracts.iter().all(|c| c.ok)
    }

    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        match self.run_config.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)
            }
            Format::Csv => self.write_csv(out),
        }
    }

    fn cell(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }

    /// The table if present, otherwise one row of result fields; each row carries the
    /// version and the RunConfig as JSON.
    fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let cfg = serde_json::to_string(&self.run_config)?;
        let (mut header, rows): (Vec<String>, Vec<Vec<String>>) = match &self.table {
            Some(t) => (t.columns.clone(), t.rows.iter().map(|r| r.iter().map(Self::cell).collect()).collect()),
            None => {
                let mut h: Vec<String> = self.result.keys().cloned().collect();
                let mut row: Vec<String> = self.result.values().map(Self::cell).collect();
                for c in &self.contracts {
                    h.push(format!("contract:{}", c.name));
                    row.push(if c.ok { "ok".into() } else { format!("violated ({:e} >= {:e})", c.value, c.bound) });
                }
                (h, vec![row])
            }
        };
        header.extend(["command".into(), "version".into(), "run_config".into()]);
        w.write_record(&header)?;
        for mut r in rows {
            r.extend([self.command.clone(), self.version.into(), cfg.clone()]);
            w.write_record(&r)?;
        }
        w.flush()
    }
}

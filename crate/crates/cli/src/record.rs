use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::io::Write;

/// One replayable unit of output: what was run, with which parameters and
/// seed, and what came out.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub params: Map<String, Value>,
    pub outputs: Map<String, Value>,
    pub seed: Option<u64>,
    pub wall_time_ms: u64,
    pub run_id: String,
}

impl RunRecord {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            params: Map::new(),
            outputs: Map::new(),
            seed: None,
            wall_time_ms: 0,
            run_id: String::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn rational(&mut self, key: &str, v: &BigRational) {
        let f = v.to_f64().unwrap_or(f64::NAN);
        self.outputs
            .insert(key.to_string(), json!({ "rational": v.to_string(), "float": f }));
    }

    pub fn output(&mut self, key: &str, v: impl Into<Value>) {
        self.outputs.insert(key.to_string(), v.into());
    }

    /// Stamps the timing and the content-derived run id.
    pub fn finish(mut self, wall_time_ms: u64) -> Self {
        self.wall_time_ms = wall_time_ms;
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(serde_json::to_vec(&self.params).expect("params serialize"));
        h.update(self.seed.map(|s| s.to_le_bytes()).unwrap_or_default());
        self.run_id = h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect();
        self
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:?}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn columns(r: &RunRecord) -> Vec<String> {
    let mut cols: Vec<String> = r.params.keys().cloned().collect();
    for (k, v) in &r.outputs {
        cols.push(k.clone());
        if v.get("rational").is_some() {
            cols.push(format!("{k}_f64"));
        }
    }
    cols.push("run_id".into());
    cols.push("seed".into());
    cols
}

fn cells(r: &RunRecord) -> Vec<String> {
    let mut row: Vec<String> = r.params.values().map(cell).collect();
    for v in r.outputs.values() {
        match (v.get("rational"), v.get("float")) {
            (Some(q), Some(f)) => {
                row.push(cell(q));
                row.push(cell(f));
            }
            _ => row.push(cell(v)),
        }
    }
    row.push(r.run_id.clone());
    row.push(r.seed.map(|s| s.to_string()).unwrap_or_default());
    row
}

/// Header from the first record, then one row per record. Timing is kept
/// out of the table so replays are byte-identical.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = records.first() {
        w.write_record(columns(first))?;
    }
    for r in records {
        w.write_record(cells(r))?;
    }
    w.flush()
}

pub fn write_json<W: Write>(records: &[RunRecord], mut out: W) -> std::io::Result<()> {
    let v = if records.len() == 1 {
        serde_json::to_value(&records[0])
    } else {
        serde_json::to_value(records)
    }
    .expect("records serialize");
    serde_json::to_writer_pretty(&mut out, &v)?;
    writeln!(out)
}

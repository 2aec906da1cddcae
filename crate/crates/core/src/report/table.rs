use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::engine::{Axis, Protocol, ScenarioConfig};
use crate::ProtocolParams;

/// Column contract of every sweep table.
pub const COLUMNS: [&str; 12] = [
    "N",
    "n_th",
    "eta",
    "phi",
    "G",
    "chi",
    "snr_classical",
    "snr_quantum",
    "snr_jm",
    "ratio",
    "ratio_db",
    "oracle_discrepancy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Oracle bookkeeping for one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleNote {
    pub row: usize,
    pub dims: Vec<usize>,
    pub tail_mass: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMetadata {
    pub tool: String,
    pub version: String,
    pub protocol: Protocol,
    pub params: ProtocolParams,
    pub tolerance: f64,
    pub dim_cap: usize,
    pub axes: Vec<Axis>,
    pub oracle: Vec<OracleNote>,
}

impl TableMetadata {
    pub fn new(base: &ScenarioConfig, axes: &[Axis], oracle: Vec<OracleNote>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            protocol: base.protocol,
            params: base.params,
            tolerance: base.tolerance,
            dim_cap: base.oracle_dim_cap,
            axes: axes.to_vec(),
            oracle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub metadata: TableMetadata,
}

/// Renders `table`. CSV carries no metadata; JSON is
/// `{"metadata": …, "rows": [{column: value | null}, …]}`.
pub fn emit_table(table: &SweepTable, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = table.columns.join(",");
            out.push('\n');
            for row in &table.rows {
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    if let Some(v) = v {
                        write!(out, "{v:.16e}").expect("writing to a String");
                    }
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), v.map_or(Value::Null, Value::from)))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            let mut doc = Map::new();
            doc.insert(
                "metadata".into(),
                serde_json::to_value(&table.metadata).expect("metadata is plain data"),
            );
            doc.insert("rows".into(), Value::Array(rows));
            let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("finite values");
            s.push('\n');
            s
        }
    }
}

/// Header and rows of a parsed CSV table.
pub type ParsedCsv = (Vec<String>, Vec<Vec<Option<f64>>>);

/// Reads back a CSV table written by [`emit_table`].
pub fn parse_csv(text: &str) -> Result<ParsedCsv, String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("missing header")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|cell| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .map(Some)
                        .map_err(|e| format!("line {}: `{cell}`: {e}", n + 2))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!(
                "line {}: {} fields, expected {}",
                n + 2,
                row.len(),
                header.len()
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

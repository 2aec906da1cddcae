//! Configuration documents and result tables.
//!
//! Configurations are flat `key = value` lines (`#` starts a comment):
//!
//! ```text
//! protocol = quantum_quadrature
//! N = 0.05
//! n_th = 1.5
//! eta = 0.9
//! phi = pi/3
//! sweep.N = 0.001, 0.01, 0.1
//! ```
//!
//! Tables are emitted as CSV (17 significant digits) or JSON; missing values
//! are empty cells or `null`, never zero.

mod config;
mod table;

pub use config::{parse_angle, parse_config, parse_document, ConfigDocument, ConfigError};
pub use table::{emit_table, parse_csv, Format, OracleNote, ParsedCsv, SweepTable, TableMetadata, COLUMNS};

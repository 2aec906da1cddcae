use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_scenario, Protocol, ScenarioConfig};
use crate::analytic::{classical_snr, imperfect_jm_snr, jm_snr, quantum_snr};
use crate::report::{OracleNote, SweepTable, TableMetadata, COLUMNS};
use crate::{Error, ProtocolParams, Result};

pub const DEFAULT_SWEEP_CAP: usize = 100_000;

/// A sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Param {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "n_th")]
    NTh,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "phi")]
    Phi,
    #[serde(rename = "G")]
    G,
    #[serde(rename = "chi")]
    Chi,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::N => "N",
            Param::NTh => "n_th",
            Param::Eta => "eta",
            Param::Phi => "phi",
            Param::G => "G",
            Param::Chi => "chi",
        }
    }

    pub fn set(self, p: &mut ProtocolParams, v: f64) {
        match self {
            Param::N => p.n_signal = v,
            Param::NTh => p.n_th = v,
            Param::Eta => p.eta = v,
            Param::Phi => p.phi = v,
            Param::G => p.gain = v,
            Param::Chi => p.chi = v,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.trim() {
            "N" => Param::N,
            "n_th" | "nth" => Param::NTh,
            "eta" => Param::Eta,
            "phi" => Param::Phi,
            "G" => Param::G,
            "chi" => Param::Chi,
            other => return Err(format!("unknown parameter `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub cap: usize,
    /// Run the oracle on every k-th grid point (when the base config enables it).
    pub oracle_every: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_SWEEP_CAP,
            oracle_every: 1,
        }
    }
}

fn grid(base: &ProtocolParams, axes: &[Axis], index: usize) -> ProtocolParams {
    let mut p = *base;
    let mut rest = index;
    for axis in axes.iter().rev() {
        let n = axis.values.len();
        axis.param.set(&mut p, axis.values[rest % n]);
        rest /= n;
    }
    p
}

fn snr_columns(protocol: Protocol, p: &ProtocolParams) -> [Option<f64>; 3] {
    let get = |r: Result<crate::SnrBreakdown>| r.ok().map(|b| b.snr);
    let classical = get(classical_snr(p));
    match protocol {
        Protocol::Classical => [classical, None, None],
        Protocol::QuantumQuadrature => [classical, get(quantum_snr(p)), None],
        Protocol::QuantumJm => [classical, None, get(jm_snr(p))],
        Protocol::QuantumJmImperfect => [classical, None, get(imperfect_jm_snr(p))],
    }
}

/// Evaluates `base` over the cartesian product of `axes`. Rows come out in
/// lexicographic order, the first axis varying slowest. Points where a
/// quantity is undefined keep an empty cell.
pub fn sweep(base: &ScenarioConfig, axes: &[Axis], opts: &SweepOptions) -> Result<SweepTable> {
    base.validate()?;
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::EmptySweep);
    }
    let points = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()))
        .filter(|&n| n <= opts.cap)
        .ok_or(Error::SweepTooLarge {
            points: axes.iter().map(|a| a.values.len() as f64).product::<f64>() as usize,
            cap: opts.cap,
        })?;
    for i in 0..points {
        grid(&base.params, axes, i).validate()?;
    }
    let every = opts.oracle_every.max(1);

    let rows: Vec<(Vec<Option<f64>>, Option<OracleNote>)> = (0..points)
        .into_par_iter()
        .map(|i| {
            let p = grid(&base.params, axes, i);
            let cfg = ScenarioConfig {
                params: p,
                oracle_enabled: base.oracle_enabled && i % every == 0,
                ..base.clone()
            };
            let [c, q, j] = snr_columns(base.protocol, &p);
            let (ratio, ratio_db, disc, note) = match run_scenario(&cfg) {
                Ok(r) => {
                    let note = r.oracle.as_ref().map(|o| OracleNote {
                        row: i,
                        dims: o.dims.clone(),
                        tail_mass: o.tail_mass,
                        converged: o.converged,
                    });
                    (
                        Some(r.ratio_to_classical),
                        Some(r.ratio_db),
                        r.discrepancy.map(|d| d.worst().1),
                        note,
                    )
                }
                Err(_) => (base.protocol.ratio_to_classical(&p).ok(), None, None, None),
            };
            let ratio_db = ratio_db.or(ratio.map(|r| 10.0 * r.log10()));
            let row = [
                Some(p.n_signal),
                Some(p.n_th),
                Some(p.eta),
                Some(p.phi),
                Some(p.gain),
                Some(p.chi),
                c,
                q,
                j,
                ratio,
                ratio_db,
                disc,
            ]
            .into_iter()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect();
            (row, note)
        })
        .collect();

    let mut oracle = Vec::new();
    let mut table_rows = Vec::with_capacity(rows.len());
    for (row, note) in rows {
        table_rows.push(row);
        oracle.extend(note);
    }
    Ok(SweepTable {
        columns: COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: table_rows,
        metadata: TableMetadata::new(base, axes, oracle),
    })
}

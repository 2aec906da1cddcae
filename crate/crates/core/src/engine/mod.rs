//! Scenario evaluation: closed forms side by side with the Fock oracle,
//! cross-validation, parameter sweeps and regime boundaries.

mod pipeline;
mod search;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytic::{
    classical_snr, imperfect_jm_ratio, imperfect_jm_snr, jm_noise_var_as_printed, jm_output_mean, jm_ratio, jm_snr,
    quantum_snr, snr_ratio, EtaCoupling,
};
use crate::{Error, ProtocolParams, Result, SnrBreakdown};

pub use pipeline::{run_oracle, OracleRun, TAIL_TARGET};
pub use search::{find_efficiency_boundary, find_gain_boundary, EfficiencyBoundary};
pub use sweep::{sweep, Axis, Param, SweepOptions, DEFAULT_SWEEP_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Classical,
    QuantumQuadrature,
    QuantumJm,
    QuantumJmImperfect,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::Classical,
        Protocol::QuantumQuadrature,
        Protocol::QuantumJm,
        Protocol::QuantumJmImperfect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Classical => "classical",
            Protocol::QuantumQuadrature => "quantum_quadrature",
            Protocol::QuantumJm => "quantum_jm",
            Protocol::QuantumJmImperfect => "quantum_jm_imperfect",
        }
    }

    /// Closed-form breakdown for this protocol.
    pub fn analytic(self, p: &ProtocolParams) -> Result<SnrBreakdown> {
        match self {
            Protocol::Classical => classical_snr(p),
            Protocol::QuantumQuadrature => quantum_snr(p),
            Protocol::QuantumJm => jm_snr(p),
            Protocol::QuantumJmImperfect => imperfect_jm_snr(p),
        }
    }

    /// Closed-form SNR ratio to the classical protocol.
    pub fn ratio_to_classical(self, p: &ProtocolParams) -> Result<f64> {
        match self {
            Protocol::Classical => {
                p.validate()?;
                Ok(1.0)
            }
            Protocol::QuantumQuadrature => snr_ratio(p),
            Protocol::QuantumJm => jm_ratio(p),
            Protocol::QuantumJmImperfect => imperfect_jm_ratio(p),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(Protocol::Classical),
            "quantum_quadrature" | "quantum" | "quadrature" => Ok(Protocol::QuantumQuadrature),
            "quantum_jm" | "jm" => Ok(Protocol::QuantumJm),
            "quantum_jm_imperfect" | "jm_imperfect" => Ok(Protocol::QuantumJmImperfect),
            other => Err(format!(
                "unknown protocol `{other}` (expected classical, quantum_quadrature, quantum_jm or quantum_jm_imperfect)"
            )),
        }
    }
}

/// Where the cloak sits relative to the background reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineOrder {
    /// Background mixing, then the cloak phase.
    #[default]
    BackgroundFirst,
    /// Cloak phase, then background mixing.
    CloakFirst,
}

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ProtocolParams,
    pub protocol: Protocol,
    pub oracle_enabled: bool,
    /// Largest density-matrix side the oracle may use.
    pub oracle_dim_cap: usize,
    pub tolerance: f64,
    pub order: PipelineOrder,
}

impl ScenarioConfig {
    pub fn new(params: ProtocolParams, protocol: Protocol) -> Self {
        Self {
            params,
            protocol,
            oracle_enabled: true,
            oracle_dim_cap: DEFAULT_DIM_CAP,
            tolerance: DEFAULT_TOLERANCE,
            order: PipelineOrder::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: self.tolerance,
                reason: "must be positive and finite",
            });
        }
        if self.oracle_dim_cap < 4 {
            return Err(Error::InvalidParameter {
                name: "dim_cap",
                value: self.oracle_dim_cap as f64,
                reason: "must be at least 4",
            });
        }
        Ok(())
    }
}

/// The compared quantities of an [`SnrBreakdown`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    MeanAtPhi,
    MeanAtZero,
    SecondMoment,
    NoiseVar,
    SignalSq,
    Snr,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::MeanAtPhi,
        Field::MeanAtZero,
        Field::SecondMoment,
        Field::NoiseVar,
        Field::SignalSq,
        Field::Snr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::MeanAtPhi => "mean_at_phi",
            Field::MeanAtZero => "mean_at_zero",
            Field::SecondMoment => "second_moment",
            Field::NoiseVar => "noise_var",
            Field::SignalSq => "signal_sq",
            Field::Snr => "snr",
        }
    }

    pub fn get(self, b: &SnrBreakdown) -> f64 {
        match self {
            Field::MeanAtPhi => b.mean_at_phi,
            Field::MeanAtZero => b.mean_at_zero,
            Field::SecondMoment => b.second_moment,
            Field::NoiseVar => b.noise_var,
            Field::SignalSq => b.signal_sq,
            Field::Snr => b.snr,
        }
    }

    fn get_mut(self, b: &mut SnrBreakdown) -> &mut f64 {
        match self {
            Field::MeanAtPhi => &mut b.mean_at_phi,
            Field::MeanAtZero => &mut b.mean_at_zero,
            Field::SecondMoment => &mut b.second_moment,
            Field::NoiseVar => &mut b.noise_var,
            Field::SignalSq => &mut b.signal_sq,
            Field::Snr => &mut b.snr,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Relative analytic/oracle differences, one per [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub mean_at_phi: f64,
    pub mean_at_zero: f64,
    pub second_moment: f64,
    pub noise_var: f64,
    pub signal_sq: f64,
    pub snr: f64,
}

impl Discrepancy {
    /// Differences below `1e-12` of the natural scale of a field count as
    /// zero, so exact zeros on both sides compare equal.
    pub fn between(analytic: &SnrBreakdown, oracle: &SnrBreakdown) -> Self {
        let second = analytic.second_moment.abs().max(oracle.second_moment.abs());
        let var = analytic.noise_var.abs().max(oracle.noise_var.abs());
        let rel = |a: f64, o: f64, scale: f64| {
            let diff = (a - o).abs();
            if diff <= 1e-12 * scale {
                0.0
            } else {
                diff / a.abs().max(o.abs())
            }
        };
        Self {
            mean_at_phi: rel(analytic.mean_at_phi, oracle.mean_at_phi, second.sqrt()),
            mean_at_zero: rel(analytic.mean_at_zero, oracle.mean_at_zero, second.sqrt()),
            second_moment: rel(analytic.second_moment, oracle.second_moment, second),
            noise_var: rel(analytic.noise_var, oracle.noise_var, second),
            signal_sq: rel(analytic.signal_sq, oracle.signal_sq, second),
            snr: rel(analytic.snr, oracle.snr, second / var),
        }
    }

    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::MeanAtPhi => self.mean_at_phi,
            Field::MeanAtZero => self.mean_at_zero,
            Field::SecondMoment => self.second_moment,
            Field::NoiseVar => self.noise_var,
            Field::SignalSq => self.signal_sq,
            Field::Snr => self.snr,
        }
    }

    /// The largest difference and the field it occurs in.
    pub fn worst(&self) -> (Field, f64) {
        Field::ALL
            .iter()
            .map(|&f| (f, self.get(f)))
            .fold(
                (Field::MeanAtPhi, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub protocol: Protocol,
    pub params: ProtocolParams,
    pub analytic: SnrBreakdown,
    pub oracle: Option<OracleRun>,
    pub discrepancy: Option<Discrepancy>,
    pub ratio_to_classical: f64,
    pub ratio_db: f64,
}

/// Evaluates the closed form and, when enabled, the oracle at one point.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let analytic = cfg.protocol.analytic(&cfg.params)?;
    let ratio_to_classical = cfg.protocol.ratio_to_classical(&cfg.params)?;
    let oracle = if cfg.oracle_enabled {
        Some(run_oracle(cfg.protocol, &cfg.params, cfg.order, cfg.oracle_dim_cap)?)
    } else {
        None
    };
    let discrepancy = oracle.as_ref().map(|o| Discrepancy::between(&analytic, &o.breakdown));
    Ok(ScenarioResult {
        protocol: cfg.protocol,
        params: cfg.params,
        analytic,
        oracle,
        discrepancy,
        ratio_to_classical,
        ratio_db: 10.0 * ratio_to_classical.log10(),
    })
}

/// Scales one analytic field before comparison. Exists to demonstrate that
/// [`cross_validate_with`] notices a wrong coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub field: Field,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail {
        field: Field,
    },
    /// The oracle hit its size cap before reaching the tail target.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolCheck {
    pub protocol: Protocol,
    pub status: Status,
    pub worst_field: Field,
    pub worst: f64,
    /// `max(tolerance, 100·tail_mass)`.
    pub threshold: f64,
    pub result: ScenarioResult,
}

/// Which coupling of the mixer cross term the oracle supports, and how the
/// two candidate variances compare.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaAdjudication {
    pub oracle_mean: f64,
    pub sqrt_eta_mean: f64,
    pub eta_mean: f64,
    pub selected: &'static str,
    pub oracle_var: f64,
    pub derived_var: f64,
    pub printed_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub params: ProtocolParams,
    pub tolerance: f64,
    pub checks: Vec<ProtocolCheck>,
    pub adjudication: Option<EtaAdjudication>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }
}

/// Compares every requested protocol against the oracle.
pub fn cross_validate(params: &ProtocolParams, protocols: &[Protocol], tolerance: f64) -> Result<ValidationReport> {
    cross_validate_with(params, protocols, tolerance, DEFAULT_DIM_CAP, None)
}

pub fn cross_validate_with(
    params: &ProtocolParams,
    protocols: &[Protocol],
    tolerance: f64,
    dim_cap: usize,
    perturbation: Option<Perturbation>,
) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let mut adjudication = None;
    for &protocol in protocols {
        let cfg = ScenarioConfig {
            tolerance,
            oracle_dim_cap: dim_cap,
            ..ScenarioConfig::new(*params, protocol)
        };
        let mut result = run_scenario(&cfg)?;
        if let Some(pert) = perturbation {
            *pert.field.get_mut(&mut result.analytic) *= pert.factor;
        }
        let oracle = result.oracle.clone().expect("oracle enabled");
        let disc = Discrepancy::between(&result.analytic, &oracle.breakdown);
        result.discrepancy = Some(disc);
        let (worst_field, worst) = disc.worst();
        let threshold = tolerance.max(100.0 * oracle.tail_mass);
        let status = if worst > threshold {
            Status::Fail { field: worst_field }
        } else if !oracle.converged {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        if protocol == Protocol::QuantumJm && params.gain > 1.0 {
            let sqrt_eta_mean = jm_output_mean(params, EtaCoupling::SqrtEta)?;
            let eta_mean = jm_output_mean(params, EtaCoupling::Eta)?;
            let m = oracle.breakdown.mean_at_phi;
            adjudication = Some(EtaAdjudication {
                oracle_mean: m,
                sqrt_eta_mean,
                eta_mean,
                selected: if (sqrt_eta_mean - m).abs() <= (eta_mean - m).abs() {
                    "sqrt_eta"
                } else {
                    "eta"
                },
                oracle_var: oracle.breakdown.noise_var,
                derived_var: jm_snr(params)?.noise_var,
                printed_var: jm_noise_var_as_printed(params)?,
            });
        }
        checks.push(ProtocolCheck {
            protocol,
            status,
            worst_field,
            worst,
            threshold,
            result,
        });
    }
    Ok(ValidationReport {
        params: *params,
        tolerance,
        checks,
        adjudication,
    })
}

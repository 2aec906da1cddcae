//! The `qi-cloak` command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad arguments,
//! 3 numerical failure (truncation overflow, missing boundary, ...).

use std::f64::consts::PI;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analytic::{gain_region_upper_bound, imperfect_ratio_asymptotic, AsymptoteForm};
use crate::engine::{
    cross_validate_with, find_efficiency_boundary, find_gain_boundary, run_scenario, sweep, Axis, Param, Protocol,
    ScenarioConfig, ScenarioResult, Status, SweepOptions, ValidationReport,
};
use crate::report::{emit_table, parse_angle, parse_document, ConfigDocument, Format, SweepTable};
use crate::{Error, ProtocolParams};

/// Environment variable overriding the default oracle size cap.
pub const DIM_CAP_ENV: &str = "QI_CLOAK_DIM_CAP";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "qi-cloak",
    version,
    about = "Quantum-illumination SNR models for detecting a phase-imprinting cloak",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare every protocol at one parameter point.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Also run the Fock oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Evaluate a protocol over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep axis `param=v1,v2,...`; may be repeated.
        #[arg(long = "axis", value_name = "PARAM=VALUES")]
        axes: Vec<String>,
    },
    /// Cross-validate the closed forms against the Fock oracle.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Signal strength bounding the quadrature protocol's gain region.
    Region {
        #[command(flatten)]
        common: Common,
    },
    /// Photocounter efficiency needed for the mixer protocol to win.
    Threshold {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Text,
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Mean signal photon number.
    #[arg(long = "N", value_name = "N")]
    n: Option<f64>,
    /// Thermal occupation of the background.
    #[arg(long = "nth", value_name = "N_TH")]
    nth: Option<f64>,
    /// Background reflectivity.
    #[arg(long)]
    eta: Option<f64>,
    /// Cloak phase in radians; accepts `pi`, `pi/3`, `2*pi`, ...
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    phi: Option<f64>,
    /// Mixer gain.
    #[arg(long = "G", value_name = "G")]
    g: Option<f64>,
    /// Photocounter efficiency.
    #[arg(long)]
    chi: Option<f64>,
    /// Protocol for sweep and threshold runs.
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Largest density-matrix side the oracle may use.
    #[arg(long = "dim-cap")]
    dim_cap: Option<usize>,
    /// Relative tolerance for oracle comparisons.
    #[arg(long = "tol")]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    /// Write the main output here instead of standard output.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Key-value configuration file; flags override its values.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s).ok_or_else(|| format!("`{s}` is not a number or multiple of pi"))
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TruncationOverflow { .. }
            | Error::Capacity { .. }
            | Error::DegenerateVariance { .. }
            | Error::NoBoundary(_)
            | Error::OutOfRegime(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_NUMERICAL,
        message: format!("i/o error: {e}"),
    }
}

/// Runs the command line with `args` (including the program name). Reads
/// the dimension-cap override from the process environment.
pub fn dispatch<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let env_cap = std::env::var(DIM_CAP_ENV).ok();
    dispatch_with_env(args, env_cap.as_deref(), stdout, stderr)
}

/// [`dispatch`] with the environment override passed explicitly.
pub fn dispatch_with_env<I, S>(
    args: I,
    env_dim_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match run(cli.command, env_dim_cap, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            if f.code == EXIT_USAGE {
                let _ = writeln!(stderr, "run `qi-cloak --help` for usage");
            }
            f.code
        }
    }
}

/// Layers configuration file, flags and the environment cap.
fn resolve_document(common: &Common, env_dim_cap: Option<&str>) -> Result<ConfigDocument, Failure> {
    let mut doc = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_document(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigDocument::default(),
    };
    macro_rules! layer {
        ($field:ident, $flag:expr) => {
            if let Some(v) = $flag {
                doc.$field = Some(v);
            }
        };
    }
    layer!(n_signal, common.n);
    layer!(n_th, common.nth);
    layer!(eta, common.eta);
    layer!(phi, common.phi);
    layer!(gain, common.g);
    layer!(chi, common.chi);
    layer!(protocol, common.protocol);
    layer!(tolerance, common.tol);
    if let Some(cap) = common.dim_cap {
        doc.dim_cap = Some(cap);
    } else if doc.dim_cap.is_none() {
        if let Some(raw) = env_dim_cap {
            let cap = raw
                .trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("{DIM_CAP_ENV}=`{raw}` is not a positive integer")))?;
            doc.dim_cap = Some(cap);
        }
    }
    Ok(doc)
}

fn scenario(doc: &ConfigDocument) -> Result<ScenarioConfig, Failure> {
    let cfg = doc.resolve().map_err(|e| usage(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn echo_params(p: &ProtocolParams) -> String {
    format!(
        "params: N={} n_th={} eta={} phi={} G={} chi={}",
        p.n_signal, p.n_th, p.eta, p.phi, p.gain, p.chi
    )
}

/// Sends the resolved parameters to stdout in text mode, to stderr otherwise.
fn announce(p: &ProtocolParams, machine: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let line = echo_params(p);
    if machine {
        writeln!(stderr, "{line}")
    } else {
        writeln!(stdout, "{line}")
    }
    .map_err(io_failure)
}

fn emit(common: &Common, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(io_failure),
        None => stdout.write_all(text.as_bytes()).map_err(io_failure),
    }
}

fn run(
    command: Command,
    env_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    match command {
        Command::Compare { common, oracle } => compare(&common, oracle, env_cap, stdout, stderr),
        Command::Sweep { common, axes } => run_sweep(&common, &axes, env_cap, stdout, stderr),
        Command::Validate { common } => validate(&common, env_cap, stdout, stderr),
        Command::Region { common } => region(&common, env_cap, stdout, stderr),
        Command::Threshold { common } => threshold(&common, env_cap, stdout, stderr),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

fn table_row(r: &ScenarioResult) -> Vec<Option<f64>> {
    let p = &r.params;
    let snr = Some(r.analytic.snr);
    let (mut c, mut q, mut j) = (None, None, None);
    match r.protocol {
        Protocol::Classical => c = snr,
        Protocol::QuantumQuadrature => q = snr,
        Protocol::QuantumJm | Protocol::QuantumJmImperfect => j = snr,
    }
    vec![
        Some(p.n_signal),
        Some(p.n_th),
        Some(p.eta),
        Some(p.phi),
        Some(p.gain),
        Some(p.chi),
        c,
        q,
        j,
        Some(r.ratio_to_classical).filter(|x| x.is_finite()),
        Some(r.ratio_db).filter(|x| x.is_finite()),
        r.discrepancy.map(|d| d.worst().1),
    ]
}

fn compare(
    common: &Common,
    oracle: bool,
    env_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let doc = resolve_document(common, env_cap)?;
    let mut base = scenario(&doc)?;
    base.oracle_enabled = oracle;
    let format = common.format.unwrap_or(OutFormat::Text);
    announce(&base.params, format != OutFormat::Text, stdout, stderr)?;

    let mut protocols = vec![Protocol::Classical, Protocol::QuantumQuadrature];
    if base.params.gain > 1.0 {
        protocols.push(Protocol::QuantumJm);
        if base.params.chi < 1.0 {
            protocols.push(Protocol::QuantumJmImperfect);
        }
    }
    let mut results = Vec::new();
    for protocol in protocols {
        let cfg = ScenarioConfig {
            protocol,
            ..base.clone()
        };
        match run_scenario(&cfg) {
            Ok(r) => results.push(r),
            Err(Error::IndeterminateRatio) if protocol != Protocol::Classical => {
                let _ = writeln!(stderr, "note: {protocol}: ratio undefined at N = 0 and phi = 0");
            }
            Err(e) => return Err(e.into()),
        }
    }

    let text = match format {
        OutFormat::Text => {
            let mut s = format!(
                "{:<22} {:>14} {:>14} {:>14} {:>14} {:>10}",
                "protocol", "snr", "signal_sq", "noise_var", "ratio", "ratio_db"
            );
            if oracle {
                s += &format!(" {:>14} {:>12}", "oracle_snr", "discrepancy");
            }
            s.push('\n');
            for r in &results {
                s += &format!(
                    "{:<22} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>10.4}",
                    r.protocol.name(),
                    r.analytic.snr,
                    r.analytic.signal_sq,
                    r.analytic.noise_var,
                    r.ratio_to_classical,
                    r.ratio_db
                );
                if oracle {
                    s += &format!(
                        " {:>14} {:>12}",
                        opt(r.oracle.as_ref().map(|o| o.breakdown.snr)),
                        opt(r.discrepancy.map(|d| d.worst().1))
                    );
                }
                s.push('\n');
            }
            s
        }
        OutFormat::Json => {
            let v = json!({ "params": base.params, "results": results });
            serde_json::to_string_pretty(&v).expect("plain data") + "\n"
        }
        OutFormat::Csv => {
            let table = SweepTable {
                columns: crate::report::COLUMNS.iter().map(|s| s.to_string()).collect(),
                rows: results.iter().map(table_row).collect(),
                metadata: crate::report::TableMetadata::new(&base, &[], vec![]),
            };
            emit_table(&table, Format::Csv)
        }
    };
    emit(common, &text, stdout)?;
    Ok(EXIT_OK)
}

fn parse_axis(spec: &str) -> Result<Axis, Failure> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("--axis `{spec}`: expected PARAM=v1,v2,...")))?;
    let param: Param = name.parse().map_err(|m: String| usage(format!("--axis: {m}")))?;
    let values = values
        .split(',')
        .map(|v| angle(v.trim()).map_err(|m| usage(format!("--axis {name}: {m}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Axis { param, values })
}

fn run_sweep(
    common: &Common,
    axes: &[String],
    env_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut doc = resolve_document(common, env_cap)?;
    for spec in axes {
        let axis = parse_axis(spec)?;
        doc.axes.retain(|a| a.param != axis.param);
        doc.axes.push(axis);
    }
    if doc.axes.is_empty() {
        return Err(usage(
            "sweep needs at least one axis (--axis or sweep.<param> in the config)",
        ));
    }
    let base = scenario(&doc)?;
    let format = match common.format.unwrap_or(OutFormat::Csv) {
        OutFormat::Json => Format::Json,
        _ => Format::Csv,
    };
    announce(&base.params, true, stdout, stderr)?;
    let opts = SweepOptions {
        oracle_every: doc.oracle_every.unwrap_or(1),
        ..SweepOptions::default()
    };
    let table = sweep(&base, &doc.axes, &opts)?;
    emit(common, &emit_table(&table, format), stdout)?;
    Ok(EXIT_OK)
}

/// The regression grid used when no parameters are given.
fn default_grid() -> Vec<ProtocolParams> {
    vec![
        ProtocolParams::new(0.05, 1.5, 0.9, PI / 3.0)
            .with_gain(1.2)
            .with_chi(0.8),
        ProtocolParams::new(0.1, 1.0, 0.9, PI / 4.0)
            .with_gain(1.2)
            .with_chi(0.7),
        ProtocolParams::new(0.2, 0.5, 0.7, 0.0).with_gain(1.5).with_chi(0.9),
    ]
}

fn validation_text(report: &ValidationReport) -> String {
    let mut s = String::new();
    for c in &report.checks {
        let status = match &c.status {
            Status::Pass => "PASS".to_string(),
            Status::Fail { field } => format!("FAIL({field})"),
            Status::Inconclusive => "INCONCLUSIVE".to_string(),
        };
        let tail = c.result.oracle.as_ref().map_or(0.0, |o| o.tail_mass);
        s += &format!(
            "  {:<22} {:<18} worst {:.3e} in {:<13} threshold {:.1e} tail {:.1e}\n",
            c.protocol.name(),
            status,
            c.worst,
            c.worst_field.name(),
            c.threshold,
            tail
        );
    }
    if let Some(a) = &report.adjudication {
        s += &format!(
            "  mixer mean: oracle {:.10e}, sqrt(eta) form {:.10e}, eta form {:.10e} -> {}\n",
            a.oracle_mean, a.sqrt_eta_mean, a.eta_mean, a.selected
        );
        s += &format!(
            "  mixer variance: oracle {:.10e}, derived {:.10e}, printed {:.10e}\n",
            a.oracle_var, a.derived_var, a.printed_var
        );
    }
    s
}

fn validate(
    common: &Common,
    env_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let doc = resolve_document(common, env_cap)?;
    let explicit = doc.n_signal.is_some() || doc.n_th.is_some() || doc.eta.is_some() || doc.phi.is_some();
    let tolerance = doc.tolerance.unwrap_or(crate::engine::DEFAULT_TOLERANCE);
    let dim_cap = doc.dim_cap.unwrap_or(crate::engine::DEFAULT_DIM_CAP);
    let points = if explicit {
        vec![scenario(&doc)?.params]
    } else {
        default_grid()
    };
    let machine = common.format == Some(OutFormat::Json);
    let mut reports = Vec::new();
    for p in &points {
        announce(p, machine, stdout, stderr)?;
        let mut protocols = vec![Protocol::Classical, Protocol::QuantumQuadrature];
        if p.gain > 1.0 {
            protocols.push(Protocol::QuantumJm);
            if p.chi > 0.0 {
                protocols.push(Protocol::QuantumJmImperfect);
            }
        }
        let report = cross_validate_with(p, &protocols, tolerance, dim_cap, None)?;
        if !machine {
            writeln!(stdout, "{}", validation_text(&report).trim_end()).map_err(io_failure)?;
        }
        reports.push(report);
    }
    let passed = reports.iter().all(ValidationReport::passed);
    if machine {
        let v = json!({ "passed": passed, "reports": reports });
        emit(
            common,
            &(serde_json::to_string_pretty(&v).expect("plain data") + "\n"),
            stdout,
        )?;
    } else {
        writeln!(
            stdout,
            "{}",
            if passed {
                "validation passed"
            } else {
                "validation FAILED"
            }
        )
        .map_err(io_failure)?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn require(v: Option<f64>, flag: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| usage(format!("missing required parameter {flag}")))
}

fn region(
    common: &Common,
    env_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let doc = resolve_document(common, env_cap)?;
    let eta = require(doc.eta, "--eta")?;
    let n_th = require(doc.n_th, "--nth")?;
    let phi = doc.phi.unwrap_or(PI);
    let machine = common.format == Some(OutFormat::Json);
    let shown = ProtocolParams::new(doc.n_signal.unwrap_or(0.0), n_th, eta, phi);
    announce(&shown, machine, stdout, stderr)?;
    let bisection = find_gain_boundary(eta, n_th, phi)?;
    let closed = gain_region_upper_bound(eta, n_th)?;
    let text = if machine {
        let v = json!({ "eta": eta, "n_th": n_th, "phi": phi, "bisection": bisection, "closed_form_at_pi": closed });
        serde_json::to_string_pretty(&v).expect("plain data") + "\n"
    } else {
        format!("N* (bisection, phi={phi}): {bisection:.12}\nN* (closed form, phi=pi): {closed:.12}\n")
    };
    emit(common, &text, stdout)?;
    Ok(EXIT_OK)
}

fn threshold(
    common: &Common,
    env_cap: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let doc = resolve_document(common, env_cap)?;
    let p = scenario(&doc)?.params;
    let machine = common.format == Some(OutFormat::Json);
    announce(&p, machine, stdout, stderr)?;
    let b = find_efficiency_boundary(&p)?;
    let asymptote_at_star = imperfect_ratio_asymptotic(&p.with_chi(b.chi_star), AsymptoteForm::Derived).ok();
    let text = if machine {
        let v = json!({ "params": p, "chi_star": b.chi_star, "asymptotic": b.asymptotic, "asymptotic_ratio_at_chi_star": asymptote_at_star });
        serde_json::to_string_pretty(&v).expect("plain data") + "\n"
    } else {
        format!(
            "chi* (bisection): {:.12}\nchi* (asymptotic formula): {}\n",
            b.chi_star,
            b.asymptotic
                .map_or_else(|| "outside its validity regime".to_string(), |v| format!("{v:.12}"))
        )
    };
    emit(common, &text, stdout)?;
    Ok(EXIT_OK)
}

use std::f64::consts::PI;
use std::fmt;

use crate::analytic::default_gain;
use crate::engine::{Axis, Param, PipelineOrder, Protocol, ScenarioConfig, DEFAULT_DIM_CAP, DEFAULT_TOLERANCE};
use crate::ProtocolParams;

/// A configuration problem, located by key and (when known) line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

/// A parsed document before defaults are applied. Every field is optional
/// so that command-line flags can be layered on top.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    pub protocol: Option<Protocol>,
    pub n_signal: Option<f64>,
    pub n_th: Option<f64>,
    pub eta: Option<f64>,
    pub phi: Option<f64>,
    pub gain: Option<f64>,
    pub chi: Option<f64>,
    pub dim_cap: Option<usize>,
    pub tolerance: Option<f64>,
    pub oracle: Option<bool>,
    pub oracle_every: Option<usize>,
    pub order: Option<PipelineOrder>,
    pub axes: Vec<Axis>,
}

/// Parses a real number, also accepting multiples of π: `pi`, `-pi/2`,
/// `2*pi/3`, `3pi`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.as_str()),
    };
    let (num, den) = match body.split_once('/') {
        Some((a, b)) => (a, b.parse::<f64>().ok().filter(|d| *d != 0.0 && d.is_finite())?),
        None => (body, 1.0),
    };
    let coef = if num == "pi" {
        1.0
    } else {
        let c = num.strip_suffix("pi")?;
        c.strip_suffix('*').unwrap_or(c).parse::<f64>().ok()?
    };
    Some(sign * coef * PI / den)
}

fn number(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = if key == "phi" {
        parse_angle(value)
    } else {
        value.parse::<f64>().ok().filter(|v| v.is_finite())
    };
    v.ok_or_else(|| err(Some(line), key, format!("malformed number `{value}`")))
}

/// Range check shared by scalar keys and sweep values.
fn check_range(line: Option<usize>, key: &str, v: f64) -> Result<f64, ConfigError> {
    let ok = match key {
        "N" | "n_th" => v >= 0.0,
        "eta" | "chi" => (0.0..=1.0).contains(&v),
        "G" => v >= 1.0,
        "tolerance" => v > 0.0,
        _ => true,
    };
    if ok {
        Ok(v)
    } else {
        let range = match key {
            "N" | "n_th" => "must be non-negative",
            "eta" | "chi" => "must lie in [0, 1]",
            "G" => "must be at least 1",
            _ => "must be positive",
        };
        Err(err(line, key, format!("value {v} out of range: {range}")))
    }
}

fn count(line: usize, key: &str, value: &str, min: usize) -> Result<usize, ConfigError> {
    let v: usize = value
        .parse()
        .map_err(|_| err(Some(line), key, format!("malformed integer `{value}`")))?;
    if v < min {
        return Err(err(
            Some(line),
            key,
            format!("value {v} out of range: must be at least {min}"),
        ));
    }
    Ok(v)
}

/// Parses the key-value format without applying defaults.
pub fn parse_document(text: &str) -> Result<ConfigDocument, ConfigError> {
    let mut doc = ConfigDocument::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(Some(line), content, "expected `key = value`"))?;
        if seen.iter().any(|k| k == key) {
            return Err(err(Some(line), key, "duplicate key"));
        }
        seen.push(key.to_string());
        if let Some(name) = key.strip_prefix("sweep.") {
            let param: Param = name.parse().map_err(|m: String| err(Some(line), key, m))?;
            let canonical = param.name();
            let values = value
                .split(',')
                .map(|v| number(line, canonical, v.trim()).and_then(|x| check_range(Some(line), canonical, x)))
                .collect::<Result<Vec<_>, _>>()?;
            if doc.axes.iter().any(|a| a.param == param) {
                return Err(err(Some(line), key, "duplicate sweep axis"));
            }
            doc.axes.push(Axis { param, values });
            continue;
        }
        let scalar = |k: &str| number(line, k, value).and_then(|v| check_range(Some(line), k, v));
        match key {
            "protocol" => doc.protocol = Some(value.parse().map_err(|m: String| err(Some(line), key, m))?),
            "N" => doc.n_signal = Some(scalar("N")?),
            "n_th" => doc.n_th = Some(scalar("n_th")?),
            "eta" => doc.eta = Some(scalar("eta")?),
            "phi" => doc.phi = Some(scalar("phi")?),
            "G" => doc.gain = Some(scalar("G")?),
            "chi" => doc.chi = Some(scalar("chi")?),
            "tolerance" => doc.tolerance = Some(scalar("tolerance")?),
            "dim_cap" => doc.dim_cap = Some(count(line, key, value, 4)?),
            "oracle_every" => doc.oracle_every = Some(count(line, key, value, 1)?),
            "oracle" => {
                doc.oracle = Some(match value {
                    "true" | "on" | "yes" | "1" => true,
                    "false" | "off" | "no" | "0" => false,
                    _ => return Err(err(Some(line), key, format!("expected a boolean, found `{value}`"))),
                })
            }
            "order" => {
                doc.order = Some(match value {
                    "background_first" => PipelineOrder::BackgroundFirst,
                    "cloak_first" => PipelineOrder::CloakFirst,
                    _ => {
                        return Err(err(
                            Some(line),
                            key,
                            format!("expected background_first or cloak_first, found `{value}`"),
                        ))
                    }
                })
            }
            _ => return Err(err(Some(line), key, "unknown key")),
        }
    }
    Ok(doc)
}

impl ConfigDocument {
    fn base_value(&self, key: &'static str, explicit: Option<f64>, param: Param) -> Result<f64, ConfigError> {
        explicit
            .or_else(|| self.axes.iter().find(|a| a.param == param).map(|a| a.values[0]))
            .ok_or_else(|| err(None, key, "missing required key"))
    }

    /// Applies defaults (protocol quantum_quadrature, G = 1 + max(N, 1e-3),
    /// chi 1, tolerance 1e-5, dim_cap 4096, oracle on) and validates.
    /// Parameters that are swept may be omitted; they start at the first
    /// value of their axis.
    pub fn resolve(&self) -> Result<ScenarioConfig, ConfigError> {
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(err(None, &format!("sweep.{}", axis.param), "empty axis"));
            }
        }
        let n = self.base_value("N", self.n_signal, Param::N)?;
        let mut params = ProtocolParams::new(
            n,
            self.base_value("n_th", self.n_th, Param::NTh)?,
            self.base_value("eta", self.eta, Param::Eta)?,
            self.base_value("phi", self.phi, Param::Phi)?,
        );
        params.gain = self.gain.unwrap_or(default_gain(n));
        params.chi = self.chi.unwrap_or(1.0);
        for (key, v) in [
            ("N", params.n_signal),
            ("n_th", params.n_th),
            ("eta", params.eta),
            ("G", params.gain),
            ("chi", params.chi),
        ] {
            check_range(None, key, v)?;
        }
        Ok(ScenarioConfig {
            params,
            protocol: self.protocol.unwrap_or(Protocol::QuantumQuadrature),
            oracle_enabled: self.oracle.unwrap_or(true),
            oracle_dim_cap: self.dim_cap.unwrap_or(DEFAULT_DIM_CAP),
            tolerance: self.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            order: self.order.unwrap_or_default(),
        })
    }
}

/// Parses and resolves a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    parse_document(text)?.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config("protocol=classical\nN=0.1\nn_th=1\neta=0.9\nphi=0.5\n").unwrap();
        assert_eq!(cfg.protocol, Protocol::Classical);
        assert_eq!(cfg.params, ProtocolParams::new(0.1, 1.0, 0.9, 0.5));
        assert_eq!(cfg.tolerance, 1e-5);
        assert_eq!(cfg.oracle_dim_cap, 4096);
        assert!(cfg.oracle_enabled);
    }

    #[test]
    fn range_error_names_key_and_line() {
        let e = parse_config("N = 0.1\n\neta = 1.5\n").unwrap_err();
        assert_eq!(e.key, "eta");
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("eta"));
    }

    #[test]
    fn malformed_and_unknown_keys() {
        let e = parse_document("N = 0.1x").unwrap_err();
        assert_eq!((e.key.as_str(), e.line), ("N", Some(1)));
        let e = parse_document("# header\nfoo = 1").unwrap_err();
        assert_eq!((e.key.as_str(), e.line), ("foo", Some(2)));
        let e = parse_document("N = 1\nN = 2").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_document("sweep.bogus = 1,2").unwrap_err();
        assert_eq!(e.key, "sweep.bogus");
        let e = parse_config("N = 0.1\neta = 0.5\nphi = 1").unwrap_err();
        assert_eq!((e.key.as_str(), e.line), ("n_th", None));
    }

    #[test]
    fn sweep_axis_keeps_declared_order() {
        let doc = parse_document("sweep.N = 0.1, 0.001,0.01\nn_th=1\neta=0.9\nphi=pi").unwrap();
        assert_eq!(doc.axes.len(), 1);
        assert_eq!(doc.axes[0].param, Param::N);
        assert_eq!(doc.axes[0].values, vec![0.1, 0.001, 0.01]);
        let cfg = doc.resolve().unwrap();
        assert_eq!(cfg.params.n_signal, 0.1);
        assert_eq!(cfg.params.phi, PI);
        let e = parse_document("sweep.eta = 0.5, 2").unwrap_err();
        assert_eq!(e.key, "eta");
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi"), Some(PI));
        assert_eq!(parse_angle("pi/3"), Some(PI / 3.0));
        assert_eq!(parse_angle("-pi/2"), Some(-PI / 2.0));
        assert_eq!(parse_angle("2*pi"), Some(2.0 * PI));
        assert_eq!(parse_angle("3pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_angle("1.25"), Some(1.25));
        assert_eq!(parse_angle("pie"), None);
        assert_eq!(parse_angle("pi/0"), None);
        assert_eq!(parse_angle("inf"), None);
    }
}

//! Shared argument plumbing: angular/Hz input forms, JSON config overlay and
//! range parsing.

use std::path::Path;

use clap::Args;
use serde_json::{json, Map, Value};

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation (missing/contradictory parameters): exit code 2.
    Usage(String),
    /// Valid invocation, no solution or invalid physics: exit code 1.
    Domain(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Domain(msg) => write!(f, "{msg}"),
            CliError::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}

pub fn usage<T: std::fmt::Display>(msg: T) -> CliError {
    CliError::Usage(msg.to_string())
}

pub fn domain<T: std::fmt::Display>(msg: T) -> CliError {
    CliError::Domain(msg.to_string())
}

/// Overlay a JSON config file on flag-derived parameters (the file wins). A
/// run manifest is accepted in place of a config: its `config` block is used.
pub fn overlay_config(
    mut flags: Map<String, Value>,
    path: Option<&Path>,
) -> Result<Value, CliError> {
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)?;
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("config parse: {e}")))?;
        let object = match parsed.get("config") {
            Some(inner) => inner.clone(),
            None => parsed,
        };
        let Value::Object(entries) = object else {
            return Err(usage("config must be a JSON object"));
        };
        for (key, value) in entries {
            flags.insert(key, value);
        }
    }
    Ok(Value::Object(flags))
}

/// Network parameters with the angular/Hz dual input forms.
#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Common frequency of source, drain and resonant bus (rad/s)
    #[arg(
        long = "omega-rad",
        value_name = "RAD_PER_S",
        conflicts_with = "omega_hz"
    )]
    pub omega_rad: Option<f64>,
    /// Common frequency in Hz (converted by 2 pi)
    #[arg(long = "omega-hz", value_name = "HZ")]
    pub omega_hz: Option<f64>,
    /// End-to-bus coupling strength (rad/s)
    #[arg(
        long = "lambda-rad",
        value_name = "RAD_PER_S",
        conflicts_with = "lambda_hz"
    )]
    pub lambda_rad: Option<f64>,
    /// Coupling strength in Hz
    #[arg(long = "lambda-hz", value_name = "HZ")]
    pub lambda_hz: Option<f64>,
    /// Total number of data-bus oscillators
    #[arg(long = "n", value_name = "COUNT")]
    pub cap_n: Option<usize>,
    /// Number of resonant data-bus oscillators
    #[arg(long, value_name = "COUNT")]
    pub kappa: Option<usize>,
    /// Detuning of the off-resonant bus oscillators (rad/s)
    #[arg(
        long = "delta-rad",
        value_name = "RAD_PER_S",
        conflicts_with = "delta_hz"
    )]
    pub delta_rad: Option<f64>,
    /// Detuning in Hz
    #[arg(long = "delta-hz", value_name = "HZ")]
    pub delta_hz: Option<f64>,
}

impl NetworkArgs {
    /// Resolve flags to the network JSON schema (always angular after
    /// conversion); missing keys stay absent so a config file can fill them.
    pub fn to_map(&self) -> Map<String, Value> {
        let mut map = Map::new();
        let pick = |rad: Option<f64>, hz: Option<f64>| rad.or(hz.map(|v| v * TAU));
        if let Some(v) = pick(self.omega_rad, self.omega_hz) {
            map.insert("omega".into(), json!(v));
        }
        if let Some(v) = pick(self.lambda_rad, self.lambda_hz) {
            map.insert("lambda".into(), json!(v));
        }
        if let Some(v) = self.cap_n {
            map.insert("N".into(), json!(v));
        }
        if let Some(v) = self.kappa {
            map.insert("kappa".into(), json!(v));
        }
        if let Some(v) = pick(self.delta_rad, self.delta_hz) {
            map.insert("delta".into(), json!(v));
        }
        map.insert("units".into(), json!("angular"));
        map
    }
}

/// Turn a merged parameter object into a validated NetworkConfig; `delta`
/// defaults to 0 when absent.
pub fn network_from_value(value: &Value) -> Result<qtrans::NetworkConfig, CliError> {
    let obj = value
        .as_object()
        .ok_or_else(|| usage("expected a parameter object"))?;
    for key in ["omega", "lambda", "N", "kappa"] {
        if !obj.contains_key(key) {
            return Err(usage(format!("missing required parameter `{key}`")));
        }
    }
    let mut padded = obj.clone();
    padded.entry("delta").or_insert(json!(0.0));
    qtrans::NetworkConfig::from_json(&Value::Object(padded).to_string()).map_err(domain)
}

/// `start:end:count` inclusive linspace, or a single value.
pub fn parse_float_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || {
        usage(format!(
            "bad range `{text}`; use `start:end:count` or a single value"
        ))
    };
    match parts.as_slice() {
        [single] => Ok(vec![single.parse().map_err(|_| bad())?]),
        [start, end, count] => {
            let start: f64 = start.parse().map_err(|_| bad())?;
            let end: f64 = end.parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            if count == 0 {
                return Err(bad());
            }
            if count == 1 {
                return Ok(vec![start]);
            }
            Ok((0..count)
                .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
                .collect())
        }
        _ => Err(bad()),
    }
}

/// `a:b` inclusive integer range, or a single integer.
pub fn parse_int_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || {
        usage(format!(
            "bad integer range `{text}`; use `a:b` or a single value"
        ))
    };
    match text.split_once(':') {
        None => Ok(vec![text.parse().map_err(|_| bad())?]),
        Some((a, b)) => {
            let a: usize = a.parse().map_err(|_| bad())?;
            let b: usize = b.parse().map_err(|_| bad())?;
            if a == 0 || b < a {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
    }
}

pub fn get_f64(value: &Value, key: &str) -> Result<f64, CliError> {
    value
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| usage(format!("missing or non-numeric parameter `{key}`")))
}

pub fn get_usize(value: &Value, key: &str) -> Result<usize, CliError> {
    value
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| usage(format!("missing or non-integer parameter `{key}`")))
}

pub fn get_str<'v>(value: &'v Value, key: &str) -> Result<&'v str, CliError> {
    value
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| usage(format!("missing or non-string parameter `{key}`")))
}

/// Default worker count: `--workers` flag, else `QT_WORKERS`, else 1.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("QT_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

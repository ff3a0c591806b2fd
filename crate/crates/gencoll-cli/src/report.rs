use std::path::Path;

use gencoll::{format_rational, Rat};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Envelope around one command's results. Everything except `wall_time_ms`
/// is a pure function of the command line and the input file contents, so
/// re-running a command must reproduce `results` byte for byte.
#[derive(Debug)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub wall_time_ms: u64,
}

impl RunReport {
    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "tool_version": TOOL_VERSION,
            "wall_time_ms": self.wall_time_ms,
        })
    }

    pub fn render(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("report serializes")
    }
}

/// Digests of the files a command read, keyed by role.
#[derive(Debug, Default)]
pub struct InputSet {
    entries: Map<String, Value>,
}

impl InputSet {
    pub fn record(&mut self, name: &str, path: &Path, bytes: &[u8]) {
        self.entries.insert(
            name.to_string(),
            json!({
                "path": path.display().to_string(),
                "sha256": sha256_hex(bytes),
            }),
        );
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.entries)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Rounds to 12 significant digits so reports do not leak trailing noise
/// from iterative solvers.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn float_value(x: f64) -> Value {
    Value::from(sig12(x))
}

pub fn float_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float_value(x)).collect())
}

pub fn rat_value(r: &Rat) -> Value {
    Value::String(format_rational(r))
}

pub fn rat_vec(rs: &[Rat]) -> Value {
    Value::Array(rs.iter().map(rat_value).collect())
}

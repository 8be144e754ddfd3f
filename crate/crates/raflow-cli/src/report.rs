//! CSV assembly: comma separation, '.' decimal, a header comment line with
//! tool version, seed and scenario hash, then the header row and one data
//! row per sweep point. Output is byte-identical across runs for identical
//! flags and seed.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new(seed: u64, scenario_bytes: &[u8], columns: &[String]) -> Self {
        let hash = Sha256::digest(scenario_bytes);
        let mut hex = String::with_capacity(64);
        for b in hash {
            write!(hex, "{b:02x}").unwrap();
        }
        let comment = format!(
            "# raflow v{} seed={seed} scenario_sha256={hex}",
            env!("CARGO_PKG_VERSION")
        );
        Self { lines: vec![comment, columns.join(",")] }
    }

    pub fn push_row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// Shortest round-trip decimal rendering; deterministic.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn flag(b: bool) -> String {
    b.to_string()
}

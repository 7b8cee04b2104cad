//! Deterministic CSV output with provenance.
//!
//! Every CSV starts with `#` comment lines carrying the config hash, the
//! effective seed, the tool version and a timestamp. The body (header row
//! and data rows) is byte-identical across reruns with the same inputs;
//! only the timestamp comment varies.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use emsim_core::{Estimate, Real};

/// FNV-1a 64-bit hash of the raw spec bytes; stable across platforms.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Probabilities: scientific notation, six significant digits.
pub fn fmt_prob(p: Real) -> String {
    format!("{p:.5e}")
}

/// Other measured values: scientific notation, ten significant digits.
pub fn fmt_val(v: Real) -> String {
    format!("{v:.9e}")
}

pub fn fmt_opt_estimate_prob(e: &Option<Estimate<Real>>) -> (String, String) {
    match e {
        Some(est) => (fmt_prob(est.value), fmt_prob(est.half_width)),
        None => (String::new(), String::new()),
    }
}

/// CSV document builder: provenance comments, one header, data rows.
pub struct Csv {
    comments: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new(command: &str, hash: &str, seed: u64, header: &str) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let comments = vec![
            format!("# emsim v{}", env!("CARGO_PKG_VERSION")),
            format!("# command: {command}"),
            format!("# config_hash: {hash}"),
            format!("# seed: {seed}"),
            format!("# generated_unix: {timestamp}"),
        ];
        let mut body = String::new();
        let _ = writeln!(body, "{header}");
        Csv { comments, body }
    }

    pub fn comment(&mut self, text: &str) {
        self.comments.push(format!("# {text}"));
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.body, "{}", fields.join(","));
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        for c in &self.comments {
            writeln!(file, "{c}")?;
        }
        file.write_all(self.body.as_bytes())?;
        Ok(())
    }
}

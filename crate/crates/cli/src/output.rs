//! Deterministic CSV and JSON emission.
//!
//! Every output embeds the fully resolved configuration so a run is
//! self-describing: CSV files carry it in leading `#` comment lines, JSON
//! files as a `config` object next to the rows. CSV bytes depend only on the
//! configuration and seed; wall-clock timing lives in the JSON manifest only.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub replicates: usize,
    pub workers: usize,
    pub version: &'static str,
    pub timing_s: f64,
}

pub struct Emitter<'a> {
    pub config: &'a RunConfig,
    pub out_dir: PathBuf,
    pub format: Format,
}

impl<'a> Emitter<'a> {
    pub fn new(config: &'a RunConfig, out_dir: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Self { config, out_dir: out_dir.to_path_buf(), format })
    }

    /// Write one logical table as `<stem>.csv` / `<stem>.json` per format.
    pub fn emit<R: Serialize>(
        &self,
        stem: &str,
        header: &[&str],
        csv_rows: &[Vec<String>],
        rows: &[R],
        manifest: &Manifest,
    ) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if matches!(self.format, Format::Csv | Format::Both) {
            let path = self.out_dir.join(format!("{stem}.csv"));
            let mut text = String::new();
            let config_json = serde_json::to_string(self.config)?;
            text.push_str(&format!("# config: {config_json}\n"));
            text.push_str(&format!(
                "# seed: {} replicates: {} version: {}\n",
                manifest.seed, manifest.replicates, manifest.version
            ));
            text.push_str(&header.join(","));
            text.push('\n');
            for row in csv_rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            std::fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        if matches!(self.format, Format::Json | Format::Both) {
            let path = self.out_dir.join(format!("{stem}.json"));
            let doc = serde_json::json!({
                "config": self.config,
                "manifest": manifest,
                "rows": rows,
            });
            std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
                .with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest round-trip float formatting; identical to the JSON encoding of
/// the same number so the two outputs can be compared field by field.
pub fn fmt_f64(x: f64) -> String {
    let mut buf = ryu_format(x);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(x: f64) -> String {
    // serde_json uses ryu under the hood; format! {} also produces the
    // shortest representation for f64 since Rust 1.0's grisu
    let s = format!("{x}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

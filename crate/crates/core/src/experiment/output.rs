//! CSV tables, the run manifest and the on-disk layout of a run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiment::config::ExperimentConfig;
use crate::experiment::scenario::{run_scenario, JobRecord, Scenario, ScenarioOutput, Table};

pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of `"blob <len>\0" ‖ content`, the git object hashing scheme.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex(&h.finalize())
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub crate_version: String,
    pub master_seed: u64,
    pub config: BTreeMap<String, String>,
    pub input_hash: String,
    pub jobs: Vec<JobRecord>,
    /// File name to content hash.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub summary: Vec<String>,
}

pub fn emit_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    use std::io::Write;
    writeln!(w)?;
    Ok(())
}

/// Inputs that determine a run: scenario name plus the canonical config text.
pub fn input_text(cfg: &ExperimentConfig, scenario: Scenario) -> String {
    format!("scenario = {}\n{}", scenario.name(), cfg.raw.canonical_text())
}

pub struct RunFiles {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub trace: Option<PathBuf>,
    pub output: ScenarioOutput,
}

/// Runs the scenario and writes `<scenario>.csv`, `manifest.json` and, for SAC, `trace.csv`.
pub fn run_to_dir(cfg: &ExperimentConfig, scenario: Scenario, out: &Path) -> Result<RunFiles> {
    let start = Instant::now();
    let output = run_scenario(cfg, scenario)?;
    std::fs::create_dir_all(out)?;
    let mut outputs = BTreeMap::new();
    let csv = out.join(format!("{}.csv", scenario.name()));
    emit_csv(&output.table, &csv)?;
    outputs.insert(file_name(&csv), content_hash(&std::fs::read(&csv)?));
    let trace = match &output.trace {
        Some(t) => {
            let p = out.join("trace.csv");
            t.write_csv(BufWriter::new(File::create(&p)?))?;
            outputs.insert(file_name(&p), content_hash(&std::fs::read(&p)?));
            Some(p)
        }
        None => None,
    };
    let manifest = Manifest {
        scenario: scenario.name().into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.seed,
        config: cfg.raw.echo(),
        input_hash: content_hash(input_text(cfg, scenario).as_bytes()),
        jobs: output.jobs.clone(),
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        summary: output.summary.clone(),
    };
    let manifest_path = out.join("manifest.json");
    emit_manifest(&manifest, &manifest_path)?;
    Ok(RunFiles {
        csv,
        manifest: manifest_path,
        trace,
        output,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_git_blob_scheme() {
        let mut h = Sha256::new();
        h.update(b"blob 5\0hello");
        assert_eq!(content_hash(b"hello"), hex(&h.finalize()));
        assert_eq!(content_hash(b"").len(), 64);
    }
}

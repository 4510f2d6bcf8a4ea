//! Configuration-driven runner: one job per invocation, writing
//! `result.json`, CSV tables and `manifest.json` into an output directory.

pub mod config;
pub mod error;
pub mod jobs;
pub mod plot;
pub mod table;

pub use config::{ExperimentConfig, JobKind};
pub use error::{CliError, CliResult};
pub use jobs::JobOutput;
pub use plot::emit_plot_data;

use qpc_core::cocycle::QuadratureSpec;
use qpc_core::freq::Frequency;
use qpc_core::scheme::ParameterBundle;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const RESULT_FILE: &str = "result.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a job produced, with the inputs in force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub version: String,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
    pub frequency: Frequency,
    pub bundle: Option<ParameterBundle>,
    pub config: ExperimentConfig,
    #[serde(flatten)]
    pub output: JobOutput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub job: JobKind,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub wall_time_ms: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write(dir: &Path, name: &str, bytes: &[u8], hashes: &mut Vec<FileHash>) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    hashes.push(FileHash {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

pub fn to_json(v: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Validates the config, runs `job` and writes its artifacts into `out`.
pub fn run(job: JobKind, config_path: &Path, out: &Path, grid: Option<usize>) -> CliResult<Manifest> {
    let start = Instant::now();
    let (cfg, raw) = ExperimentConfig::load(config_path)?;
    let resolved = cfg.resolve(job, grid)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;

    let artifacts = jobs::run_job(job, &cfg, &resolved)?;
    let result = ResultFile {
        version: VERSION.to_string(),
        seed: cfg.seed,
        quadrature: resolved.spec,
        frequency: resolved.frequency.clone(),
        bundle: resolved.bundle.clone(),
        config: cfg.clone(),
        output: artifacts.output,
    };
    let mut outputs = Vec::new();
    write(out, RESULT_FILE, &to_json(&result)?, &mut outputs)?;
    for (name, table) in &artifacts.tables {
        write(out, &format!("{name}.csv"), &table.to_bytes()?, &mut outputs)?;
    }
    let manifest = Manifest {
        version: VERSION.to_string(),
        job,
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        inputs: vec![FileHash {
            path: config_path.display().to_string(),
            sha256: sha256_hex(&raw),
        }],
        outputs,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    std::fs::write(out.join(MANIFEST_FILE), to_json(&manifest)?)?;
    Ok(manifest)
}

pub fn read_result(dir: &Path) -> CliResult<ResultFile> {
    let path: PathBuf = dir.join(RESULT_FILE);
    let bytes = std::fs::read(&path).map_err(|e| CliError::Input(format!("missing artifact {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("unreadable artifact {}: {e}", path.display())))
}

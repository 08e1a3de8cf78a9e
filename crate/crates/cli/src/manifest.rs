use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::fnv1a64;
use crate::error::{CliError, CliResult};

/// One appended record per executed command: what ran, with which seed and
/// config, over which input bytes, producing which output bytes, and how
/// long it took. The wall time per stage is what makes the compute-cost
/// comparison across attack methods directly readable from the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_ms: u64,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const LOCK_FILE: &str = ".qrmia.lock";

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

pub fn read_manifest(workdir: &Path) -> CliResult<Vec<ManifestLine>> {
    let path = workdir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| CliError::StaleArtifact {
                path: path.clone(),
                detail: format!("unreadable manifest line: {e}"),
            })
        })
        .collect()
}

pub fn append_manifest(workdir: &Path, line: &ManifestLine) -> CliResult<()> {
    let path = workdir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string(line).expect("manifest line serializes");
    text.push('\n');
    use std::io::Write;
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io(&path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| CliError::io(&path, e))
}

/// Advisory lock held for the duration of one command.
pub struct WorkdirLock {
    path: PathBuf,
}

impl WorkdirLock {
    pub fn acquire(workdir: &Path, force: bool) -> CliResult<Self> {
        let path = workdir.join(LOCK_FILE);
        if force {
            let _ = fs::remove_file(&path);
        }
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WorkdirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Locked { path })
            }
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// How a stage run concluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Cached,
}

/// Run one pipeline stage with caching and staleness handling.
///
/// Inputs must exist (else the error names the producing command). If the
/// outputs exist and the last manifest record for this command matches the
/// current config and input hashes, the stage is a no-op. If outputs exist
/// but the recorded hashes disagree, the stage refuses to overwrite unless
/// forced. Every execution appends a manifest line.
pub fn run_stage(
    workdir: &Path,
    command: &str,
    args: Vec<String>,
    seed: u64,
    config_hash: &str,
    inputs: &[(PathBuf, &str)],
    outputs: &[PathBuf],
    force: bool,
    body: impl FnOnce() -> CliResult<()>,
) -> CliResult<StageStatus> {
    fs::create_dir_all(workdir).map_err(|e| CliError::io(workdir, e))?;
    let _lock = WorkdirLock::acquire(workdir, force)?;

    let mut input_hashes = BTreeMap::new();
    for (path, producer) in inputs {
        if !path.exists() {
            return Err(CliError::MissingArtifact {
                path: path.clone(),
                hint: format!("run `qrmia {producer}` first"),
            });
        }
        input_hashes.insert(path.display().to_string(), hash_file(path)?);
    }

    let outputs_exist = !outputs.is_empty() && outputs.iter().all(|p| p.exists());
    let last = read_manifest(workdir)?
        .into_iter()
        .rev()
        .find(|l| l.command == command && l.args == args);
    if outputs_exist && !force {
        match &last {
            Some(record)
                if record.config_hash == config_hash && record.inputs == input_hashes =>
            {
                println!("[{command}] outputs up to date; skipping (use --force to rebuild)");
                return Ok(StageStatus::Cached);
            }
            Some(record) => {
                let what = if record.config_hash != config_hash {
                    "config changed since the artifact was built"
                } else {
                    "inputs changed since the artifact was built"
                };
                return Err(CliError::StaleArtifact {
                    path: outputs[0].clone(),
                    detail: what.into(),
                });
            }
            None => {
                return Err(CliError::StaleArtifact {
                    path: outputs[0].clone(),
                    detail: "outputs exist but have no manifest record".into(),
                });
            }
        }
    }

    let start = std::time::Instant::now();
    body()?;
    let wall_ms = start.elapsed().as_millis() as u64;

    let mut output_hashes = BTreeMap::new();
    for path in outputs {
        if !path.exists() {
            return Err(CliError::MissingArtifact {
                path: path.clone(),
                hint: format!("stage {command} failed to produce its output"),
            });
        }
        output_hashes.insert(path.display().to_string(), hash_file(path)?);
    }
    append_manifest(
        workdir,
        &ManifestLine {
            command: command.to_string(),
            args,
            seed,
            config_hash: config_hash.to_string(),
            inputs: input_hashes,
            outputs: output_hashes,
            wall_ms,
        },
    )?;
    println!("[{command}] done in {wall_ms} ms");
    Ok(StageStatus::Ran)
}

/// Total recorded wall time of the most recent run of each listed command.
pub fn recorded_wall_ms(manifest: &[ManifestLine], commands: &[(&str, Option<&str>)]) -> Option<u64> {
    let mut total = 0u64;
    for (command, method) in commands {
        let found = manifest.iter().rev().find(|l| {
            l.command == *command
                && method.is_none_or(|m| l.args.iter().any(|a| a == m))
        })?;
        total += found.wall_ms;
    }
    Some(total)
}

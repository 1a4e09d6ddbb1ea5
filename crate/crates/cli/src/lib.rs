//! Batch runner for the `wannier-lab` scenarios.
//!
//! A run reads one TOML config, validates it completely, executes the
//! scenario and writes CSV tables plus `manifest.json` into
//! `<output root>/<output_dir>`. The output root is `output` unless
//! [`OUTPUT_ROOT_VAR`] is set.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod manifest;
mod scenarios;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::{validate_config, ExperimentConfig, Scenario, Validated};
pub use manifest::RunManifest;
use manifest::{sha256_hex, Assertion, FileRecord, StageError, StageTiming};

pub const OUTPUT_ROOT_VAR: &str = "WANNIER_LAB_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] wannier_lab::Error),
    #[error("{0}")]
    Failed(String),
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("output"), PathBuf::from)
}

pub fn read_config(path: &Path) -> Result<Validated, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    validate_config(&text)
}

/// Runs a validated config under `root` and returns the manifest, which is
/// also written next to the CSVs. Stage failures end up in the manifest,
/// not in the `Err` branch; `Err` means the run directory was unusable.
pub fn run_experiment(validated: &Validated, root: &Path) -> Result<RunManifest, CliError> {
    let config = &validated.config;
    let dir = root.join(config.output_dir());
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut versions = BTreeMap::new();
    versions.insert("wannier-lab".to_owned(), wannier_lab::VERSION.to_owned());
    versions.insert(
        "wannier-lab-cli".to_owned(),
        env!("CARGO_PKG_VERSION").to_owned(),
    );
    let mut run = Run {
        config,
        dir,
        manifest: RunManifest {
            scenario: config.scenario.name().to_owned(),
            seed: config.seed,
            config: config.to_toml(),
            versions,
            stages: Vec::new(),
            files: Vec::new(),
            assertions: Vec::new(),
            warnings: validated.warnings.clone(),
            errors: Vec::new(),
        },
    };
    for w in &validated.warnings {
        log::warn!("{w}");
    }
    scenarios::run(&mut run);
    let json = serde_json::to_vec_pretty(&run.manifest).expect("manifest serializes");
    let path = run.dir.join("manifest.json");
    std::fs::write(&path, json).map_err(|source| CliError::Io { path, source })?;
    Ok(run.manifest)
}

pub(crate) struct Run<'a> {
    pub config: &'a ExperimentConfig,
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run<'_> {
    /// Times `f`; an error is recorded against the stage and fails the run.
    pub fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Option<T> {
        log::info!("stage {name}");
        let start = Instant::now();
        let out = f(self);
        self.manifest.stages.push(StageTiming {
            stage: name.to_owned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        match out {
            Ok(v) => Some(v),
            Err(e) => {
                log::error!("stage {name} failed: {e}");
                self.manifest.errors.push(StageError {
                    stage: name.to_owned(),
                    message: e.to_string(),
                });
                self.check(&format!("stage_{name}_completed"), false, e.to_string());
                None
            }
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        if passed {
            log::info!("PASS {name}: {detail}");
        } else {
            log::warn!("FAIL {name}: {detail}");
        }
        self.manifest.assertions.push(Assertion {
            name: name.to_owned(),
            passed,
            detail,
        });
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.manifest.warnings.push(message);
    }

    /// Renders a CSV into memory, writes it and records its digest.
    pub fn write(
        &mut self,
        name: &str,
        render: impl FnOnce(&mut Vec<u8>) -> wannier_lab::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        let path = self.dir.join(name);
        std::fs::write(&path, &buf).map_err(|source| CliError::Io { path, source })?;
        self.manifest.files.push(FileRecord {
            path: name.to_owned(),
            bytes: buf.len() as u64,
            sha256: sha256_hex(&buf),
        });
        Ok(())
    }
}

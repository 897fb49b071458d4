//! Output files: every file opens with `# manifest: <config hash>`.

use std::fs;
use std::path::{Path, PathBuf};

use levy_ou::verify::VerificationReport;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.into(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), format!("# manifest: {}\n{body}", self.hash))?;
        self.written.push(name.into());
        Ok(())
    }

    /// Report under `<stem>.txt`, each plot under `<stem>_<plot>.txt`.
    pub fn report(&mut self, stem: &str, rep: &VerificationReport) -> Result<bool, CliError> {
        self.write(&format!("{stem}.txt"), &rep.to_text())?;
        for p in &rep.plots {
            self.write(&format!("{stem}_{}.txt", p.name), &p.to_text())?;
        }
        Ok(rep.passed())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub config: toml::Table,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            config: toml::from_str(&cfg.canonical()).expect("canonical config parses"),
        }
    }

    pub fn to_text(&self) -> String {
        format!("# manifest: {}\n{}", self.config_hash, toml::to_string(self).expect("manifest serializes"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn config_text(&self) -> String {
        toml::to_string(&self.config).expect("table serializes")
    }
}

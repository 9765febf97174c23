//! Command orchestration and result files.
//!
//! Every command writes its outputs plus the effective configuration into
//! one directory. Each file carries the run manifest: CSV files as leading
//! `#` comment lines, JSON files as a `manifest` object.

mod commands;
mod compare;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, LabConfig};
use crate::exec::Execution;
use crate::grid::VoltagePlantMode;

pub use commands::{cmd_bode, cmd_rootlocus, cmd_simulate, cmd_tune};
pub use compare::{cmd_compare, compare_cases, ComparisonRow, ComparisonTable, OrderingCheck, CASE_LABELS};

pub const TOOL_NAME: &str = "dcgrid-lab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl LabError {
    /// 1 for invalid input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) => 1,
            LabError::Numerical(_) => 2,
        }
    }
}

impl From<ConfigError> for LabError {
    fn from(e: ConfigError) -> Self {
        LabError::Validation(e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> LabError {
    LabError::Validation(format!("cannot write {}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Tune,
    Simulate,
    Compare,
    Rootlocus,
    Bode,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tune => "tune",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Rootlocus => "rootlocus",
            Command::Bode => "bode",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config_path: String,
    pub output_dir: String,
    pub config_sha256: String,
    pub mode: &'static str,
    pub deterministic: bool,
}

impl RunManifest {
    fn comment_lines(&self) -> String {
        format!(
            "# {} {} subcommand={} mode={} config_sha256={}\n# config={} out={}\n",
            self.tool, self.version, self.subcommand, self.mode, self.config_sha256, self.config_path, self.output_dir
        )
    }
}

/// Where a command reads from and writes to.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config_path: String,
    pub out_dir: PathBuf,
    pub mode: Option<VoltagePlantMode>,
    pub exec: Execution,
}

/// Files written and a human-readable summary. `failure` is set when the
/// command wrote partial results but must still exit unsuccessfully.
#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub failure: Option<LabError>,
}

/// Open output directory for one command run.
pub struct OutputDir {
    dir: PathBuf,
    manifest: RunManifest,
    files: Vec<PathBuf>,
}

impl OutputDir {
    fn create(ctx: &RunContext, command: Command, config: &LabConfig) -> Result<Self, LabError> {
        fs::create_dir_all(&ctx.out_dir).map_err(|e| io_error(&ctx.out_dir, e))?;
        let toml = config.to_toml_string();
        let manifest = RunManifest {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            subcommand: command.name(),
            config_path: ctx.config_path.clone(),
            output_dir: ctx.out_dir.display().to_string(),
            config_sha256: config_hash(&toml),
            mode: config.tuning.mode.label(),
            deterministic: true,
        };
        let mut out = Self {
            dir: ctx.out_dir.clone(),
            manifest,
            files: Vec::new(),
        };
        let header = out.manifest.comment_lines();
        out.write_text("config.effective.toml", &format!("{header}{toml}"))?;
        out.write_json("manifest.json", &())?;
        Ok(out)
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), LabError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    /// `{"manifest": ..., ...payload}`; a unit payload writes the manifest alone.
    fn write_json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<(), LabError> {
        let value = serde_json::to_value(payload).map_err(|e| LabError::Numerical(e.to_string()))?;
        let manifest = serde_json::to_value(&self.manifest).expect("manifest serializes");
        let doc = match value {
            serde_json::Value::Object(mut map) => {
                let mut doc = serde_json::Map::new();
                doc.insert("manifest".into(), manifest);
                doc.append(&mut map);
                serde_json::Value::Object(doc)
            }
            serde_json::Value::Null => serde_json::json!({ "manifest": manifest }),
            other => serde_json::json!({ "manifest": manifest, "data": other }),
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| LabError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn write_csv<I>(&mut self, name: &str, extra_comments: &[String], header: &[&str], rows: I) -> Result<(), LabError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut buf = BufWriter::new(file);
        let mut comments = self.manifest.comment_lines();
        for c in extra_comments {
            comments.push_str("# ");
            comments.push_str(c);
            comments.push('\n');
        }
        buf.write_all(comments.as_bytes()).map_err(|e| io_error(&path, e))?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(buf);
        let csv_err = |e: csv::Error| LabError::Validation(format!("cannot write {}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, summary: String, failure: Option<LabError>) -> CommandOutput {
        CommandOutput {
            files: self.files,
            summary,
            failure,
        }
    }
}

/// Lower-case hex SHA-256 of the effective configuration text.
pub fn config_hash(effective_toml: &str) -> String {
    hex::encode(Sha256::digest(effective_toml.as_bytes()))
}

/// Shortest round-trip decimal form.
pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}

/// Applies the CLI mode override and validates.
pub fn effective_config(config: &LabConfig, mode: Option<VoltagePlantMode>) -> Result<LabConfig, LabError> {
    let mut cfg = config.clone();
    if let Some(m) = mode {
        cfg.tuning.mode = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_command(command: Command, config: &LabConfig, ctx: &RunContext) -> Result<CommandOutput, LabError> {
    let cfg = effective_config(config, ctx.mode)?;
    let out = OutputDir::create(ctx, command, &cfg)?;
    match command {
        Command::Tune => cmd_tune(&cfg, out),
        Command::Simulate => cmd_simulate(&cfg, out),
        Command::Compare => cmd_compare(&cfg, out, ctx.exec),
        Command::Rootlocus => cmd_rootlocus(&cfg, out, ctx.exec),
        Command::Bode => cmd_bode(&cfg, out),
    }
}

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;

/// Record of one invocation, written next to its main output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Main output the manifest is written beside.
    #[serde(skip)]
    pub anchor: Option<PathBuf>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            seed: None,
            config: Value::Null,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started_at: now(),
            finished_at: None,
            status: "running".into(),
            exit_code: 0,
            error: None,
            anchor: None,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// `<anchor>.manifest.json`, or `msapdm-<command>.manifest.json` in the
    /// working directory for commands without an output file.
    pub fn path(&self) -> PathBuf {
        match &self.anchor {
            Some(a) => {
                let mut name = a.file_name().map(|n| n.to_os_string()).unwrap_or_default();
                name.push(".manifest.json");
                a.with_file_name(name)
            }
            None => PathBuf::from(format!("msapdm-{}.manifest.json", self.command)),
        }
    }

    pub fn finish(&mut self, explicit: Option<&Path>, result: &CliResult) -> std::io::Result<()> {
        self.finished_at = Some(now());
        match result {
            Ok(()) => self.status = "ok".into(),
            Err(e) => {
                self.status = e.status().into();
                self.exit_code = e.exit_code();
                self.error = Some(e.to_string());
            }
        }
        let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| self.path());
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}

use std::path::{Path, PathBuf};

use incomeflow::io::write_json;
use incomeflow::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ccdf,
    Match,
    Fit,
    Simulate,
    Sample,
    Report,
}

/// Everything needed to rerun a command and get the same files back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: Command, inputs: Vec<PathBuf>, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command,
            inputs,
            config,
            seed,
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn sidecar(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    /// Writes `<output>.manifest.json` next to every recorded output.
    pub fn write_sidecars(&self) -> Result<()> {
        for out in &self.outputs {
            write_json(&Self::sidecar(out), self)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_name() {
        assert_eq!(
            RunManifest::sidecar(Path::new("out/fit_2008.json")),
            Path::new("out/fit_2008.json.manifest.json")
        );
    }

    #[test]
    fn command_names() {
        let m = RunManifest::new(Command::Simulate, vec![], serde_json::Value::Null, Some(3));
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["command"], "simulate");
        assert_eq!(v["seed"], 3);
    }
}

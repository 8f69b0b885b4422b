use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use policylogic::backends::fixtures::{FixtureStore, Recorder};
use policylogic::backends::{BackendSettings, Backends};
use policylogic::scripted::{scripted_backends, ScriptBook};
use policylogic::{Engine, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Answer every backend call from recorded fixtures.
    Replay,
    /// Call the configured endpoints.
    Live,
    /// Call the configured endpoints and append every exchange to the
    /// fixture directory.
    Capture,
    /// Answer from a script file; for building fixtures without endpoints.
    Scripted,
}

/// Contents of the `--config` file. Flags override file values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub listen: Option<SocketAddr>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub backends: Option<BackendSettings>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    /// Directory for session files; sessions are memory-only when unset.
    #[serde(default)]
    pub sessions_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Replay)
    }

    fn mode_name(&self) -> String {
        self.mode().to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default()
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let mut config = PipelineConfig::default();
        if let Some(t) = self.threshold {
            if !(-1.0..=1.0).contains(&t) {
                return Err(CliError::config(format!("threshold {t} is outside [-1, 1]")));
            }
            config.threshold = t;
        }
        if let Some(n) = self.samples {
            if n == 0 {
                return Err(CliError::config("samples must be at least 1"));
            }
            config.sample_size = n;
        }
        Ok(config)
    }

    fn fixtures_dir(&self) -> Result<&Path, CliError> {
        self.fixtures
            .as_deref()
            .ok_or_else(|| CliError::config(format!("{} mode needs a fixture directory (--fixtures)", self.mode_name())))
    }

    fn settings(&self) -> Result<&BackendSettings, CliError> {
        let settings = self
            .backends
            .as_ref()
            .ok_or_else(|| CliError::config(format!("{} mode needs backend endpoints (--config)", self.mode_name())))?;
        for (name, b) in [("generation", &settings.generation), ("embedding", &settings.embedding), ("nli", &settings.nli)] {
            b.validate().map_err(|e| CliError::config(format!("backends.{name}: {e}")))?;
        }
        Ok(settings)
    }

    pub fn backends(&self) -> Result<Backends, CliError> {
        match self.mode() {
            Mode::Replay => {
                let dir = self.fixtures_dir()?;
                if !dir.is_dir() {
                    return Err(CliError::config(format!("fixture directory {} does not exist", dir.display())));
                }
                let store = FixtureStore::load_dir(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
                Ok(Backends::replay(Arc::new(store)))
            }
            Mode::Live => Backends::live(self.settings()?).map_err(CliError::config),
            Mode::Capture => {
                let live = Backends::live(self.settings()?).map_err(CliError::config)?;
                let dir = self.fixtures_dir()?;
                let recorder = Recorder::to_dir(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
                Ok(live.capturing(Arc::new(recorder)))
            }
            Mode::Scripted => {
                let path = self
                    .script
                    .as_deref()
                    .ok_or_else(|| CliError::config("scripted mode needs a script file (--script)"))?;
                let book = ScriptBook::load(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
                Ok(scripted_backends(book))
            }
        }
    }

    pub fn engine(&self) -> Result<Engine, CliError> {
        Ok(Engine::new(self.backends()?, self.pipeline()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ExitKind;

    #[test]
    fn live_without_endpoints_is_a_config_error() {
        let cfg = ServiceConfig {
            mode: Some(Mode::Live),
            ..ServiceConfig::default()
        };
        assert_eq!(cfg.backends().err().unwrap().kind, ExitKind::Config);
    }

    #[test]
    fn replay_needs_fixtures() {
        let err = ServiceConfig::default().backends().err().unwrap();
        assert_eq!(err.kind, ExitKind::Config);
        assert!(err.message.contains("--fixtures"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ServiceConfig>(r#"{"api_key": "x"}"#).is_err());
        let cfg: ServiceConfig = serde_json::from_str(r#"{"mode": "capture", "threshold": 0.3}"#).unwrap();
        assert_eq!(cfg.mode(), Mode::Capture);
        assert_eq!(cfg.pipeline().unwrap().threshold, 0.3);
    }

    #[test]
    fn sample_size_must_be_positive() {
        let cfg = ServiceConfig {
            samples: Some(0),
            ..ServiceConfig::default()
        };
        assert_eq!(cfg.pipeline().unwrap_err().kind, ExitKind::Config);
    }
}

//! Server configuration file and the assets it points at.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use keychord::corpus::TokenVocab;
use keychord::llmgate::{ChatProvider, HttpProvider, LlmProviderConfig, MockProvider};
use keychord::sampler::{CalibrationArtifact, SamplerConfig};
use keychord::seqmodel::{self, PriorModel};
use serde::{Deserialize, Serialize};

use crate::transcribe::{HttpTranscriber, HttpTranscriberConfig, MockTranscriber, TranscriptionProvider};

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn load_err(path: &Path, e: impl ToString) -> SetupError {
    SetupError::Load { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPaths {
    pub vocab: PathBuf,
    pub prior: PathBuf,
    pub proposal: PathBuf,
}

impl ModelPaths {
    /// `vocab.json`, `prior.bin` and `proposal.bin` inside `dir`.
    pub fn in_dir(dir: &Path) -> ModelPaths {
        ModelPaths {
            vocab: dir.join("vocab.json"),
            prior: dir.join("prior.bin"),
            proposal: dir.join("proposal.bin"),
        }
    }
}

impl Default for ModelPaths {
    fn default() -> Self {
        ModelPaths::in_dir(Path::new("data/models"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LlmBackend {
    Mock {
        fixtures: PathBuf,
        #[serde(default)]
        default_fixture: Option<String>,
        #[serde(default)]
        transcript: Option<PathBuf>,
    },
    Live(LlmProviderConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TranscriptionBackend {
    Disabled,
    Mock { fixtures: PathBuf },
    Http(HttpTranscriberConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// JSONL file; audits stay in memory when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_retention")]
    pub retention_days: u64,
}

fn default_retention() -> u64 {
    7
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { path: None, retention_days: default_retention() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub models: ModelPaths,
    /// Calibration artifact; the shipped constant is used when absent.
    #[serde(default)]
    pub calibration: Option<PathBuf>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub llm: LlmBackend,
    #[serde(default = "default_transcription")]
    pub transcription: TranscriptionBackend,
    #[serde(default)]
    pub audit: AuditConfig,
    /// Honour the `x-keychord-seed` header. Test deployments only.
    #[serde(default)]
    pub allow_seed_header: bool,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_transcription() -> TranscriptionBackend {
    TranscriptionBackend::Disabled
}

impl ServerConfig {
    pub fn mock(fixtures: PathBuf, models: ModelPaths) -> ServerConfig {
        ServerConfig {
            bind: default_bind(),
            models,
            calibration: None,
            sampler: SamplerConfig::default(),
            llm: LlmBackend::Mock { fixtures: fixtures.clone(), default_fixture: None, transcript: None },
            transcription: TranscriptionBackend::Mock { fixtures: fixtures.join("transcriptions") },
            audit: AuditConfig::default(),
            allow_seed_header: true,
        }
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<ServerConfig, SetupError> {
        let text = fs::read_to_string(path).map_err(|e| load_err(path, e))?;
        let mut cfg: ServerConfig = serde_json::from_str(&text).map_err(|e| load_err(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.sampler.validate().map_err(|e| SetupError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.models.vocab);
        fix(&mut self.models.prior);
        fix(&mut self.models.proposal);
        if let Some(p) = &mut self.calibration {
            fix(p);
        }
        if let Some(p) = &mut self.audit.path {
            fix(p);
        }
        match &mut self.llm {
            LlmBackend::Mock { fixtures, transcript, .. } => {
                fix(fixtures);
                if let Some(t) = transcript {
                    fix(t);
                }
            }
            LlmBackend::Live(_) => {}
        }
        if let TranscriptionBackend::Mock { fixtures } = &mut self.transcription {
            fix(fixtures);
        }
    }

    /// Sampler settings with `M` taken from the calibration artifact if one
    /// is configured.
    pub fn effective_sampler(&self, vocab: &TokenVocab) -> Result<SamplerConfig, SetupError> {
        let Some(path) = &self.calibration else {
            return Ok(self.sampler.clone());
        };
        let artifact = CalibrationArtifact::load(path).map_err(|e| load_err(path, e))?;
        if artifact.vocab_version != vocab.version() {
            return Err(SetupError::Invalid(format!(
                "calibration was computed for vocabulary {}, loaded {}",
                artifact.vocab_version,
                vocab.version()
            )));
        }
        Ok(self.sampler.clone().with_calibration(&artifact))
    }

    pub fn chat_provider(&self) -> Result<Arc<dyn ChatProvider>, SetupError> {
        Ok(match &self.llm {
            LlmBackend::Mock { fixtures, default_fixture, transcript } => {
                let mut mock = MockProvider::new(fixtures);
                if let Some(d) = default_fixture {
                    mock = mock.with_default(d);
                }
                if let Some(t) = transcript {
                    mock = mock.with_transcript_file(t);
                }
                Arc::new(mock)
            }
            LlmBackend::Live(cfg) => {
                Arc::new(HttpProvider::new(cfg.clone()).map_err(|e| SetupError::Invalid(e.to_string()))?)
            }
        })
    }

    pub fn transcriber(&self) -> Result<Option<Arc<dyn TranscriptionProvider>>, SetupError> {
        Ok(match &self.transcription {
            TranscriptionBackend::Disabled => None,
            TranscriptionBackend::Mock { fixtures } => Some(Arc::new(MockTranscriber::new(fixtures))),
            TranscriptionBackend::Http(cfg) => Some(Arc::new(
                HttpTranscriber::new(cfg.clone()).map_err(|e| SetupError::Invalid(e.to_string()))?,
            )),
        })
    }
}

/// Vocabulary plus both priors, checked against each other.
pub struct Assets {
    pub vocab: TokenVocab,
    pub prior: PriorModel,
    pub proposal: PriorModel,
}

impl Assets {
    pub fn load(paths: &ModelPaths) -> Result<Assets, SetupError> {
        let vocab = TokenVocab::load(&paths.vocab).map_err(|e| load_err(&paths.vocab, e))?;
        let prior = seqmodel::load(&paths.prior, &vocab).map_err(|e| load_err(&paths.prior, e))?;
        let proposal = seqmodel::load(&paths.proposal, &vocab).map_err(|e| load_err(&paths.proposal, e))?;
        Ok(Assets { vocab, prior, proposal })
    }
}

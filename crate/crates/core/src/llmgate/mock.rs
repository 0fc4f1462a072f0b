//! Offline provider that answers from a fixture directory.
//!
//! Lookup order for a request: `<sha256>.txt`, `default_<template_id>.txt`,
//! the configured default fixture, then `default.txt`.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::prompts::TemplateId;
use super::provider::{ChatProvider, ChatRequest};
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: usize,
    pub request_hash: String,
    pub template: TemplateId,
    pub user: String,
    pub fixture: String,
    pub response_bytes: usize,
}

pub struct MockProvider {
    dir: PathBuf,
    default_fixture: Option<String>,
    transcript_path: Option<PathBuf>,
    transcripts: Mutex<Vec<TranscriptEntry>>,
}

impl MockProvider {
    pub fn new(dir: impl Into<PathBuf>) -> MockProvider {
        MockProvider {
            dir: dir.into(),
            default_fixture: None,
            transcript_path: None,
            transcripts: Mutex::new(Vec::new()),
        }
    }

    /// Fixture file name used when neither the hash nor the template default exists.
    pub fn with_default(mut self, file_name: impl Into<String>) -> MockProvider {
        self.default_fixture = Some(file_name.into());
        self
    }

    /// Also append each transcript entry to a JSONL file.
    pub fn with_transcript_file(mut self, path: impl Into<PathBuf>) -> MockProvider {
        self.transcript_path = Some(path.into());
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn transcript_count(&self) -> usize {
        self.transcripts.lock().unwrap().len()
    }

    pub fn transcripts(&self) -> Vec<TranscriptEntry> {
        self.transcripts.lock().unwrap().clone()
    }

    fn resolve(&self, request: &ChatRequest) -> Option<PathBuf> {
        let mut names = vec![
            format!("{}.txt", request.hash()),
            format!("default_{}.txt", request.template),
        ];
        names.extend(self.default_fixture.clone());
        names.push("default.txt".into());
        names.into_iter().map(|n| self.dir.join(n)).find(|p| p.is_file())
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let hash = request.hash();
        let path = self
            .resolve(request)
            .ok_or_else(|| LlmError::Fixture(format!("no fixture for {hash} in {}", self.dir.display())))?;
        let text = fs::read_to_string(&path)
            .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))?;

        let mut log = self.transcripts.lock().unwrap();
        let entry = TranscriptEntry {
            seq: log.len(),
            request_hash: hash,
            template: request.template,
            user: request.user.clone(),
            fixture: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            response_bytes: text.len(),
        };
        if let Some(out) = &self.transcript_path {
            let line = serde_json::to_string(&entry).expect("transcript entry serializes");
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(out)
                .and_then(|mut f| writeln!(f, "{line}"))
                .map_err(|e| LlmError::Fixture(format!("{}: {e}", out.display())))?;
        }
        log.push(entry);
        Ok(text)
    }
}

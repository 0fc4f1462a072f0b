//! Chord-progression candidates from the diverse batch prompt and the
//! one-at-a-time baseline prompt.

use crate::chordlang::{parse_progression, Key, Mode, Progression};

use super::keywords::KeywordSet;
use super::prompts::{chord_user_message, PromptTemplate, TemplateId};
use super::provider::{ChatProvider, ChatRequest};
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedLine {
    pub line: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub candidates: Vec<Progression>,
    pub dropped: Vec<DroppedLine>,
    /// Provider calls made, including the under-yield retry.
    pub calls: usize,
}

/// Splits a response into candidate lines. The prompt's examples separate
/// progressions with a literal `\n`, so that sequence counts as a break too.
fn response_lines(response: &str) -> impl Iterator<Item = &str> {
    response
        .lines()
        .flat_map(|l| l.split("\\n"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
}

/// Parses every line, keeping those with exactly `bars` valid chords.
pub fn parse_candidates(
    response: &str,
    key: Key,
    mode: Mode,
    bars: usize,
) -> (Vec<Progression>, Vec<DroppedLine>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for line in response_lines(response) {
        let reason = match parse_progression(line, key, mode) {
            Ok(p) if p.bars() == bars => {
                kept.push(p);
                continue;
            }
            Ok(p) => format!("expected {bars} chords, found {}", p.bars()),
            Err(e) => e.to_string(),
        };
        log::warn!("dropping candidate {line:?}: {reason}");
        dropped.push(DroppedLine { line: line.to_string(), reason });
    }
    (kept, dropped)
}

fn chord_request(
    template: TemplateId,
    n: usize,
    keywords: &KeywordSet,
    key: Key,
    mode: Mode,
    bars: usize,
    provider: &dyn ChatProvider,
) -> ChatRequest {
    ChatRequest {
        template,
        system: PromptTemplate::builtin(template).render(n),
        user: chord_user_message(&keywords.texts(), key, mode, bars),
        image: None,
        temperature: provider.temperature(),
    }
}

fn check_inputs(keywords: &KeywordSet, bars: usize) -> Result<(), LlmError> {
    if keywords.is_empty() {
        return Err(LlmError::MissingInput);
    }
    if bars == 0 {
        return Err(LlmError::InvalidRequest("bars must be at least 1".into()));
    }
    Ok(())
}

/// Requests `n` progressions in one call. If fewer than 80% of `n` parse,
/// the same prompt is sent once more and the better response is kept.
pub fn generate_candidates_batch(
    keywords: &KeywordSet,
    key: Key,
    mode: Mode,
    bars: usize,
    n: usize,
    provider: &dyn ChatProvider,
) -> Result<CandidateBatch, LlmError> {
    check_inputs(keywords, bars)?;
    if n == 0 {
        return Err(LlmError::InvalidRequest("batch size must be at least 1".into()));
    }
    let request = chord_request(TemplateId::ChordBatchDiverse, n, keywords, key, mode, bars, provider);
    let needed = (n * 4).div_ceil(5);

    let mut best: Option<(Vec<Progression>, Vec<DroppedLine>)> = None;
    let mut calls = 0;
    while calls < 2 {
        let response = provider.complete(&request)?;
        calls += 1;
        let (kept, dropped) = parse_candidates(&response, key, mode, bars);
        let enough = kept.len() >= needed;
        if best.as_ref().is_none_or(|(b, _)| kept.len() > b.len()) {
            best = Some((kept, dropped));
        }
        if enough {
            break;
        }
        log::info!("batch under-yield ({needed} needed), retrying once");
    }
    let (candidates, dropped) = best.expect("at least one call was made");
    if candidates.is_empty() {
        return Err(LlmError::AllCandidatesMalformed { dropped: dropped.len() });
    }
    Ok(CandidateBatch { candidates, dropped, calls })
}

/// One progression from the baseline prompt: the first line that parses
/// with the right bar count. Retries once if none does.
pub fn generate_candidate_single(
    keywords: &KeywordSet,
    key: Key,
    mode: Mode,
    bars: usize,
    provider: &dyn ChatProvider,
) -> Result<Progression, LlmError> {
    check_inputs(keywords, bars)?;
    let request = chord_request(TemplateId::ChordSingleBaseline, 1, keywords, key, mode, bars, provider);
    let mut dropped = 0;
    for _ in 0..2 {
        let response = provider.complete(&request)?;
        if response.trim().is_empty() {
            return Err(LlmError::EmptyResponse);
        }
        let (kept, bad) = parse_candidates(&response, key, mode, bars);
        if let Some(first) = kept.into_iter().next() {
            return Ok(first);
        }
        dropped += bad.len();
    }
    Err(LlmError::AllCandidatesMalformed { dropped })
}

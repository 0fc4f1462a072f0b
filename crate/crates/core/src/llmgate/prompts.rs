//! System prompt templates and user-message builders.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chordlang::{Key, Mode};

const KEYWORD_EXTRACTION: &str = include_str!("../../prompts/keyword_extraction.txt");
const CHORD_BATCH_DIVERSE: &str = include_str!("../../prompts/chord_batch_diverse.txt");
const CHORD_SINGLE_BASELINE: &str = include_str!("../../prompts/chord_single_baseline.txt");

/// Style, genre and song-type vocabulary injected into the keyword prompt.
pub const KEYWORD_LIST: &str = include_str!("../../prompts/keyword_list.txt");

/// Batch size the diverse prompt was written for.
pub const DEFAULT_BATCH_SIZE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    KeywordExtraction,
    ChordBatchDiverse,
    ChordSingleBaseline,
}

impl TemplateId {
    pub const ALL: [TemplateId; 3] = [
        TemplateId::KeywordExtraction,
        TemplateId::ChordBatchDiverse,
        TemplateId::ChordSingleBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::KeywordExtraction => "keyword_extraction",
            TemplateId::ChordBatchDiverse => "chord_batch_diverse",
            TemplateId::ChordSingleBaseline => "chord_single_baseline",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template id {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(id: TemplateId) -> PromptTemplate {
        let body = match id {
            TemplateId::KeywordExtraction => KEYWORD_EXTRACTION,
            TemplateId::ChordBatchDiverse => CHORD_BATCH_DIVERSE,
            TemplateId::ChordSingleBaseline => CHORD_SINGLE_BASELINE,
        };
        PromptTemplate { id, body: body.trim_end().to_string() }
    }

    /// Fills `{N}` with the batch size and `{keyword_list}` with the
    /// shipped vocabulary. Templates without those placeholders pass through.
    pub fn render(&self, n: usize) -> String {
        self.body
            .replace("{keyword_list}", KEYWORD_LIST.trim_end())
            .replace("{N}", &n.to_string())
    }
}

/// Every term of the shipped keyword list, in file order.
pub fn keyword_vocabulary() -> Vec<String> {
    KEYWORD_LIST
        .lines()
        .filter_map(|line| line.split_once(':').map(|(_, rest)| rest))
        .flat_map(|rest| rest.split(','))
        .map(|k| k.trim().to_string())
        .filter(|k| !k.is_empty())
        .collect()
}

/// User turn for keyword extraction, shaped like the few-shot examples.
pub fn keyword_user_message(has_image: bool, text: Option<&str>, user_keywords: &[String]) -> String {
    let mut parts = Vec::new();
    if has_image {
        parts.push("Image: [attached]".to_string());
    }
    if let Some(text) = text.map(str::trim).filter(|t| !t.is_empty()) {
        parts.push(format!("Text Note: {text}"));
    }
    if !user_keywords.is_empty() {
        parts.push(format!("User Keywords: {}", user_keywords.join(", ")));
    }
    parts.join(" | ")
}

/// User turn for both chord strategies.
pub fn chord_user_message(keywords: &[String], key: Key, mode: Mode, bars: usize) -> String {
    format!(
        "User keywords: {} | Key: {key} | Mode: {mode} | Bars: {bars}",
        keywords.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_all_filled() {
        for id in TemplateId::ALL {
            let text = PromptTemplate::builtin(id).render(30);
            assert!(!text.contains('{'), "{id} left a placeholder");
        }
    }

    #[test]
    fn batch_size_is_substituted_everywhere() {
        let text = PromptTemplate::builtin(TemplateId::ChordBatchDiverse).render(12);
        assert_eq!(text.matches("12").count(), 4);
        assert!(!text.contains("30"));
    }

    #[test]
    fn vocabulary_has_expected_terms() {
        let vocab = keyword_vocabulary();
        for term in ["dance", "tribal", "appalachian", "rap", "elevator", "vocaloid", "drum'n'bass"] {
            assert!(vocab.iter().any(|v| v == term), "{term}");
        }
        assert!(!vocab.iter().any(|v| v.contains(':')));
    }

    #[test]
    fn user_messages() {
        let kws = vec!["dreamy".to_string(), "jazz".to_string(), "soft".to_string()];
        assert_eq!(
            chord_user_message(&kws, "B".parse().unwrap(), Mode::Maj, 4),
            "User keywords: dreamy, jazz, soft | Key: B | Mode: Maj | Bars: 4"
        );
        assert_eq!(
            keyword_user_message(false, Some("home"), &["hopeful".to_string()]),
            "Text Note: home | User Keywords: hopeful"
        );
        assert_eq!(keyword_user_message(true, Some("  "), &[]), "Image: [attached]");
    }
}

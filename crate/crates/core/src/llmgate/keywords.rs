//! Keyword sets and the keyword-extraction call.

use serde::{Deserialize, Serialize};

use super::prompts::{keyword_user_message, PromptTemplate, TemplateId};
use super::provider::{ChatProvider, ChatRequest, ImageInput};
use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordOrigin {
    LlmSuggested,
    UserWritten,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub text: String,
    pub origin: KeywordOrigin,
}

/// Ordered, case-folded, duplicate-free keywords.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordSet {
    items: Vec<Keyword>,
}

impl KeywordSet {
    pub fn new() -> KeywordSet {
        KeywordSet::default()
    }

    /// Splits on commas and newlines; see [`KeywordSet::push`] for normalization.
    pub fn parse(text: &str, origin: KeywordOrigin) -> KeywordSet {
        let mut set = KeywordSet::new();
        for piece in text.split([',', '\n']) {
            set.push(piece, origin);
        }
        set
    }

    pub fn from_user<S: AsRef<str>>(keywords: &[S]) -> KeywordSet {
        let mut set = KeywordSet::new();
        for k in keywords {
            set.push(k.as_ref(), KeywordOrigin::UserWritten);
        }
        set
    }

    /// Trims and lowercases; returns false for blanks and duplicates.
    pub fn push(&mut self, keyword: &str, origin: KeywordOrigin) -> bool {
        let text = keyword.trim().to_lowercase();
        if text.is_empty() || self.contains(&text) {
            return false;
        }
        self.items.push(Keyword { text, origin });
        true
    }

    pub fn contains(&self, keyword: &str) -> bool {
        let folded = keyword.trim().to_lowercase();
        self.items.iter().any(|k| k.text == folded)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Keyword> {
        self.items.iter()
    }

    pub fn texts(&self) -> Vec<String> {
        self.items.iter().map(|k| k.text.clone()).collect()
    }
}

/// Asks the provider for keywords describing the inputs. User keywords the
/// model did not echo back are appended with their origin kept.
pub fn extract_keywords(
    image: Option<ImageInput>,
    text: Option<&str>,
    user_keywords: &[String],
    provider: &dyn ChatProvider,
) -> Result<KeywordSet, LlmError> {
    let text = text.map(str::trim).filter(|t| !t.is_empty());
    let user = KeywordSet::from_user(user_keywords);
    if image.is_none() && text.is_none() && user.is_empty() {
        return Err(LlmError::MissingInput);
    }
    let request = ChatRequest {
        template: TemplateId::KeywordExtraction,
        system: PromptTemplate::builtin(TemplateId::KeywordExtraction).render(0),
        user: keyword_user_message(image.is_some(), text, &user.texts()),
        image,
        temperature: provider.temperature(),
    };
    let response = provider.complete(&request)?;
    let mut set = KeywordSet::parse(&response, KeywordOrigin::LlmSuggested);
    if set.is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    for k in user.iter() {
        set.push(&k.text, KeywordOrigin::UserWritten);
    }
    Ok(set)
}

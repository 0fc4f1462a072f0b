//! Prompt construction, LLM calls, response validation and an offline mock.

mod candidates;
mod keywords;
mod mock;
mod prompts;
mod provider;

pub use candidates::{
    generate_candidate_single, generate_candidates_batch, parse_candidates, CandidateBatch,
    DroppedLine,
};
pub use keywords::{extract_keywords, Keyword, KeywordOrigin, KeywordSet};
pub use mock::{MockProvider, TranscriptEntry};
pub use prompts::{
    chord_user_message, keyword_user_message, keyword_vocabulary, PromptTemplate, TemplateId,
    DEFAULT_BATCH_SIZE, KEYWORD_LIST,
};
pub use provider::{
    ChatProvider, ChatRequest, HttpProvider, ImageInput, LlmProviderConfig, RetryPolicy,
    DEFAULT_TEMPERATURE, MAX_IMAGE_BYTES,
};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("upstream LLM failed after {attempts} attempts: {message}")]
    Upstream { attempts: u32, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("the model returned an empty response")]
    EmptyResponse,
    #[error("no valid chord progression in the response ({dropped} lines dropped)")]
    AllCandidatesMalformed { dropped: usize },
    #[error("at least one of image, text or keywords is required")]
    MissingInput,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("image is {size} bytes, limit is {limit}")]
    ImageTooLarge { size: usize, limit: usize },
    #[error("unsupported image format")]
    UnsupportedImage,
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("provider config: {0}")]
    Config(String),
    #[error("mock fixture: {0}")]
    Fixture(String),
}

impl LlmError {
    /// Transport failures, rate limiting and server errors are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }

    /// True when the failure came from the upstream model rather than the caller.
    pub fn is_upstream(&self) -> bool {
        matches!(
            self,
            LlmError::Upstream { .. }
                | LlmError::Transport(_)
                | LlmError::Status { .. }
                | LlmError::Malformed(_)
                | LlmError::EmptyResponse
                | LlmError::AllCandidatesMalformed { .. }
                | LlmError::MissingApiKey(_)
                | LlmError::Fixture(_)
        )
    }
}

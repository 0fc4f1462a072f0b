//! HTTP routes.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use keychord::chordlang::{Key, Mode};
use keychord::corpus::TokenVocab;
use keychord::llmgate::{extract_keywords, ChatProvider, ImageInput, Keyword, KeywordSet, LlmError, MAX_IMAGE_BYTES};
use keychord::sampler::{generate_suggestions, Provenance, SamplerConfig, SamplerError, Scorer};
use keychord::seqmodel::PriorModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{now_secs, AuditEntry, AuditStore};
use crate::config::{Assets, ServerConfig, SetupError};
use crate::transcribe::{convert, Converted, TimedChord, TranscribeError, TranscribeRequest, TranscriptionProvider};

/// Request header that pins the sampler RNG when the deployment allows it.
pub const SEED_HEADER: &str = "x-keychord-seed";
/// Bars a client may ask for.
pub const ALLOWED_BARS: [usize; 2] = [3, 4];
/// Request body cap; leaves room for multipart framing around a maximal image.
const BODY_LIMIT: usize = MAX_IMAGE_BYTES + 1024 * 1024;

pub struct AppState {
    pub vocab: TokenVocab,
    pub prior: PriorModel,
    pub proposal: PriorModel,
    pub sampler: SamplerConfig,
    pub llm: Arc<dyn ChatProvider>,
    pub transcriber: Option<Arc<dyn TranscriptionProvider>>,
    pub audit: AuditStore,
    pub allow_seed_header: bool,
}

impl AppState {
    pub fn from_config(cfg: &ServerConfig) -> Result<AppState, SetupError> {
        let Assets { vocab, prior, proposal } = Assets::load(&cfg.models)?;
        let sampler = cfg.effective_sampler(&vocab)?;
        let retention = Duration::from_secs(cfg.audit.retention_days * 86_400);
        let audit = match &cfg.audit.path {
            Some(p) => AuditStore::open(p, retention).map_err(|e| SetupError::Load {
                path: p.clone(),
                message: e.to_string(),
            })?,
            None => AuditStore::in_memory(retention),
        };
        Ok(AppState {
            vocab,
            prior,
            proposal,
            sampler,
            llm: cfg.chat_provider()?,
            transcriber: cfg.transcriber()?,
            audit,
            allow_seed_header: cfg.allow_seed_header,
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/keywords", post(keywords))
        .route("/chords", post(chords))
        .route("/transcribe", post(transcribe))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> ApiError {
        ApiError { status, code, message: message.to_string() }
    }

    fn bad_request(message: impl ToString) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl ToString) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{} {}: {}", self.status, self.code, self.message);
        }
        let body = serde_json::json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<LlmError> for ApiError {
    fn from(e: LlmError) -> ApiError {
        match e {
            LlmError::MissingInput | LlmError::InvalidRequest(_) | LlmError::UnsupportedImage => {
                ApiError::bad_request(e)
            }
            LlmError::ImageTooLarge { .. } => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", e),
            LlmError::AllCandidatesMalformed { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "all_candidates_malformed", e)
            }
            _ => ApiError::new(StatusCode::BAD_GATEWAY, "upstream", e),
        }
    }
}

impl From<SamplerError> for ApiError {
    fn from(e: SamplerError) -> ApiError {
        match e {
            SamplerError::Llm(inner) => inner.into(),
            other => ApiError::internal(other),
        }
    }
}

impl From<TranscribeError> for ApiError {
    fn from(e: TranscribeError) -> ApiError {
        match e {
            TranscribeError::InvalidSegment(_) | TranscribeError::InvalidKey(_) => ApiError::bad_request(e),
            TranscribeError::Provider(_) | TranscribeError::Malformed(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "upstream", e)
            }
        }
    }
}

fn multipart_error(e: MultipartError) -> ApiError {
    let status = e.status();
    let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "payload_too_large" } else { "bad_request" };
    ApiError::new(status, code, e.body_text())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

async fn health(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "vocab_version": s.vocab.version(),
        "M": s.sampler.m,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KeywordsResponse {
    pub keywords: Vec<Keyword>,
}

async fn keywords(State(s): State<Arc<AppState>>, mut multipart: Multipart) -> Result<Json<KeywordsResponse>, ApiError> {
    let mut image: Option<Bytes> = None;
    let mut text: Option<String> = None;
    let mut user_keywords = Vec::new();
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        match field.name() {
            Some("image") => image = Some(field.bytes().await.map_err(multipart_error)?),
            Some("text") => text = Some(field.text().await.map_err(multipart_error)?),
            Some("user_keywords") => {
                let raw = field.text().await.map_err(multipart_error)?;
                user_keywords.extend(raw.split(',').map(str::trim).filter(|k| !k.is_empty()).map(String::from));
            }
            _ => {}
        }
    }
    let image = match image.filter(|b| !b.is_empty()) {
        Some(bytes) => Some(ImageInput::new(bytes.to_vec())?),
        None => None,
    };
    let llm = s.llm.clone();
    let set = blocking(move || extract_keywords(image, text.as_deref(), &user_keywords, llm.as_ref())).await??;
    Ok(Json(KeywordsResponse { keywords: set.iter().cloned().collect() }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChordsRequest {
    pub keywords: Vec<String>,
    pub key: String,
    pub mode: String,
    pub bars: usize,
}

impl ChordsRequest {
    fn validate(&self) -> Result<(KeywordSet, Key, Mode, usize), ApiError> {
        let set = KeywordSet::from_user(&self.keywords);
        if set.is_empty() {
            return Err(ApiError::bad_request("at least one keyword is required"));
        }
        let key: Key = self.key.parse().map_err(ApiError::bad_request)?;
        let mode: Mode = self.mode.parse().map_err(ApiError::bad_request)?;
        if !ALLOWED_BARS.contains(&self.bars) {
            return Err(ApiError::bad_request(format!("bars must be 3 or 4, got {}", self.bars)));
        }
        Ok((set, key, mode, self.bars))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestionBody {
    pub chords: Vec<String>,
    pub provenance: Provenance,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChordsResponse {
    pub suggestions: Vec<SuggestionBody>,
    pub audit_id: String,
    pub key: String,
    pub mode: String,
    pub bars: usize,
}

fn request_rng(headers: &HeaderMap, allowed: bool) -> Result<ChaCha8Rng, ApiError> {
    match headers.get(SEED_HEADER) {
        Some(v) if allowed => {
            let seed = v
                .to_str()
                .ok()
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| ApiError::bad_request(format!("{SEED_HEADER} must be an unsigned integer")))?;
            Ok(ChaCha8Rng::seed_from_u64(seed))
        }
        _ => Ok(ChaCha8Rng::from_rng(&mut rand::rng())),
    }
}

async fn chords(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<ChordsResponse>, ApiError> {
    let req: ChordsRequest = serde_json::from_slice(&body).map_err(ApiError::bad_request)?;
    let (set, key, mode, bars) = req.validate()?;
    let mut rng = request_rng(&headers, s.allow_seed_header)?;
    let state = s.clone();
    let out = blocking(move || {
        let scorer = Scorer::new(&state.vocab, &state.prior, &state.proposal)?;
        generate_suggestions(&set, key, mode, bars, state.llm.as_ref(), &scorer, &state.sampler, &mut rng)
    })
    .await??;

    let audit_id = uuid::Uuid::new_v4().to_string();
    let entry = AuditEntry {
        audit_id: audit_id.clone(),
        created_at: now_secs(),
        request: serde_json::to_value(&req).expect("request serializes"),
        suggestions: out.suggestions.clone(),
        records: out.audit,
    };
    if let Err(e) = s.audit.append(&entry) {
        log::error!("writing audit {audit_id}: {e}");
    }
    let suggestions = out
        .suggestions
        .into_iter()
        .map(|x| SuggestionBody { chords: x.progression.symbols(), provenance: x.provenance, ratio: x.ratio })
        .collect();
    Ok(Json(ChordsResponse { suggestions, audit_id, key: key.to_string(), mode: mode.to_string(), bars }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscribeResponse {
    pub detected_key: String,
    pub detected_mode: String,
    pub chords: Vec<TimedChord>,
    pub converted: Option<Converted>,
}

async fn transcribe(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<TranscribeResponse>, ApiError> {
    let req: TranscribeRequest = serde_json::from_slice(&body).map_err(ApiError::bad_request)?;
    let target = req.validate()?;
    let provider = s.transcriber.clone().ok_or_else(|| {
        ApiError::new(StatusCode::NOT_IMPLEMENTED, "not_implemented", "no transcription provider is configured")
    })?;
    let t = blocking(move || provider.transcribe(&req.audio, req.start_s, req.end_s)).await??;
    let converted = target.map(|(key, mode)| convert(&t, key, mode)).transpose()?;
    Ok(Json(TranscribeResponse {
        detected_key: t.detected_key,
        detected_mode: t.detected_mode,
        chords: t.chords,
        converted,
    }))
}

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lrms_core::crypto::CryptoError;
use lrms_core::ledger::LedgerError;
use lrms_core::pipeline::PipelineError;
use lrms_core::registry::RegistryError;
use lrms_core::trading::TradingError;

/// Error code to HTTP status. Codes missing here are internal errors.
pub const STATUS_TABLE: &[(&str, u16)] = &[
    // malformed input
    ("invalid-request", 400),
    ("invalid-public-key", 400),
    ("invalid-validity", 400),
    ("invalid-price", 400),
    ("invalid-land", 400),
    ("invalid-parameter", 400),
    ("message-too-large", 400),
    ("invalid-ephemeral", 400),
    ("unsupported-character", 400),
    ("invalid-code", 400),
    ("truncated-stream", 400),
    ("invalid-base", 400),
    ("invalid-bit", 400),
    ("odd-length-bitstream", 400),
    ("ragged-bitstream", 400),
    ("envelope-magic-mismatch", 400),
    ("unsupported-version", 400),
    ("malformed-envelope", 400),
    ("guard-digit-missing", 400),
    ("corrupt-ciphertext", 400),
    ("not-invertible", 400),
    ("invalid-chunking", 400),
    ("empty-record", 400),
    ("invalid-transaction", 400),
    ("empty-block", 400),
    // identity
    ("invalid-session", 401),
    ("invalid-certificate", 401),
    ("bad-signature", 401),
    ("expired-challenge", 401),
    ("replayed-challenge", 401),
    ("subject-mismatch", 401),
    // permission
    ("unauthorized", 403),
    ("not-owner", 403),
    ("wrong-party", 403),
    ("self-dealing", 403),
    ("seller-not-owner", 403),
    // lookup
    ("not-found", 404),
    ("challenge-not-found", 404),
    ("listing-not-found", 404),
    ("deed-not-found", 404),
    ("no-active-record", 404),
    ("method-not-allowed", 405),
    // state conflicts
    ("duplicate-active-record", 409),
    ("duplicate-listing", 409),
    ("listing-not-open", 409),
    ("already-signed", 409),
    ("premature-bank-signature", 409),
    ("deed-closed", 409),
    ("deed-not-finalized", 409),
    ("deed-not-abandonable", 409),
    ("signature-invalid", 409),
    // server side
    ("persistence-failure", 500),
    ("chain-corrupt", 500),
    ("index-incoherent", 500),
    ("internal", 500),
];

pub fn status_for(code: &str) -> StatusCode {
    STATUS_TABLE
        .iter()
        .find(|(c, _)| *c == code)
        .and_then(|(_, s)| StatusCode::from_u16(*s).ok())
        .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
}

/// The body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError { code: code.to_owned(), message: message.into(), detail: None }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("invalid-request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new("not-found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new("internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_for(&self.code), Json(self)).into_response()
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        let detail = match &e {
            RegistryError::SignatureInvalid(role) => Some(serde_json::json!({ "role": role })),
            RegistryError::Ledger(LedgerError::Corrupt(v)) => {
                Some(serde_json::json!({ "position": v.position, "reason": v.reason.code() }))
            }
            _ => None,
        };
        ApiError { code: e.code().to_owned(), message: e.to_string(), detail }
    }
}

impl From<TradingError> for ApiError {
    fn from(e: TradingError) -> Self {
        match e {
            TradingError::Registry(inner) => inner.into(),
            TradingError::AlreadySigned(role) => {
                ApiError::new(e.code(), e.to_string()).with_detail(serde_json::json!({ "role": role }))
            }
            other => ApiError::new(other.code(), other.to_string()),
        }
    }
}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<CryptoError> for ApiError {
    fn from(e: CryptoError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

//! Library half of the `lrms` operator tool.

pub mod client;
pub mod keyfile;
pub mod scenario;

use std::path::Path;

use lrms_service::ApiError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_API: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unusable local input.
    Usage(ApiError),
    /// The service answered with an error envelope.
    Api(ApiError),
    /// The service could not be reached or answered nonsense.
    Transport(String),
    /// A signature, certificate, chain or scenario check failed.
    Verification(String),
    /// Anything else, such as a service that cannot bind its port.
    Failure(String),
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Usage(ApiError::bad_request(message))
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::input(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Api(_) | CliError::Transport(_) => EXIT_API,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    /// The error as an envelope, for printing.
    pub fn envelope(&self) -> ApiError {
        match self {
            CliError::Usage(e) | CliError::Api(e) => e.clone(),
            CliError::Transport(m) => ApiError::new("transport", m.clone()),
            CliError::Verification(m) => ApiError::new("verification-failed", m.clone()),
            CliError::Failure(m) => ApiError::internal(m.clone()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let e = self.envelope();
        write!(f, "{}: {}", e.code, e.message)
    }
}

impl std::error::Error for CliError {}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Usage(ApiError::from(e))
            }
        }
    )*};
}

usage_from!(
    lrms_core::registry::RegistryError,
    lrms_core::trading::TradingError,
    lrms_core::pipeline::PipelineError,
    lrms_core::crypto::CryptoError
);

impl From<lrms_core::c2i::CodecError> for CliError {
    fn from(e: lrms_core::c2i::CodecError) -> Self {
        CliError::Usage(ApiError::new(e.code(), e.to_string()))
    }
}

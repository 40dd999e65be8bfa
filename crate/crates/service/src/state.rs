use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use lrms_core::crypto::{generate_domain_params, DomainParams, DEFAULT_KEY_BITS};
use lrms_core::ledger::{Ledger, LedgerError, Violation};
use lrms_core::pipeline::DEFAULT_CHUNK_DIGITS;
use lrms_core::registry::{Registry, RegistryError};
use lrms_core::trading::cert::{CertificateAuthority, CertificateStore};
use lrms_core::trading::{Marketplace, TradingError};

pub const CHAIN_FILE: &str = "chain.dat";
pub const INDEX_FILE: &str = "index.jsonl";
pub const PARAMS_FILE: &str = "params.json";
pub const CA_KEY_FILE: &str = "ca_key.json";
pub const CERTS_FILE: &str = "certs.jsonl";
pub const MARKET_FILE: &str = "market.json";

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub key_bits: u64,
    pub chunk_digits: u16,
    pub bank_id: String,
    pub ca_id: String,
    /// When set, registering records requires this bearer token.
    pub registrar_token: Option<String>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            port: 8080,
            key_bits: DEFAULT_KEY_BITS,
            chunk_digits: DEFAULT_CHUNK_DIGITS,
            bank_id: "Bank".into(),
            ca_id: "LRMS-CA".into(),
            registrar_token: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("data directory {0}: {1}")]
    DataDir(PathBuf, std::io::Error),
    #[error("refusing to start: {0}")]
    CorruptChain(Violation),
    #[error("{0}: {1}")]
    BadFile(&'static str, String),
    #[error(transparent)]
    Ledger(LedgerError),
    #[error(transparent)]
    Registry(RegistryError),
    #[error(transparent)]
    Trading(TradingError),
}

impl From<LedgerError> for StartupError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Corrupt(v) => StartupError::CorruptChain(v),
            other => StartupError::Ledger(other),
        }
    }
}

impl From<RegistryError> for StartupError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Ledger(inner) => inner.into(),
            other => StartupError::Registry(other),
        }
    }
}

/// Everything the handlers share.
pub struct AppState {
    pub config: ServiceConfig,
    pub params: DomainParams,
    pub ca: CertificateAuthority,
    pub certs: Arc<CertificateStore>,
    pub ledger: Arc<Ledger>,
    pub registry: Arc<Registry>,
    pub market: Marketplace,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, name: &'static str) -> Result<Option<T>, StartupError> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| StartupError::BadFile(name, e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(StartupError::BadFile(name, e.to_string())),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T, name: &'static str) -> Result<(), StartupError> {
    let bytes = serde_json::to_vec_pretty(value).expect("serializable");
    fs::write(path, bytes).map_err(|e| StartupError::BadFile(name, e.to_string()))
}

impl AppState {
    /// Loads or bootstraps the data directory. A chain that fails verification is fatal.
    pub fn open(config: ServiceConfig) -> Result<Self, StartupError> {
        let dir = config.data_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| StartupError::DataDir(dir.clone(), e))?;
        let now = unix_now();
        let mut rng = rand::thread_rng();

        // The chain is checked first so a tampered directory is refused before anything is written.
        let ledger = Arc::new(Ledger::open(&dir.join(CHAIN_FILE), now)?);

        let params = match read_json::<DomainParams>(&dir.join(PARAMS_FILE), PARAMS_FILE)? {
            Some(p) => p,
            None => {
                let p = if config.key_bits == DEFAULT_KEY_BITS {
                    DomainParams::rfc2409_1024()
                } else {
                    generate_domain_params(config.key_bits, &mut rng)
                        .map_err(|e| StartupError::BadFile(PARAMS_FILE, e.to_string()))?
                };
                write_json(&dir.join(PARAMS_FILE), &p, PARAMS_FILE)?;
                p
            }
        };
        let ca = match read_json::<CertificateAuthority>(&dir.join(CA_KEY_FILE), CA_KEY_FILE)? {
            Some(ca) => ca,
            None => {
                let ca = CertificateAuthority::generate(config.ca_id.clone(), params.clone(), &mut rng);
                write_json(&dir.join(CA_KEY_FILE), &ca, CA_KEY_FILE)?;
                ca
            }
        };
        if ca.params() != &params {
            return Err(StartupError::BadFile(CA_KEY_FILE, "CA key uses different domain parameters".into()));
        }
        let certs = Arc::new(
            CertificateStore::open(&dir.join(CERTS_FILE)).map_err(|e| StartupError::BadFile(CERTS_FILE, e.to_string()))?,
        );
        certs.ensure_root(&ca, now, &mut rng).map_err(StartupError::Trading)?;

        let registry = Arc::new(Registry::open(
            Arc::clone(&ledger),
            ca.public(),
            Arc::clone(&certs),
            config.chunk_digits,
            &dir.join(INDEX_FILE),
        )?);
        let market = Marketplace::open(Arc::clone(&registry), config.bank_id.clone(), &dir.join(MARKET_FILE))
            .map_err(StartupError::Trading)?;
        Ok(AppState { config, params, ca, certs, ledger, registry, market })
    }
}

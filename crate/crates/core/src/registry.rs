//! The land registration department: registers encrypted records, keeps the
//! owner index, authenticates parties by challenge-response and moves
//! ownership when a fully signed deed arrives.
//!
//! The registry never holds a private key. On transfer it rebuilds the record
//! text from the signed deed and encrypts it for the buyer.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{sha256, Digest32, Signature};
use crate::hex32;
use crate::ledger::{BlockId, Ledger, LedgerError, TransactionRecord, TxKind};
use crate::pipeline::{self, DnaCiphertext, PipelineError, PlainRecord};
use crate::trading::cert::{verify_certificate, CaPublic, Certificate, CertificateStore};
use crate::trading::deed::{Deed, DeedState, Role};

/// Login challenges expire this many seconds after issue.
pub const CHALLENGE_TTL_SECS: u64 = 5 * 60;
/// Session tokens expire this many seconds after login.
pub const SESSION_TTL_SECS: u64 = 30 * 60;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("certificate does not verify against the CA")]
    InvalidCertificate,
    #[error("an active record already exists for dag {0}, khatiayan {1}")]
    DuplicateActiveRecord(u64, u64),
    #[error("invalid land information: {0}")]
    InvalidLand(String),
    #[error("unknown challenge")]
    ChallengeNotFound,
    #[error("challenge expired")]
    ExpiredChallenge,
    #[error("challenge already used")]
    ReplayedChallenge,
    #[error("signature does not verify")]
    BadSignature,
    #[error("certificate subject does not match")]
    SubjectMismatch,
    #[error("missing, unknown or expired session")]
    InvalidSession,
    #[error("session does not belong to the requested owner")]
    Unauthorized,
    #[error("no active record")]
    NoActiveRecord,
    #[error("deed is not finalized")]
    DeedNotFinalized,
    #[error("{0} signature does not verify")]
    SignatureInvalid(Role),
    #[error("seller does not hold the active record for this land")]
    SellerNotOwner,
    #[error("owner index disagrees with the chain: {0}")]
    IndexIncoherent(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("index persistence failed: {0}")]
    Persistence(#[from] io::Error),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::InvalidCertificate => "invalid-certificate",
            RegistryError::DuplicateActiveRecord(..) => "duplicate-active-record",
            RegistryError::InvalidLand(_) => "invalid-land",
            RegistryError::ChallengeNotFound => "challenge-not-found",
            RegistryError::ExpiredChallenge => "expired-challenge",
            RegistryError::ReplayedChallenge => "replayed-challenge",
            RegistryError::BadSignature => "bad-signature",
            RegistryError::SubjectMismatch => "subject-mismatch",
            RegistryError::InvalidSession => "invalid-session",
            RegistryError::Unauthorized => "unauthorized",
            RegistryError::NoActiveRecord => "no-active-record",
            RegistryError::DeedNotFinalized => "deed-not-finalized",
            RegistryError::SignatureInvalid(_) => "signature-invalid",
            RegistryError::SellerNotOwner => "seller-not-owner",
            RegistryError::IndexIncoherent(_) => "index-incoherent",
            RegistryError::Ledger(e) => e.code(),
            RegistryError::Pipeline(e) => e.code(),
            RegistryError::Persistence(_) => "persistence-failure",
        }
    }
}

/// Digits with an optional fractional part, not all zero.
pub fn is_positive_decimal(s: &str) -> bool {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits) && s.bytes().any(|b| (b'1'..=b'9').contains(&b))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LandInfo {
    pub dag_number: u64,
    pub khatiayan_number: u64,
    pub area: String,
    pub unit: String,
}

impl LandInfo {
    pub fn new(dag: u64, khatiayan: u64, area: impl Into<String>, unit: impl Into<String>) -> Result<Self, RegistryError> {
        let land = LandInfo { dag_number: dag, khatiayan_number: khatiayan, area: area.into(), unit: unit.into() };
        land.validate()?;
        Ok(land)
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        if self.dag_number == 0 || self.khatiayan_number == 0 {
            return Err(RegistryError::InvalidLand("dag and khatiayan numbers must be positive".into()));
        }
        if !is_positive_decimal(&self.area) {
            return Err(RegistryError::InvalidLand(format!("area {:?} is not a positive decimal", self.area)));
        }
        if self.unit.trim().is_empty() || !crate::c2i::is_encodable(&self.unit) || self.unit.contains(',') {
            return Err(RegistryError::InvalidLand("unit must be non-empty printable text without commas".into()));
        }
        Ok(())
    }

    /// Record identity.
    pub fn key(&self) -> (u64, u64) {
        (self.dag_number, self.khatiayan_number)
    }
}

/// The canonical single-line record text.
pub fn render_plaintext(seller: &str, buyer: &str, land: &LandInfo, transaction_id: &str) -> String {
    format!(
        "Seller: {seller}, Buyer: {buyer}, Land information: Dag number: {}, Khatiayan number: {}, Area:{} {}, Transaction ID: {transaction_id}",
        land.dag_number, land.khatiayan_number, land.area, land.unit
    )
}

/// One record's place in the index. Entries are never removed, only deactivated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub block_id: BlockId,
    pub owner_id: String,
    #[serde(with = "hex32")]
    pub key_fingerprint: Digest32,
    pub land: LandInfo,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub block_id: BlockId,
    pub owner_id: String,
    pub land: LandInfo,
    pub payload: DnaCiphertext,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginChallenge {
    pub challenge_id: String,
    #[serde(with = "hex32")]
    pub nonce: [u8; 32],
    pub subject_id: String,
    pub expires_at: u64,
}

impl LoginChallenge {
    /// What the subject signs.
    pub fn digest(&self) -> Digest32 {
        sha256(&self.nonce)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub subject_id: String,
    pub cert_serial: u64,
    #[serde(with = "hex32")]
    pub key_fingerprint: Digest32,
    pub expires_at: u64,
}

#[derive(Debug, Default)]
struct OwnerIndex {
    entries: Vec<IndexEntry>,
    file: Option<File>,
}

impl OwnerIndex {
    fn load(path: &Path) -> Result<Self, RegistryError> {
        let mut entries: Vec<IndexEntry> = Vec::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: IndexEntry = serde_json::from_str(&line)
                    .map_err(|e| RegistryError::IndexIncoherent(format!("index line {}: {e}", n + 1)))?;
                // Later lines supersede earlier ones for the same block.
                match entries.iter_mut().find(|e| e.block_id == entry.block_id) {
                    Some(existing) => *existing = entry,
                    None => entries.push(entry),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(OwnerIndex { entries, file: Some(file) })
    }

    fn write(&mut self, updates: &[IndexEntry]) -> io::Result<()> {
        if let Some(file) = self.file.as_mut() {
            let mut buf = String::new();
            for e in updates {
                buf.push_str(&serde_json::to_string(e).expect("index entry serializes"));
                buf.push('\n');
            }
            file.write_all(buf.as_bytes())?;
            file.sync_data()?;
        }
        Ok(())
    }

    fn active_for_land(&self, key: (u64, u64)) -> Option<usize> {
        self.entries.iter().position(|e| e.active && e.land.key() == key)
    }
}

enum ChallengeSlot {
    Open(LoginChallenge),
    Used,
}

pub struct Registry {
    ledger: Arc<Ledger>,
    ca: CaPublic,
    certs: Arc<CertificateStore>,
    chunk_digits: u16,
    index: Mutex<OwnerIndex>,
    challenges: Mutex<HashMap<String, ChallengeSlot>>,
    sessions: RwLock<HashMap<String, Session>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("ledger", &self.ledger).finish_non_exhaustive()
    }
}

impl Registry {
    pub fn in_memory(ledger: Arc<Ledger>, ca: CaPublic, certs: Arc<CertificateStore>, chunk_digits: u16) -> Self {
        Registry {
            ledger,
            ca,
            certs,
            chunk_digits,
            index: Mutex::new(OwnerIndex::default()),
            challenges: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Loads the index from `index_path` and checks it against the chain.
    pub fn open(
        ledger: Arc<Ledger>,
        ca: CaPublic,
        certs: Arc<CertificateStore>,
        chunk_digits: u16,
        index_path: &Path,
    ) -> Result<Self, RegistryError> {
        let index = OwnerIndex::load(index_path)?;
        let registry = Registry { index: Mutex::new(index), ..Self::in_memory(ledger, ca, certs, chunk_digits) };
        registry.check_coherence()?;
        Ok(registry)
    }

    /// Every active entry points at an existing block whose transaction names the same owner.
    pub fn check_coherence(&self) -> Result<(), RegistryError> {
        let index = self.index.lock();
        let mut seen = std::collections::HashSet::new();
        for e in index.entries.iter().filter(|e| e.active) {
            if !seen.insert(e.land.key()) {
                return Err(RegistryError::IndexIncoherent(format!("two active entries for {:?}", e.land.key())));
            }
            let block = self
                .ledger
                .get_block(e.block_id)
                .map_err(|_| RegistryError::IndexIncoherent(format!("block {} missing", e.block_id)))?;
            let matches = block
                .transactions
                .iter()
                .any(|t| t.owner_id == e.owner_id && t.payload.key_fingerprint == e.key_fingerprint);
            if !matches {
                return Err(RegistryError::IndexIncoherent(format!("block {} has no record for {}", e.block_id, e.owner_id)));
            }
        }
        Ok(())
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }

    pub fn ca(&self) -> &CaPublic {
        &self.ca
    }

    pub fn certificates(&self) -> &Arc<CertificateStore> {
        &self.certs
    }

    fn encrypt_for(&self, cert: &Certificate, text: String, rng: &mut (impl Rng + ?Sized)) -> Result<DnaCiphertext, RegistryError> {
        let params = &cert.subject_params;
        let chunk = pipeline::fitting_chunk_digits(params, self.chunk_digits);
        let record = PlainRecord::new(text)?;
        Ok(pipeline::encrypt_record(params, &cert.subject_beta, &record, chunk, rng)?)
    }

    /// Encrypts the record for the certificate holder and appends a REGISTER block.
    #[allow(clippy::too_many_arguments)]
    pub fn register_record<R: Rng + ?Sized>(
        &self,
        cert: &Certificate,
        land: &LandInfo,
        seller_name: &str,
        buyer_name: &str,
        tx_label: &str,
        now: u64,
        rng: &mut R,
    ) -> Result<BlockId, RegistryError> {
        if !verify_certificate(&self.ca, cert, now) {
            return Err(RegistryError::InvalidCertificate);
        }
        land.validate()?;
        let mut index = self.index.lock();
        if index.active_for_land(land.key()).is_some() {
            return Err(RegistryError::DuplicateActiveRecord(land.dag_number, land.khatiayan_number));
        }
        let payload = self.encrypt_for(cert, render_plaintext(seller_name, buyer_name, land, tx_label), rng)?;
        let fingerprint = payload.key_fingerprint;
        let tx = TransactionRecord::new(TxKind::Register, cert.subject_id.as_str(), payload, [0u8; 32], now)?;
        let block_id = self.ledger.append_block(vec![tx], now)?;
        let entry = IndexEntry {
            block_id,
            owner_id: cert.subject_id.clone(),
            key_fingerprint: fingerprint,
            land: land.clone(),
            active: true,
        };
        index.write(std::slice::from_ref(&entry))?;
        index.entries.push(entry);
        Ok(block_id)
    }

    pub fn issue_challenge<R: Rng + ?Sized>(&self, subject_id: &str, now: u64, rng: &mut R) -> LoginChallenge {
        let id: [u8; 16] = rng.gen();
        let challenge = LoginChallenge {
            challenge_id: hex::encode(id),
            nonce: rng.gen(),
            subject_id: subject_id.to_owned(),
            expires_at: now + CHALLENGE_TTL_SECS,
        };
        let mut challenges = self.challenges.lock();
        challenges.retain(|_, slot| !matches!(slot, ChallengeSlot::Open(c) if c.expires_at + CHALLENGE_TTL_SECS < now));
        challenges.insert(challenge.challenge_id.clone(), ChallengeSlot::Open(challenge.clone()));
        challenge
    }

    /// Consumes the challenge and, if `sig` is the certificate holder's signature over it, opens a session.
    pub fn verify_challenge<R: Rng + ?Sized>(
        &self,
        challenge_id: &str,
        sig: &Signature,
        cert: &Certificate,
        now: u64,
        rng: &mut R,
    ) -> Result<Session, RegistryError> {
        let challenge = {
            let mut challenges = self.challenges.lock();
            let slot = challenges.get_mut(challenge_id).ok_or(RegistryError::ChallengeNotFound)?;
            match std::mem::replace(slot, ChallengeSlot::Used) {
                ChallengeSlot::Used => return Err(RegistryError::ReplayedChallenge),
                ChallengeSlot::Open(c) => c,
            }
        };
        if now >= challenge.expires_at {
            return Err(RegistryError::ExpiredChallenge);
        }
        if cert.subject_id != challenge.subject_id {
            return Err(RegistryError::SubjectMismatch);
        }
        if !verify_certificate(&self.ca, cert, now) {
            return Err(RegistryError::InvalidCertificate);
        }
        if !cert.verifies(&challenge.digest(), sig) {
            return Err(RegistryError::BadSignature);
        }
        let token: [u8; 32] = rng.gen();
        let session = Session {
            token: hex::encode(token),
            subject_id: cert.subject_id.clone(),
            cert_serial: cert.serial,
            key_fingerprint: cert.key_fingerprint(),
            expires_at: now + SESSION_TTL_SECS,
        };
        let mut sessions = self.sessions.write();
        sessions.retain(|_, s| s.expires_at > now);
        sessions.insert(session.token.clone(), session.clone());
        Ok(session)
    }

    pub fn authenticate(&self, token: &str, now: u64) -> Result<Session, RegistryError> {
        match self.sessions.read().get(token) {
            Some(s) if now < s.expires_at => Ok(s.clone()),
            _ => Err(RegistryError::InvalidSession),
        }
    }

    /// Active records of `owner_id`, exactly as stored on the chain.
    pub fn retrieve_record(&self, session: &Session, owner_id: &str) -> Result<Vec<StoredRecord>, RegistryError> {
        if session.subject_id != owner_id {
            return Err(RegistryError::Unauthorized);
        }
        let entries: Vec<IndexEntry> =
            self.index.lock().entries.iter().filter(|e| e.active && e.owner_id == owner_id).cloned().collect();
        if entries.is_empty() {
            return Err(RegistryError::NoActiveRecord);
        }
        entries
            .into_iter()
            .map(|e| {
                let block = self.ledger.get_block(e.block_id)?;
                let tx = block
                    .transactions
                    .iter()
                    .find(|t| t.owner_id == e.owner_id && t.payload.key_fingerprint == e.key_fingerprint)
                    .ok_or_else(|| RegistryError::IndexIncoherent(format!("block {} lost its record", e.block_id)))?;
                Ok(StoredRecord { block_id: e.block_id, owner_id: e.owner_id, land: e.land, payload: tx.payload.clone() })
            })
            .collect()
    }

    /// Active index entry for a parcel.
    pub fn active_entry(&self, dag: u64, khatiayan: u64) -> Option<IndexEntry> {
        let index = self.index.lock();
        index.active_for_land((dag, khatiayan)).map(|i| index.entries[i].clone())
    }

    /// Full index including deactivated entries.
    pub fn index_entries(&self) -> Vec<IndexEntry> {
        self.index.lock().entries.clone()
    }

    fn signing_cert(&self, deed: &Deed, role: Role, now: u64) -> Result<Certificate, RegistryError> {
        let invalid = || RegistryError::SignatureInvalid(role);
        let sig = deed.signatures.get(&role).ok_or(RegistryError::DeedNotFinalized)?;
        let cert = self.certs.get(sig.cert_serial).ok_or_else(invalid)?;
        if cert.subject_id != deed.party(role) || !verify_certificate(&self.ca, &cert, now) {
            return Err(invalid());
        }
        if !cert.verifies(&deed.digest(), &sig.signature) {
            return Err(invalid());
        }
        Ok(cert)
    }

    /// Re-encrypts the deed's record for the buyer and moves the active index entry.
    pub fn transfer_ownership<R: Rng + ?Sized>(&self, deed: &Deed, now: u64, rng: &mut R) -> Result<BlockId, RegistryError> {
        if deed.state() != DeedState::BankSigned {
            return Err(RegistryError::DeedNotFinalized);
        }
        let seller_cert = self.signing_cert(deed, Role::Seller, now)?;
        let buyer_cert = self.signing_cert(deed, Role::Buyer, now)?;
        self.signing_cert(deed, Role::Bank, now)?;

        let mut index = self.index.lock();
        let pos = index.active_for_land(deed.land.key()).ok_or(RegistryError::SellerNotOwner)?;
        let current = &index.entries[pos];
        if current.owner_id != deed.seller_id || current.key_fingerprint != seller_cert.key_fingerprint() {
            return Err(RegistryError::SellerNotOwner);
        }
        let land = current.land.clone();
        let text = render_plaintext(&deed.seller_id, &deed.buyer_id, &land, &deed.transaction_id);
        let payload = self.encrypt_for(&buyer_cert, text, rng)?;
        let fingerprint = payload.key_fingerprint;
        let tx = TransactionRecord::new(TxKind::Transfer, deed.buyer_id.as_str(), payload, deed.digest(), now)?;
        let block_id = self.ledger.append_block(vec![tx], now)?;

        let mut retired = index.entries[pos].clone();
        retired.active = false;
        let entry = IndexEntry { block_id, owner_id: deed.buyer_id.clone(), key_fingerprint: fingerprint, land, active: true };
        index.write(&[retired.clone(), entry.clone()])?;
        index.entries[pos] = retired;
        index.entries.push(entry);
        Ok(block_id)
    }
}

/// Writes `bytes` to `path` through a temporary file and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data()?;
    }
    fs::rename(&tmp, path)
}

//! Wire shapes that are not plain core types.

use serde::{Deserialize, Serialize};

use lrms_core::crypto::{DomainParams, Signature};
use lrms_core::ledger::{Block, TransactionRecord, Violation};
use lrms_core::registry::{LandInfo, StoredRecord};
use lrms_core::trading::deed::{Deed, DeedState, Price, Role};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub height: u64,
    pub bank_id: String,
    pub ca_id: String,
    pub key_bits: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssueCertificateRequest {
    pub subject_id: String,
    /// Decimal public key.
    pub subject_beta: String,
    #[serde(default)]
    pub subject_params: Option<DomainParams>,
    #[serde(default)]
    pub validity_days: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChallengeRequest {
    pub subject_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRequest {
    pub challenge_id: String,
    pub cert_serial: u64,
    pub signature: Signature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub cert_serial: u64,
    pub land: LandInfo,
    pub seller_name: String,
    pub buyer_name: String,
    pub tx_label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub block_id: u64,
    pub owner_id: String,
    pub key_fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordView {
    pub block_id: u64,
    pub owner_id: String,
    pub land: LandInfo,
    pub dna: String,
    pub key_fingerprint: String,
}

impl From<StoredRecord> for RecordView {
    fn from(r: StoredRecord) -> Self {
        RecordView {
            block_id: r.block_id,
            owner_id: r.owner_id,
            land: r.land,
            dna: r.payload.dna.as_str().to_owned(),
            key_fingerprint: hex::encode(r.payload.key_fingerprint),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordsResponse {
    pub owner: String,
    pub records: Vec<RecordView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostListingRequest {
    pub dag_number: u64,
    pub khatiayan_number: u64,
    pub asking_price: Price,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateDeedRequest {
    pub listing_id: String,
    #[serde(default)]
    pub agreed_price: Option<Price>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignDeedRequest {
    pub role: String,
    pub cert_serial: u64,
    pub signature: Signature,
}

/// A deed with its derived state and the digest parties sign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeedView {
    #[serde(flatten)]
    pub deed: Deed,
    pub state: DeedState,
    pub digest: String,
    pub awaiting: Vec<Role>,
}

impl From<Deed> for DeedView {
    fn from(deed: Deed) -> Self {
        let state = deed.state();
        let awaiting = match state {
            DeedState::Draft | DeedState::PartiallySigned => {
                [Role::Seller, Role::Buyer].into_iter().filter(|r| !deed.signatures.contains_key(r)).collect()
            }
            DeedState::PartiesSigned => vec![Role::Bank],
            _ => Vec::new(),
        };
        DeedView { digest: hex::encode(deed.digest()), state, awaiting, deed }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettleResponse {
    pub deed: DeedView,
    pub block_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransactionView {
    pub tx_id: String,
    pub kind: String,
    pub owner_id: String,
    pub dna: String,
    pub key_fingerprint: String,
    pub deed_hash: String,
    pub created_at: u64,
}

impl From<&TransactionRecord> for TransactionView {
    fn from(t: &TransactionRecord) -> Self {
        TransactionView {
            tx_id: hex::encode(t.tx_id),
            kind: t.kind.as_str().to_owned(),
            owner_id: t.owner_id.clone(),
            dna: t.payload.dna.as_str().to_owned(),
            key_fingerprint: hex::encode(t.payload.key_fingerprint),
            deed_hash: hex::encode(t.deed_hash),
            created_at: t.created_at,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockView {
    pub block_id: u64,
    pub hash: String,
    pub prev_hash: String,
    pub merkle_root: String,
    pub tx_count: u32,
    pub nonce: u64,
    pub timestamp: u64,
    pub transactions: Vec<TransactionView>,
}

impl From<&Block> for BlockView {
    fn from(b: &Block) -> Self {
        BlockView {
            block_id: b.header.block_id,
            hash: hex::encode(b.hash()),
            prev_hash: hex::encode(b.header.prev_hash),
            merkle_root: hex::encode(b.header.merkle_root),
            tx_count: b.header.tx_count,
            nonce: b.header.nonce,
            timestamp: b.header.timestamp,
            transactions: b.transactions.iter().map(TransactionView::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationView {
    pub position: u64,
    pub reason: String,
    pub detail: String,
}

impl From<&Violation> for ViolationView {
    fn from(v: &Violation) -> Self {
        ViolationView { position: v.position, reason: v.reason.code().to_owned(), detail: v.detail.clone() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub ok: bool,
    pub height: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<ViolationView>,
}

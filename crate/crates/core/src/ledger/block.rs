use crate::crypto::{sha256, Digest32};
use crate::dna::DnaString;
use crate::pipeline::DnaCiphertext;

use super::{merkle_root, LedgerError, Violation, ViolationReason};

/// Canonical header width: id, previous hash, tx count, nonce, Merkle root, timestamp.
pub const HEADER_LEN: usize = 8 + 32 + 4 + 8 + 32 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxKind {
    Genesis,
    Register,
    Transfer,
}

impl TxKind {
    fn tag(self) -> u8 {
        match self {
            TxKind::Genesis => 0,
            TxKind::Register => 1,
            TxKind::Transfer => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(TxKind::Genesis),
            1 => Some(TxKind::Register),
            2 => Some(TxKind::Transfer),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TxKind::Genesis => "GENESIS",
            TxKind::Register => "REGISTER",
            TxKind::Transfer => "TRANSFER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecord {
    pub tx_id: Digest32,
    pub kind: TxKind,
    pub owner_id: String,
    pub payload: DnaCiphertext,
    /// All zero for GENESIS and REGISTER.
    pub deed_hash: Digest32,
    pub created_at: u64,
}

impl TransactionRecord {
    pub fn new(
        kind: TxKind,
        owner_id: impl Into<String>,
        payload: DnaCiphertext,
        deed_hash: Digest32,
        created_at: u64,
    ) -> Result<Self, LedgerError> {
        let mut tx = TransactionRecord { tx_id: [0; 32], kind, owner_id: owner_id.into(), payload, deed_hash, created_at };
        tx.validate().map_err(LedgerError::InvalidTransaction)?;
        tx.tx_id = tx.recompute_id();
        Ok(tx)
    }

    pub fn genesis(created_at: u64) -> Self {
        let mut tx = TransactionRecord {
            tx_id: [0; 32],
            kind: TxKind::Genesis,
            owner_id: String::new(),
            payload: DnaCiphertext::default(),
            deed_hash: [0; 32],
            created_at,
        };
        tx.tx_id = tx.recompute_id();
        tx
    }

    /// Kind-specific field rules.
    pub fn validate(&self) -> Result<(), String> {
        if self.owner_id.len() > u16::MAX as usize {
            return Err("owner id too long".into());
        }
        if !self.payload.dna.len().is_multiple_of(4) {
            return Err("payload is not a whole number of bytes".into());
        }
        let zero_deed = self.deed_hash == [0; 32];
        match self.kind {
            TxKind::Genesis => {
                if !self.owner_id.is_empty() || !self.payload.dna.is_empty() || !zero_deed {
                    return Err("genesis transaction carries data".into());
                }
            }
            TxKind::Register | TxKind::Transfer => {
                if self.owner_id.is_empty() {
                    return Err("owner id missing".into());
                }
                if self.payload.dna.is_empty() {
                    return Err("payload missing".into());
                }
                if (self.kind == TxKind::Register) != zero_deed {
                    return Err("deed hash must be set exactly for transfers".into());
                }
            }
        }
        Ok(())
    }

    /// kind u8 | owner u16-prefixed | payload u32-prefixed | fingerprint 32 | deed hash 32 | created_at u64.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let dna = self.payload.dna.as_str().as_bytes();
        let mut out = Vec::with_capacity(1 + 2 + self.owner_id.len() + 4 + dna.len() + 72);
        out.push(self.kind.tag());
        out.extend_from_slice(&(self.owner_id.len() as u16).to_be_bytes());
        out.extend_from_slice(self.owner_id.as_bytes());
        out.extend_from_slice(&(dna.len() as u32).to_be_bytes());
        out.extend_from_slice(dna);
        out.extend_from_slice(&self.payload.key_fingerprint);
        out.extend_from_slice(&self.deed_hash);
        out.extend_from_slice(&self.created_at.to_be_bytes());
        out
    }

    pub fn recompute_id(&self) -> Digest32 {
        sha256(&self.canonical_bytes())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader::new(bytes);
        let kind = TxKind::from_tag(r.u8()?).ok_or("unknown transaction kind")?;
        let owner_len = r.u16()? as usize;
        let owner_id = String::from_utf8(r.take(owner_len)?.to_vec()).map_err(|_| "owner id is not UTF-8")?;
        let dna_len = r.u32()? as usize;
        let dna = std::str::from_utf8(r.take(dna_len)?).map_err(|_| "payload is not ASCII")?;
        let dna = DnaString::parse(dna).map_err(|e| e.to_string())?;
        let key_fingerprint = r.array32()?;
        let deed_hash = r.array32()?;
        let created_at = r.u64()?;
        r.finish()?;
        let mut tx = TransactionRecord {
            tx_id: [0; 32],
            kind,
            owner_id,
            payload: DnaCiphertext { dna, key_fingerprint },
            deed_hash,
            created_at,
        };
        tx.tx_id = tx.recompute_id();
        Ok(tx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub block_id: u64,
    pub prev_hash: Digest32,
    pub tx_count: u32,
    /// Always zero; there is no proof of work.
    pub nonce: u64,
    pub merkle_root: Digest32,
    pub timestamp: u64,
}

impl BlockHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&self.block_id.to_be_bytes());
        out[8..40].copy_from_slice(&self.prev_hash);
        out[40..44].copy_from_slice(&self.tx_count.to_be_bytes());
        out[44..52].copy_from_slice(&self.nonce.to_be_bytes());
        out[52..84].copy_from_slice(&self.merkle_root);
        out[84..92].copy_from_slice(&self.timestamp.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; HEADER_LEN]) -> Self {
        BlockHeader {
            block_id: u64::from_be_bytes(bytes[0..8].try_into().unwrap()),
            prev_hash: bytes[8..40].try_into().unwrap(),
            tx_count: u32::from_be_bytes(bytes[40..44].try_into().unwrap()),
            nonce: u64::from_be_bytes(bytes[44..52].try_into().unwrap()),
            merkle_root: bytes[52..84].try_into().unwrap(),
            timestamp: u64::from_be_bytes(bytes[84..92].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<TransactionRecord>,
}

impl Block {
    pub fn assemble(
        block_id: u64,
        prev_hash: Digest32,
        transactions: Vec<TransactionRecord>,
        timestamp: u64,
    ) -> Result<Self, LedgerError> {
        let ids: Vec<Digest32> = transactions.iter().map(|t| t.tx_id).collect();
        let root = merkle_root(&ids).ok_or(LedgerError::EmptyBlock)?;
        let tx_count = u32::try_from(transactions.len()).map_err(|_| LedgerError::InvalidTransaction("too many".into()))?;
        Ok(Block {
            header: BlockHeader { block_id, prev_hash, tx_count, nonce: 0, merkle_root: root, timestamp },
            transactions,
        })
    }

    /// SHA-256 of the canonical header.
    pub fn hash(&self) -> Digest32 {
        sha256(&self.header.to_bytes())
    }
}

/// Persisted block form: header, the header's hash, then u32-prefixed transactions.
pub fn encode_block(block: &Block) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&block.header.to_bytes());
    out.extend_from_slice(&block.hash());
    for tx in &block.transactions {
        let body = tx.canonical_bytes();
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    out
}

/// Inverse of [`encode_block`]; `position` only labels violations.
pub fn decode_block(bytes: &[u8], position: u64) -> Result<Block, Violation> {
    let malformed = |detail: String| Violation::with_detail(position, ViolationReason::Malformed, detail);
    let mut r = Reader::new(bytes);
    let header_bytes: [u8; HEADER_LEN] = r.take(HEADER_LEN).map_err(malformed)?.try_into().unwrap();
    let header = BlockHeader::from_bytes(&header_bytes);
    let stored_hash = r.array32().map_err(malformed)?;
    let mut transactions = Vec::new();
    while !r.is_empty() {
        let len = r.u32().map_err(malformed)? as usize;
        let body = r.take(len).map_err(malformed)?;
        transactions.push(TransactionRecord::decode(body).map_err(malformed)?);
    }
    let block = Block { header, transactions };
    if block.hash() != stored_hash {
        return Err(Violation::new(position, ViolationReason::HashMismatch));
    }
    Ok(block)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.buf.len() < n {
            return Err(format!("need {n} bytes, {} left", self.buf.len()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn array32(&mut self) -> Result<[u8; 32], String> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn finish(&self) -> Result<(), String> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.buf.len()))
        }
    }
}

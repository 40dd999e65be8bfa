//! The private block ledger: transactions, Merkle roots, hash-linked blocks,
//! append, verification and append-only file persistence.
//!
//! One writer appends at a time; readers clone `Arc<Block>` handles out of the
//! in-memory chain and never see a block before it has been persisted.

mod block;
mod merkle;
mod store;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use thiserror::Error;

pub use block::{decode_block, encode_block, Block, BlockHeader, TransactionRecord, TxKind, HEADER_LEN};
pub use merkle::merkle_root;
pub use store::{load_chain_file, BlockSink, ChainStore};

use crate::crypto::Digest32;

/// Identifier returned by an append and used for retrieval.
pub type BlockId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    Malformed,
    HashMismatch,
    LinkBroken,
    OutOfSequence,
    MerkleMismatch,
    TxCountMismatch,
    TxIdMismatch,
    TimestampRegression,
    NonceNonZero,
    InvalidTransaction,
    InvalidGenesis,
}

impl ViolationReason {
    pub fn code(self) -> &'static str {
        match self {
            ViolationReason::Malformed => "malformed",
            ViolationReason::HashMismatch => "hash-mismatch",
            ViolationReason::LinkBroken => "link-broken",
            ViolationReason::OutOfSequence => "out-of-sequence",
            ViolationReason::MerkleMismatch => "merkle-mismatch",
            ViolationReason::TxCountMismatch => "tx-count-mismatch",
            ViolationReason::TxIdMismatch => "tx-id-mismatch",
            ViolationReason::TimestampRegression => "timestamp-regression",
            ViolationReason::NonceNonZero => "nonce-nonzero",
            ViolationReason::InvalidTransaction => "invalid-transaction",
            ViolationReason::InvalidGenesis => "invalid-genesis",
        }
    }
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// First integrity failure found in a chain: block position plus reason.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chain violation at block {position}: {reason}{}", if detail.is_empty() { String::new() } else { format!(" ({detail})") })]
pub struct Violation {
    pub position: u64,
    pub reason: ViolationReason,
    pub detail: String,
}

impl Violation {
    pub fn new(position: u64, reason: ViolationReason) -> Self {
        Violation { position, reason, detail: String::new() }
    }

    pub fn with_detail(position: u64, reason: ViolationReason, detail: impl Into<String>) -> Self {
        Violation { position, reason, detail: detail.into() }
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("block must contain at least one transaction")]
    EmptyBlock,
    #[error("block {0} not found")]
    NotFound(BlockId),
    #[error("invalid transaction: {0}")]
    InvalidTransaction(String),
    #[error(transparent)]
    Corrupt(#[from] Violation),
    #[error("persistence failed: {0}")]
    Io(#[from] std::io::Error),
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::EmptyBlock => "empty-block",
            LedgerError::NotFound(_) => "not-found",
            LedgerError::InvalidTransaction(_) => "invalid-transaction",
            LedgerError::Corrupt(_) => "chain-corrupt",
            LedgerError::Io(_) => "persistence-failure",
        }
    }
}

/// Builds the genesis block: id 0, zero previous hash, one empty GENESIS transaction.
pub fn genesis_block(timestamp: u64) -> Block {
    let tx = TransactionRecord::genesis(timestamp);
    Block::assemble(0, [0u8; 32], vec![tx], timestamp).expect("genesis has one transaction")
}

/// Checks linkage, ids, Merkle roots, transaction ids, timestamps and nonces,
/// returning the first violation.
pub fn verify_chain(blocks: &[Block]) -> Result<(), Violation> {
    let mut prev_hash = [0u8; 32];
    let mut prev_time = 0u64;
    for (i, block) in blocks.iter().enumerate() {
        let pos = i as u64;
        let h = &block.header;
        if h.block_id != pos {
            return Err(Violation::new(pos, ViolationReason::OutOfSequence));
        }
        if h.prev_hash != prev_hash {
            return Err(Violation::new(pos, ViolationReason::LinkBroken));
        }
        if h.nonce != 0 {
            return Err(Violation::new(pos, ViolationReason::NonceNonZero));
        }
        if h.tx_count as usize != block.transactions.len() {
            return Err(Violation::new(pos, ViolationReason::TxCountMismatch));
        }
        for tx in &block.transactions {
            if tx.recompute_id() != tx.tx_id {
                return Err(Violation::new(pos, ViolationReason::TxIdMismatch));
            }
        }
        let ids: Vec<Digest32> = block.transactions.iter().map(|t| t.tx_id).collect();
        if merkle_root(&ids) != Some(h.merkle_root) {
            return Err(Violation::new(pos, ViolationReason::MerkleMismatch));
        }
        if i > 0 && h.timestamp < prev_time {
            return Err(Violation::new(pos, ViolationReason::TimestampRegression));
        }
        if i == 0 {
            if block.transactions.len() != 1 || block.transactions[0].kind != TxKind::Genesis {
                return Err(Violation::new(pos, ViolationReason::InvalidGenesis));
            }
        } else {
            for tx in &block.transactions {
                if tx.kind == TxKind::Genesis {
                    return Err(Violation::with_detail(pos, ViolationReason::InvalidGenesis, "genesis transaction after block 0"));
                }
                if let Err(e) = tx.validate() {
                    return Err(Violation::with_detail(pos, ViolationReason::InvalidTransaction, e));
                }
            }
        }
        prev_hash = block.hash();
        prev_time = h.timestamp;
    }
    Ok(())
}

/// The chain with its single writer.
pub struct Ledger {
    blocks: RwLock<Vec<Arc<Block>>>,
    writer: Mutex<Option<Box<dyn BlockSink>>>,
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger").field("height", &self.height()).finish_non_exhaustive()
    }
}

impl Ledger {
    /// A chain that lives only in memory, starting from a fresh genesis block.
    pub fn in_memory(genesis_time: u64) -> Self {
        Ledger { blocks: RwLock::new(vec![Arc::new(genesis_block(genesis_time))]), writer: Mutex::new(None) }
    }

    /// Loads and verifies the chain file at `path`, creating it with a genesis block if absent.
    pub fn open(path: &Path, now: u64) -> Result<Self, LedgerError> {
        let (store, mut blocks) = ChainStore::open(path)?;
        let mut sink: Box<dyn BlockSink> = Box::new(store);
        if blocks.is_empty() {
            let genesis = genesis_block(now);
            sink.persist(&genesis)?;
            blocks.push(genesis);
        }
        verify_chain(&blocks)?;
        Ok(Ledger {
            blocks: RwLock::new(blocks.into_iter().map(Arc::new).collect()),
            writer: Mutex::new(Some(sink)),
        })
    }

    /// Uses `sink` for persistence of subsequent appends. `blocks` must already be stored there.
    pub fn with_sink(blocks: Vec<Block>, sink: Box<dyn BlockSink>) -> Result<Self, LedgerError> {
        if blocks.is_empty() {
            return Err(LedgerError::Corrupt(Violation::with_detail(0, ViolationReason::InvalidGenesis, "no blocks")));
        }
        verify_chain(&blocks)?;
        Ok(Ledger { blocks: RwLock::new(blocks.into_iter().map(Arc::new).collect()), writer: Mutex::new(Some(sink)) })
    }

    /// Appends a block holding `transactions` and returns its id once it is persisted.
    ///
    /// A clock that runs behind the tip is clamped to the tip's timestamp.
    pub fn append_block(&self, transactions: Vec<TransactionRecord>, now: u64) -> Result<BlockId, LedgerError> {
        if transactions.is_empty() {
            return Err(LedgerError::EmptyBlock);
        }
        for tx in &transactions {
            if tx.kind == TxKind::Genesis {
                return Err(LedgerError::InvalidTransaction("genesis transactions only appear in block 0".into()));
            }
            tx.validate().map_err(LedgerError::InvalidTransaction)?;
            if tx.recompute_id() != tx.tx_id {
                return Err(LedgerError::InvalidTransaction("transaction id does not match body".into()));
            }
        }
        let mut writer = self.writer.lock();
        let tip = self.tip();
        let block_id = tip.header.block_id + 1;
        let timestamp = now.max(tip.header.timestamp);
        let block = Block::assemble(block_id, tip.hash(), transactions, timestamp)?;
        if let Some(sink) = writer.as_mut() {
            sink.persist(&block)?;
        }
        self.blocks.write().push(Arc::new(block));
        Ok(block_id)
    }

    pub fn get_block(&self, id: BlockId) -> Result<Arc<Block>, LedgerError> {
        usize::try_from(id)
            .ok()
            .and_then(|i| self.blocks.read().get(i).cloned())
            .ok_or(LedgerError::NotFound(id))
    }

    pub fn tip(&self) -> Arc<Block> {
        self.blocks.read().last().cloned().expect("chain always holds genesis")
    }

    /// Number of blocks including genesis.
    pub fn height(&self) -> u64 {
        self.blocks.read().len() as u64
    }

    pub fn snapshot(&self) -> Vec<Arc<Block>> {
        self.blocks.read().clone()
    }

    pub fn verify(&self) -> Result<(), Violation> {
        let blocks: Vec<Block> = self.blocks.read().iter().map(|b| (**b).clone()).collect();
        verify_chain(&blocks)
    }
}

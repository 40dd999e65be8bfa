use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use super::block::{decode_block, encode_block, Block};
use super::{LedgerError, Violation, ViolationReason};

/// Durable destination for appended blocks.
pub trait BlockSink: Send {
    /// Must not return until the block is durable.
    fn persist(&mut self, block: &Block) -> io::Result<()>;
}

/// Append-only chain file of u32-length-prefixed blocks, plus a sidecar
/// offset index (`<name>.idx`) of big-endian `(block_id, offset)` pairs.
#[derive(Debug)]
pub struct ChainStore {
    chain: File,
    index: File,
    len: u64,
}

fn index_path(path: &Path) -> PathBuf {
    path.with_extension("idx")
}

fn read_index(path: &Path) -> Option<Vec<(u64, u64)>> {
    let bytes = fs::read(path).ok()?;
    if bytes.len() % 16 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(16)
            .map(|c| (u64::from_be_bytes(c[..8].try_into().unwrap()), u64::from_be_bytes(c[8..].try_into().unwrap())))
            .collect(),
    )
}

fn encode_index(entries: &[(u64, u64)]) -> Vec<u8> {
    entries.iter().flat_map(|(id, off)| id.to_be_bytes().into_iter().chain(off.to_be_bytes())).collect()
}

/// Reads every block in the chain file with their byte offsets.
fn scan(bytes: &[u8]) -> Result<Vec<(u64, Block)>, Violation> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let n = out.len() as u64;
        let Some(prefix) = bytes.get(pos..pos + 4) else {
            return Err(Violation::with_detail(n, ViolationReason::Malformed, "truncated length prefix"));
        };
        let len = u32::from_be_bytes(prefix.try_into().unwrap()) as usize;
        let Some(body) = bytes.get(pos + 4..pos + 4 + len) else {
            return Err(Violation::with_detail(n, ViolationReason::Malformed, "truncated block record"));
        };
        out.push((pos as u64, decode_block(body, n)?));
        pos += 4 + len;
    }
    Ok(out)
}

/// Decodes the chain file without verifying linkage.
pub fn load_chain_file(path: &Path) -> Result<Vec<Block>, LedgerError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    Ok(scan(&bytes)?.into_iter().map(|(_, b)| b).collect())
}

impl ChainStore {
    /// Opens or creates the chain at `path`, returning the stored blocks.
    /// A missing or stale index is rebuilt from the chain file.
    pub fn open(path: &Path) -> Result<(ChainStore, Vec<Block>), LedgerError> {
        let mut chain = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        chain.read_to_end(&mut bytes)?;
        let scanned = scan(&bytes)?;
        let expected: Vec<(u64, u64)> = scanned.iter().map(|(off, b)| (b.header.block_id, *off)).collect();
        let idx_path = index_path(path);
        if read_index(&idx_path).as_deref() != Some(&expected[..]) {
            let tmp = idx_path.with_extension("idx.tmp");
            fs::write(&tmp, encode_index(&expected))?;
            fs::rename(&tmp, &idx_path)?;
        }
        let index = OpenOptions::new().append(true).open(&idx_path)?;
        let store = ChainStore { chain, index, len: bytes.len() as u64 };
        Ok((store, scanned.into_iter().map(|(_, b)| b).collect()))
    }

    /// Offset of `block_id` according to the sidecar index.
    pub fn offset_of(path: &Path, block_id: u64) -> Option<u64> {
        read_index(&index_path(path))?.into_iter().find(|(id, _)| *id == block_id).map(|(_, off)| off)
    }
}

impl BlockSink for ChainStore {
    fn persist(&mut self, block: &Block) -> io::Result<()> {
        let body = encode_block(block);
        let len = u32::try_from(body.len()).map_err(|_| io::Error::other("block too large"))?;
        let mut record = Vec::with_capacity(4 + body.len());
        record.extend_from_slice(&len.to_be_bytes());
        record.extend_from_slice(&body);
        let offset = self.len;
        let written = self.chain.write_all(&record).and_then(|_| self.chain.sync_data());
        if let Err(e) = written {
            // Drop any partial record so the file stays loadable.
            let _ = self.chain.set_len(offset);
            return Err(e);
        }
        self.len += record.len() as u64;
        // The index is advisory; a failure here is repaired on the next open.
        let _ = self.index.write_all(&encode_index(&[(block.header.block_id, offset)]));
        Ok(())
    }
}

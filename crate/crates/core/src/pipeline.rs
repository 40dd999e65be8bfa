//! Record encryption and retrieval pipelines.
//!
//! Encryption: text -> C2I digits -> guarded decimal chunks -> ElGamal per chunk
//! -> envelope bytes -> bits -> DNA bases. Retrieval runs the same steps backwards.
//!
//! Each chunk of at most `chunk_digits` digits is prefixed with a guard digit `1`
//! before integer conversion so leading zeros survive, and so that decrypting
//! with the wrong key is detected instead of yielding garbage text.

use num_bigint::BigUint;
use num_traits::Num;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c2i::{self, CodecError};
use crate::crypto::{self, Ciphertext, CryptoError, Digest32, DomainParams};
use crate::dna::{self, DnaError, DnaString};
use crate::serde_util::hex32;

pub const ENVELOPE_MAGIC: &[u8; 4] = b"LRC1";
pub const ENVELOPE_VERSION: u8 = 1;
pub const ENVELOPE_HEADER_LEN: usize = 21;
pub const DEFAULT_CHUNK_DIGITS: u16 = 100;
pub const MAX_CHUNK_DIGITS: u16 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Dna(#[from] DnaError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("invalid chunking: {0}")]
    InvalidChunking(String),
    #[error("record text must not be empty")]
    EmptyRecord,
    #[error("envelope does not start with LRC1")]
    EnvelopeMagicMismatch,
    #[error("unsupported envelope version {0}")]
    UnsupportedVersion(u8),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("chunk {chunk} lacks its guard digit")]
    GuardDigitMissing { chunk: usize },
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Codec(e) => e.code(),
            PipelineError::Dna(e) => e.code(),
            PipelineError::Crypto(e) => e.code(),
            PipelineError::InvalidChunking(_) => "invalid-chunking",
            PipelineError::EmptyRecord => "empty-record",
            PipelineError::EnvelopeMagicMismatch => "envelope-magic-mismatch",
            PipelineError::UnsupportedVersion(_) => "unsupported-version",
            PipelineError::MalformedEnvelope(_) => "malformed-envelope",
            PipelineError::GuardDigitMissing { .. } => "guard-digit-missing",
        }
    }
}

/// Land-record text over the C2I alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainRecord(String);

impl PlainRecord {
    pub fn new(text: impl Into<String>) -> Result<Self, PipelineError> {
        let text = text.into();
        if text.is_empty() {
            return Err(PipelineError::EmptyRecord);
        }
        c2i::encode_text(&text)?;
        Ok(PlainRecord(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

/// An encrypted record as stored: DNA bases plus the fingerprint of the key it was encrypted under.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnaCiphertext {
    pub dna: DnaString,
    #[serde(with = "hex32")]
    pub key_fingerprint: Digest32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedEnvelope {
    pub version: u8,
    pub chunk_digits: u16,
    pub plaintext_chars: u32,
    pub key_bytes: u16,
    pub ciphertexts: Vec<Ciphertext>,
}

impl EncryptedEnvelope {
    pub fn chunk_count(&self) -> usize {
        self.ciphertexts.len()
    }

    pub fn serialized_len(&self) -> usize {
        envelope_len(self.chunk_count(), self.key_bytes as usize)
    }
}

/// `21 + chunk_count * 2 * key_bytes`.
pub fn envelope_len(chunk_count: usize, key_bytes: usize) -> usize {
    ENVELOPE_HEADER_LEN + chunk_count * 2 * key_bytes
}

/// Number of chunks a record of `plaintext_chars` characters splits into.
pub fn chunk_count_for(plaintext_chars: usize, chunk_digits: u16) -> usize {
    (2 * plaintext_chars).div_ceil(chunk_digits as usize)
}

/// DNA length of an encrypted record, determined by text length, chunking and key size.
pub fn dna_len_for(plaintext_chars: usize, chunk_digits: u16, key_bytes: usize) -> usize {
    4 * envelope_len(chunk_count_for(plaintext_chars, chunk_digits), key_bytes)
}

pub fn serialize_envelope(env: &EncryptedEnvelope) -> Vec<u8> {
    let width = env.key_bytes as usize;
    let mut out = Vec::with_capacity(env.serialized_len());
    out.extend_from_slice(ENVELOPE_MAGIC);
    out.push(env.version);
    out.extend_from_slice(&env.chunk_digits.to_be_bytes());
    out.extend_from_slice(&env.plaintext_chars.to_be_bytes());
    out.extend_from_slice(&(env.ciphertexts.len() as u32).to_be_bytes());
    out.extend_from_slice(&env.key_bytes.to_be_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for c in &env.ciphertexts {
        out.extend_from_slice(&crypto::to_fixed_be(&c.y1, width));
        out.extend_from_slice(&crypto::to_fixed_be(&c.y2, width));
    }
    out
}

pub fn parse_envelope(bytes: &[u8]) -> Result<EncryptedEnvelope, PipelineError> {
    let malformed = |m: &str| PipelineError::MalformedEnvelope(m.to_owned());
    if bytes.len() < 4 || &bytes[..4] != ENVELOPE_MAGIC {
        return Err(PipelineError::EnvelopeMagicMismatch);
    }
    if bytes.len() < ENVELOPE_HEADER_LEN {
        return Err(malformed("truncated header"));
    }
    let version = bytes[4];
    if version != ENVELOPE_VERSION {
        return Err(PipelineError::UnsupportedVersion(version));
    }
    let chunk_digits = u16::from_be_bytes([bytes[5], bytes[6]]);
    let plaintext_chars = u32::from_be_bytes(bytes[7..11].try_into().unwrap());
    let chunk_count = u32::from_be_bytes(bytes[11..15].try_into().unwrap()) as usize;
    let key_bytes = u16::from_be_bytes([bytes[15], bytes[16]]);
    if bytes[17..21] != [0u8; 4] {
        return Err(malformed("reserved bytes are not zero"));
    }
    if chunk_count == 0 || plaintext_chars == 0 {
        return Err(malformed("envelope declares no content"));
    }
    if chunk_digits == 0 || key_bytes == 0 {
        return Err(malformed("zero chunk or key width"));
    }
    if chunk_count != chunk_count_for(plaintext_chars as usize, chunk_digits) {
        return Err(malformed("chunk count disagrees with plaintext length"));
    }
    if bytes.len() != envelope_len(chunk_count, key_bytes as usize) {
        return Err(malformed("length disagrees with declared counts"));
    }
    let width = key_bytes as usize;
    let ciphertexts = bytes[ENVELOPE_HEADER_LEN..]
        .chunks_exact(2 * width)
        .map(|pair| Ciphertext {
            y1: BigUint::from_bytes_be(&pair[..width]),
            y2: BigUint::from_bytes_be(&pair[width..]),
        })
        .collect();
    Ok(EncryptedEnvelope { version, chunk_digits, plaintext_chars, key_bytes, ciphertexts })
}

fn check_chunk_size(chunk_size: u16) -> Result<(), PipelineError> {
    if chunk_size == 0 || !chunk_size.is_multiple_of(2) || chunk_size > MAX_CHUNK_DIGITS {
        return Err(PipelineError::InvalidChunking(format!(
            "chunk size {chunk_size} must be even and between 2 and {MAX_CHUNK_DIGITS}"
        )));
    }
    Ok(())
}

/// Splits `digits` into runs of `chunk_size`, prefixing each with the guard digit `1`.
pub fn chunk_digits(digits: &str, chunk_size: u16) -> Result<Vec<BigUint>, PipelineError> {
    check_chunk_size(chunk_size)?;
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(PipelineError::InvalidChunking("non-digit input".into()));
    }
    Ok(digits
        .as_bytes()
        .chunks(chunk_size as usize)
        .map(|run| {
            let mut guarded = Vec::with_capacity(run.len() + 1);
            guarded.push(b'1');
            guarded.extend_from_slice(run);
            BigUint::from_str_radix(std::str::from_utf8(&guarded).unwrap(), 10).unwrap()
        })
        .collect())
}

/// Inverse of [`chunk_digits`] given the total digit count.
pub fn unchunk_digits(chunks: &[BigUint], chunk_size: u16, total_digits: usize) -> Result<String, PipelineError> {
    check_chunk_size(chunk_size)?;
    let size = chunk_size as usize;
    if chunks.len() != total_digits.div_ceil(size) {
        return Err(PipelineError::InvalidChunking("chunk count disagrees with digit count".into()));
    }
    let mut out = String::with_capacity(total_digits);
    for (i, value) in chunks.iter().enumerate() {
        let expected = size.min(total_digits - i * size);
        let text = value.to_str_radix(10);
        match text.strip_prefix('1') {
            Some(run) if run.len() == expected => out.push_str(run),
            _ => return Err(PipelineError::GuardDigitMissing { chunk: i }),
        }
    }
    Ok(out)
}

/// Chunk size the pipeline uses for `params`: [`DEFAULT_CHUNK_DIGITS`] when it fits, else
/// the largest even size whose guarded chunks stay below `p`.
pub fn default_chunk_digits(params: &DomainParams) -> u16 {
    fitting_chunk_digits(params, DEFAULT_CHUNK_DIGITS)
}

/// `preferred` when guarded chunks of that size fit below `p`, else the largest even size that does.
pub fn fitting_chunk_digits(params: &DomainParams, preferred: u16) -> u16 {
    let mut size = preferred.clamp(2, MAX_CHUNK_DIGITS) & !1;
    while size > 2 && !chunk_fits(params, size) {
        size -= 2;
    }
    size
}

fn chunk_fits(params: &DomainParams, chunk_size: u16) -> bool {
    BigUint::from(10u32).pow(chunk_size as u32 + 1) < *params.p()
}

pub fn encrypt_record<R: Rng + ?Sized>(
    params: &DomainParams,
    owner_beta: &BigUint,
    record: &PlainRecord,
    chunk_size: u16,
    rng: &mut R,
) -> Result<DnaCiphertext, PipelineError> {
    check_chunk_size(chunk_size)?;
    if !chunk_fits(params, chunk_size) {
        return Err(PipelineError::InvalidChunking(format!(
            "guarded chunks of {chunk_size} digits do not fit below a {}-bit modulus",
            params.bits()
        )));
    }
    let digits = c2i::encode_text(record.as_str())?;
    let chunks = chunk_digits(&digits, chunk_size)?;
    let ciphertexts = chunks
        .iter()
        .map(|x| crypto::encrypt(params, owner_beta, x, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let plaintext_chars = u32::try_from(record.as_str().chars().count())
        .map_err(|_| PipelineError::InvalidChunking("record too long".into()))?;
    let env = EncryptedEnvelope {
        version: ENVELOPE_VERSION,
        chunk_digits: chunk_size,
        plaintext_chars,
        key_bytes: params.element_bytes() as u16,
        ciphertexts,
    };
    let bits = dna::bytes_to_bits(&serialize_envelope(&env));
    Ok(DnaCiphertext { dna: dna::bits_to_dna(&bits)?, key_fingerprint: crypto::key_fingerprint(params, owner_beta) })
}

pub fn decrypt_record(
    params: &DomainParams,
    owner_private_a: &BigUint,
    ct: &DnaCiphertext,
) -> Result<PlainRecord, PipelineError> {
    let bits = dna::dna_to_bits(ct.dna.as_str())?;
    let bytes = dna::bits_to_bytes(&bits).map_err(|_| PipelineError::MalformedEnvelope("partial byte".into()))?;
    let env = parse_envelope(&bytes)?;
    if env.key_bytes as usize != params.element_bytes() {
        return Err(PipelineError::MalformedEnvelope("key width differs from domain parameters".into()));
    }
    let mut chunks = Vec::with_capacity(env.chunk_count());
    for c in &env.ciphertexts {
        if c.y1 >= *params.p() || c.y2 >= *params.p() {
            return Err(CryptoError::CorruptCiphertext.into());
        }
        chunks.push(crypto::decrypt(params, owner_private_a, c)?);
    }
    let total_digits = 2 * env.plaintext_chars as usize;
    let digits = unchunk_digits(&chunks, env.chunk_digits, total_digits)?;
    PlainRecord::new(c2i::decode_digits(&digits)?)
}

//! Modular arithmetic and the ElGamal cryptosystem used to protect land records.
//!
//! Every party works in a multiplicative group modulo a safe prime `p = 2q + 1`
//! with a generator `alpha` of order `p - 1`. Encryption, decryption and the
//! classic ElGamal signature (used for certificates, deeds and login
//! challenges) all live here.

mod arith;
pub mod prime;

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use arith::{mod_inv, mod_pow, to_fixed_be};

use crate::serde_util::biguint_dec;

/// Smallest modulus width accepted by [`generate_domain_params`].
pub const MIN_PARAM_BITS: u64 = 16;
/// Key width used by the service unless configured otherwise.
pub const DEFAULT_KEY_BITS: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("message must satisfy 1 < x < p-1")]
    MessageTooLarge,
    #[error("ephemeral exponent must satisfy 1 < k < p-2")]
    InvalidEphemeral,
    #[error("ciphertext component is not invertible modulo p")]
    CorruptCiphertext,
    #[error("value is not invertible for the given modulus")]
    NotInvertible,
}

impl CryptoError {
    pub fn code(&self) -> &'static str {
        match self {
            CryptoError::InvalidParameter(_) => "invalid-parameter",
            CryptoError::MessageTooLarge => "message-too-large",
            CryptoError::InvalidEphemeral => "invalid-ephemeral",
            CryptoError::CorruptCiphertext => "corrupt-ciphertext",
            CryptoError::NotInvertible => "not-invertible",
        }
    }
}

/// Public group description: prime modulus and a generator of the full group.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainParams {
    #[serde(with = "biguint_dec")]
    p: BigUint,
    #[serde(with = "biguint_dec")]
    alpha: BigUint,
}

impl fmt::Debug for DomainParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainParams")
            .field("bits", &self.p.bits())
            .field("alpha", &self.alpha)
            .finish()
    }
}

// RFC 2409 Oakley group 2, a 1024-bit safe prime.
const OAKLEY_GROUP_2_HEX: &str = concat!(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1",
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD",
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245",
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED",
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381",
    "FFFFFFFFFFFFFFFF",
);

impl DomainParams {
    /// Builds parameters after checking every group invariant:
    /// `p` and `(p-1)/2` prime, `alpha` of order `p-1`.
    pub fn new<R: Rng + ?Sized>(p: BigUint, alpha: BigUint, rng: &mut R) -> Result<Self, CryptoError> {
        if p < BigUint::from(5u32) || p.is_even() {
            return Err(CryptoError::InvalidParameter("modulus too small or even".into()));
        }
        let q = (&p - 1u32) >> 1;
        if !prime::is_probable_prime(&p, prime::MILLER_RABIN_ROUNDS, rng)
            || !prime::is_probable_prime(&q, prime::MILLER_RABIN_ROUNDS, rng)
        {
            return Err(CryptoError::InvalidParameter("modulus is not a safe prime".into()));
        }
        if alpha >= p || !prime::has_full_order(&alpha, &p, &q) {
            return Err(CryptoError::InvalidParameter("alpha does not generate the group".into()));
        }
        Ok(DomainParams { p, alpha })
    }

    /// Skips the primality checks. Only for values whose validity is established elsewhere.
    pub fn from_trusted(p: BigUint, alpha: BigUint) -> Self {
        DomainParams { p, alpha }
    }

    /// The 1024-bit RFC 2409 group 2 safe prime with its smallest full-order generator.
    pub fn rfc2409_1024() -> Self {
        let p = BigUint::parse_bytes(OAKLEY_GROUP_2_HEX.as_bytes(), 16).expect("valid hex");
        let q = (&p - 1u32) >> 1;
        let alpha = prime::smallest_generator(&p, &q);
        DomainParams { p, alpha }
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn alpha(&self) -> &BigUint {
        &self.alpha
    }

    /// `(p - 1) / 2`.
    pub fn q(&self) -> BigUint {
        (&self.p - 1u32) >> 1
    }

    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    /// Width in bytes of any group element on the wire.
    pub fn element_bytes(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }

    fn p_minus_one(&self) -> BigUint {
        &self.p - 1u32
    }
}

/// Randomized search for a `bit_length`-bit safe prime and a full-order generator.
pub fn generate_domain_params<R: Rng + ?Sized>(bit_length: u64, rng: &mut R) -> Result<DomainParams, CryptoError> {
    if bit_length < MIN_PARAM_BITS {
        return Err(CryptoError::InvalidParameter(format!(
            "bit length {bit_length} below minimum {MIN_PARAM_BITS}"
        )));
    }
    let (p, q) = prime::random_safe_prime(bit_length, rng);
    let two = BigUint::from(2u32);
    let alpha = loop {
        let candidate = rng.gen_biguint_range(&two, &(&p - 1u32));
        if prime::has_full_order(&candidate, &p, &q) {
            break candidate;
        }
    };
    Ok(DomainParams { p, alpha })
}

/// Private exponent `a` and public `beta = alpha^a mod p`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    #[serde(with = "biguint_dec")]
    private_a: BigUint,
    #[serde(with = "biguint_dec")]
    public_beta: BigUint,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public_beta", &self.public_beta).finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Rebuilds a key pair from a known private exponent.
    pub fn from_private(params: &DomainParams, private_a: BigUint) -> Result<Self, CryptoError> {
        if private_a <= BigUint::one() || private_a >= &params.p - 2u32 {
            return Err(CryptoError::InvalidParameter("private key must satisfy 1 < a < p-2".into()));
        }
        let public_beta = params.alpha.modpow(&private_a, &params.p);
        Ok(KeyPair { private_a, public_beta })
    }

    pub fn private_a(&self) -> &BigUint {
        &self.private_a
    }

    pub fn public_beta(&self) -> &BigUint {
        &self.public_beta
    }
}

pub fn keygen<R: Rng + ?Sized>(params: &DomainParams, rng: &mut R) -> KeyPair {
    let private_a = rng.gen_biguint_range(&BigUint::from(2u32), &(&params.p - 2u32));
    let public_beta = params.alpha.modpow(&private_a, &params.p);
    KeyPair { private_a, public_beta }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext {
    #[serde(with = "biguint_dec")]
    pub y1: BigUint,
    #[serde(with = "biguint_dec")]
    pub y2: BigUint,
}

fn check_message(params: &DomainParams, x: &BigUint) -> Result<(), CryptoError> {
    if *x <= BigUint::one() || *x >= params.p_minus_one() {
        return Err(CryptoError::MessageTooLarge);
    }
    Ok(())
}

/// Encrypts `x` under `beta` with a fresh random ephemeral exponent.
pub fn encrypt<R: Rng + ?Sized>(
    params: &DomainParams,
    beta: &BigUint,
    x: &BigUint,
    rng: &mut R,
) -> Result<Ciphertext, CryptoError> {
    check_message(params, x)?;
    let k = rng.gen_biguint_range(&BigUint::from(2u32), &(&params.p - 2u32));
    encrypt_with_ephemeral(params, beta, x, &k)
}

/// Encryption with a caller-chosen ephemeral `k`; exists so tests can pin randomness.
///
/// `y1 = alpha^k mod p`, `y2 = x * beta^k mod p`.
pub fn encrypt_with_ephemeral(
    params: &DomainParams,
    beta: &BigUint,
    x: &BigUint,
    k: &BigUint,
) -> Result<Ciphertext, CryptoError> {
    check_message(params, x)?;
    if *k <= BigUint::one() || *k >= &params.p - 2u32 {
        return Err(CryptoError::InvalidEphemeral);
    }
    let y1 = params.alpha.modpow(k, &params.p);
    let y2 = (x * beta.modpow(k, &params.p)) % &params.p;
    Ok(Ciphertext { y1, y2 })
}

/// `x = y2 * (y1^a)^-1 mod p`.
pub fn decrypt(params: &DomainParams, private_a: &BigUint, c: &Ciphertext) -> Result<BigUint, CryptoError> {
    let shared = c.y1.modpow(private_a, &params.p);
    let inv = mod_inv(&shared, &params.p).map_err(|_| CryptoError::CorruptCiphertext)?;
    Ok((&c.y2 * inv) % &params.p)
}

/// ElGamal signature `(r, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    #[serde(with = "biguint_dec")]
    pub r: BigUint,
    #[serde(with = "biguint_dec")]
    pub s: BigUint,
}

/// SHA-256 digest, the only message form that gets signed.
pub type Digest32 = [u8; 32];

pub fn sha256(data: &[u8]) -> Digest32 {
    Sha256::digest(data).into()
}

fn digest_exponent(params: &DomainParams, digest: &Digest32) -> BigUint {
    BigUint::from_bytes_be(digest) % params.p_minus_one()
}

pub fn sign<R: Rng + ?Sized>(params: &DomainParams, private_a: &BigUint, digest: &Digest32, rng: &mut R) -> Signature {
    let order = params.p_minus_one();
    let h = digest_exponent(params, digest);
    let two = BigUint::from(2u32);
    loop {
        let k = rng.gen_biguint_range(&two, &order);
        if !k.gcd(&order).is_one() {
            continue;
        }
        let r = params.alpha.modpow(&k, &params.p);
        let k_inv = mod_inv(&k, &order).expect("k coprime to p-1");
        let ar = (private_a * &r) % &order;
        let diff = (&h + &order - ar) % &order;
        let s = (k_inv * diff) % &order;
        if !s.is_zero() {
            return Signature { r, s };
        }
    }
}

/// Checks `alpha^H == beta^r * r^s (mod p)`. Malformed input yields `false`.
pub fn verify(params: &DomainParams, beta: &BigUint, digest: &Digest32, sig: &Signature) -> bool {
    let order = params.p_minus_one();
    if sig.r.is_zero() || sig.r >= params.p || sig.s >= order {
        return false;
    }
    if beta.is_zero() || *beta >= params.p {
        return false;
    }
    let h = digest_exponent(params, digest);
    let lhs = params.alpha.modpow(&h, &params.p);
    let rhs = (beta.modpow(&sig.r, &params.p) * sig.r.modpow(&sig.s, &params.p)) % &params.p;
    lhs == rhs
}

/// Fixed-width big-endian serialization of a public key.
pub fn public_key_bytes(params: &DomainParams, beta: &BigUint) -> Vec<u8> {
    to_fixed_be(beta, params.element_bytes())
}

/// SHA-256 over [`public_key_bytes`]; binds stored records to the key they were encrypted under.
pub fn key_fingerprint(params: &DomainParams, beta: &BigUint) -> Digest32 {
    sha256(&public_key_bytes(params, beta))
}

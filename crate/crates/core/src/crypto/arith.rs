use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};

use super::CryptoError;

/// `base^exponent mod modulus`.
pub fn mod_pow(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> Result<BigUint, CryptoError> {
    if *modulus <= BigUint::one() {
        return Err(CryptoError::InvalidParameter("modulus must exceed 1".into()));
    }
    Ok(base.modpow(exponent, modulus))
}

/// Multiplicative inverse of `value` modulo `modulus` by the extended Euclidean algorithm.
pub fn mod_inv(value: &BigUint, modulus: &BigUint) -> Result<BigUint, CryptoError> {
    if *modulus <= BigUint::one() {
        return Err(CryptoError::InvalidParameter("modulus must exceed 1".into()));
    }
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    let a = BigInt::from_biguint(Sign::Plus, value % modulus);

    let (mut old_r, mut r) = (a, m.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    while !r.is_zero() {
        let q = &old_r / &r;
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
    }
    if !old_r.is_one() {
        return Err(CryptoError::NotInvertible);
    }
    let inv = old_s.mod_floor(&m);
    Ok(inv.to_biguint().expect("mod_floor of positive modulus is non-negative"))
}

/// Fixed-width big-endian encoding. Panics if `value` needs more than `width` bytes.
pub fn to_fixed_be(value: &BigUint, width: usize) -> Vec<u8> {
    let raw = value.to_bytes_be();
    let raw: &[u8] = if value.is_zero() { &[] } else { &raw };
    assert!(raw.len() <= width, "integer of {} bytes exceeds width {}", raw.len(), width);
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(raw);
    out
}

//! Bit strings and their DNA-base rendering: 11 -> A, 10 -> T, 01 -> C, 00 -> G.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DnaError {
    #[error("bit stream of odd length {0} cannot map onto bases")]
    OddLengthBitstream(usize),
    #[error("invalid base {symbol:?} at position {position}")]
    InvalidBase { symbol: char, position: usize },
    #[error("bit stream of length {0} is not a whole number of bytes")]
    RaggedBitstream(usize),
    #[error("invalid bit symbol {symbol:?} at position {position}")]
    InvalidBit { symbol: char, position: usize },
}

impl DnaError {
    pub fn code(&self) -> &'static str {
        match self {
            DnaError::OddLengthBitstream(_) => "odd-length-bitstream",
            DnaError::InvalidBase { .. } => "invalid-base",
            DnaError::RaggedBitstream(_) => "ragged-bitstream",
            DnaError::InvalidBit { .. } => "invalid-bit",
        }
    }
}

/// An ordered bit sequence. Parses from and prints as a `0`/`1` string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl FromStr for BitString {
    type Err = DnaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, symbol)| match symbol {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(DnaError::InvalidBit { symbol, position }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A string over `{A, C, G, T}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DnaString(String);

impl DnaString {
    pub fn parse(s: &str) -> Result<Self, DnaError> {
        if let Some((position, symbol)) = s.chars().enumerate().find(|(_, c)| !matches!(c, 'A' | 'C' | 'G' | 'T')) {
            return Err(DnaError::InvalidBase { symbol, position });
        }
        Ok(DnaString(s.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for DnaString {
    type Err = DnaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DnaString::parse(s)
    }
}

impl fmt::Display for DnaString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for DnaString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for DnaString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        DnaString::parse(&raw).map_err(serde::de::Error::custom)
    }
}

fn base_for(hi: bool, lo: bool) -> char {
    match (hi, lo) {
        (true, true) => 'A',
        (true, false) => 'T',
        (false, true) => 'C',
        (false, false) => 'G',
    }
}

pub fn bits_to_dna(bits: &BitString) -> Result<DnaString, DnaError> {
    if !bits.len().is_multiple_of(2) {
        return Err(DnaError::OddLengthBitstream(bits.len()));
    }
    Ok(DnaString(bits.0.chunks_exact(2).map(|pair| base_for(pair[0], pair[1])).collect()))
}

pub fn dna_to_bits(dna: &str) -> Result<BitString, DnaError> {
    let mut bits = Vec::with_capacity(dna.len() * 2);
    for (position, symbol) in dna.chars().enumerate() {
        let pair = match symbol {
            'A' => [true, true],
            'T' => [true, false],
            'C' => [false, true],
            'G' => [false, false],
            _ => return Err(DnaError::InvalidBase { symbol, position }),
        };
        bits.extend_from_slice(&pair);
    }
    Ok(BitString(bits))
}

/// Most-significant bit first within each byte.
pub fn bytes_to_bits(bytes: &[u8]) -> BitString {
    BitString(bytes.iter().flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1)).collect())
}

pub fn bits_to_bytes(bits: &BitString) -> Result<Vec<u8>, DnaError> {
    if !bits.len().is_multiple_of(8) {
        return Err(DnaError::RaggedBitstream(bits.len()));
    }
    Ok(bits.0.chunks_exact(8).map(|byte| byte.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn published_prefix() {
        assert_eq!(bits_to_dna(&bits("1000011001100100")).unwrap().as_str(), "TGCTCTCG");
        assert_eq!(dna_to_bits("TGCTCTCG").unwrap().to_string(), "1000011001100100");
    }

    #[test]
    fn one_of_each_base() {
        assert_eq!(bits_to_dna(&bits("11100100")).unwrap().as_str(), "ATCG");
        assert_eq!(bits_to_dna(&BitString::default()).unwrap().as_str(), "");
        assert!(dna_to_bits("").unwrap().is_empty());
    }

    #[test]
    fn errors() {
        assert_eq!(bits_to_dna(&bits("101")), Err(DnaError::OddLengthBitstream(3)));
        assert_eq!(dna_to_bits("TGCX"), Err(DnaError::InvalidBase { symbol: 'X', position: 3 }));
        assert_eq!(DnaString::parse("ACgT"), Err(DnaError::InvalidBase { symbol: 'g', position: 2 }));
        assert_eq!(bits_to_bytes(&bits("1010")), Err(DnaError::RaggedBitstream(4)));
        assert!("10x".parse::<BitString>().is_err());
    }

    #[test]
    fn byte_expansion() {
        assert_eq!(bytes_to_bits(&[0x86]).to_string(), "10000110");
        assert!(bytes_to_bits(&[]).is_empty());
        assert!(bits_to_bytes(&BitString::default()).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn bits_dna_round_trip(raw in proptest::collection::vec(any::<bool>(), 0..512).prop_map(|mut v| { if v.len() % 2 == 1 { v.pop(); } v })) {
            let b = BitString::new(raw);
            let dna = bits_to_dna(&b).unwrap();
            prop_assert_eq!(dna.len() * 2, b.len());
            prop_assert_eq!(dna_to_bits(dna.as_str()).unwrap(), b);
        }

        #[test]
        fn bytes_round_trip_and_length_laws(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let b = bytes_to_bits(&bytes);
            prop_assert_eq!(b.len(), 8 * bytes.len());
            prop_assert_eq!(bits_to_bytes(&b).unwrap(), bytes.clone());
            prop_assert_eq!(bits_to_dna(&b).unwrap().len(), 4 * bytes.len());
        }
    }
}

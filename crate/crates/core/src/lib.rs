//! Land-record management: owner-keyed ElGamal encryption of records, the C2I
//! and DNA codecs, a hash-linked Merkle block ledger, the registry that maps
//! owners to blocks, and the certificate/listing/deed workflow that moves
//! ownership between parties.

pub mod c2i;
pub mod crypto;
pub mod dna;
pub mod ledger;
pub mod pipeline;
pub mod registry;
mod serde_util;
#[cfg(test)]
mod test_support;
pub mod trading;

pub use serde_util::{biguint_dec, hex32};

use crate::crypto::Digest32;
use sha2::{Digest, Sha256};

fn hash_pair(left: &Digest32, right: &Digest32) -> Digest32 {
    let mut h = Sha256::new();
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// Binary Merkle root over `leaves`, duplicating the last node of odd-sized levels.
/// `None` for an empty list.
pub fn merkle_root(leaves: &[Digest32]) -> Option<Digest32> {
    if leaves.is_empty() {
        return None;
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => hash_pair(l, r),
                [l] => hash_pair(l, l),
                _ => unreachable!(),
            })
            .collect();
    }
    Some(level[0])
}

//! Content digests for model artifacts: one whole-stream SHA-256 plus a
//! Merkle root over fixed-size chunks, so single shards can later be checked
//! against the signed root without rehashing the rest of the artifact.
//!
//! Both digests are always computed; deployment policy decides which one a
//! verifier checks. The digests depend only on the byte stream and the chunk
//! size — never on how the stream was buffered or whether chunk hashing ran
//! in parallel.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::{Hash32, Sha256Stream};
use crate::merkle::{self, MerkleHasher, Sha256Merkle};

/// Default chunk size: 4 MiB.
pub const DEFAULT_CHUNK_SIZE: u32 = 4 * 1024 * 1024;

/// Smallest permitted chunk size.
pub const MIN_CHUNK_SIZE: u32 = 4096;

/// The complete digest record for one artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactDigest {
    pub chunk_count: u64,
    pub chunk_size: u32,
    pub full_sha256: Hash32,
    pub merkle_root: Hash32,
    pub total_length: u64,
}

/// Sibling path proving one chunk's membership under an artifact's root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MerkleProofPath {
    pub leaf_index: u64,
    pub tree_size: u64,
    pub siblings: Vec<Hash32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DigestError {
    #[error("chunk size {0} is not a power of two >= {MIN_CHUNK_SIZE}")]
    InvalidChunkSize(u32),
    #[error("leaf index {index} out of range for tree of {tree_size} chunks")]
    IndexOutOfRange { index: u64, tree_size: u64 },
    #[error("leaf count {0} does not cover the requested tree")]
    NotEnoughLeaves(u64),
}

pub fn validate_chunk_size(chunk_size: u32) -> Result<(), DigestError> {
    if chunk_size >= MIN_CHUNK_SIZE && chunk_size.is_power_of_two() {
        Ok(())
    } else {
        Err(DigestError::InvalidChunkSize(chunk_size))
    }
}

/// Number of leaves for an artifact of `total_length` bytes. A zero-length
/// artifact still has one (empty) leaf so its tree has a defined root.
pub fn chunk_count_for_length(total_length: u64, chunk_size: u32) -> u64 {
    if total_length == 0 {
        1
    } else {
        total_length.div_ceil(chunk_size as u64)
    }
}

/// Incremental digester: feed the stream in arbitrary slices; it maintains
/// the whole-stream hash and cuts chunk boundaries itself.
pub struct ChunkedDigester {
    chunk_size: u32,
    full: Sha256Stream,
    leaf: Sha256Stream,
    leaf_fill: u32,
    leaves: Vec<Hash32>,
    total_length: u64,
}

impl ChunkedDigester {
    pub fn new(chunk_size: u32) -> Result<Self, DigestError> {
        validate_chunk_size(chunk_size)?;
        Ok(ChunkedDigester {
            chunk_size,
            full: Sha256Stream::new(),
            leaf: new_leaf_hasher(),
            leaf_fill: 0,
            leaves: Vec::new(),
            total_length: 0,
        })
    }

    pub fn update(&mut self, mut data: &[u8]) {
        self.full.update(data);
        self.total_length += data.len() as u64;
        while !data.is_empty() {
            let room = (self.chunk_size - self.leaf_fill) as usize;
            let take = room.min(data.len());
            self.leaf.update(&data[..take]);
            self.leaf_fill += take as u32;
            data = &data[take..];
            if self.leaf_fill == self.chunk_size {
                let done = core::mem::replace(&mut self.leaf, new_leaf_hasher());
                self.leaves.push(done.finalize());
                self.leaf_fill = 0;
            }
        }
    }

    pub fn finalize(mut self) -> (ArtifactDigest, Vec<Hash32>) {
        if self.leaf_fill > 0 || self.leaves.is_empty() {
            // Trailing partial chunk, or the single empty leaf of an empty
            // artifact.
            self.leaves.push(self.leaf.finalize());
        }
        let digest = ArtifactDigest {
            chunk_count: self.leaves.len() as u64,
            chunk_size: self.chunk_size,
            full_sha256: self.full.finalize(),
            merkle_root: merkle::root_from_leaves(&self.leaves).expect("at least one leaf"),
            total_length: self.total_length,
        };
        (digest, self.leaves)
    }
}

fn new_leaf_hasher() -> Sha256Stream {
    let mut h = Sha256Stream::new();
    h.update(&[0x00]);
    h
}

/// One-shot digest of an in-memory artifact.
pub fn hash_bytes(data: &[u8], chunk_size: u32) -> Result<(ArtifactDigest, Vec<Hash32>), DigestError> {
    let mut d = ChunkedDigester::new(chunk_size)?;
    d.update(data);
    Ok(d.finalize())
}

/// Assembles a digest from independently computed parts. This is the join
/// point for parallel chunk hashing: workers produce `leaves` in index order,
/// the sequential pass produces `full_sha256`, and the tree reduction here is
/// deterministic, so any hashing schedule yields the same record.
pub fn assemble_digest(
    full_sha256: Hash32,
    leaves: &[Hash32],
    chunk_size: u32,
    total_length: u64,
) -> Result<ArtifactDigest, DigestError> {
    validate_chunk_size(chunk_size)?;
    let expected = chunk_count_for_length(total_length, chunk_size);
    if leaves.len() as u64 != expected {
        return Err(DigestError::NotEnoughLeaves(leaves.len() as u64));
    }
    Ok(ArtifactDigest {
        chunk_count: leaves.len() as u64,
        chunk_size,
        full_sha256,
        merkle_root: merkle::root_from_leaves(leaves).expect("at least one leaf"),
        total_length,
    })
}

/// `SHA-256(0x00 || chunk bytes)` — the leaf hash of one chunk.
pub fn chunk_leaf_hash(chunk: &[u8]) -> Hash32 {
    merkle::leaf_hash(chunk)
}

/// Audit path for one chunk, built from the full ordered leaf-hash list.
pub fn prove_chunk(leaves: &[Hash32], leaf_index: u64) -> Result<MerkleProofPath, DigestError> {
    let tree_size = leaves.len() as u64;
    if leaf_index >= tree_size {
        return Err(DigestError::IndexOutOfRange { index: leaf_index, tree_size });
    }
    Ok(MerkleProofPath {
        leaf_index,
        tree_size,
        siblings: merkle::audit_path(leaves, leaf_index),
    })
}

/// Checks a chunk's leaf hash against the artifact root. Returns `false`
/// both for a failed fold and for a fold that completes onto a different
/// root; a structurally impossible path shape is reported as an error so
/// callers can distinguish malformed evidence from honest mismatches.
pub fn verify_chunk(
    root: &Hash32,
    leaf_hash: &Hash32,
    path: &MerkleProofPath,
) -> Result<bool, DigestError> {
    verify_chunk_with(&mut Sha256Merkle, root, leaf_hash, path)
}

/// [`verify_chunk`] with an injected hash backend, so callers can meter the
/// number of hash evaluations a verification performs.
pub fn verify_chunk_with<H: MerkleHasher>(
    hasher: &mut H,
    root: &Hash32,
    leaf_hash: &Hash32,
    path: &MerkleProofPath,
) -> Result<bool, DigestError> {
    if path.leaf_index >= path.tree_size {
        return Err(DigestError::IndexOutOfRange {
            index: path.leaf_index,
            tree_size: path.tree_size,
        });
    }
    if path.siblings.len() != merkle::audit_path_len(path.leaf_index, path.tree_size) {
        return Err(DigestError::NotEnoughLeaves(path.siblings.len() as u64));
    }
    match merkle::fold_audit_path(hasher, leaf_hash, path.leaf_index, path.tree_size, &path.siblings)
    {
        Some(computed) => Ok(computed == *root),
        None => Ok(false),
    }
}

impl ArtifactDigest {
    /// Recomputes the expected chunk count from length and size and checks it
    /// against the stored value.
    pub fn shape_is_consistent(&self) -> bool {
        validate_chunk_size(self.chunk_size).is_ok()
            && self.chunk_count == chunk_count_for_length(self.total_length, self.chunk_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::sha256;
    use crate::merkle::{leaf_hash, node_hash};
    use alloc::vec;

    #[test]
    fn single_chunk_root_is_the_leaf_hash() {
        let data = b"small artifact";
        let (digest, leaves) = hash_bytes(data, 4096).unwrap();
        assert_eq!(digest.chunk_count, 1);
        assert_eq!(digest.total_length, data.len() as u64);
        assert_eq!(digest.merkle_root, leaf_hash(data));
        assert_eq!(digest.full_sha256, sha256(data));
        assert_eq!(leaves, vec![leaf_hash(data)]);
        assert!(digest.shape_is_consistent());
    }

    #[test]
    fn two_chunk_root_matches_direct_computation() {
        let mut data = vec![0xabu8; 4096];
        data.extend_from_slice(&[0xcdu8; 100]);
        let (digest, leaves) = hash_bytes(&data, 4096).unwrap();
        assert_eq!(digest.chunk_count, 2);
        let l0 = leaf_hash(&data[..4096]);
        let l1 = leaf_hash(&data[4096..]);
        assert_eq!(leaves, vec![l0, l1]);
        assert_eq!(digest.merkle_root, node_hash(&l0, &l1));
    }

    #[test]
    fn empty_artifact_has_one_empty_leaf() {
        let (digest, leaves) = hash_bytes(b"", 4096).unwrap();
        assert_eq!(digest.chunk_count, 1);
        assert_eq!(digest.total_length, 0);
        assert_eq!(leaves, vec![leaf_hash(b"")]);
        assert_eq!(digest.merkle_root, leaf_hash(b""));
        assert!(digest.shape_is_consistent());
    }

    #[test]
    fn buffering_does_not_change_the_digest() {
        let data: Vec<u8> = (0..20000u32).map(|i| (i % 251) as u8).collect();
        let (one_shot, _) = hash_bytes(&data, 4096).unwrap();
        let mut dribble = ChunkedDigester::new(4096).unwrap();
        for piece in data.chunks(7) {
            dribble.update(piece);
        }
        let (dribbled, _) = dribble.finalize();
        assert_eq!(one_shot, dribbled);
    }

    #[test]
    fn assemble_matches_streaming() {
        let data: Vec<u8> = (0..33000u32).map(|i| (i * 7 % 256) as u8).collect();
        let (streamed, leaves) = hash_bytes(&data, 4096).unwrap();
        let assembled =
            assemble_digest(sha256(&data), &leaves, 4096, data.len() as u64).unwrap();
        assert_eq!(streamed, assembled);
    }

    #[test]
    fn chunk_size_must_be_power_of_two() {
        assert!(matches!(hash_bytes(b"x", 5000), Err(DigestError::InvalidChunkSize(5000))));
        assert!(matches!(hash_bytes(b"x", 2048), Err(DigestError::InvalidChunkSize(2048))));
        assert!(hash_bytes(b"x", 8192).is_ok());
    }

    #[test]
    fn prove_and_verify_chunk() {
        // 251 does not divide the chunk size, so chunks are pairwise distinct.
        let data: Vec<u8> = (0..5 * 4096u32).map(|i| (i % 251) as u8).collect();
        let (digest, leaves) = hash_bytes(&data, 4096).unwrap();
        assert_eq!(digest.chunk_count, 5);
        let proof = prove_chunk(&leaves, 2).unwrap();
        assert_eq!(proof.siblings.len(), 3);
        assert!(verify_chunk(&digest.merkle_root, &leaves[2], &proof).unwrap());
        // Tampered sibling flips the verdict.
        let mut bad = proof.clone();
        bad.siblings[0].0[0] ^= 1;
        assert!(!verify_chunk(&digest.merkle_root, &leaves[2], &bad).unwrap());
        // Wrong leaf flips the verdict.
        assert!(!verify_chunk(&digest.merkle_root, &leaves[3], &proof).unwrap());
    }

    #[test]
    fn single_leaf_proof_is_empty() {
        let (digest, leaves) = hash_bytes(b"tiny", 4096).unwrap();
        let proof = prove_chunk(&leaves, 0).unwrap();
        assert!(proof.siblings.is_empty());
        assert!(verify_chunk(&digest.merkle_root, &leaves[0], &proof).unwrap());
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let (_, leaves) = hash_bytes(b"tiny", 4096).unwrap();
        assert!(matches!(
            prove_chunk(&leaves, 1),
            Err(DigestError::IndexOutOfRange { index: 1, tree_size: 1 })
        ));
    }

    #[test]
    fn malformed_path_shape_is_an_error_not_false() {
        let data: Vec<u8> = vec![9u8; 3 * 4096];
        let (digest, leaves) = hash_bytes(&data, 4096).unwrap();
        let mut proof = prove_chunk(&leaves, 1).unwrap();
        proof.siblings.pop();
        assert!(verify_chunk(&digest.merkle_root, &leaves[1], &proof).is_err());
    }
}

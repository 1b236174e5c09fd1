//! Append-only transparency log over attestation statements.
//!
//! Leaves are `SHA-256(0x00 || canonical statement bytes)` — the same RFC 6962
//! construction as artifact chunk digests — so anyone holding a statement file
//! can check its inclusion. Every append produces a signed tree head; old
//! heads stay verifiable forever, and consistency proofs demonstrate that any
//! newer head extends any older one without rewriting history.
//!
//! This type is the in-memory tree; the crash-safe file layout and the
//! single-writer lock live in the companion binary crate.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attest::{
    sign_statement_bytes, AttestationStatement, AttestError, KeyPair, PublicKey,
    SignatureEnvelope,
};
use crate::hash::{sha256, Hash32};
use crate::merkle::{self, Sha256Merkle};
use crate::timestamp::Timestamp;

/// One appended statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    pub index: u64,
    pub leaf_hash: Hash32,
    pub statement_digest: Hash32,
    pub appended_at: Timestamp,
}

/// A signed snapshot of the log: its size and root at a point in time.
///
/// The signature covers the canonical encoding of the size/root/timestamp
/// triple (sorted keys: `issued_at`, `root_hash`, `tree_size`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedTreeHead {
    pub issued_at: Timestamp,
    pub log_signature: SignatureEnvelope,
    pub root_hash: Hash32,
    pub tree_size: u64,
}

#[derive(Serialize)]
struct TreeHeadContent<'a> {
    issued_at: &'a Timestamp,
    root_hash: &'a Hash32,
    tree_size: u64,
}

fn head_content_bytes(issued_at: &Timestamp, root_hash: &Hash32, tree_size: u64) -> Vec<u8> {
    serde_json::to_vec(&TreeHeadContent { issued_at, root_hash, tree_size })
        .expect("head content serialization cannot fail")
}

impl SignedTreeHead {
    pub fn create(tree_size: u64, root_hash: Hash32, issued_at: Timestamp, key: &KeyPair) -> Self {
        let content = head_content_bytes(&issued_at, &root_hash, tree_size);
        SignedTreeHead {
            log_signature: sign_statement_bytes(&content, key, issued_at.clone()),
            issued_at,
            root_hash,
            tree_size,
        }
    }

    /// Total check of the head's signature under the log key.
    pub fn verify(&self, log_key: &PublicKey) -> bool {
        let content = head_content_bytes(&self.issued_at, &self.root_hash, self.tree_size);
        if self.log_signature.statement_digest != sha256(&content) {
            return false;
        }
        if self.log_signature.key_fingerprint != log_key.fingerprint() {
            return false;
        }
        log_key.verify(&content, &self.log_signature.signature.0)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("head serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, LogError> {
        serde_json::from_slice(bytes).map_err(|e| LogError::Decoding(alloc::string::ToString::to_string(&e)))
    }
}

/// Proof that a leaf is present under a given head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub tree_size: u64,
    pub audit_path: Vec<Hash32>,
}

/// Proof that the tree at `old_size` is a prefix of the tree at `new_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub path: Vec<Hash32>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogError {
    #[error("range ({low}, {high}) invalid for log of size {size}")]
    InvalidRange { low: u64, high: u64, size: u64 },
    #[error("log is empty")]
    Empty,
    #[error(transparent)]
    Statement(#[from] AttestError),
    #[error("decoding failed: {0}")]
    Decoding(String),
}

/// The in-memory log: dense entries from index zero upward.
#[derive(Debug, Default, Clone)]
pub struct TransparencyLog {
    entries: Vec<LogEntry>,
    leaf_hashes: Vec<Hash32>,
}

impl TransparencyLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn size(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn leaf_hashes(&self) -> &[Hash32] {
        &self.leaf_hashes
    }

    /// Root over the first `tree_size` entries.
    pub fn root_at(&self, tree_size: u64) -> Result<Hash32, LogError> {
        if tree_size == 0 || tree_size > self.size() {
            return Err(LogError::InvalidRange { low: tree_size, high: tree_size, size: self.size() });
        }
        Ok(merkle::root_from_leaves(&self.leaf_hashes[..tree_size as usize])
            .expect("non-empty prefix"))
    }

    /// Appends pre-encoded canonical statement bytes. Duplicates are fine:
    /// the log records events, not a set.
    pub fn append_canonical(&mut self, canonical: &[u8], appended_at: Timestamp) -> LogEntry {
        let entry = LogEntry {
            index: self.size(),
            leaf_hash: merkle::leaf_hash(canonical),
            statement_digest: sha256(canonical),
            appended_at,
        };
        self.leaf_hashes.push(entry.leaf_hash);
        self.entries.push(entry.clone());
        entry
    }

    /// Appends a statement and returns its index plus the new signed head.
    pub fn append(
        &mut self,
        statement: &AttestationStatement,
        log_key: &KeyPair,
        now: Timestamp,
    ) -> Result<(u64, SignedTreeHead), LogError> {
        let canonical = statement.canonical_encode()?;
        let entry = self.append_canonical(&canonical, now.clone());
        let head = self.sign_head(log_key, now)?;
        Ok((entry.index, head))
    }

    /// Signs a head for the current size.
    pub fn sign_head(&self, log_key: &KeyPair, now: Timestamp) -> Result<SignedTreeHead, LogError> {
        self.sign_head_at(self.size(), log_key, now)
    }

    /// Signs a head for a historical size (auditor tooling).
    pub fn sign_head_at(
        &self,
        tree_size: u64,
        log_key: &KeyPair,
        now: Timestamp,
    ) -> Result<SignedTreeHead, LogError> {
        let root = self.root_at(tree_size)?;
        Ok(SignedTreeHead::create(tree_size, root, now, log_key))
    }

    pub fn prove_inclusion(
        &self,
        leaf_index: u64,
        tree_size: u64,
    ) -> Result<InclusionProof, LogError> {
        if tree_size == 0 || tree_size > self.size() || leaf_index >= tree_size {
            return Err(LogError::InvalidRange {
                low: leaf_index,
                high: tree_size,
                size: self.size(),
            });
        }
        Ok(InclusionProof {
            leaf_index,
            tree_size,
            audit_path: merkle::audit_path(&self.leaf_hashes[..tree_size as usize], leaf_index),
        })
    }

    pub fn prove_consistency(
        &self,
        old_size: u64,
        new_size: u64,
    ) -> Result<ConsistencyProof, LogError> {
        if old_size == 0 || old_size > new_size || new_size > self.size() {
            return Err(LogError::InvalidRange { low: old_size, high: new_size, size: self.size() });
        }
        Ok(ConsistencyProof {
            old_size,
            new_size,
            path: merkle::consistency_path(&self.leaf_hashes[..new_size as usize], old_size),
        })
    }

    /// First entry whose leaf hash matches, if any.
    pub fn find_leaf(&self, leaf_hash: &Hash32) -> Option<u64> {
        self.leaf_hashes.iter().position(|h| h == leaf_hash).map(|i| i as u64)
    }
}

/// True iff the head's log signature verifies and the audit path folds the
/// leaf onto the head's root. Total on untrusted input.
pub fn verify_inclusion(
    proof: &InclusionProof,
    leaf_hash: &Hash32,
    head: &SignedTreeHead,
    log_key: &PublicKey,
) -> bool {
    if !head.verify(log_key) || proof.tree_size != head.tree_size {
        return false;
    }
    match merkle::fold_audit_path(
        &mut Sha256Merkle,
        leaf_hash,
        proof.leaf_index,
        proof.tree_size,
        &proof.audit_path,
    ) {
        Some(root) => root == head.root_hash,
        None => false,
    }
}

/// True iff the proof links the old head's root to the new head's root.
/// Head signatures are the caller's concern (see [`TransparencyLog::audit`]).
pub fn verify_consistency(
    old_head: &SignedTreeHead,
    new_head: &SignedTreeHead,
    proof: &ConsistencyProof,
) -> bool {
    proof.old_size == old_head.tree_size
        && proof.new_size == new_head.tree_size
        && merkle::verify_consistency_path(
            &mut Sha256Merkle,
            proof.old_size,
            proof.new_size,
            &old_head.root_hash,
            &new_head.root_hash,
            &proof.path,
        )
}

/// What an audit found wrong, if anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AuditFinding {
    HeadSignatureInvalid { tree_size: u64 },
    HeadsUnordered { prev: u64, next: u64 },
    HeadBeyondLog { tree_size: u64, log_size: u64 },
    /// A journaled head's root does not match the root recomputed from the
    /// raw entries at that size.
    RootMismatch { tree_size: u64 },
    /// A pair of journaled heads is not connected by a valid consistency
    /// proof over the raw entries.
    InconsistentPair { old_size: u64, new_size: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub heads_checked: usize,
    pub pairs_checked: usize,
    pub finding: Option<AuditFinding>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.finding.is_none()
    }
}

impl TransparencyLog {
    /// Cross-checks a head history against the raw entries: every head's
    /// signature, size ordering, per-head root recomputation, and adjacent
    /// pairwise consistency. Stops at the first violation. An empty history
    /// is vacuously clean.
    pub fn audit(&self, heads: &[SignedTreeHead], log_key: &PublicKey) -> AuditReport {
        let mut report = AuditReport { heads_checked: 0, pairs_checked: 0, finding: None };
        let mut prev: Option<&SignedTreeHead> = None;
        for head in heads {
            report.heads_checked += 1;
            if !head.verify(log_key) {
                report.finding =
                    Some(AuditFinding::HeadSignatureInvalid { tree_size: head.tree_size });
                return report;
            }
            if head.tree_size > self.size() {
                report.finding = Some(AuditFinding::HeadBeyondLog {
                    tree_size: head.tree_size,
                    log_size: self.size(),
                });
                return report;
            }
            if head.tree_size == 0 || self.root_at(head.tree_size).ok() != Some(head.root_hash) {
                report.finding = Some(AuditFinding::RootMismatch { tree_size: head.tree_size });
                return report;
            }
            if let Some(p) = prev {
                if p.tree_size > head.tree_size {
                    report.finding = Some(AuditFinding::HeadsUnordered {
                        prev: p.tree_size,
                        next: head.tree_size,
                    });
                    return report;
                }
                report.pairs_checked += 1;
                let proof = match self.prove_consistency(p.tree_size, head.tree_size) {
                    Ok(proof) => proof,
                    Err(_) => {
                        report.finding = Some(AuditFinding::InconsistentPair {
                            old_size: p.tree_size,
                            new_size: head.tree_size,
                        });
                        return report;
                    }
                };
                if !verify_consistency(p, head, &proof) {
                    report.finding = Some(AuditFinding::InconsistentPair {
                        old_size: p.tree_size,
                        new_size: head.tree_size,
                    });
                    return report;
                }
            }
            prev = Some(head);
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::{leaf_hash, node_hash};

    fn ts(text: &str) -> Timestamp {
        Timestamp::parse(text).unwrap()
    }

    fn now() -> Timestamp {
        ts("2025-06-03T09:00:00Z")
    }

    fn log_key() -> KeyPair {
        KeyPair::from_seed(&[42; 32])
    }

    fn statement(version: &str) -> AttestationStatement {
        let mut s = crate::attest::tests::fixture_statement();
        s.model_version = alloc::string::String::from(version);
        s
    }

    #[test]
    fn first_append_root_is_the_leaf_hash() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        let s = statement("1.0.0");
        let (index, head) = log.append(&s, &key, now()).unwrap();
        assert_eq!(index, 0);
        assert_eq!(head.tree_size, 1);
        let canonical = s.canonical_encode().unwrap();
        assert_eq!(head.root_hash, leaf_hash(&canonical));
        assert!(head.verify(&key.public()));
    }

    #[test]
    fn second_append_root_is_the_two_leaf_node() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        let a = statement("1.0.0");
        let b = statement("2.0.0");
        log.append(&a, &key, now()).unwrap();
        let (_, head) = log.append(&b, &key, now()).unwrap();
        let l0 = leaf_hash(&a.canonical_encode().unwrap());
        let l1 = leaf_hash(&b.canonical_encode().unwrap());
        assert_eq!(head.root_hash, node_hash(&l0, &l1));
    }

    #[test]
    fn duplicate_statements_get_distinct_provable_indices() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        let s = statement("1.0.0");
        let (i0, _) = log.append(&s, &key, now()).unwrap();
        let (i1, head) = log.append(&s, &key, now()).unwrap();
        assert_eq!((i0, i1), (0, 1));
        let leaf = leaf_hash(&s.canonical_encode().unwrap());
        for index in [0, 1] {
            let proof = log.prove_inclusion(index, 2).unwrap();
            assert!(verify_inclusion(&proof, &leaf, &head, &key.public()));
        }
    }

    #[test]
    fn inclusion_proof_shapes() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        for i in 0..5 {
            log.append(&statement(&alloc::format!("{i}.0.0")), &key, now()).unwrap();
        }
        assert!(log.prove_inclusion(0, 1).unwrap().audit_path.is_empty());
        assert_eq!(log.prove_inclusion(2, 5).unwrap().audit_path.len(), 3);
        assert!(log.prove_inclusion(5, 5).is_err());
        assert!(log.prove_inclusion(0, 6).is_err());
        assert!(log.prove_inclusion(0, 0).is_err());
    }

    #[test]
    fn old_heads_stay_valid_as_the_log_grows() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        let s = statement("1.0.0");
        let (_, head1) = log.append(&s, &key, now()).unwrap();
        for i in 0..4 {
            log.append(&statement(&alloc::format!("g{i}")), &key, now()).unwrap();
        }
        let proof = log.prove_inclusion(0, 1).unwrap();
        let leaf = leaf_hash(&s.canonical_encode().unwrap());
        assert!(verify_inclusion(&proof, &leaf, &head1, &key.public()));
    }

    #[test]
    fn inclusion_rejects_forged_or_mismatched_evidence() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        let s = statement("1.0.0");
        let t = statement("2.0.0");
        log.append(&s, &key, now()).unwrap();
        let (_, head) = log.append(&t, &key, now()).unwrap();
        let leaf_s = leaf_hash(&s.canonical_encode().unwrap());
        let leaf_t = leaf_hash(&t.canonical_encode().unwrap());
        let proof_s = log.prove_inclusion(0, 2).unwrap();

        assert!(verify_inclusion(&proof_s, &leaf_s, &head, &key.public()));
        // Replayed against the wrong leaf.
        assert!(!verify_inclusion(&proof_s, &leaf_t, &head, &key.public()));
        // Forged root.
        let mut forged = head.clone();
        forged.root_hash.0[0] ^= 1;
        assert!(!verify_inclusion(&proof_s, &leaf_s, &forged, &key.public()));
        // Head signed by a different key.
        let rogue = KeyPair::from_seed(&[9; 32]);
        let rogue_head = SignedTreeHead::create(2, head.root_hash, now(), &rogue);
        assert!(!verify_inclusion(&proof_s, &leaf_s, &rogue_head, &key.public()));
        // Wrong proof size for the head.
        let proof_small = log.prove_inclusion(0, 1).unwrap();
        assert!(!verify_inclusion(&proof_small, &leaf_s, &head, &key.public()));
    }

    #[test]
    fn consistency_two_leaf_example() {
        let mut log = TransparencyLog::new();
        let key = log_key();
        let a = statement("1.0.0");
        let b = statement("2.0.0");
        let (_, head1) = log.append(&a, &key, now()).unwrap();
        let (_, head2) = log.append(&b, &key, now()).unwrap();
        let proof = log.prove_consistency(1, 2).unwrap();
        let l1 = leaf_hash(&b.canonical_encode().unwrap());
        assert_eq!(proof.path, alloc::vec![l1]);
        assert!(verify_consistency(&head1, &head2, &proof));
        // Degenerate equal-size proof.
        let same = log.prove_consistency(2, 2).unwrap();
        assert!(same.path.is_empty());
        assert!(verify_consistency(&head2, &head2, &same));
    }

    #[test]
    fn rewriting_history_is_detected() {
        let key = log_key();
        let mut log = TransparencyLog::new();
        let mut heads = alloc::vec::Vec::new();
        for i in 0..4 {
            let (_, h) = log.append(&statement(&alloc::format!("{i}")), &key, now()).unwrap();
            heads.push(h);
        }
        // Fork: rewrite entry 0 and regrow to the same size.
        let mut fork = TransparencyLog::new();
        fork.append(&statement("evil"), &key, now()).unwrap();
        for i in 1..4 {
            fork.append(&statement(&alloc::format!("{i}")), &key, now()).unwrap();
        }
        let fork_head = fork.sign_head(&key, now()).unwrap();
        let proof = fork.prove_consistency(2, 4).unwrap();
        assert!(!verify_consistency(&heads[1], &fork_head, &proof));
        // Truncate-then-regrow: drop the last entry, append a different one.
        let mut trunc = TransparencyLog::new();
        for i in 0..3 {
            trunc.append(&statement(&alloc::format!("{i}")), &key, now()).unwrap();
        }
        trunc.append(&statement("different"), &key, now()).unwrap();
        let trunc_head = trunc.sign_head(&key, now()).unwrap();
        let proof = trunc.prove_consistency(4, 4).unwrap();
        assert!(!verify_consistency(&heads[3], &trunc_head, &proof));
    }

    #[test]
    fn audit_clean_and_violations() {
        let key = log_key();
        let mut log = TransparencyLog::new();
        let mut heads = alloc::vec::Vec::new();
        for i in 0..5 {
            let (_, h) = log.append(&statement(&alloc::format!("{i}")), &key, now()).unwrap();
            heads.push(h);
        }
        // Honest history.
        let report = log.audit(&heads, &key.public());
        assert!(report.is_clean());
        assert_eq!(report.heads_checked, 5);
        assert_eq!(report.pairs_checked, 4);
        // Empty history is vacuously clean.
        assert!(log.audit(&[], &key.public()).is_clean());
        // A head from a forked log.
        let mut fork = TransparencyLog::new();
        fork.append(&statement("evil"), &key, now()).unwrap();
        for i in 1..3 {
            fork.append(&statement(&alloc::format!("{i}")), &key, now()).unwrap();
        }
        let mut poisoned = heads.clone();
        poisoned[2] = fork.sign_head(&key, now()).unwrap();
        let report = log.audit(&poisoned, &key.public());
        assert_eq!(report.finding, Some(AuditFinding::RootMismatch { tree_size: 3 }));
        // A head signed by the wrong key.
        let rogue = KeyPair::from_seed(&[9; 32]);
        let mut bad_sig = heads.clone();
        bad_sig[1] = SignedTreeHead::create(2, log.root_at(2).unwrap(), now(), &rogue);
        let report = log.audit(&bad_sig, &key.public());
        assert_eq!(report.finding, Some(AuditFinding::HeadSignatureInvalid { tree_size: 2 }));
        // A head claiming more entries than exist.
        let oversized = SignedTreeHead::create(9, log.root_at(5).unwrap(), now(), &key);
        let report = log.audit(&[oversized], &key.public());
        assert_eq!(
            report.finding,
            Some(AuditFinding::HeadBeyondLog { tree_size: 9, log_size: 5 })
        );
    }

    #[test]
    fn head_json_roundtrip() {
        let key = log_key();
        let mut log = TransparencyLog::new();
        let (_, head) = log.append(&statement("1"), &key, now()).unwrap();
        let bytes = head.to_json();
        let restored = SignedTreeHead::from_json(&bytes).unwrap();
        assert_eq!(restored, head);
        assert!(restored.verify(&key.public()));
    }
}

//! The pre-deployment verification gate.
//!
//! Given an artifact, its attestation statement and signature, optional
//! transparency-log evidence, and a deployment policy, the gate decides
//! ALLOW or DENY. It is fail-closed and total: malformed or unreadable
//! evidence produces a DENY with reason codes, never a crash or an ALLOW.
//! Every applicable check runs — nothing short-circuits — so a verdict
//! carries the complete set of failures, in a fixed documented order.
//!
//! A DENY converts into a maximal integrity violation for the risk index,
//! which drives the integrity multiplier (and therefore the published score)
//! to zero.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attest::{
    trace_provenance, verify_statement, AttestationStatement, ChainVerdict, OverlayResolver,
    PublicKey, RejectReason, SignatureEnvelope, StatementResolver, VerifyOutcome,
};
use crate::digest::chunk_count_for_length;
use crate::hash::{sha256, Hash32};
use crate::log::{InclusionProof, SignedTreeHead};
use crate::lsri::IntegrityViolation;
use crate::merkle::{self, Sha256Merkle};
use crate::timestamp::Timestamp;

/// How the artifact's content is checked against the signed digest record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    /// Recompute the SHA-256 of the whole stream. Detects any tampering.
    WholeFile,
    /// Check `chunks` uniformly sampled chunks against the signed Merkle
    /// root. Cheaper than rehashing everything; detects tampering in any
    /// sampled chunk.
    MerkleSample { chunks: u32 },
}

/// Deployment constraints. Everything is explicit: an absent optional
/// constraint is not enforced, and unknown keys in the file form are a parse
/// error rather than silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    /// Fingerprints of keys allowed to sign statements.
    pub trusted_keys: BTreeSet<Hash32>,
    /// The key that signs transparency-log tree heads.
    pub trusted_log_key: PublicKey,
    pub allowed_dataset_ids: DatasetRule,
    #[serde(default)]
    pub required_alignment_policy_version: Option<String>,
    #[serde(default)]
    pub max_parameters: Option<u64>,
    #[serde(default)]
    pub require_dataset_commitment: bool,
    #[serde(default)]
    pub require_log_inclusion: bool,
    /// Maximum age of the statement's training timestamp, in seconds.
    #[serde(default)]
    pub max_statement_age_seconds: Option<u64>,
    /// Walk and verify the full parent chain back to the root model.
    #[serde(default)]
    pub require_full_provenance: bool,
    #[serde(default = "VerifyMode::whole_file")]
    pub verify_mode: VerifyMode,
}

impl VerifyMode {
    fn whole_file() -> Self {
        VerifyMode::WholeFile
    }
}

/// Which dataset identifiers a statement may carry. An explicit empty list
/// denies every dataset; the wildcard allows any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetRule {
    Any,
    Ids(BTreeSet<String>),
}

impl DatasetRule {
    pub fn permits(&self, id: &str) -> bool {
        match self {
            DatasetRule::Any => true,
            DatasetRule::Ids(ids) => ids.contains(id),
        }
    }
}

impl Serialize for DatasetRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            DatasetRule::Any => serializer.serialize_str("*"),
            DatasetRule::Ids(ids) => ids.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for DatasetRule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Wildcard(String),
            Ids(BTreeSet<String>),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Wildcard(s) if s == "*" => Ok(DatasetRule::Any),
            Raw::Wildcard(s) => Err(D::Error::custom(format_args!(
                "allowed_dataset_ids must be \"*\" or a list of ids, got {s:?}"
            ))),
            Raw::Ids(ids) => Ok(DatasetRule::Ids(ids)),
        }
    }
}

impl Serialize for VerifyMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            VerifyMode::WholeFile => serializer.serialize_str("whole_file"),
            VerifyMode::MerkleSample { chunks } => {
                use serde::ser::SerializeMap;
                #[derive(Serialize)]
                struct Sample {
                    chunks: u32,
                }
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("merkle_sample", &Sample { chunks: *chunks })?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for VerifyMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Sample {
            chunks: u32,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Tagged {
            merkle_sample: Sample,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Sample(Tagged),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Word(s) if s == "whole_file" => Ok(VerifyMode::WholeFile),
            Raw::Word(s) => Err(D::Error::custom(format_args!(
                "verify_mode must be \"whole_file\" or {{\"merkle_sample\":{{\"chunks\":k}}}}, got {s:?}"
            ))),
            Raw::Sample(t) => Ok(VerifyMode::MerkleSample { chunks: t.merkle_sample.chunks }),
        }
    }
}

impl Policy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.trusted_keys.is_empty() {
            return Err(PolicyError::NoTrustedKeys);
        }
        if let VerifyMode::MerkleSample { chunks: 0 } = self.verify_mode {
            return Err(PolicyError::ZeroSampleChunks);
        }
        Ok(())
    }
}

/// Parses the strict JSON policy document.
pub fn parse_policy(bytes: &[u8]) -> Result<Policy, PolicyError> {
    let policy: Policy = serde_json::from_slice(bytes).map_err(|e| PolicyError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    policy.validate()?;
    Ok(policy)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("policy must trust at least one signing key")]
    NoTrustedKeys,
    #[error("merkle_sample mode requires at least one sampled chunk")]
    ZeroSampleChunks,
}

/// Why the gate denied. Declaration order is the documented reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    DigestMismatch,
    SignatureInvalid,
    UntrustedKey,
    NotInLog,
    LogHeadInvalid,
    PolicyDataset,
    PolicyAlignment,
    PolicySize,
    PolicyAge,
    PolicyCommitmentMissing,
    ProvenanceBroken,
}

impl ReasonCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasonCode::DigestMismatch => "DIGEST_MISMATCH",
            ReasonCode::SignatureInvalid => "SIGNATURE_INVALID",
            ReasonCode::UntrustedKey => "UNTRUSTED_KEY",
            ReasonCode::NotInLog => "NOT_IN_LOG",
            ReasonCode::LogHeadInvalid => "LOG_HEAD_INVALID",
            ReasonCode::PolicyDataset => "POLICY_DATASET",
            ReasonCode::PolicyAlignment => "POLICY_ALIGNMENT",
            ReasonCode::PolicySize => "POLICY_SIZE",
            ReasonCode::PolicyAge => "POLICY_AGE",
            ReasonCode::PolicyCommitmentMissing => "POLICY_COMMITMENT_MISSING",
            ReasonCode::ProvenanceBroken => "PROVENANCE_BROKEN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "ALLOW")]
    Allow,
    #[serde(rename = "DENY")]
    Deny,
}

/// The gate's output. `decision` is ALLOW exactly when `reasons` is empty.
/// When chunk sampling ran, the seed and the sampled indices are recorded so
/// the verification is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub decision: Decision,
    pub reasons: Vec<ReasonCode>,
    pub checked_at: Timestamp,
    /// Human-readable annotations keyed by reason code.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<ReasonCode, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_chunks: Option<Vec<u64>>,
}

impl GateVerdict {
    pub fn allowed(&self) -> bool {
        self.decision == Decision::Allow
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("verdict serialization cannot fail")
    }
}

/// Byte access to the artifact under check. Errors stand for unreadable
/// evidence and translate into DENY, never into a crash.
pub trait ArtifactSource {
    fn full_sha256(&mut self) -> Result<Hash32, SourceError>;
    /// Bytes of chunk `index` for the given chunk size; the final chunk may
    /// be short.
    fn read_chunk(&mut self, index: u64, chunk_size: u32) -> Result<Vec<u8>, SourceError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct SourceError(pub String);

impl ArtifactSource for &[u8] {
    fn full_sha256(&mut self) -> Result<Hash32, SourceError> {
        Ok(sha256(self))
    }

    fn read_chunk(&mut self, index: u64, chunk_size: u32) -> Result<Vec<u8>, SourceError> {
        let len = self.len() as u64;
        if index >= chunk_count_for_length(len, chunk_size) {
            return Err(SourceError(alloc::format!("chunk {index} beyond end of artifact")));
        }
        let start = index * chunk_size as u64;
        let end = (start + chunk_size as u64).min(len);
        Ok(self[start as usize..end as usize].to_vec())
    }
}

/// Transparency-log evidence: a signed head plus the inclusion proof for the
/// statement's leaf under that head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEvidence {
    pub head: SignedTreeHead,
    pub proof: InclusionProof,
}

/// Everything the gate evaluates besides the policy.
pub struct GateRequest<'a, S: ArtifactSource, R: StatementResolver> {
    pub source: &'a mut S,
    pub statement: &'a AttestationStatement,
    pub envelope: &'a SignatureEnvelope,
    pub log_evidence: Option<&'a LogEvidence>,
    /// Untrusted chunk-hash manifest enabling sampled verification without
    /// rehashing the whole artifact. Lies in the manifest make proofs fail
    /// to fold onto the signed root, so it cannot launder tampering.
    pub chunk_manifest: Option<&'a [Hash32]>,
    /// Store of ancestor statements for provenance walking.
    pub resolver: &'a R,
    /// Key material for the fingerprints the policy trusts.
    pub keyring: &'a [PublicKey],
    pub now: Timestamp,
    /// Seed for chunk sampling, recorded in the verdict.
    pub sample_seed: u64,
}

/// Runs every applicable check and returns the accumulated verdict.
pub fn evaluate_gate<S: ArtifactSource, R: StatementResolver>(
    policy: &Policy,
    request: GateRequest<'_, S, R>,
) -> GateVerdict {
    let mut reasons: BTreeSet<ReasonCode> = BTreeSet::new();
    let mut details: BTreeMap<ReasonCode, String> = BTreeMap::new();
    let mut sample_seed = None;
    let mut sampled_chunks = None;

    let statement = request.statement;

    // Keys the policy trusts and we hold material for.
    let effective_keys: Vec<PublicKey> = request
        .keyring
        .iter()
        .filter(|k| policy.trusted_keys.contains(&k.fingerprint()))
        .cloned()
        .collect();

    // Check (i): artifact content against the signed digest record.
    match policy.verify_mode {
        VerifyMode::WholeFile => match request.source.full_sha256() {
            Ok(actual) => {
                if actual != statement.artifact.full_sha256 {
                    reasons.insert(ReasonCode::DigestMismatch);
                }
            }
            Err(e) => {
                reasons.insert(ReasonCode::DigestMismatch);
                details.insert(ReasonCode::DigestMismatch, alloc::format!("artifact unreadable: {e}"));
            }
        },
        VerifyMode::MerkleSample { chunks } => {
            let count = statement.artifact.chunk_count;
            let indices = sample_indices(count, chunks, request.sample_seed);
            sample_seed = Some(request.sample_seed);
            sampled_chunks = Some(indices.clone());
            if let Err((reason, note)) = check_sampled_chunks(
                request.source,
                statement,
                request.chunk_manifest,
                &indices,
            ) {
                reasons.insert(reason);
                details.insert(reason, note);
            }
        }
    }

    // Check (ii): statement signature, and log anchoring when required.
    if let VerifyOutcome::Reject(reason) = verify_statement(statement, request.envelope, &effective_keys)
    {
        let code = match reason {
            RejectReason::DigestMismatch => ReasonCode::DigestMismatch,
            RejectReason::UntrustedKey => ReasonCode::UntrustedKey,
            RejectReason::SignatureInvalid => ReasonCode::SignatureInvalid,
        };
        reasons.insert(code);
        if code == ReasonCode::UntrustedKey
            && policy.trusted_keys.contains(&request.envelope.key_fingerprint)
        {
            details.insert(code, "fingerprint is trusted but key material is unavailable".to_string());
        }
    }
    if policy.require_log_inclusion {
        match request.log_evidence {
            None => {
                reasons.insert(ReasonCode::NotInLog);
                details.insert(ReasonCode::NotInLog, "no log evidence supplied".to_string());
            }
            Some(evidence) => {
                if !evidence.head.verify(&policy.trusted_log_key) {
                    reasons.insert(ReasonCode::LogHeadInvalid);
                }
                if !inclusion_folds(statement, evidence) {
                    reasons.insert(ReasonCode::NotInLog);
                }
            }
        }
    }

    // Check (iii): policy constraints over the attested metadata.
    if !policy.allowed_dataset_ids.permits(&statement.dataset_id) {
        reasons.insert(ReasonCode::PolicyDataset);
    }
    if let Some(required) = &policy.required_alignment_policy_version {
        if statement.alignment_policy_version != *required {
            reasons.insert(ReasonCode::PolicyAlignment);
        }
    }
    if let Some(max) = policy.max_parameters {
        match statement.parameter_count {
            Some(count) if count <= max => {}
            Some(count) => {
                reasons.insert(ReasonCode::PolicySize);
                details.insert(
                    ReasonCode::PolicySize,
                    alloc::format!("{count} parameters exceeds the limit of {max}"),
                );
            }
            None => {
                reasons.insert(ReasonCode::PolicySize);
                details.insert(
                    ReasonCode::PolicySize,
                    "statement does not attest a parameter count".to_string(),
                );
            }
        }
    }
    if let Some(max_age) = policy.max_statement_age_seconds {
        let age = statement.training_timestamp.seconds_until(&request.now);
        if age < 0 {
            reasons.insert(ReasonCode::PolicyAge);
            details.insert(ReasonCode::PolicyAge, "training timestamp is in the future".to_string());
        } else if age as u64 > max_age {
            reasons.insert(ReasonCode::PolicyAge);
            details.insert(
                ReasonCode::PolicyAge,
                alloc::format!("statement is {age}s old, limit is {max_age}s"),
            );
        }
    }
    if policy.require_dataset_commitment && statement.dataset_commitment.is_none() {
        reasons.insert(ReasonCode::PolicyCommitmentMissing);
    }
    if policy.require_full_provenance {
        let verdict = match statement.digest() {
            Ok(digest) => {
                let overlay = OverlayResolver {
                    digest,
                    entry: (statement.clone(), request.envelope.clone()),
                    base: request.resolver,
                };
                trace_provenance(statement, &overlay, &effective_keys)
            }
            Err(_) => ChainVerdict::Failed {
                depth: 0,
                reason: crate::attest::ChainFailure::Verify(RejectReason::DigestMismatch),
            },
        };
        if let ChainVerdict::Failed { depth, reason } = verdict {
            reasons.insert(ReasonCode::ProvenanceBroken);
            details.insert(
                ReasonCode::ProvenanceBroken,
                alloc::format!("chain broken at depth {depth}: {reason:?}"),
            );
        }
    }

    let reasons: Vec<ReasonCode> = reasons.into_iter().collect();
    GateVerdict {
        decision: if reasons.is_empty() { Decision::Allow } else { Decision::Deny },
        reasons,
        checked_at: request.now,
        details,
        sample_seed,
        sampled_chunks,
    }
}

fn inclusion_folds(statement: &AttestationStatement, evidence: &LogEvidence) -> bool {
    let Ok(canonical) = statement.canonical_encode() else {
        return false;
    };
    if evidence.proof.tree_size != evidence.head.tree_size {
        return false;
    }
    let leaf = merkle::leaf_hash(&canonical);
    match merkle::fold_audit_path(
        &mut Sha256Merkle,
        &leaf,
        evidence.proof.leaf_index,
        evidence.proof.tree_size,
        &evidence.proof.audit_path,
    ) {
        Some(root) => root == evidence.head.root_hash,
        None => false,
    }
}

fn check_sampled_chunks<S: ArtifactSource>(
    source: &mut S,
    statement: &AttestationStatement,
    manifest: Option<&[Hash32]>,
    indices: &[u64],
) -> Result<(), (ReasonCode, String)> {
    let artifact = &statement.artifact;
    let fail = |note: String| (ReasonCode::DigestMismatch, note);

    // Leaf hashes for building audit paths. A manifest of the right shape is
    // used as-is (it is checked against the signed root by every fold);
    // otherwise fall back to hashing all chunks from the source.
    let owned: Vec<Hash32>;
    let leaves: &[Hash32] = match manifest {
        Some(m) if m.len() as u64 == artifact.chunk_count => m,
        _ => {
            let mut all = Vec::with_capacity(artifact.chunk_count as usize);
            for index in 0..artifact.chunk_count {
                let bytes = source
                    .read_chunk(index, artifact.chunk_size)
                    .map_err(|e| fail(alloc::format!("artifact unreadable: {e}")))?;
                all.push(merkle::leaf_hash(&bytes));
            }
            owned = all;
            &owned
        }
    };

    for &index in indices {
        let bytes = source
            .read_chunk(index, artifact.chunk_size)
            .map_err(|e| fail(alloc::format!("artifact unreadable: {e}")))?;
        let leaf = merkle::leaf_hash(&bytes);
        let proof = crate::digest::prove_chunk(leaves, index)
            .map_err(|e| fail(alloc::format!("cannot build chunk proof: {e}")))?;
        match crate::digest::verify_chunk(&artifact.merkle_root, &leaf, &proof) {
            Ok(true) => {}
            Ok(false) => {
                return Err(fail(alloc::format!("chunk {index} does not match the signed root")))
            }
            Err(e) => return Err(fail(alloc::format!("chunk proof malformed: {e}"))),
        }
    }
    Ok(())
}

/// First `k` elements of a seeded uniform permutation of `0..count`, via
/// sparse partial Fisher-Yates (memory is O(k), not O(count)). With a fixed
/// seed, the sample for `k + 1` extends the sample for `k`.
pub fn sample_indices(count: u64, k: u32, seed: u64) -> Vec<u64> {
    let take = (k as u64).min(count);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut swaps: BTreeMap<u64, u64> = BTreeMap::new();
    let mut out = Vec::with_capacity(take as usize);
    for i in 0..take {
        let j = rng.gen_range(i..count);
        let vj = *swaps.get(&j).unwrap_or(&j);
        let vi = *swaps.get(&i).unwrap_or(&i);
        out.push(vj);
        swaps.insert(j, vi);
    }
    out
}

/// Bridges a gate verdict into the risk index: a DENY is a maximal
/// supply-chain violation, which zeroes the integrity multiplier.
pub fn violation_from_verdict(verdict: &GateVerdict) -> Vec<IntegrityViolation> {
    match verdict.decision {
        Decision::Allow => Vec::new(),
        Decision::Deny => alloc::vec![IntegrityViolation {
            category: "supply_chain".to_string(),
            magnitude: 1.0,
            sensitivity: 1.0,
        }],
    }
}

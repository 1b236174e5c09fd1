//! Attestation statements: canonical provenance records binding an artifact
//! digest to model, dataset, and policy metadata, signed with Ed25519 and
//! chained to predecessor models for derived checkpoints.
//!
//! The canonical encoding is JSON with keys in lexicographic order, no
//! insignificant whitespace, all digests as lowercase hex, and absent
//! optional fields omitted entirely. Signatures cover exactly those bytes,
//! and a statement's digest is the SHA-256 of them, so two implementations
//! that agree on field values agree on digests and signature validity.
//!
//! Canonical key order, top level: `alignment_policy_version`, `artifact`,
//! `chunk_size`, `dataset_commitment`?, `dataset_id`, `model_name`,
//! `model_version`, `parameter_count`?, `parent_statement_digest`?,
//! `schema_version`, `training_timestamp` (`?` marks omittable fields).
//! Within `artifact`: `chunk_count`, `chunk_size`, `full_sha256`,
//! `merkle_root`, `total_length`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::digest::ArtifactDigest;
use crate::hash::{sha256, Hash32, HexBytes};
use crate::timestamp::Timestamp;

/// Current statement schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance record for one model artifact.
///
/// Field declaration order is the canonical (sorted) key order; serialization
/// relies on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttestationStatement {
    pub alignment_policy_version: String,
    pub artifact: ArtifactDigest,
    /// Echo of `artifact.chunk_size`, kept at top level so a verifier can
    /// reproduce the Merkle root without digging into the digest record.
    pub chunk_size: u32,
    /// Digest of the training dataset, when the pipeline commits to one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_commitment: Option<Hash32>,
    pub dataset_id: String,
    pub model_name: String,
    pub model_version: String,
    /// Declared parameter count; policy can bound it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter_count: Option<u64>,
    /// Digest of the predecessor model's statement for derived models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_statement_digest: Option<Hash32>,
    pub schema_version: u32,
    pub training_timestamp: Timestamp,
}

impl AttestationStatement {
    pub fn validate(&self) -> Result<(), AttestError> {
        let non_empty = |field: &'static str, v: &str| {
            if v.is_empty() {
                Err(AttestError::EmptyField(field))
            } else {
                Ok(())
            }
        };
        non_empty("model_name", &self.model_name)?;
        non_empty("model_version", &self.model_version)?;
        non_empty("dataset_id", &self.dataset_id)?;
        non_empty("alignment_policy_version", &self.alignment_policy_version)?;
        if self.schema_version == 0 {
            return Err(AttestError::BadSchemaVersion(self.schema_version));
        }
        if self.chunk_size != self.artifact.chunk_size {
            return Err(AttestError::ChunkSizeMismatch {
                statement: self.chunk_size,
                artifact: self.artifact.chunk_size,
            });
        }
        if !self.artifact.shape_is_consistent() {
            return Err(AttestError::InconsistentDigestShape);
        }
        Ok(())
    }

    /// The canonical byte encoding — what gets signed and logged.
    pub fn canonical_encode(&self) -> Result<Vec<u8>, AttestError> {
        self.validate()?;
        serde_json::to_vec(self).map_err(|e| AttestError::Encoding(e.to_string()))
    }

    /// Parses and validates canonical (or equivalent) JSON bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self, AttestError> {
        let statement: AttestationStatement =
            serde_json::from_slice(bytes).map_err(|e| AttestError::Decoding(e.to_string()))?;
        statement.validate()?;
        Ok(statement)
    }

    /// `SHA-256(canonical_encode(self))`.
    pub fn digest(&self) -> Result<Hash32, AttestError> {
        Ok(sha256(&self.canonical_encode()?))
    }
}

/// Detached signature over a statement's canonical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureEnvelope {
    /// SHA-256 of the signer's raw 32-byte public key.
    pub key_fingerprint: Hash32,
    /// Ed25519 signature bytes (64 bytes when well formed; kept opaque so
    /// corrupt envelopes still parse and are rejected by verification).
    pub signature: HexBytes,
    pub signed_at: Timestamp,
    /// SHA-256 of the canonical bytes the signature covers.
    pub statement_digest: Hash32,
}

impl SignatureEnvelope {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("envelope serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, AttestError> {
        serde_json::from_slice(bytes).map_err(|e| AttestError::Decoding(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Keys
// ---------------------------------------------------------------------------

/// An Ed25519 verification key plus its fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    verifying: VerifyingKey,
    fingerprint: Hash32,
}

impl PublicKey {
    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, AttestError> {
        let verifying = VerifyingKey::from_bytes(bytes)
            .map_err(|_| AttestError::MalformedKey("not a valid ed25519 public key"))?;
        Ok(PublicKey { verifying, fingerprint: sha256(bytes) })
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.verifying.to_bytes()
    }

    /// SHA-256 of the raw 32-byte public key.
    pub fn fingerprint(&self) -> Hash32 {
        self.fingerprint
    }

    /// Total signature check: any malformed input is simply `false`.
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        match Signature::from_slice(signature) {
            Ok(sig) => self.verifying.verify(message, &sig).is_ok(),
            Err(_) => false,
        }
    }
}

impl serde::Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> serde::Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let s = String::deserialize(deserializer)?;
        if s.len() != 64 || s.bytes().any(|b| !matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(D::Error::custom("public key must be 64 lowercase hex characters"));
        }
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&s, &mut bytes).map_err(D::Error::custom)?;
        PublicKey::from_bytes(&bytes).map_err(D::Error::custom)
    }
}

/// A signing/verification keypair. The private part never leaves this type
/// except through [`KeyPair::to_key_file`].
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn generate<R: rand_core::CryptoRngCore>(rng: &mut R) -> Self {
        KeyPair { signing: SigningKey::generate(rng) }
    }

    pub fn from_seed(seed: &[u8; 32]) -> Self {
        KeyPair { signing: SigningKey::from_bytes(seed) }
    }

    pub fn public(&self) -> PublicKey {
        let verifying = self.signing.verifying_key();
        let bytes = verifying.to_bytes();
        PublicKey { verifying, fingerprint: sha256(&bytes) }
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.signing.sign(message).to_bytes().to_vec()
    }
}

/// Text encoding of a public key: algorithm, fingerprint, raw key as hex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicKeyFile {
    pub algorithm: String,
    pub fingerprint: Hash32,
    pub public_key: HexBytes,
}

/// Text encoding of a full keypair (the private seed plus public material).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivateKeyFile {
    pub algorithm: String,
    pub fingerprint: Hash32,
    pub private_key: HexBytes,
    pub public_key: HexBytes,
}

pub const KEY_ALGORITHM: &str = "ed25519";

impl PublicKey {
    pub fn to_key_file(&self) -> PublicKeyFile {
        PublicKeyFile {
            algorithm: KEY_ALGORITHM.to_string(),
            fingerprint: self.fingerprint,
            public_key: HexBytes(self.to_bytes().to_vec()),
        }
    }

    pub fn from_key_file(file: &PublicKeyFile) -> Result<Self, AttestError> {
        if file.algorithm != KEY_ALGORITHM {
            return Err(AttestError::MalformedKey("unsupported algorithm"));
        }
        let bytes: [u8; 32] = file.public_key.0.as_slice().try_into().map_err(|_| {
            AttestError::MalformedKey("public key must be exactly 32 bytes")
        })?;
        let key = PublicKey::from_bytes(&bytes)?;
        if key.fingerprint != file.fingerprint {
            return Err(AttestError::MalformedKey("fingerprint does not match key"));
        }
        Ok(key)
    }
}

impl KeyPair {
    pub fn to_key_file(&self) -> PrivateKeyFile {
        let public = self.public();
        PrivateKeyFile {
            algorithm: KEY_ALGORITHM.to_string(),
            fingerprint: public.fingerprint,
            private_key: HexBytes(self.signing.to_bytes().to_vec()),
            public_key: HexBytes(public.to_bytes().to_vec()),
        }
    }

    pub fn from_key_file(file: &PrivateKeyFile) -> Result<Self, AttestError> {
        if file.algorithm != KEY_ALGORITHM {
            return Err(AttestError::MalformedKey("unsupported algorithm"));
        }
        let seed: [u8; 32] = file.private_key.0.as_slice().try_into().map_err(|_| {
            AttestError::MalformedKey("private key must be exactly 32 bytes")
        })?;
        let pair = KeyPair::from_seed(&seed);
        let public = pair.public();
        if public.to_bytes().as_slice() != file.public_key.0.as_slice()
            || public.fingerprint != file.fingerprint
        {
            return Err(AttestError::MalformedKey("public part does not match private seed"));
        }
        Ok(pair)
    }
}

// ---------------------------------------------------------------------------
// Sign / verify
// ---------------------------------------------------------------------------

/// Why a statement/envelope pair was rejected. Checks run in the order the
/// variants are declared and the first failure is reported, so reason codes
/// are deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    DigestMismatch,
    UntrustedKey,
    SignatureInvalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyOutcome {
    Accept,
    Reject(RejectReason),
}

impl VerifyOutcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, VerifyOutcome::Accept)
    }
}

/// Signs arbitrary canonical content bytes; the envelope's digest field is
/// the SHA-256 of exactly those bytes. Statements and tree heads share this.
pub fn sign_statement_bytes(
    content: &[u8],
    key: &KeyPair,
    signed_at: Timestamp,
) -> SignatureEnvelope {
    SignatureEnvelope {
        key_fingerprint: key.public().fingerprint(),
        signature: HexBytes(key.sign(content)),
        signed_at,
        statement_digest: sha256(content),
    }
}

/// Signs the statement's canonical bytes.
pub fn sign_statement(
    statement: &AttestationStatement,
    key: &KeyPair,
    signed_at: Timestamp,
) -> Result<SignatureEnvelope, AttestError> {
    let bytes = statement.canonical_encode()?;
    Ok(sign_statement_bytes(&bytes, key, signed_at))
}

/// Total verification of untrusted input; never errors.
///
/// Accepts iff, in order: (1) the envelope's digest matches the statement's
/// canonical digest, (2) the envelope's key fingerprint belongs to a trusted
/// key, (3) the signature verifies over the canonical bytes under that key.
/// A statement too malformed to encode canonically cannot match any signed
/// digest and is rejected as a digest mismatch.
pub fn verify_statement(
    statement: &AttestationStatement,
    envelope: &SignatureEnvelope,
    trusted_keys: &[PublicKey],
) -> VerifyOutcome {
    let bytes = match statement.canonical_encode() {
        Ok(b) => b,
        Err(_) => return VerifyOutcome::Reject(RejectReason::DigestMismatch),
    };
    if sha256(&bytes) != envelope.statement_digest {
        return VerifyOutcome::Reject(RejectReason::DigestMismatch);
    }
    let Some(key) = trusted_keys.iter().find(|k| k.fingerprint() == envelope.key_fingerprint)
    else {
        return VerifyOutcome::Reject(RejectReason::UntrustedKey);
    };
    if key.verify(&bytes, &envelope.signature.0) {
        VerifyOutcome::Accept
    } else {
        VerifyOutcome::Reject(RejectReason::SignatureInvalid)
    }
}

// ---------------------------------------------------------------------------
// Derivation and provenance chains
// ---------------------------------------------------------------------------

/// Links a child statement to its parent by digest: the returned statement is
/// `child` with `parent_statement_digest` pointing at `parent`.
pub fn derive_statement(
    parent: &AttestationStatement,
    mut child: AttestationStatement,
) -> Result<AttestationStatement, AttestError> {
    child.parent_statement_digest = Some(parent.digest()?);
    child.validate()?;
    Ok(child)
}

/// Looks up statements and their envelopes by statement digest.
pub trait StatementResolver {
    fn resolve(&self, digest: &Hash32) -> Option<(AttestationStatement, SignatureEnvelope)>;
}

impl StatementResolver for BTreeMap<Hash32, (AttestationStatement, SignatureEnvelope)> {
    fn resolve(&self, digest: &Hash32) -> Option<(AttestationStatement, SignatureEnvelope)> {
        self.get(digest).cloned()
    }
}

/// Resolver overlay that serves one known entry before falling back, used to
/// feed the directly supplied leaf statement into a chain walk.
pub struct OverlayResolver<'a, R: StatementResolver> {
    pub digest: Hash32,
    pub entry: (AttestationStatement, SignatureEnvelope),
    pub base: &'a R,
}

impl<R: StatementResolver> StatementResolver for OverlayResolver<'_, R> {
    fn resolve(&self, digest: &Hash32) -> Option<(AttestationStatement, SignatureEnvelope)> {
        if *digest == self.digest {
            Some(self.entry.clone())
        } else {
            self.base.resolve(digest)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainFailure {
    /// The statement at this depth (or its envelope) was not resolvable.
    MissingAncestor,
    /// A parent link led back to a statement already on the chain.
    Cycle,
    /// The statement at this depth failed signature verification.
    Verify(RejectReason),
}

/// Result of a provenance walk. Depth counts parent hops from the leaf:
/// the leaf is depth 0, its parent depth 1, and so on up to the root.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainVerdict {
    Ok {
        /// Statements ordered root first, leaf last.
        chain: Vec<AttestationStatement>,
        signatures_verified: usize,
    },
    Failed {
        depth: usize,
        reason: ChainFailure,
    },
}

impl ChainVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, ChainVerdict::Ok { .. })
    }
}

/// Walks parent links from `leaf` to the root, verifying every statement's
/// signature on the way. Fails closed at the first missing, unverifiable, or
/// repeated ancestor. The leaf's own envelope is looked up through the
/// resolver like any other link.
///
/// The resolver is a keyed store, not a trust anchor: entries are
/// authenticated by their signatures, and the walk tracks every digest it
/// traverses so a store whose parent pointers loop terminates with
/// [`ChainFailure::Cycle`] instead of spinning.
pub fn trace_provenance<R: StatementResolver>(
    leaf: &AttestationStatement,
    resolver: &R,
    trusted_keys: &[PublicKey],
) -> ChainVerdict {
    let mut next_digest = match leaf.digest() {
        Ok(d) => d,
        Err(_) => {
            return ChainVerdict::Failed {
                depth: 0,
                reason: ChainFailure::Verify(RejectReason::DigestMismatch),
            }
        }
    };
    let mut seen: alloc::collections::BTreeSet<Hash32> = alloc::collections::BTreeSet::new();
    let mut chain_rev: Vec<AttestationStatement> = Vec::new();
    let mut depth = 0usize;
    loop {
        if !seen.insert(next_digest) {
            return ChainVerdict::Failed { depth, reason: ChainFailure::Cycle };
        }
        let Some((statement, envelope)) = resolver.resolve(&next_digest) else {
            return ChainVerdict::Failed { depth, reason: ChainFailure::MissingAncestor };
        };
        if let VerifyOutcome::Reject(reason) = verify_statement(&statement, &envelope, trusted_keys)
        {
            return ChainVerdict::Failed { depth, reason: ChainFailure::Verify(reason) };
        }
        let parent = statement.parent_statement_digest;
        chain_rev.push(statement);
        match parent {
            None => break,
            Some(parent_digest) => {
                next_digest = parent_digest;
                depth += 1;
            }
        }
    }
    chain_rev.reverse();
    ChainVerdict::Ok { chain: chain_rev, signatures_verified: depth + 1 }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttestError {
    #[error("statement field {0} must be non-empty")]
    EmptyField(&'static str),
    #[error("unsupported schema version {0}")]
    BadSchemaVersion(u32),
    #[error("statement chunk_size {statement} != artifact chunk_size {artifact}")]
    ChunkSizeMismatch { statement: u32, artifact: u32 },
    #[error("artifact digest shape is internally inconsistent")]
    InconsistentDigestShape,
    #[error("canonical encoding failed: {0}")]
    Encoding(String),
    #[error("decoding failed: {0}")]
    Decoding(String),
    #[error("malformed key: {0}")]
    MalformedKey(&'static str),
}

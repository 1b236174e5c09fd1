//! Core primitives for establishing a verifiable root of trust over model
//! artifacts, plus the scalability risk index used to score deployments.
//!
//! Everything in this crate is pure computation over in-memory values: hashing,
//! Merkle trees, canonical encoding, signatures, log proofs, and gate decisions.
//! File formats, streaming IO, and the command-line driver live in the
//! companion `mtrust` binary crate. The crate is `no_std`-compatible (with
//! `alloc`) when built without the default `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attest;
pub mod digest;
pub mod gate;
pub mod hash;
pub mod log;
pub mod lsri;
pub mod merkle;
pub mod timestamp;

pub use attest::{
    AttestationStatement, ChainFailure, ChainVerdict, KeyPair, PublicKey, RejectReason,
    SignatureEnvelope, StatementResolver, VerifyOutcome,
};
pub use digest::{ArtifactDigest, MerkleProofPath, DEFAULT_CHUNK_SIZE, MIN_CHUNK_SIZE};
pub use gate::{GateVerdict, Policy, ReasonCode, VerifyMode};
pub use hash::Hash32;
pub use log::{ConsistencyProof, InclusionProof, LogEntry, SignedTreeHead, TransparencyLog};
pub use lsri::{IntegrityViolation, LsriProfile, LsriReport, MappingSpec, RiskFactor};
pub use timestamp::Timestamp;

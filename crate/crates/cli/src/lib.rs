//! IO, persistence, and command plumbing for the `mtrust` binary: streaming
//! and parallel artifact hashing, the crash-safe transparency-log directory,
//! digest-addressed provenance stores, key files, and table rendering.

pub mod artifact;
pub mod errors;
pub mod keyfiles;
pub mod logstore;
pub mod provstore;
pub mod table;

pub use errors::CliError;

//! Simulator and cryptanalysis harness for SRP, an EPC Class-1 Gen-2 RFID
//! mutual-authentication protocol.
//!
//! The crate has four layers:
//!
//! * [`word`] / [`prng`] / [`rng`] — the 16-bit word algebra, the registry
//!   of deterministic PRNG and hash functions, and seeded randomness.
//! * [`protocol`] — honest tag, reader and back-end server, with the full
//!   five-step authentication round and the server's old/new key records.
//! * [`attacks`] — `EPC_s` recovery by 16-bit exhaustive search, tag
//!   impersonation, and reader impersonation with permanent
//!   desynchronization.
//! * [`games`] — the UPriv oracle model (Execute/Send/Corrupt/Test), the
//!   untraceability and backward-untraceability distinguishers, and Monte
//!   Carlo advantage estimation.

pub mod attacks;
pub mod error;
pub mod games;
pub mod prng;
pub mod protocol;
pub mod rng;
pub mod word;

pub use error::{AttackError, ConfigError, GameError, ProtocolError, RejectReason};
pub use prng::{
    default_hash, default_prng, hash_v, lookup_hash, lookup_prng, prng16, HashFunction,
    PrngFunction, DEFAULT_HASH_NAME, DEFAULT_PRNG_NAME,
};
pub use rng::{derive_seed, RandomSource};
pub use word::{xor16, Word16};

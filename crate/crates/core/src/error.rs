use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown PRNG {name:?}; registered: {known:?}")]
    UnknownPrng { name: String, known: Vec<String> },
    #[error("unknown hash {name:?}; registered: {known:?}")]
    UnknownHash { name: String, known: Vec<String> },
}

/// Why the back-end server refused a session. Each reason is observable in
/// the transcript so attacks can be checked for the exact failure they cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// No stored RID hashed to the received V.
    ReaderAuthFailed,
    /// Received C was nonzero but matched no record's C_old or C_new.
    IndexMiss,
    /// The keyed M1 check failed (c = 0 scan exhausted, or indexed key mismatch).
    M1Mismatch,
    /// Recovered N_T failed the E consistency check.
    EMismatch,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RejectReason::ReaderAuthFailed => "reader-auth-failed",
            RejectReason::IndexMiss => "index-miss",
            RejectReason::M1Mismatch => "m1-mismatch",
            RejectReason::EMismatch => "e-mismatch",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("server rejected session: {0}")]
    Rejected(RejectReason),
    #[error("tag has no pending session to finalize")]
    NoPendingSession,
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("eavesdropped transcript is missing {0} (insufficient capture)")]
    InsufficientCapture(&'static str),
    #[error("candidate set became empty; the true EPC_s was not in the input set")]
    CandidatesExhausted,
    #[error("disambiguation did not converge within {0} harvest rounds")]
    DisambiguationDiverged(u32),
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("Test query issued twice in one game")]
    TestRepeated,
    #[error("oracle {oracle} budget exceeded (limit {limit})")]
    BudgetExceeded { oracle: &'static str, limit: u32 },
    #[error("adversary finished without issuing a Test query")]
    NoTestQuery,
    #[error("no such tag index {0}")]
    NoSuchTag(usize),
    #[error("protocol-order rejection: {0}")]
    Protocol(#[from] ProtocolError),
}

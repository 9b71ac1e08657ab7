//! The honest SRP entities and the five-step mutual-authentication round.
//!
//! One round: the reader challenges with `N_R`; the tag answers
//! `(C, M1, D, E)`; the reader appends `N_R` and `V = H(RID ^ N_R)` and
//! forwards to the back-end server; the server authenticates the reader,
//! locates the tag record (exhaustive scan when `C = 0`, indexed lookup
//! otherwise), recovers `N_T`, answers `(M2, Info)`, and rolls its stored
//! keys; the tag verifies `M2` against its access key and rolls its own
//! secrets. The server keeps an old and a new generation of every secret so
//! a tag that missed the final message can still authenticate one round
//! behind.

use serde::{Deserialize, Serialize};

use crate::error::{ProtocolError, RejectReason};
use crate::prng::{hash_v, prng16, HashFunction, PrngFunction};
use crate::rng::RandomSource;
use crate::word::Word16;

/// Which stored generation of a record matched the tag: `Old` means the tag
/// is one round behind the server (its last `M2` was lost).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchFlag {
    Old,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingSession {
    n_t: Word16,
    n_r: Word16,
}

/// A tag's mutable secrets plus its permanent `EPC_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagState {
    tag_id: u32,
    epc_s: Word16,
    k: Word16,
    p: Word16,
    c: Word16,
    pending: Option<PendingSession>,
    rounds_completed: u64,
}

/// Snapshot of a tag's stored values, as read (or written) by physical access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSecrets {
    pub k: Word16,
    pub p: Word16,
    pub c: Word16,
    pub epc_s: Word16,
}

impl TagState {
    pub fn tag_id(&self) -> u32 {
        self.tag_id
    }

    pub fn epc_s(&self) -> Word16 {
        self.epc_s
    }

    pub fn k(&self) -> Word16 {
        self.k
    }

    pub fn p(&self) -> Word16 {
        self.p
    }

    pub fn c(&self) -> Word16 {
        self.c
    }

    pub fn rounds_completed(&self) -> u64 {
        self.rounds_completed
    }

    /// The (N_T, N_R) pair retained since the last [`tag_respond`], if any.
    pub fn pending(&self) -> Option<(Word16, Word16)> {
        self.pending.map(|p| (p.n_t, p.n_r))
    }

    /// Drops the retained nonces of an unfinished session.
    pub fn abandon_pending(&mut self) {
        self.pending = None;
    }

    pub fn dump_secrets(&self) -> TagSecrets {
        TagSecrets {
            k: self.k,
            p: self.p,
            c: self.c,
            epc_s: self.epc_s,
        }
    }

    /// Overwrites the tag's stored values (physical-access tampering).
    pub fn overwrite_secrets(&mut self, s: TagSecrets) {
        self.k = s.k;
        self.p = s.p;
        self.c = s.c;
        self.epc_s = s.epc_s;
    }
}

/// One per-tag row of the back-end database, holding both key generations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerRecord {
    pub k_old: Word16,
    pub p_old: Word16,
    pub c_old: Word16,
    pub k_new: Word16,
    pub p_new: Word16,
    pub c_new: Word16,
    pub epc_s: Word16,
    pub rid: Word16,
    pub data: Word16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerDb {
    pub records: Vec<ServerRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReaderState {
    pub rid: Word16,
}

/// The tag's step-2 answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagResponse {
    pub c: Word16,
    pub m1: Word16,
    pub d: Word16,
    pub e: Word16,
}

/// The step-3 reader-to-server tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerBoundMsg {
    pub c: Word16,
    pub m1: Word16,
    pub d: Word16,
    pub e: Word16,
    pub n_r: Word16,
    pub v: Word16,
}

/// The server's step-4 answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerResponse {
    pub m2: Word16,
    pub info: Word16,
}

/// Successful server-side authentication, before any state update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthOutcome {
    pub response: ServerResponse,
    pub record: usize,
    pub flag: MatchFlag,
    pub n_t: Word16,
    /// More than one record matched; chance index or key collision.
    pub ambiguous: bool,
}

/// Provisions `n_tags` tags and the matching database rows. Every tag gets
/// independent random `K_0`, `P_0`, `C_0`, `EPC_s`; the database row starts
/// with both generations equal to the initial values.
pub fn provision(
    rng: &mut RandomSource,
    n_tags: usize,
) -> (Vec<TagState>, ServerDb, ReaderState) {
    assert!(n_tags >= 1);
    let rid = rng.next_word16();
    let mut tags = Vec::with_capacity(n_tags);
    let mut records = Vec::with_capacity(n_tags);
    for tag_id in 0..n_tags as u32 {
        let epc_s = rng.next_word16();
        let k0 = rng.next_word16();
        let p0 = rng.next_word16();
        let c0 = rng.next_word16();
        let data = rng.next_word16();
        tags.push(TagState {
            tag_id,
            epc_s,
            k: k0,
            p: p0,
            c: c0,
            pending: None,
            rounds_completed: 0,
        });
        records.push(ServerRecord {
            k_old: k0,
            p_old: p0,
            c_old: c0,
            k_new: k0,
            p_new: p0,
            c_new: c0,
            epc_s,
            rid,
            data,
        });
    }
    (tags, ServerDb { records }, ReaderState { rid })
}

/// Step 1: the reader draws a fresh challenge.
pub fn reader_challenge(rng: &mut RandomSource) -> Word16 {
    rng.next_word16()
}

/// Step 2: the tag draws `N_T` and answers. The tag retains `(N_T, N_R)` for
/// step-5 verification but does not touch its secrets yet.
pub fn tag_respond(
    tag: &mut TagState,
    n_r: Word16,
    rng: &mut RandomSource,
    f: &PrngFunction,
) -> TagResponse {
    let n_t = rng.next_word16();
    let resp = TagResponse {
        c: tag.c,
        m1: prng16(f, tag.epc_s ^ n_r) ^ tag.k,
        d: n_t ^ tag.k,
        e: n_t ^ prng16(f, tag.c ^ tag.k),
    };
    tag.pending = Some(PendingSession { n_t, n_r });
    resp
}

/// Step 3: the reader relays the tag fields untouched and appends `N_R` and
/// `V = H(RID ^ N_R)`. The reader validates nothing.
pub fn reader_forward(
    reader: &ReaderState,
    resp: &TagResponse,
    n_r: Word16,
    h: &HashFunction,
) -> ServerBoundMsg {
    ServerBoundMsg {
        c: resp.c,
        m1: resp.m1,
        d: resp.d,
        e: resp.e,
        n_r,
        v: hash_v(h, reader.rid, n_r),
    }
}

/// Step 4 (a)-(c): reader check, record lookup, `N_T` recovery, and the
/// `(M2, Info)` answer. Mutates nothing; apply [`server_update`] afterwards.
///
/// When the received `C` matches both generations of a record (true right
/// after provisioning, or on a chance index collision) the new generation
/// wins. Matching old here would leave the server's keys behind the tag's
/// after the round completes, wedging the next session.
pub fn server_authenticate(
    db: &ServerDb,
    msg: &ServerBoundMsg,
    f: &PrngFunction,
    h: &HashFunction,
) -> Result<AuthOutcome, RejectReason> {
    if !db
        .records
        .iter()
        .any(|r| hash_v(h, r.rid, msg.n_r) == msg.v)
    {
        return Err(RejectReason::ReaderAuthFailed);
    }

    let mut matches: Vec<(usize, MatchFlag)> = Vec::new();
    if msg.c.is_zero() {
        // First access (or a key update that landed on zero): exhaustive scan.
        for (i, r) in db.records.iter().enumerate() {
            let target = prng16(f, r.epc_s ^ msg.n_r);
            if msg.m1 ^ r.k_new == target {
                matches.push((i, MatchFlag::New));
            } else if msg.m1 ^ r.k_old == target {
                matches.push((i, MatchFlag::Old));
            }
        }
        if matches.is_empty() {
            return Err(RejectReason::M1Mismatch);
        }
    } else {
        for (i, r) in db.records.iter().enumerate() {
            if msg.c == r.c_new {
                matches.push((i, MatchFlag::New));
            } else if msg.c == r.c_old {
                matches.push((i, MatchFlag::Old));
            }
        }
        if matches.is_empty() {
            return Err(RejectReason::IndexMiss);
        }
    }

    let ambiguous = matches.len() > 1;
    let (idx, flag) = *matches
        .iter()
        .find(|(_, fl)| *fl == MatchFlag::New)
        .unwrap_or(&matches[0]);
    let r = &db.records[idx];
    let (k_x, p_x, c_x) = match flag {
        MatchFlag::Old => (r.k_old, r.p_old, r.c_old),
        MatchFlag::New => (r.k_new, r.p_new, r.c_new),
    };

    if prng16(f, r.epc_s ^ msg.n_r) ^ k_x != msg.m1 {
        return Err(RejectReason::M1Mismatch);
    }
    let n_t = msg.d ^ k_x;
    if n_t ^ prng16(f, c_x ^ k_x) != msg.e {
        return Err(RejectReason::EMismatch);
    }

    Ok(AuthOutcome {
        response: ServerResponse {
            m2: prng16(f, r.epc_s ^ n_t) ^ p_x,
            info: r.data ^ r.rid,
        },
        record: idx,
        flag,
        n_t,
        ambiguous,
    })
}

/// Step 4 (d): roll the matched record. A `New` match shifts both key
/// generations; an `Old` match only refreshes `C_new`.
pub fn server_update(
    db: &mut ServerDb,
    record: usize,
    flag: MatchFlag,
    n_t: Word16,
    n_r: Word16,
    f: &PrngFunction,
) {
    let r = &mut db.records[record];
    if flag == MatchFlag::New {
        r.k_old = r.k_new;
        r.k_new = prng16(f, r.k_new);
        r.p_old = r.p_new;
        r.p_new = prng16(f, r.p_new);
        r.c_old = r.c_new;
    }
    r.c_new = prng16(f, n_t ^ n_r);
}

/// Step 5: the tag checks `M2 ^ P = PRNG(EPC_s ^ N_T)` and on success rolls
/// its secrets. Rejection leaves the state untouched; either way the pending
/// nonces are cleared.
pub fn tag_finalize(
    tag: &mut TagState,
    m2: Word16,
    f: &PrngFunction,
) -> Result<bool, ProtocolError> {
    let PendingSession { n_t, n_r } = tag.pending.take().ok_or(ProtocolError::NoPendingSession)?;
    if m2 ^ tag.p != prng16(f, tag.epc_s ^ n_t) {
        return Ok(false);
    }
    tag.k = prng16(f, tag.k);
    tag.p = prng16(f, tag.p);
    tag.c = prng16(f, n_t ^ n_r);
    tag.rounds_completed += 1;
    Ok(true)
}

// ---------------------------------------------------------------------------
// Transcripts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "reader->tag")]
    ReaderToTag,
    #[serde(rename = "tag->reader")]
    TagToReader,
    #[serde(rename = "reader->server")]
    ReaderToServer,
    #[serde(rename = "server->reader")]
    ServerToReader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Challenge { n_r: Word16 },
    TagResponse(TagResponse),
    ServerBound(ServerBoundMsg),
    ServerResponse(ServerResponse),
    DeliverM2 { m2: Word16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Verdict {
    Completed,
    ServerRejected { reason: RejectReason },
    TagRejected,
    Dropped,
}

/// One message of a session, in protocol order. `verdict` marks terminal
/// events only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub step: u8,
    pub direction: Direction,
    pub payload: Payload,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

/// Ordered record of one session as seen on the wire. An incomplete session
/// has a truncated suffix, never a gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub round: u64,
    pub entries: Vec<TranscriptEntry>,
    pub completed: bool,
}

impl Transcript {
    pub fn n_r(&self) -> Option<Word16> {
        self.entries.iter().find_map(|e| match e.payload {
            Payload::Challenge { n_r } => Some(n_r),
            _ => None,
        })
    }

    pub fn tag_response(&self) -> Option<TagResponse> {
        self.entries.iter().find_map(|e| match e.payload {
            Payload::TagResponse(r) => Some(r),
            _ => None,
        })
    }

    pub fn m2(&self) -> Option<Word16> {
        self.entries.iter().find_map(|e| match e.payload {
            Payload::ServerResponse(r) => Some(r.m2),
            _ => None,
        })
    }
}

/// Runs steps 1-5 against honest entities. `drop_after = Some(n)` loses the
/// message leaving step `n`, modelling interference or plain message loss;
/// `drop_after = Some(4)` is the classic lost-`M2` case where the server has
/// already rolled its keys but the tag never will.
pub fn run_honest_session(
    tag: &mut TagState,
    reader: &ReaderState,
    db: &mut ServerDb,
    rng: &mut RandomSource,
    f: &PrngFunction,
    h: &HashFunction,
    drop_after: Option<u8>,
) -> Transcript {
    let mut t = Transcript {
        round: tag.rounds_completed + 1,
        entries: Vec::with_capacity(5),
        completed: false,
    };
    let dropped = |step: u8| drop_after == Some(step);
    let push = |t: &mut Transcript, step, direction, payload, verdict| {
        t.entries.push(TranscriptEntry {
            step,
            direction,
            payload,
            verdict,
        });
    };

    let n_r = reader_challenge(rng);
    push(
        &mut t,
        1,
        Direction::ReaderToTag,
        Payload::Challenge { n_r },
        dropped(1).then_some(Verdict::Dropped),
    );
    if dropped(1) {
        return t;
    }

    let resp = tag_respond(tag, n_r, rng, f);
    push(
        &mut t,
        2,
        Direction::TagToReader,
        Payload::TagResponse(resp),
        dropped(2).then_some(Verdict::Dropped),
    );
    if dropped(2) {
        return t;
    }

    let fwd = reader_forward(reader, &resp, n_r, h);
    push(
        &mut t,
        3,
        Direction::ReaderToServer,
        Payload::ServerBound(fwd),
        dropped(3).then_some(Verdict::Dropped),
    );
    if dropped(3) {
        return t;
    }

    let outcome = match server_authenticate(db, &fwd, f, h) {
        Ok(o) => o,
        Err(reason) => {
            push(
                &mut t,
                4,
                Direction::ServerToReader,
                Payload::ServerResponse(ServerResponse {
                    m2: Word16::ZERO,
                    info: Word16::ZERO,
                }),
                Some(Verdict::ServerRejected { reason }),
            );
            return t;
        }
    };
    server_update(db, outcome.record, outcome.flag, outcome.n_t, n_r, f);
    push(
        &mut t,
        4,
        Direction::ServerToReader,
        Payload::ServerResponse(outcome.response),
        dropped(4).then_some(Verdict::Dropped),
    );
    if dropped(4) {
        return t;
    }

    let m2 = outcome.response.m2;
    let accepted = tag_finalize(tag, m2, f).expect("pending session was just created");
    push(
        &mut t,
        5,
        Direction::ReaderToTag,
        Payload::DeliverM2 { m2 },
        Some(if accepted {
            Verdict::Completed
        } else {
            Verdict::TagRejected
        }),
    );
    t.completed = accepted;
    t
}

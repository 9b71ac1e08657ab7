//! The three active attacks: `EPC_s` recovery by exhaustive 16-bit search,
//! tag impersonation against the server, and reader impersonation that
//! permanently desynchronizes tag and server.
//!
//! All of them hinge on the same weakness: `EPC_s` is a 16-bit constant, so
//! XORing the `M1` values of two abandoned sessions cancels the key and
//! leaves an equation a full sweep of the 16-bit space solves off-line.

use serde::{Deserialize, Serialize};

use crate::error::{AttackError, RejectReason};
use crate::prng::{prng16, HashFunction, PrngFunction};
use crate::protocol::{
    reader_challenge, reader_forward, run_honest_session, server_authenticate, server_update,
    tag_respond, ReaderState, ServerDb, TagResponse, TagSecrets, TagState, Transcript,
};
use crate::rng::RandomSource;
use crate::word::Word16;

/// Two challenge/M1 pairs captured from abandoned sessions with one tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarvestedPair {
    pub n_r1: Word16,
    pub m1_1: Word16,
    pub n_r2: Word16,
    pub m1_2: Word16,
}

impl HarvestedPair {
    /// `M1_1 ^ M1_2`: the key cancels, leaving only the PRNG terms.
    pub fn beta(&self) -> Word16 {
        self.m1_1 ^ self.m1_2
    }
}

/// Outcome of the exhaustive search. The true `EPC_s` is always a member of
/// `candidates`; ties are possible and resolved by [`disambiguate_epcs`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpcsRecoveryResult {
    pub candidates: Vec<Word16>,
    pub prng_evaluations: u64,
    pub sessions_used: u64,
}

/// Everything an eavesdropped session plus `EPC_s` reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StolenCredentials {
    pub epc_s: Word16,
    pub k: Word16,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Word16>,
    pub c_next: Word16,
    pub n_t_recovered: Word16,
}

/// Opens two sessions with the tag, each abandoned before `M2`, so the tag's
/// key is identical in both. The tag's secrets are untouched; only its
/// discarded pending nonces ever existed.
pub fn harvest_m1_pair(
    tag: &mut TagState,
    rng: &mut RandomSource,
    f: &PrngFunction,
) -> HarvestedPair {
    let n_r1 = rng.next_word16();
    let mut n_r2 = rng.next_word16();
    while n_r2 == n_r1 {
        // Equal challenges give beta = 0 and no information.
        n_r2 = rng.next_word16();
    }
    let r1 = tag_respond(tag, n_r1, rng, f);
    let r2 = tag_respond(tag, n_r2, rng, f);
    tag.abandon_pending();
    HarvestedPair {
        n_r1,
        m1_1: r1.m1,
        n_r2,
        m1_2: r2.m1,
    }
}

/// Sweeps all 2^16 candidate strings `l` and keeps those with
/// `PRNG(l ^ N_R1) ^ PRNG(l ^ N_R2) = beta`. At most `2 * 2^16` PRNG
/// evaluations.
pub fn recover_epcs(
    beta: Word16,
    n_r1: Word16,
    n_r2: Word16,
    f: &PrngFunction,
) -> EpcsRecoveryResult {
    assert_ne!(n_r1, n_r2, "degenerate challenge pair");
    let mut candidates = Vec::new();
    let mut evals = 0u64;
    for l in 0..=u16::MAX {
        let l = Word16(l);
        let alpha = prng16(f, l ^ n_r1) ^ prng16(f, l ^ n_r2);
        evals += 2;
        if alpha == beta {
            candidates.push(l);
        }
    }
    EpcsRecoveryResult {
        candidates,
        prng_evaluations: evals,
        sessions_used: 2,
    }
}

const DISAMBIGUATION_CAP: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisambiguationOutcome {
    pub epc_s: Word16,
    pub extra_sessions: u64,
    pub prng_evaluations: u64,
}

/// Narrows a candidate set to the single true `EPC_s` by harvesting fresh
/// challenge pairs and keeping only candidates consistent with each new
/// `beta`. Survivors other than the true value drop out geometrically.
pub fn disambiguate_epcs(
    candidates: &[Word16],
    tag: &mut TagState,
    rng: &mut RandomSource,
    f: &PrngFunction,
) -> Result<DisambiguationOutcome, AttackError> {
    let mut live: Vec<Word16> = candidates.to_vec();
    let mut extra_sessions = 0u64;
    let mut evals = 0u64;
    for _ in 0..DISAMBIGUATION_CAP {
        match live.len() {
            0 => return Err(AttackError::CandidatesExhausted),
            1 => {
                return Ok(DisambiguationOutcome {
                    epc_s: live[0],
                    extra_sessions,
                    prng_evaluations: evals,
                })
            }
            _ => {}
        }
        let pair = harvest_m1_pair(tag, rng, f);
        extra_sessions += 2;
        let beta = pair.beta();
        live.retain(|&l| {
            evals += 2;
            prng16(f, l ^ pair.n_r1) ^ prng16(f, l ^ pair.n_r2) == beta
        });
    }
    if live.len() == 1 {
        Ok(DisambiguationOutcome {
            epc_s: live[0],
            extra_sessions,
            prng_evaluations: evals,
        })
    } else if live.is_empty() {
        Err(AttackError::CandidatesExhausted)
    } else {
        Err(AttackError::DisambiguationDiverged(DISAMBIGUATION_CAP))
    }
}

/// Reconstructs the current key material from one completed eavesdropped
/// session. The session advanced both parties, so the credentials that match
/// the server's new generation are one PRNG step ahead of the transcript's.
pub fn credentials_from_transcript(
    epc_s: Word16,
    eavesdropped: &Transcript,
    f: &PrngFunction,
) -> Result<StolenCredentials, AttackError> {
    let n_r = eavesdropped
        .n_r()
        .ok_or(AttackError::InsufficientCapture("N_R"))?;
    let resp = eavesdropped
        .tag_response()
        .ok_or(AttackError::InsufficientCapture("tag response"))?;
    let k_i = resp.m1 ^ prng16(f, epc_s ^ n_r);
    let n_t = resp.d ^ k_i;
    let p = eavesdropped.m2().map(|m2| m2 ^ prng16(f, epc_s ^ n_t));
    Ok(StolenCredentials {
        epc_s,
        k: k_i,
        p,
        c_next: prng16(f, n_t ^ n_r),
        n_t_recovered: n_t,
    })
}

/// Answers a fresh reader challenge with a forged, fully consistent tag
/// response built from eavesdropped material. Returns whether the server
/// authenticated the forgery (and rolled its record as it would for a tag).
pub fn impersonate_tag(
    epc_s: Word16,
    eavesdropped: &Transcript,
    db: &mut ServerDb,
    reader: &ReaderState,
    rng: &mut RandomSource,
    f: &PrngFunction,
    h: &HashFunction,
) -> Result<bool, AttackError> {
    let creds = credentials_from_transcript(epc_s, eavesdropped, f)?;
    let k_next = prng16(f, creds.k);
    let n_r4 = reader_challenge(rng);
    let n_t_adv = rng.next_word16();
    let forged = TagResponse {
        c: creds.c_next,
        m1: prng16(f, epc_s ^ n_r4) ^ k_next,
        d: n_t_adv ^ k_next,
        e: n_t_adv ^ prng16(f, creds.c_next ^ k_next),
    };
    let fwd = reader_forward(reader, &forged, n_r4, h);
    match server_authenticate(db, &fwd, f, h) {
        Ok(out) => {
            server_update(db, out.record, out.flag, out.n_t, n_r4, f);
            Ok(true)
        }
        Err(_) => Ok(false),
    }
}

/// Summary of one server record's key material (for end-state reporting).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSnapshot {
    pub k_old: Word16,
    pub p_old: Word16,
    pub c_old: Word16,
    pub k_new: Word16,
    pub p_new: Word16,
    pub c_new: Word16,
}

impl RecordSnapshot {
    pub fn of(r: &crate::protocol::ServerRecord) -> Self {
        RecordSnapshot {
            k_old: r.k_old,
            p_old: r.p_old,
            c_old: r.c_old,
            k_new: r.k_new,
            p_new: r.p_new,
            c_new: r.c_new,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesyncReport {
    pub recovered: StolenCredentials,
    pub tag_accepted_forged_m2: bool,
    pub tag_end: TagSecrets,
    pub server_end: RecordSnapshot,
    /// Reject reasons of the follow-up honest sessions; all must be present
    /// (i.e. every follow-up failed) for the desync to be permanent.
    pub followup_rejections: Vec<RejectReason>,
    pub followup_attempts: u64,
}

impl DesyncReport {
    pub fn permanently_desynchronized(&self) -> bool {
        self.tag_accepted_forged_m2
            && self.followup_rejections.len() as u64 == self.followup_attempts
    }
}

/// Forges a reader: recovers `K_i` and `P_i` from a completed eavesdropped
/// session, advances both one PRNG step, runs one session with the tag and
/// answers its response with a forged `M2`. The tag accepts and rolls two
/// generations past the server's record; every later honest session fails.
#[allow(clippy::too_many_arguments)]
pub fn impersonate_reader_and_desync(
    epc_s: Word16,
    eavesdropped: &Transcript,
    tag: &mut TagState,
    reader: &ReaderState,
    db: &mut ServerDb,
    rng: &mut RandomSource,
    f: &PrngFunction,
    h: &HashFunction,
    followup_attempts: u64,
) -> Result<DesyncReport, AttackError> {
    let creds = credentials_from_transcript(epc_s, eavesdropped, f)?;
    let p_i = creds.p.ok_or(AttackError::InsufficientCapture("M2"))?;
    let k_next = prng16(f, creds.k);
    let p_next = prng16(f, p_i);

    // Forged reader session: challenge, read the response with the stolen
    // key, answer with a forged M2 built from the advanced access key.
    let n_r_adv = rng.next_word16();
    let resp = tag_respond(tag, n_r_adv, rng, f);
    let n_t = resp.d ^ k_next;
    let forged_m2 = prng16(f, epc_s ^ n_t) ^ p_next;
    let accepted = tag_finalize_forged(tag, forged_m2, f);

    let mut rejections = Vec::new();
    for _ in 0..followup_attempts {
        let t = run_honest_session(tag, reader, db, rng, f, h, None);
        if let Some(v) = t.entries.iter().find_map(|e| match e.verdict {
            Some(crate::protocol::Verdict::ServerRejected { reason }) => Some(reason),
            _ => None,
        }) {
            rejections.push(v);
        } else if !t.completed {
            // Tag-side rejection; count it as a failed session too. Does not
            // occur on the honest path but keeps the report total.
            rejections.push(RejectReason::M1Mismatch);
        }
    }

    Ok(DesyncReport {
        recovered: StolenCredentials {
            p: Some(p_i),
            ..creds
        },
        tag_accepted_forged_m2: accepted,
        tag_end: tag.dump_secrets(),
        server_end: RecordSnapshot::of(&db.records[tag.tag_id() as usize]),
        followup_rejections: rejections,
        followup_attempts,
    })
}

fn tag_finalize_forged(tag: &mut TagState, m2: Word16, f: &PrngFunction) -> bool {
    crate::protocol::tag_finalize(tag, m2, f).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::{default_hash, default_prng};
    use crate::protocol::provision;

    fn setup(seed: u64) -> (Vec<TagState>, ServerDb, ReaderState, RandomSource) {
        let mut rng = RandomSource::from_seed(seed);
        let (tags, db, reader) = provision(&mut rng, 1);
        (tags, db, reader, rng)
    }

    #[test]
    fn harvest_leaves_the_tag_bit_identical() {
        let f = default_prng();
        let (mut tags, _, _, mut rng) = setup(40);
        let before = tags[0].clone();
        let pair = harvest_m1_pair(&mut tags[0], &mut rng, &f);
        assert_eq!(tags[0], before);
        assert_ne!(pair.n_r1, pair.n_r2);
        // The key cancels in beta.
        let epc = tags[0].epc_s();
        assert_eq!(
            pair.beta(),
            prng16(&f, epc ^ pair.n_r1) ^ prng16(&f, epc ^ pair.n_r2)
        );
    }

    #[test]
    fn forced_equal_challenges_give_zero_beta() {
        let f = default_prng();
        let (mut tags, _, _, mut rng) = setup(41);
        let n_r = Word16(0x7777);
        let r1 = tag_respond(&mut tags[0], n_r, &mut rng, &f);
        let r2 = tag_respond(&mut tags[0], n_r, &mut rng, &f);
        assert_eq!(r1.m1 ^ r2.m1, Word16::ZERO);
    }

    #[test]
    fn recovery_always_contains_the_true_epcs() {
        let f = default_prng();
        for seed in 0..50 {
            let (mut tags, _, _, mut rng) = setup(1000 + seed);
            let epc = tags[0].epc_s();
            let pair = harvest_m1_pair(&mut tags[0], &mut rng, &f);
            let res = recover_epcs(pair.beta(), pair.n_r1, pair.n_r2, &f);
            assert!(res.candidates.contains(&epc), "seed {seed}");
            assert!(res.prng_evaluations <= 2 * (1 << 16));
        }
    }

    // The map l -> PRNG(l^a) ^ PRNG(l^b) is symmetric under l -> l^a^b, so
    // candidate sets always have even size and a single pair never pins the
    // value. Counts frozen from the scratch enumeration.
    #[test]
    fn candidate_census_matches_scratch_enumeration() {
        let f = default_prng();
        let cases = [
            (0x44CB, 0x204F, 0x8298, 2usize),
            (0x3C5F, 0xFDA9, 0xE623, 6),
            (0xF1CA, 0xC25C, 0x6B7F, 2),
            (0x300E, 0xF9C8, 0x0E83, 2),
        ];
        for (n_r1, n_r2, epc, expected) in cases {
            let (n_r1, n_r2, epc) = (Word16(n_r1), Word16(n_r2), Word16(epc));
            let beta = prng16(&f, epc ^ n_r1) ^ prng16(&f, epc ^ n_r2);
            let res = recover_epcs(beta, n_r1, n_r2, &f);
            assert_eq!(res.candidates.len(), expected);
            assert!(res.candidates.contains(&epc));
            assert!(res.candidates.contains(&(epc ^ n_r1 ^ n_r2)));
        }
    }

    #[test]
    fn disambiguation_terminates_with_the_exact_value() {
        let f = default_prng();
        for seed in 0..25 {
            let (mut tags, _, _, mut rng) = setup(2000 + seed);
            let epc = tags[0].epc_s();
            let pair = harvest_m1_pair(&mut tags[0], &mut rng, &f);
            let res = recover_epcs(pair.beta(), pair.n_r1, pair.n_r2, &f);
            let out = disambiguate_epcs(&res.candidates, &mut tags[0], &mut rng, &f).unwrap();
            assert_eq!(out.epc_s, epc, "seed {seed}");
        }
    }

    #[test]
    fn disambiguation_of_a_singleton_is_free() {
        let f = default_prng();
        let (mut tags, _, _, mut rng) = setup(42);
        let out = disambiguate_epcs(&[Word16(0x1234)], &mut tags[0], &mut rng, &f).unwrap();
        assert_eq!(out.epc_s, Word16(0x1234));
        assert_eq!(out.extra_sessions, 0);
    }

    #[test]
    fn poisoned_candidate_set_surfaces_as_error() {
        let f = default_prng();
        let (mut tags, _, _, mut rng) = setup(43);
        let wrong = Word16(tags[0].epc_s().get() ^ 0x0001);
        let err = disambiguate_epcs(&[wrong], &mut tags[0], &mut rng, &f);
        // A singleton returns unchanged; inject two wrong values instead.
        assert!(err.is_ok());
        let wrong2 = Word16(wrong.get() ^ 0x8000);
        let err = disambiguate_epcs(&[wrong, wrong2], &mut tags[0], &mut rng, &f);
        assert!(matches!(err, Err(AttackError::CandidatesExhausted)));
    }

    #[test]
    fn tag_impersonation_succeeds_with_correct_epcs() {
        let f = default_prng();
        let h = default_hash();
        for seed in 0..50 {
            let (mut tags, mut db, reader, mut rng) = setup(3000 + seed);
            let k_before = tags[0].k();
            let t = run_honest_session(&mut tags[0], &reader, &mut db, &mut rng, &f, &h, None);
            assert!(t.completed);
            let creds = credentials_from_transcript(tags[0].epc_s(), &t, &f).unwrap();
            // White-box: the derived key is the tag's pre-update key.
            assert_eq!(creds.k, k_before);
            let ok = impersonate_tag(
                tags[0].epc_s(),
                &t,
                &mut db,
                &reader,
                &mut rng,
                &f,
                &h,
            )
            .unwrap();
            assert!(ok, "seed {seed}");
        }
    }

    #[test]
    fn tag_impersonation_fails_with_corrupted_epcs() {
        let f = default_prng();
        let h = default_hash();
        let (mut tags, mut db, reader, mut rng) = setup(44);
        let t = run_honest_session(&mut tags[0], &reader, &mut db, &mut rng, &f, &h, None);
        let bad_epc = tags[0].epc_s() ^ Word16(0x0400);
        let ok = impersonate_tag(bad_epc, &t, &mut db, &reader, &mut rng, &f, &h).unwrap();
        assert!(!ok);
    }

    #[test]
    fn desync_attack_end_states_follow_the_update_chain() {
        let f = default_prng();
        let h = default_hash();
        let (mut tags, mut db, reader, mut rng) = setup(45);
        let k_i = tags[0].k();
        let t = run_honest_session(&mut tags[0], &reader, &mut db, &mut rng, &f, &h, None);
        assert!(t.completed);
        let report = impersonate_reader_and_desync(
            tags[0].epc_s(),
            &t,
            &mut tags[0],
            &reader,
            &mut db,
            &mut rng,
            &f,
            &h,
            10,
        )
        .unwrap();
        assert!(report.tag_accepted_forged_m2);
        // Tag advanced two steps past the eavesdropped round; the record one.
        assert_eq!(report.tag_end.k, prng16(&f, prng16(&f, k_i)));
        assert_eq!(report.server_end.k_new, prng16(&f, k_i));
        assert_eq!(report.server_end.k_old, k_i);
        assert!(report.permanently_desynchronized());
    }

    #[test]
    fn forged_m2_with_stale_access_key_is_rejected() {
        let f = default_prng();
        let h = default_hash();
        let (mut tags, mut db, reader, mut rng) = setup(46);
        let t = run_honest_session(&mut tags[0], &reader, &mut db, &mut rng, &f, &h, None);
        let creds = credentials_from_transcript(tags[0].epc_s(), &t, &f).unwrap();
        let p_i = creds.p.unwrap();
        let k_next = prng16(&f, creds.k);
        let before = tags[0].clone();
        let n_r_adv = rng.next_word16();
        let resp = tag_respond(&mut tags[0], n_r_adv, &mut rng, &f);
        let n_t = resp.d ^ k_next;
        // Wrong generation: p_i instead of PRNG(p_i).
        let stale_m2 = prng16(&f, tags[0].epc_s() ^ n_t) ^ p_i;
        assert_eq!(crate::protocol::tag_finalize(&mut tags[0], stale_m2, &f), Ok(false));
        assert_eq!(tags[0].k(), before.k());
        assert_eq!(tags[0].p(), before.p());
        assert_eq!(tags[0].c(), before.c());
    }

    #[test]
    fn missing_m2_is_an_insufficient_capture_error() {
        let f = default_prng();
        let h = default_hash();
        let (mut tags, mut db, reader, mut rng) = setup(47);
        let t = run_honest_session(&mut tags[0], &reader, &mut db, &mut rng, &f, &h, Some(3));
        let err = impersonate_reader_and_desync(
            tags[0].epc_s(),
            &t,
            &mut tags[0],
            &reader,
            &mut db,
            &mut rng,
            &f,
            &h,
            1,
        );
        assert!(matches!(err, Err(AttackError::InsufficientCapture(_))));
    }
}

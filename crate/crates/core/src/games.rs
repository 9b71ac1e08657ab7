//! The UPriv indistinguishability game: Execute, Send, Corrupt and Test
//! oracles over a simulated tag population, plus the two concrete
//! distinguishers and a Monte Carlo advantage estimator.
//!
//! Adversary code touches entity state only through the oracle methods of
//! [`GameWorld`]; the hidden coin lives outside the adversary-visible
//! surface and is compared against the guess by the game runner alone.
//!
//! The backward-untraceability adversary needs a transcript recorded before
//! the corruption it exploits. A simulator cannot rewind, so the strategy
//! captures the challenge transcript first and reads the Corrupt dump
//! afterwards; only the permanent `EPC_s` is used from the dump, so the
//! information order of the original game is preserved exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, RejectReason};
use crate::prng::{prng16, HashFunction, PrngFunction};
use crate::protocol::{
    provision, reader_forward, run_honest_session, server_authenticate, server_update,
    tag_finalize, tag_respond, ReaderState, ServerDb, ServerResponse, TagResponse, TagSecrets,
    TagState, Transcript,
};
use crate::rng::{derive_seed, RandomSource};
use crate::word::Word16;

/// How an oracle call names a tag: by population index, or through the
/// anonymized handle issued by Test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagRef {
    Tag(usize),
    Challenge,
}

/// Per-oracle call caps. `None` means unlimited. Test is always exactly one.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBudget {
    pub execute: Option<u32>,
    pub send: Option<u32>,
    pub corrupt: Option<u32>,
}

/// Calls actually issued during one game.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleUsage {
    pub execute: u32,
    pub send: u32,
    pub corrupt: u32,
    pub test: u32,
}

/// Snapshot returned by the Corrupt oracle, plus what (if anything) was
/// written back into the tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptDump {
    pub k: Word16,
    pub p: Word16,
    pub c: Word16,
    pub epc_s: Word16,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overwrite: Option<TagSecrets>,
}

/// One game instance: honest entities, the transcript log, and the hidden
/// coin. All adversary access goes through the `oracle_*` methods.
pub struct GameWorld {
    tags: Vec<TagState>,
    reader: ReaderState,
    db: ServerDb,
    rng: RandomSource,
    f: PrngFunction,
    h: HashFunction,
    coin: Option<bool>,
    challenge_pair: Option<(usize, usize)>,
    budget: OracleBudget,
    usage: OracleUsage,
    transcripts: Vec<Transcript>,
}

impl GameWorld {
    pub fn new(
        seed: u64,
        n_tags: usize,
        f: PrngFunction,
        h: HashFunction,
        budget: OracleBudget,
    ) -> Self {
        let mut rng = RandomSource::from_seed(seed);
        let (tags, db, reader) = provision(&mut rng, n_tags);
        GameWorld {
            tags,
            reader,
            db,
            rng,
            f,
            h,
            coin: None,
            challenge_pair: None,
            budget,
            usage: OracleUsage::default(),
            transcripts: Vec::new(),
        }
    }

    pub fn usage(&self) -> OracleUsage {
        self.usage
    }

    fn charge(
        count: &mut u32,
        limit: Option<u32>,
        oracle: &'static str,
    ) -> Result<(), GameError> {
        if let Some(l) = limit {
            if *count >= l {
                return Err(GameError::BudgetExceeded { oracle, limit: l });
            }
        }
        *count += 1;
        Ok(())
    }

    fn resolve(&self, r: TagRef) -> Result<usize, GameError> {
        match r {
            TagRef::Tag(i) if i < self.tags.len() => Ok(i),
            TagRef::Tag(i) => Err(GameError::NoSuchTag(i)),
            TagRef::Challenge => {
                let (t0, t1) = self.challenge_pair.ok_or(GameError::NoTestQuery)?;
                Ok(if self.coin.unwrap() { t1 } else { t0 })
            }
        }
    }

    /// Execute query: a truthful end-to-end session, eavesdropped. The
    /// returned transcript is a snapshot the adversary may keep but not use
    /// to mutate anything.
    pub fn oracle_execute(&mut self, tag: TagRef) -> Result<Transcript, GameError> {
        Self::charge(&mut self.usage.execute, self.budget.execute, "execute")?;
        let idx = self.resolve(tag)?;
        let t = run_honest_session(
            &mut self.tags[idx],
            &self.reader,
            &mut self.db,
            &mut self.rng,
            &self.f,
            &self.h,
            None,
        );
        self.transcripts.push(t.clone());
        Ok(t)
    }

    /// Send query, reader-to-tag opening: delivers an adversary-chosen
    /// challenge and returns the tag's well-formed step-2 response. The
    /// session is left open; walking away models truncation.
    pub fn oracle_send_challenge(
        &mut self,
        tag: TagRef,
        n_r: Word16,
    ) -> Result<TagResponse, GameError> {
        Self::charge(&mut self.usage.send, self.budget.send, "send")?;
        let idx = self.resolve(tag)?;
        Ok(tag_respond(&mut self.tags[idx], n_r, &mut self.rng, &self.f))
    }

    /// Send query, reader-to-tag closing: delivers an adversary-chosen `M2`.
    /// Out of protocol order (no open session) is a visible rejection.
    pub fn oracle_send_m2(&mut self, tag: TagRef, m2: Word16) -> Result<bool, GameError> {
        Self::charge(&mut self.usage.send, self.budget.send, "send")?;
        let idx = self.resolve(tag)?;
        Ok(tag_finalize(&mut self.tags[idx], m2, &self.f)?)
    }

    /// Send query, tag-to-reader: delivers an adversary-chosen tag response
    /// to the honest reader, which relays it to the server as usual.
    pub fn oracle_send_tag_response(
        &mut self,
        resp: TagResponse,
        n_r: Word16,
    ) -> Result<Result<ServerResponse, RejectReason>, GameError> {
        Self::charge(&mut self.usage.send, self.budget.send, "send")?;
        let fwd = reader_forward(&self.reader, &resp, n_r, &self.h);
        match server_authenticate(&self.db, &fwd, &self.f, &self.h) {
            Ok(out) => {
                server_update(&mut self.db, out.record, out.flag, out.n_t, n_r, &self.f);
                Ok(Ok(out.response))
            }
            Err(reason) => Ok(Err(reason)),
        }
    }

    /// Corrupt query: physical access. Reads the tag's stored values and
    /// optionally overwrites them.
    pub fn oracle_corrupt(
        &mut self,
        tag: usize,
        replacement: Option<TagSecrets>,
    ) -> Result<CorruptDump, GameError> {
        Self::charge(&mut self.usage.corrupt, self.budget.corrupt, "corrupt")?;
        if tag >= self.tags.len() {
            return Err(GameError::NoSuchTag(tag));
        }
        let s = self.tags[tag].dump_secrets();
        if let Some(r) = replacement {
            self.tags[tag].overwrite_secrets(r);
        }
        Ok(CorruptDump {
            k: s.k,
            p: s.p,
            c: s.c,
            epc_s: s.epc_s,
            overwrite: replacement,
        })
    }

    /// Test query: flips the hidden coin and hands back an anonymized handle
    /// through which Execute and Send reach `T_b`.
    pub fn oracle_test(&mut self, t0: usize, t1: usize) -> Result<TagRef, GameError> {
        if self.coin.is_some() {
            return Err(GameError::TestRepeated);
        }
        if t0 >= self.tags.len() {
            return Err(GameError::NoSuchTag(t0));
        }
        if t1 >= self.tags.len() {
            return Err(GameError::NoSuchTag(t1));
        }
        self.usage.test += 1;
        self.coin = Some(self.rng.next_bool());
        self.challenge_pair = Some((t0, t1));
        Ok(TagRef::Challenge)
    }

    fn coin(&self) -> Option<bool> {
        self.coin
    }
}

/// A UPriv distinguisher: plays one game through the oracles and guesses the
/// coin. The declared budget is enforced on every oracle call.
pub trait AdversaryStrategy: Sync {
    fn name(&self) -> &'static str;

    fn budget(&self) -> OracleBudget {
        OracleBudget::default()
    }

    /// Plays learning, challenge and guess; returns the guessed bit.
    fn play(
        &self,
        world: &mut GameWorld,
        adv_rng: &mut RandomSource,
    ) -> Result<bool, GameError>;
}

/// Monte Carlo result of a UPriv game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub trials: u64,
    pub wins: u64,
    pub win_rate: f64,
    pub advantage: f64,
    pub ci95: f64,
    pub oracle_budget_used: OracleUsage,
}

/// Runs `trials` independent games, each with a fresh world seeded from the
/// master seed by trial index, and counts the games where the guess matched
/// the coin.
pub fn run_uprv_game(
    strategy: &dyn AdversaryStrategy,
    master_seed: u64,
    trials: u64,
    n_tags: usize,
) -> Result<AdvantageEstimate, GameError> {
    let f = crate::prng::default_prng();
    let h = crate::prng::default_hash();
    run_uprv_game_with(strategy, master_seed, trials, n_tags, f, h)
}

pub fn run_uprv_game_with(
    strategy: &dyn AdversaryStrategy,
    master_seed: u64,
    trials: u64,
    n_tags: usize,
    f: PrngFunction,
    h: HashFunction,
) -> Result<AdvantageEstimate, GameError> {
    assert!(trials >= 1);
    let outcomes: Result<Vec<(bool, OracleUsage)>, GameError> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut world = GameWorld::new(
                derive_seed(master_seed, 2 * i),
                n_tags,
                f,
                h,
                strategy.budget(),
            );
            let mut adv_rng = RandomSource::from_seed(derive_seed(master_seed, 2 * i + 1));
            let guess = strategy.play(&mut world, &mut adv_rng)?;
            let b = world.coin().ok_or(GameError::NoTestQuery)?;
            Ok((guess == b, world.usage()))
        })
        .collect();
    let outcomes = outcomes?;
    let wins = outcomes.iter().filter(|(w, _)| *w).count() as u64;
    let p = wins as f64 / trials as f64;
    Ok(AdvantageEstimate {
        trials,
        wins,
        win_rate: p,
        advantage: (p - 0.5).abs(),
        ci95: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
        oracle_budget_used: outcomes[0].1,
    })
}

/// The untraceability distinguisher: replay the same challenge before and
/// after Test. A tag that never finalized keeps the same key and `EPC_s`,
/// so its `M1` repeats exactly.
pub struct UntraceabilityAdversary;

impl AdversaryStrategy for UntraceabilityAdversary {
    fn name(&self) -> &'static str {
        "untraceability"
    }

    fn budget(&self) -> OracleBudget {
        OracleBudget {
            execute: Some(0),
            send: Some(2),
            corrupt: Some(0),
        }
    }

    fn play(
        &self,
        world: &mut GameWorld,
        adv_rng: &mut RandomSource,
    ) -> Result<bool, GameError> {
        // Learning: one abandoned session with T_0.
        let n_r_star = adv_rng.next_word16();
        let m1 = world.oracle_send_challenge(TagRef::Tag(0), n_r_star)?.m1;
        // Challenge: same challenge to T_b.
        let handle = world.oracle_test(0, 1)?;
        let m1_prime = world.oracle_send_challenge(handle, n_r_star)?.m1;
        // Guess 0 iff M1 repeated.
        Ok(m1_prime != m1)
    }
}

/// The backward-untraceability distinguisher: with `EPC_s` from a corrupted
/// tag, one eavesdropped session of `T_b` reveals whether it was that tag,
/// because `theta = PRNG(EPC_s ^ N_R) ^ M1` recovers the session key and
/// must satisfy `D ^ E = theta ^ PRNG(C ^ theta)`.
pub struct BackwardUntraceabilityAdversary;

impl AdversaryStrategy for BackwardUntraceabilityAdversary {
    fn name(&self) -> &'static str {
        "backward-untraceability"
    }

    fn budget(&self) -> OracleBudget {
        OracleBudget {
            execute: Some(1),
            send: Some(0),
            corrupt: Some(1),
        }
    }

    fn play(&self, world: &mut GameWorld, _adv_rng: &mut RandomSource) -> Result<bool, GameError> {
        let handle = world.oracle_test(0, 1)?;
        let transcript = world.oracle_execute(handle)?;
        // Capture precedes the dump; only the permanent EPC_s is read.
        let dump = world.oracle_corrupt(0, None)?;
        let n_r = transcript.n_r().expect("honest session");
        let resp = transcript.tag_response().expect("honest session");
        let theta = prng16(world_prng(world), dump.epc_s ^ n_r) ^ resp.m1;
        let lhs = resp.d ^ resp.e;
        let rhs = theta ^ prng16(world_prng(world), resp.c ^ theta);
        Ok(lhs != rhs)
    }
}

// The PRNG is public; the adversary evaluates it off-line.
fn world_prng(world: &GameWorld) -> &PrngFunction {
    &world.f
}

/// Baseline: flips its own coin. Its advantage is the null model.
pub struct RandomGuessAdversary;

impl AdversaryStrategy for RandomGuessAdversary {
    fn name(&self) -> &'static str {
        "random-guess"
    }

    fn play(
        &self,
        world: &mut GameWorld,
        adv_rng: &mut RandomSource,
    ) -> Result<bool, GameError> {
        world.oracle_test(0, 1)?;
        Ok(adv_rng.next_bool())
    }
}

/// Always answers 0; used to measure the coin itself.
pub struct ConstantGuessAdversary(pub bool);

impl AdversaryStrategy for ConstantGuessAdversary {
    fn name(&self) -> &'static str {
        "constant-guess"
    }

    fn play(&self, world: &mut GameWorld, _adv_rng: &mut RandomSource) -> Result<bool, GameError> {
        world.oracle_test(0, 1)?;
        Ok(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::{default_hash, default_prng};

    fn world(seed: u64) -> GameWorld {
        GameWorld::new(seed, 2, default_prng(), default_hash(), OracleBudget::default())
    }

    #[test]
    fn execute_completes_and_advances_keys() {
        let mut w = world(50);
        let k0 = w.tags[0].k();
        let t1 = w.oracle_execute(TagRef::Tag(0)).unwrap();
        let t2 = w.oracle_execute(TagRef::Tag(0)).unwrap();
        assert!(t1.completed && t2.completed);
        assert_ne!(w.tags[0].k(), k0);
        // Transcript algebra on the eavesdropped session.
        let f = default_prng();
        let resp = t1.tag_response().unwrap();
        assert_eq!(resp.d ^ resp.e, k0 ^ prng16(&f, resp.c ^ k0));
    }

    #[test]
    fn send_challenge_yields_well_formed_response() {
        let f = default_prng();
        let mut w = world(51);
        let (epc, k) = (w.tags[0].epc_s(), w.tags[0].k());
        let n_r = Word16(0x5151);
        let resp = w.oracle_send_challenge(TagRef::Tag(0), n_r).unwrap();
        assert_eq!(resp.m1, prng16(&f, epc ^ n_r) ^ k);
    }

    #[test]
    fn truncated_session_freezes_tag_keys() {
        let mut w = world(52);
        let k0 = w.tags[0].k();
        w.oracle_send_challenge(TagRef::Tag(0), Word16(0x0042)).unwrap();
        // Walk away: no M2 ever delivered.
        assert_eq!(w.tags[0].k(), k0);
    }

    #[test]
    fn forged_m2_via_send_oracle_is_accepted() {
        // The reader-impersonation forgery expressed purely in oracle calls.
        let f = default_prng();
        let mut w = world(53);
        let t = w.oracle_execute(TagRef::Tag(0)).unwrap();
        assert!(t.completed);
        let epc = w.tags[0].epc_s();
        let creds = crate::attacks::credentials_from_transcript(epc, &t, &f).unwrap();
        let k_next = prng16(&f, creds.k);
        let p_next = prng16(&f, creds.p.unwrap());
        let resp = w.oracle_send_challenge(TagRef::Tag(0), Word16(0x1001)).unwrap();
        let n_t = resp.d ^ k_next;
        let m2 = prng16(&f, epc ^ n_t) ^ p_next;
        assert!(w.oracle_send_m2(TagRef::Tag(0), m2).unwrap());
    }

    #[test]
    fn out_of_order_m2_is_a_visible_rejection() {
        let mut w = world(54);
        let err = w.oracle_send_m2(TagRef::Tag(0), Word16::ZERO);
        assert!(matches!(err, Err(GameError::Protocol(_))));
    }

    #[test]
    fn corrupt_is_stable_and_epcs_is_permanent() {
        let mut w = world(55);
        let provisioned_epc = w.tags[0].epc_s();
        for _ in 0..3 {
            w.oracle_execute(TagRef::Tag(0)).unwrap();
        }
        let d1 = w.oracle_corrupt(0, None).unwrap();
        let d2 = w.oracle_corrupt(0, None).unwrap();
        assert_eq!(d1.k, d2.k);
        assert_eq!(d1.epc_s, provisioned_epc);
    }

    #[test]
    fn corrupt_replacement_takes_effect() {
        let f = default_prng();
        let mut w = world(56);
        let epc = w.tags[0].epc_s();
        let replacement = TagSecrets {
            k: Word16(0x0DD0),
            p: Word16(0x1EE1),
            c: Word16(0x2FF2),
            epc_s: epc,
        };
        w.oracle_corrupt(0, Some(replacement)).unwrap();
        let resp = w.oracle_send_challenge(TagRef::Tag(0), Word16(0x0123)).unwrap();
        assert_eq!(resp.m1, prng16(&f, epc ^ Word16(0x0123)) ^ Word16(0x0DD0));
    }

    #[test]
    fn test_query_twice_is_an_error() {
        let mut w = world(57);
        w.oracle_test(0, 1).unwrap();
        assert!(matches!(w.oracle_test(0, 1), Err(GameError::TestRepeated)));
    }

    #[test]
    fn challenge_handle_is_transparent() {
        let mut w = world(58);
        let handle = w.oracle_test(0, 1).unwrap();
        let b = w.coin().unwrap();
        let target = if b { 1 } else { 0 };
        let expected_k = w.tags[target].k();
        let f = default_prng();
        let n_r = Word16(0x0F0F);
        let resp = w.oracle_send_challenge(handle, n_r).unwrap();
        assert_eq!(resp.m1, prng16(&f, w.tags[target].epc_s() ^ n_r) ^ expected_k);
    }

    #[test]
    fn coin_is_roughly_fair() {
        // Guessing a constant wins exactly when the coin lands on it.
        let est = run_uprv_game(&ConstantGuessAdversary(false), 99, 10_000, 2).unwrap();
        assert!((0.48..=0.52).contains(&est.win_rate), "{}", est.win_rate);
        assert!(est.advantage < 0.02);
    }

    #[test]
    fn random_guess_baseline_has_no_advantage() {
        let est = run_uprv_game(&RandomGuessAdversary, 7, 10_000, 2).unwrap();
        assert!(est.advantage < 0.02, "advantage {}", est.advantage);
        assert!(est.advantage <= 0.5);
    }

    #[test]
    fn untraceability_adversary_wins_nearly_always() {
        let est = run_uprv_game(&UntraceabilityAdversary, 11, 2_000, 2).unwrap();
        assert!(est.win_rate >= 0.99, "win rate {}", est.win_rate);
        assert_eq!(
            est.oracle_budget_used,
            OracleUsage { execute: 0, send: 2, corrupt: 0, test: 1 }
        );
    }

    #[test]
    fn backward_untraceability_adversary_wins_nearly_always() {
        let est = run_uprv_game(&BackwardUntraceabilityAdversary, 13, 2_000, 2).unwrap();
        assert!(est.win_rate >= 0.99, "win rate {}", est.win_rate);
        assert_eq!(
            est.oracle_budget_used,
            OracleUsage { execute: 1, send: 0, corrupt: 1, test: 1 }
        );
    }

    #[test]
    fn budget_is_enforced() {
        struct Greedy;
        impl AdversaryStrategy for Greedy {
            fn name(&self) -> &'static str {
                "greedy"
            }
            fn budget(&self) -> OracleBudget {
                OracleBudget { execute: Some(1), send: None, corrupt: None }
            }
            fn play(
                &self,
                world: &mut GameWorld,
                _adv: &mut RandomSource,
            ) -> Result<bool, GameError> {
                world.oracle_test(0, 1)?;
                world.oracle_execute(TagRef::Tag(0))?;
                world.oracle_execute(TagRef::Tag(0))?;
                Ok(false)
            }
        }
        let err = run_uprv_game(&Greedy, 1, 1, 2);
        assert!(matches!(err, Err(GameError::BudgetExceeded { .. })));
    }

    #[test]
    fn estimates_are_deterministic_in_the_master_seed() {
        let a = run_uprv_game(&UntraceabilityAdversary, 77, 500, 2).unwrap();
        let b = run_uprv_game(&UntraceabilityAdversary, 77, 500, 2).unwrap();
        assert_eq!(a, b);
    }
}

//! The pluggable 16-bit PRNG and reader-hash functions.
//!
//! The protocol only requires that `PRNG` and `H` be deterministic
//! 16-bit-to-16-bit maps that anyone, including the adversary, can evaluate
//! off-line. Both are served from a registry of named functions. The default
//! entries are fixed-key substitution-permutation networks: four rounds of
//! XOR with a round constant, a nibble S-box, and a 5-bit rotation. Every
//! round step is invertible, so the default maps are bijections on the full
//! 16-bit space and chained key updates never shrink the keyspace.

use crate::error::ConfigError;
use crate::word::Word16;

/// PRESENT cipher S-box, a 4-bit bijection.
const SBOX: [u16; 16] = [
    0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2,
];

const PRNG_ROUND_CONSTANTS: [u16; 4] = [0x3A5C, 0x9E17, 0x51F4, 0xC28B];
const HASH_ROUND_CONSTANTS: [u16; 4] = [0x7F21, 0x1D6B, 0xE409, 0x86D3];

fn sub_nibbles(x: u16) -> u16 {
    SBOX[(x & 0xF) as usize]
        | SBOX[((x >> 4) & 0xF) as usize] << 4
        | SBOX[((x >> 8) & 0xF) as usize] << 8
        | SBOX[((x >> 12) & 0xF) as usize] << 12
}

fn spn(mut x: u16, round_constants: &[u16; 4]) -> u16 {
    for rc in round_constants {
        x = sub_nibbles(x ^ rc).rotate_left(5);
    }
    x
}

/// A named deterministic `Word16 -> Word16` map standing in for `PRNG(.)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrngFunction {
    name: &'static str,
    round_constants: &'static [u16; 4],
}

impl PrngFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, x: Word16) -> Word16 {
        Word16(spn(x.get(), self.round_constants))
    }
}

/// A named deterministic map standing in for `H(.)`; used only for
/// `V = H(RID XOR N_R)` on the reader-server link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashFunction {
    name: &'static str,
    round_constants: &'static [u16; 4],
}

impl HashFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, x: Word16) -> Word16 {
        Word16(spn(x.get(), self.round_constants))
    }
}

pub const DEFAULT_PRNG_NAME: &str = "spn16";
pub const DEFAULT_HASH_NAME: &str = "spn16-h";

const PRNG_REGISTRY: [PrngFunction; 1] = [PrngFunction {
    name: DEFAULT_PRNG_NAME,
    round_constants: &PRNG_ROUND_CONSTANTS,
}];

const HASH_REGISTRY: [HashFunction; 1] = [HashFunction {
    name: DEFAULT_HASH_NAME,
    round_constants: &HASH_ROUND_CONSTANTS,
}];

pub fn default_prng() -> PrngFunction {
    PRNG_REGISTRY[0]
}

pub fn default_hash() -> HashFunction {
    HASH_REGISTRY[0]
}

pub fn lookup_prng(name: &str) -> Result<PrngFunction, ConfigError> {
    PRNG_REGISTRY
        .iter()
        .find(|f| f.name == name)
        .copied()
        .ok_or_else(|| ConfigError::UnknownPrng {
            name: name.to_string(),
            known: PRNG_REGISTRY.iter().map(|f| f.name.to_string()).collect(),
        })
}

pub fn lookup_hash(name: &str) -> Result<HashFunction, ConfigError> {
    HASH_REGISTRY
        .iter()
        .find(|f| f.name == name)
        .copied()
        .ok_or_else(|| ConfigError::UnknownHash {
            name: name.to_string(),
            known: HASH_REGISTRY.iter().map(|f| f.name.to_string()).collect(),
        })
}

/// Evaluates `f` at `x`, the `PRNG(.)` of the protocol messages.
pub fn prng16(f: &PrngFunction, x: Word16) -> Word16 {
    f.eval(x)
}

/// Computes `V = H(RID XOR N_R)`.
pub fn hash_v(h: &HashFunction, rid: Word16, n_r: Word16) -> Word16 {
    h.eval(rid ^ n_r)
}

//! The 16-bit word every protocol value lives in.
//!
//! Keys, nonces, indices and `EPC_s` are all 16-bit strings combined with
//! bitwise XOR; there is no other arithmetic in the protocol.

use std::fmt;
use std::ops::BitXor;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A 16-bit protocol word. Serialized as four lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word16(pub u16);

impl Word16 {
    pub const ZERO: Word16 = Word16(0);

    pub fn get(self) -> u16 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl BitXor for Word16 {
    type Output = Word16;

    fn bitxor(self, rhs: Word16) -> Word16 {
        Word16(self.0 ^ rhs.0)
    }
}

impl From<u16> for Word16 {
    fn from(v: u16) -> Self {
        Word16(v)
    }
}

impl fmt::Display for Word16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04x}", self.0)
    }
}

impl Serialize for Word16 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{:04x}", self.0))
    }
}

impl<'de> Deserialize<'de> for Word16 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        u16::from_str_radix(&s, 16)
            .map(Word16)
            .map_err(|_| D::Error::custom(format!("not a 16-bit hex word: {s:?}")))
    }
}

/// Bitwise XOR of two words. `xor16(a, a) == 0` and `xor16(a, 0) == a`.
pub fn xor16(a: Word16, b: Word16) -> Word16 {
    a ^ b
}

//! Fixed-width 256-bit sets used for edge and element indexes.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of indexes a [`Bitset256`] can hold.
pub const WIDTH: u32 = 256;

/// A 256-bit set; bit `i` set means index `i` is a member.
///
/// Human-readable formats (JSON) carry the sorted member list; binary
/// formats carry the four little-endian words.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitset256([u64; 4]);

impl Serialize for Bitset256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            self.to_vec().serialize(s)
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Bitset256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if d.is_human_readable() {
            let v = Vec::<u32>::deserialize(d)?;
            Bitset256::try_of(v).ok_or_else(|| serde::de::Error::custom("index out of range"))
        } else {
            Ok(Bitset256(<[u64; 4]>::deserialize(d)?))
        }
    }
}

/// Set of sequence-flow (edge) indexes.
pub type EdgeSet = Bitset256;

/// Set of element indexes.
pub type ElementSet = Bitset256;

impl Bitset256 {
    pub const EMPTY: Self = Bitset256([0; 4]);

    pub fn from_words(words: [u64; 4]) -> Self {
        Bitset256(words)
    }

    pub fn words(&self) -> [u64; 4] {
        self.0
    }

    /// Builds a set from indexes. Panics if an index is `>= 256`.
    pub fn of<I: IntoIterator<Item = u32>>(indexes: I) -> Self {
        let mut set = Self::EMPTY;
        for i in indexes {
            set.insert(i);
        }
        set
    }

    /// Fallible variant of [`Bitset256::of`].
    pub fn try_of<I: IntoIterator<Item = u32>>(indexes: I) -> Option<Self> {
        let mut set = Self::EMPTY;
        for i in indexes {
            if i >= WIDTH {
                return None;
            }
            set.insert(i);
        }
        Some(set)
    }

    pub fn single(i: u32) -> Self {
        Self::of([i])
    }

    pub fn insert(&mut self, i: u32) {
        assert!(i < WIDTH, "bit index {i} out of range");
        self.0[(i / 64) as usize] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: u32) {
        if i < WIDTH {
            self.0[(i / 64) as usize] &= !(1 << (i % 64));
        }
    }

    pub fn contains(&self, i: u32) -> bool {
        i < WIDTH && self.0[(i / 64) as usize] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0) {
            *a |= b;
        }
        out
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0) {
            *a &= b;
        }
        out
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0) {
            *a &= !b;
        }
        out
    }

    pub fn intersects(&self, other: &Self) -> bool {
        !self.intersection(other).is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// Lowest member, if any.
    pub fn lowest(&self) -> Option<u32> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i as u32 * 64 + w.trailing_zeros())
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..WIDTH).filter(move |i| self.contains(*i))
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }

    /// Low 64 bits as an integer, the form used when a mask is written
    /// as a literal (e.g. `1 << 3 == 8`).
    pub fn low_u64(&self) -> u64 {
        self.0[0]
    }
}

impl fmt::Debug for Bitset256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<u32> for Bitset256 {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        Self::of(iter)
    }
}

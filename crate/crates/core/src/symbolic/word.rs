// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use super::SymbolicError;

/// A product `X_{i1} X_{i2} ... X_{im}` over the letters `{0, 1}`.
///
/// The leftmost letter is the latest-acting factor, so it is matched with
/// the last interval of a sequence.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperatorWord {
    // Ordering derives from (len, letters), which gives length-then-lexicographic.
    len: usize,
    letters: Vec<u8>,
}

impl OperatorWord {
    pub fn new(letters: Vec<u8>) -> Result<Self, SymbolicError> {
        if letters.is_empty() {
            return Err(SymbolicError::EmptyWord);
        }
        if let Some(&bad) = letters.iter().find(|&&l| l > 1) {
            return Err(SymbolicError::InvalidWord(format!(
                "letter {bad} not in {{0,1}}"
            )));
        }
        Ok(Self {
            len: letters.len(),
            letters,
        })
    }

    /// The `index`-th word of length `len` in lexicographic order.
    pub fn from_index(len: usize, index: u64) -> Self {
        debug_assert!(len >= 1 && len < 64);
        let letters = (0..len)
            .map(|j| ((index >> (len - 1 - j)) & 1) as u8)
            .collect();
        Self { len, letters }
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of `X_1` factors.
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&l| l == 1).count()
    }

    pub fn is_odd(&self) -> bool {
        self.weight() % 2 == 1
    }

    /// All `2^len` words of the given length, lexicographically.
    pub fn all(len: usize) -> impl Iterator<Item = OperatorWord> {
        (0..1u64 << len).map(move |i| OperatorWord::from_index(len, i))
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OperatorWord(\"{self}\")")
    }
}

impl FromStr for OperatorWord {
    type Err = SymbolicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(SymbolicError::InvalidWord(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::new(letters)
    }
}

impl Serialize for OperatorWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

//! Symbolic addresses over the generator alphabet `{1, …, m}`.
//!
//! A word is a finite prefix followed by an optional repeating cycle; the
//! text form is `prefix(cycle)`, e.g. `21(1)` for (2,1,1,1,…).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordError {
    #[error("digit {0} outside 1..=9")]
    Digit(u8),
    #[error("cannot parse word `{0}`")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    prefix: Vec<u8>,
    cycle: Vec<u8>,
}

fn primitive_root(cycle: &[u8]) -> Vec<u8> {
    let n = cycle.len();
    for q in 1..=n {
        if n.is_multiple_of(q) && (q..n).all(|i| cycle[i] == cycle[i % q]) {
            return cycle[..q].to_vec();
        }
    }
    cycle.to_vec()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Word {
    /// Builds and canonicalizes: primitive cycle, minimal prefix.
    pub fn new(prefix: Vec<u8>, cycle: Vec<u8>) -> Result<Self, WordError> {
        if let Some(&d) = prefix.iter().chain(&cycle).find(|&&d| d == 0 || d > 9) {
            return Err(WordError::Digit(d));
        }
        let mut prefix = prefix;
        let mut cycle = primitive_root(&cycle);
        while !cycle.is_empty() && prefix.last() == cycle.last() {
            prefix.pop();
            cycle.rotate_right(1);
        }
        Ok(Self { prefix, cycle })
    }

    pub fn finite(digits: Vec<u8>) -> Result<Self, WordError> {
        Self::new(digits, Vec::new())
    }

    pub fn periodic(cycle: Vec<u8>) -> Result<Self, WordError> {
        Self::new(Vec::new(), cycle)
    }

    pub fn prefix(&self) -> &[u8] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[u8] {
        &self.cycle
    }

    pub fn is_finite(&self) -> bool {
        self.cycle.is_empty()
    }

    /// Number of letters for finite words, `None` for infinite ones.
    pub fn len(&self) -> Option<usize> {
        self.is_finite().then_some(self.prefix.len())
    }

    pub fn is_empty(&self) -> bool {
        self.is_finite() && self.prefix.is_empty()
    }

    /// Letter at 0-based position `n`.
    pub fn letter(&self, n: usize) -> Option<u8> {
        if n < self.prefix.len() {
            Some(self.prefix[n])
        } else if self.cycle.is_empty() {
            None
        } else {
            Some(self.cycle[(n - self.prefix.len()) % self.cycle.len()])
        }
    }

    /// First `n` letters (fewer for a short finite word).
    pub fn expand(&self, n: usize) -> Vec<u8> {
        (0..n).map_while(|k| self.letter(k)).collect()
    }

    pub fn max_digit(&self) -> u8 {
        self.prefix
            .iter()
            .chain(&self.cycle)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// The shift σ: drop the first letter.
    pub fn shift(&self) -> Word {
        if !self.prefix.is_empty() {
            Word::new(self.prefix[1..].to_vec(), self.cycle.clone()).expect("digits already valid")
        } else if self.cycle.is_empty() {
            self.clone()
        } else {
            let mut cycle = self.cycle.clone();
            cycle.rotate_left(1);
            Word {
                prefix: Vec::new(),
                cycle,
            }
        }
    }

    /// Prepends letters.
    pub fn prepend(&self, letters: &[u8]) -> Word {
        let mut prefix = letters.to_vec();
        prefix.extend_from_slice(&self.prefix);
        Word::new(prefix, self.cycle.clone()).expect("digits already valid")
    }

    /// Lexicographic order on infinite words; finite words compare as strings.
    pub fn lex_cmp(&self, other: &Word) -> Ordering {
        let horizon = match (self.cycle.len(), other.cycle.len()) {
            (0, _) | (_, 0) => {
                self.prefix.len().max(other.prefix.len()) + self.cycle.len().max(other.cycle.len())
            }
            (a, b) => self.prefix.len().max(other.prefix.len()) + a / gcd(a, b) * b,
        };
        for n in 0..horizon.max(1) {
            match (self.letter(n), other.letter(n)) {
                (Some(x), Some(y)) if x != y => return x.cmp(&y),
                (Some(_), Some(_)) => {}
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.prefix {
            write!(f, "{d}")?;
        }
        if !self.cycle.is_empty() {
            f.write_str("(")?;
            for d in &self.cycle {
                write!(f, "{d}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || WordError::Parse(s.to_string());
        let s = s.trim();
        let digits = |t: &str| -> Result<Vec<u8>, WordError> {
            t.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .filter(|&d| d > 0)
                        .ok_or_else(err)
                })
                .collect()
        };
        match s.find('(') {
            Some(open) => {
                let rest = s[open + 1..].strip_suffix(')').ok_or_else(err)?;
                if rest.is_empty() || rest.contains(['(', ')']) {
                    return Err(err());
                }
                Word::new(digits(&s[..open])?, digits(rest)?)
            }
            None => {
                if s.is_empty() || s.contains(')') {
                    return Err(err());
                }
                Word::finite(digits(s)?)
            }
        }
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characteristic vector of the set of rows to delete: bit `i` is set iff
/// row `i` is removed. Its Hamming weight is the number of removed rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct RemovalMask {
    bits: Vec<bool>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid mask character {0:?}, expected '0' or '1'")]
pub struct MaskParseError(char);

impl RemovalMask {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        RemovalMask { bits: bits.into_iter().collect() }
    }

    /// Mask of length `len` with ones exactly at `positions`.
    pub fn from_ones(len: usize, positions: &[usize]) -> Self {
        let mut bits = vec![false; len];
        for &p in positions {
            bits[p] = true;
        }
        RemovalMask { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Sorted positions holding a one (the "map of ones").
    pub fn ones(&self) -> Vec<usize> {
        self.positions(true)
    }

    pub fn zeros(&self) -> Vec<usize> {
        self.positions(false)
    }

    fn positions(&self, value: bool) -> Vec<usize> {
        self.bits.iter().enumerate().filter_map(|(i, &b)| (b == value).then_some(i)).collect()
    }

    pub fn hamming_distance(&self, other: &RemovalMask) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub(crate) fn swap(&mut self, i: usize, j: usize) {
        self.bits.swap(i, j);
    }

    /// Applies a row permutation: bit `i` of the result is bit `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        RemovalMask { bits: perm.iter().map(|&p| self.bits[p]).collect() }
    }
}

impl fmt::Display for RemovalMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for RemovalMask {
    type Err = MaskParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(MaskParseError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|bits| RemovalMask { bits })
    }
}

impl From<RemovalMask> for String {
    fn from(m: RemovalMask) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for RemovalMask {
    type Error = MaskParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_and_zeros() {
        let m: RemovalMask = "0110".parse().unwrap();
        assert_eq!(m.weight(), 2);
        assert_eq!(m.ones(), vec![1, 2]);
        assert_eq!(m.zeros(), vec![0, 3]);
        assert_eq!(m, RemovalMask::from_ones(4, &[2, 1]));
        assert_eq!(m.to_string(), "0110");
        assert_eq!(m.hamming_distance(&"1100".parse().unwrap()), 2);
        assert!("01a".parse::<RemovalMask>().is_err());
    }

    #[test]
    fn json_is_a_bitstring() {
        let m: RemovalMask = "1001".parse().unwrap();
        let j = serde_json::to_string(&m).unwrap();
        assert_eq!(j, "\"1001\"");
        assert_eq!(serde_json::from_str::<RemovalMask>(&j).unwrap(), m);
    }
}

//! Integer partitions used as keys for mixed moments.
//!
//! A partition `(p_1, ..., p_k)` indexes the product of normalized traces
//! `tr(A^{p_1}) ... tr(A^{p_k})`. Parts are kept sorted in descending order so
//! that `(1, 2)` and `(2, 1)` are the same key. The empty partition stands for
//! the constant moment, whose value is always 1.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PartitionIndex {
    parts: Vec<u32>,
}

impl PartitionIndex {
    /// Canonicalizes `parts`. Zero parts are rejected.
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::input("partition parts must be positive"));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(p: u32) -> Self {
        assert!(p > 0, "single-trace moment order must be positive");
        Self { parts: vec![p] }
    }

    /// Builds a partition from parts already known to be positive.
    pub(crate) fn from_positive(parts: Vec<u32>) -> Self {
        debug_assert!(!parts.contains(&0));
        let mut parts = parts;
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self { parts }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn weight(&self) -> usize {
        self.parts.iter().map(|&p| p as usize).sum()
    }

    /// Number of traces in the product.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Multiset union: the partition of a product of two mixed moments.
    pub fn merge(&self, other: &PartitionIndex) -> PartitionIndex {
        let mut parts = self.parts.clone();
        parts.extend_from_slice(&other.parts);
        Self::from_positive(parts)
    }

    /// All partitions of exactly `weight`, in ascending [`Ord`] order.
    pub fn of_weight(weight: usize) -> Vec<PartitionIndex> {
        fn rec(rest: usize, max: usize, acc: &mut Vec<u32>, out: &mut Vec<PartitionIndex>) {
            if rest == 0 {
                out.push(PartitionIndex { parts: acc.clone() });
                return;
            }
            for part in (1..=max.min(rest)).rev() {
                acc.push(part as u32);
                rec(rest - part, part, acc, out);
                acc.pop();
            }
        }
        let mut out = Vec::new();
        rec(weight, weight, &mut Vec::new(), &mut out);
        out.sort();
        out
    }

    /// All nonempty partitions of weight `1..=max_weight`, weight first then
    /// lexicographic.
    pub fn up_to_weight(max_weight: usize) -> Vec<PartitionIndex> {
        (1..=max_weight).flat_map(Self::of_weight).collect()
    }
}

impl Ord for PartitionIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.parts.cmp(&other.parts))
    }
}

impl PartialOrd for PartitionIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PartitionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for PartitionIndex {
    type Err = Error;

    /// Accepts `2,1`, `(2,1)`, `[2 1]` and `()` for the empty partition.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .trim_matches(|c| matches!(c, '(' | ')' | '[' | ']'));
        let parts = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::input(format!("bad partition part '{t}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        let a = PartitionIndex::new(vec![1, 2]).unwrap();
        let b = PartitionIndex::new(vec![2, 1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parts(), &[2, 1]);
        assert_eq!(a.weight(), 3);
    }

    #[test]
    fn counts_match_partition_numbers() {
        let counts: Vec<usize> = (0..=6)
            .map(|w| PartitionIndex::of_weight(w).len())
            .collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 7, 11]);
        assert_eq!(PartitionIndex::up_to_weight(3).len(), 6);
    }

    #[test]
    fn weight_then_lex_order() {
        let w3 = PartitionIndex::of_weight(3);
        let shown: Vec<String> = w3.iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, vec!["(1,1,1)", "(2,1)", "(3)"]);
        assert!(PartitionIndex::single(3) < PartitionIndex::new(vec![1, 1, 1, 1]).unwrap());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["(2,1)", "2,1", "[1 2]", "()"] {
            let p: PartitionIndex = s.parse().unwrap();
            let again: PartitionIndex = p.to_string().parse().unwrap();
            assert_eq!(p, again);
        }
        assert!("0,1".parse::<PartitionIndex>().is_err());
        assert!("x".parse::<PartitionIndex>().is_err());
    }
}

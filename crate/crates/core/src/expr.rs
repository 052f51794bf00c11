//! Exact linear combinations over the mixed-moment basis.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::partition::PartitionIndex;
use crate::rational;

/// Which family of moments the partitions of an expression refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Moments of `(1/N) D Dᴴ` for the deterministic part.
    D,
    /// Observed moments of `(1/N) Y Yᴴ` (or of the compound matrix).
    Y,
    /// Mixed moments of the model-two signal matrix `S`.
    S,
    /// Moments of `D Dᴴ` without column normalization.
    Delta,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::D => "D",
            Basis::Y => "Y",
            Basis::S => "S",
            Basis::Delta => "Delta",
        };
        f.write_str(s)
    }
}

/// `Σ coefficient · moment[partition]` with exact rational coefficients.
///
/// Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentExpression {
    basis: Basis,
    terms: BTreeMap<PartitionIndex, BigRational>,
}

impl MomentExpression {
    pub fn zero(basis: Basis) -> Self {
        Self {
            basis,
            terms: BTreeMap::new(),
        }
    }

    /// The single moment `partition` with coefficient one.
    pub fn moment(basis: Basis, partition: PartitionIndex) -> Self {
        let mut e = Self::zero(basis);
        e.add_term(partition, BigRational::one());
        e
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn add_term(&mut self, partition: PartitionIndex, coefficient: BigRational) {
        if coefficient.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(partition) {
            Entry::Vacant(v) => {
                v.insert(coefficient);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coefficient;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, partition: &PartitionIndex) -> BigRational {
        self.terms
            .get(partition)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PartitionIndex, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: &BigRational) -> Self {
        let mut out = Self::zero(self.basis);
        for (p, c) in &self.terms {
            out.add_term(p.clone(), c * factor);
        }
        out
    }

    /// Adds `factor · other` into `self`. Bases must agree.
    pub fn add_scaled(&mut self, other: &MomentExpression, factor: &BigRational) {
        debug_assert_eq!(self.basis, other.basis);
        for (p, c) in &other.terms {
            self.add_term(p.clone(), c * factor);
        }
    }

    /// Linear substitution: replaces every moment by the expression
    /// `substitute` returns for it.
    pub fn compose<F>(&self, mut substitute: F) -> Result<MomentExpression>
    where
        F: FnMut(&PartitionIndex) -> Result<MomentExpression>,
    {
        let mut out: Option<MomentExpression> = None;
        for (p, c) in &self.terms {
            let sub = substitute(p)?;
            match out.as_mut() {
                None => out = Some(sub.scaled(c)),
                Some(acc) => acc.add_scaled(&sub, c),
            }
        }
        Ok(out.unwrap_or_else(|| Self::zero(self.basis)))
    }

    /// Evaluates in exact arithmetic, converting to `f64` once at the end.
    pub fn evaluate(&self, values: &MomentValues) -> Result<f64> {
        let mut acc = BigRational::zero();
        for (p, c) in &self.terms {
            let v = values
                .get(p)
                .ok_or_else(|| Error::MissingMoment(p.clone()))?;
            let v = rational::from_f64(v)
                .ok_or_else(|| Error::input(format!("non-finite value for moment {p}")))?;
            acc += c * v;
        }
        Ok(rational::to_f64(&acc))
    }

    /// Floating-point evaluation for hot loops.
    pub fn evaluate_f64(&self, values: &MomentValues) -> Result<f64> {
        self.terms.iter().try_fold(0.0, |acc, (p, c)| {
            let v = values
                .get(p)
                .ok_or_else(|| Error::MissingMoment(p.clone()))?;
            Ok(acc + rational::to_f64(c) * v)
        })
    }

    /// Coefficients converted to `f64`, in basis order.
    pub fn to_f64_terms(&self) -> Vec<(PartitionIndex, f64)> {
        self.terms
            .iter()
            .map(|(p, c)| (p.clone(), rational::to_f64(c)))
            .collect()
    }

    /// Writes `partition,numerator,denominator` rows.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["partition", "numerator", "denominator"])?;
        for (p, c) in &self.terms {
            w.write_record([p.to_string(), c.numer().to_string(), c.denom().to_string()])?;
        }
        w.flush()
    }
}

impl fmt::Display for MomentExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (p, c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            match (i, c.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match (p.is_empty(), mag.is_one()) {
                (true, _) => write!(f, "{mag}")?,
                (false, true) => write!(f, "{}{p}", self.basis)?,
                (false, false) => write!(f, "{mag}*{}{p}", self.basis)?,
            }
        }
        Ok(())
    }
}

/// Numeric moment values keyed by partition.
///
/// Lookups of a partition that was not stored explicitly fall back to the
/// product of its single-trace entries; the empty partition is always 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentValues {
    entries: BTreeMap<PartitionIndex, f64>,
}

impl MomentValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// `singles[q - 1]` is the value of the single moment of order `q`.
    pub fn from_singles(singles: &[f64]) -> Self {
        let mut v = Self::new();
        for (i, &x) in singles.iter().enumerate() {
            v.insert(PartitionIndex::single(i as u32 + 1), x);
        }
        v
    }

    pub fn insert(&mut self, partition: PartitionIndex, value: f64) {
        self.entries.insert(partition, value);
    }

    pub fn get(&self, partition: &PartitionIndex) -> Option<f64> {
        if partition.is_empty() {
            return Some(1.0);
        }
        if let Some(&v) = self.entries.get(partition) {
            return Some(v);
        }
        if partition.len() == 1 {
            return None;
        }
        partition
            .parts()
            .iter()
            .map(|&q| self.entries.get(&PartitionIndex::single(q)).copied())
            .product()
    }

    pub fn single(&self, q: u32) -> Option<f64> {
        self.get(&PartitionIndex::single(q))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartitionIndex, &f64)> {
        self.entries.iter()
    }
}

impl FromIterator<(PartitionIndex, f64)> for MomentValues {
    fn from_iter<T: IntoIterator<Item = (PartitionIndex, f64)>>(iter: T) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn zero_terms_are_dropped() {
        let mut e = MomentExpression::zero(Basis::Y);
        e.add_term(PartitionIndex::single(1), q(1, 2));
        e.add_term(PartitionIndex::single(1), q(-1, 2));
        e.add_term(PartitionIndex::single(2), q(0, 1));
        assert!(e.is_empty());
    }

    #[test]
    fn evaluation_examples() {
        // Y_1 - 1 at Y_1 = 3
        let mut e = MomentExpression::moment(Basis::Y, PartitionIndex::single(1));
        e.add_term(PartitionIndex::empty(), q(-1, 1));
        let vals = MomentValues::from_singles(&[3.0]);
        assert_eq!(e.evaluate(&vals).unwrap(), 2.0);

        // Y_2 - 4 Y_1 + 2 at Y_2 = 10, Y_1 = 2
        let mut e = MomentExpression::moment(Basis::Y, PartitionIndex::single(2));
        e.add_term(PartitionIndex::single(1), q(-4, 1));
        e.add_term(PartitionIndex::empty(), q(2, 1));
        let vals = MomentValues::from_singles(&[2.0, 10.0]);
        assert_eq!(e.evaluate(&vals).unwrap(), 4.0);
        assert_eq!(e.evaluate_f64(&vals).unwrap(), 4.0);
    }

    #[test]
    fn missing_moment_is_named() {
        let e = MomentExpression::moment(Basis::D, PartitionIndex::single(3));
        let err = e.evaluate(&MomentValues::from_singles(&[1.0])).unwrap_err();
        assert_eq!(err, Error::MissingMoment(PartitionIndex::single(3)));
        assert!(err.to_string().contains("(3)"));
    }

    #[test]
    fn products_fall_back_to_singles() {
        let vals = MomentValues::from_singles(&[2.0, 5.0]);
        let p = PartitionIndex::new(vec![1, 1, 2]).unwrap();
        assert_eq!(vals.get(&p), Some(20.0));
        assert_eq!(vals.get(&PartitionIndex::new(vec![3, 1]).unwrap()), None);
        let mut explicit = vals.clone();
        explicit.insert(PartitionIndex::new(vec![1, 1]).unwrap(), 7.0);
        assert_eq!(
            explicit.get(&PartitionIndex::new(vec![1, 1]).unwrap()),
            Some(7.0)
        );
    }

    #[test]
    fn csv_export() {
        let mut e = MomentExpression::moment(Basis::Y, PartitionIndex::new(vec![2, 1]).unwrap());
        e.add_term(PartitionIndex::empty(), q(-3, 4));
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "partition,numerator,denominator\n(),-3,4\n\"(2,1)\",1,1\n"
        );
    }
}

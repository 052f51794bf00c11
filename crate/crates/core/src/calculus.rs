//! Forward moment map and unbiased estimator coefficients for the additive
//! model `Y = D + σX`.
//!
//! Every diagram contributes a monomial
//! `n^{|σ|-k + l-ld} · N^{k-kd - |ρ1|}` onto the D-moment indexed by its
//! deterministic components. Diagrams are folded once per shape into a
//! [`DiagramTable`] of integer counts per monomial, after which coefficients
//! for any dimensions are cheap exact evaluations.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;

use crate::diagram::{enumerate_sp, enumerate_spr, summarize, DiagramShape, PartialPermutation};
use crate::error::{Error, Result};
use crate::expr::{Basis, MomentExpression};
use crate::partition::PartitionIndex;
use crate::rational::{self, int, powi};

pub const DEFAULT_P_MAX: usize = 4;

/// Matrix dimensions of one observation and the noise scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDims {
    /// `n`
    pub rows: u64,
    /// `N`
    pub cols: u64,
    pub sigma: f64,
}

impl ModelDims {
    pub fn new(rows: u64, cols: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::input("matrix dimensions must be at least 1"));
        }
        Ok(Self {
            rows,
            cols,
            sigma: 1.0,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Dimensions of the compound matrix built by `scheme`.
    pub fn compound(&self, scheme: StackingScheme) -> Self {
        Self {
            rows: self.rows * scheme.l1(),
            cols: self.cols * scheme.l2(),
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StackingKind {
    Horizontal,
    Vertical,
    Rectangular,
    Averaging,
}

impl StackingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StackingKind::Horizontal => "horizontal",
            StackingKind::Vertical => "vertical",
            StackingKind::Rectangular => "rectangular",
            StackingKind::Averaging => "averaging",
        }
    }
}

impl std::fmt::Display for StackingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `L = L1 · L2` observations laid out as an `L1 × L2` block matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StackingScheme {
    l1: u64,
    l2: u64,
}

impl StackingScheme {
    pub fn new(l1: u64, l2: u64) -> Result<Self> {
        if l1 == 0 || l2 == 0 {
            return Err(Error::input("stacking factors must be at least 1"));
        }
        Ok(Self { l1, l2 })
    }

    pub fn single() -> Self {
        Self { l1: 1, l2: 1 }
    }

    /// Vertical copies.
    pub fn l1(&self) -> u64 {
        self.l1
    }

    /// Horizontal copies.
    pub fn l2(&self) -> u64 {
        self.l2
    }

    pub fn count(&self) -> u64 {
        self.l1 * self.l2
    }

    /// Horizontal wins when `L1 = L2 = 1`.
    pub fn kind(&self) -> StackingKind {
        if self.l1 == 1 {
            StackingKind::Horizontal
        } else if self.l2 == 1 {
            StackingKind::Vertical
        } else {
            StackingKind::Rectangular
        }
    }
}

impl std::fmt::Display for StackingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L1={} L2={}", self.l1, self.l2)
    }
}

/// Largest moment order the engine will build without being asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capacity {
    pub p_max: usize,
}

impl Default for Capacity {
    fn default() -> Self {
        Self {
            p_max: DEFAULT_P_MAX,
        }
    }
}

impl Capacity {
    pub fn new(p_max: usize) -> Self {
        Self { p_max }
    }

    pub(crate) fn check(&self, weight: usize) -> Result<()> {
        if weight > self.p_max {
            Err(Error::Capacity {
                weight,
                p_max: self.p_max,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Monomial {
    partition: PartitionIndex,
    rows_exp: i32,
    cols_exp: i32,
    rho1: u32,
}

/// Diagram contributions grouped by monomial, with multiplicities.
#[derive(Debug, Clone, Default)]
pub(crate) struct DiagramTable {
    terms: BTreeMap<Monomial, u64>,
    diagrams: u64,
}

impl DiagramTable {
    /// Folds `diagrams` in parallel. `skip_empty` drops the empty partial
    /// permutation.
    fn build<I>(shape: &DiagramShape, diagrams: I, skip_empty: bool) -> Self
    where
        I: Iterator<Item = PartialPermutation> + Send,
    {
        let circles = shape.circle_count() as i32;
        diagrams
            .par_bridge()
            .filter(|pp| !(skip_empty && pp.is_empty()))
            .fold(DiagramTable::default, |mut table, pp| {
                let s = summarize(shape, &pp).expect("enumerated diagrams are in range");
                let key = Monomial {
                    rows_exp: s.sigma_count as i32 - circles + s.odd_classes as i32
                        - s.odd_classes_det as i32,
                    cols_exp: s.even_classes as i32
                        - s.even_classes_det as i32
                        - s.rho1_size as i32,
                    rho1: s.rho1_size as u32,
                    partition: s.sigma_block_halves,
                };
                *table.terms.entry(key).or_default() += 1;
                table.diagrams += 1;
                table
            })
            .reduce(DiagramTable::default, |mut a, b| {
                for (k, v) in b.terms {
                    *a.terms.entry(k).or_default() += v;
                }
                a.diagrams += b.diagrams;
                a
            })
    }

    #[cfg(test)]
    pub(crate) fn diagram_count(&self) -> u64 {
        self.diagrams
    }

    /// `Σ count · rows^a · cols^b · weight(|ρ1|) · extra(partition)`.
    fn fold<W, X>(
        &self,
        rows: u64,
        cols: u64,
        weight: W,
        extra: X,
        basis: Basis,
    ) -> MomentExpression
    where
        W: Fn(u32) -> BigRational,
        X: Fn(&PartitionIndex) -> BigRational,
    {
        let rows = int(rows);
        let cols = int(cols);
        let mut out = MomentExpression::zero(basis);
        for (m, &count) in &self.terms {
            let c = int(count)
                * powi(&rows, m.rows_exp)
                * powi(&cols, m.cols_exp)
                * weight(m.rho1)
                * extra(&m.partition);
            out.add_term(m.partition.clone(), c);
        }
        out
    }

    /// Number of distinct monomials.
    #[cfg(test)]
    pub(crate) fn monomial_count(&self) -> usize {
        self.terms.len()
    }
}

/// Builds and caches the diagram folds behind every formula.
#[derive(Debug, Default)]
pub struct Calculus {
    capacity: Capacity,
    sp_tables: Mutex<HashMap<PartitionIndex, Arc<DiagramTable>>>,
    spr_tables: Mutex<HashMap<usize, Arc<DiagramTable>>>,
}

impl Calculus {
    pub fn new(capacity: Capacity) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub(crate) fn sp_table(&self, parts: &PartitionIndex) -> Result<Arc<DiagramTable>> {
        self.capacity.check(parts.weight())?;
        if let Some(t) = self.sp_tables.lock().unwrap().get(parts) {
            return Ok(Arc::clone(t));
        }
        let shape = DiagramShape::for_partition(parts)?;
        let table = Arc::new(DiagramTable::build(&shape, enumerate_sp(&shape), false));
        self.sp_tables
            .lock()
            .unwrap()
            .insert(parts.clone(), Arc::clone(&table));
        Ok(table)
    }

    /// Fold over the nonempty cross-identifications of two `p`-circles.
    pub(crate) fn spr_table(&self, p: usize) -> Result<Arc<DiagramTable>> {
        if p == 0 {
            return Err(Error::input("moment order must be at least 1"));
        }
        self.capacity.check(p)?;
        if let Some(t) = self.spr_tables.lock().unwrap().get(&p) {
            return Ok(Arc::clone(t));
        }
        let shape = DiagramShape::two_circles(p)?;
        let table = Arc::new(DiagramTable::build(&shape, enumerate_spr(p), true));
        self.spr_tables
            .lock()
            .unwrap()
            .insert(p, Arc::clone(&table));
        Ok(table)
    }

    fn sp_fold(
        &self,
        parts: &PartitionIndex,
        rows: u64,
        cols: u64,
        alternating: bool,
        noise_power: Option<BigRational>,
        basis: Basis,
    ) -> Result<MomentExpression> {
        if parts.is_empty() {
            return Ok(MomentExpression::moment(basis, PartitionIndex::empty()));
        }
        let table = self.sp_table(parts)?;
        let weight = |rho1: u32| {
            let mut w = BigRational::one();
            if alternating && rho1 % 2 == 1 {
                w = -w;
            }
            if let Some(s2) = &noise_power {
                w *= powi(s2, rho1 as i32);
            }
            w
        };
        Ok(table.fold(rows, cols, weight, |_| BigRational::one(), basis))
    }

    /// `M_parts` (expected observed moment) in the D-basis, unit noise.
    pub fn forward_map(&self, parts: &PartitionIndex, dims: ModelDims) -> Result<MomentExpression> {
        self.sp_fold(parts, dims.rows, dims.cols, false, None, Basis::D)
    }

    /// Forward map for `Y = D + σX` using `dims.sigma`.
    pub fn noisy_forward_map(
        &self,
        parts: &PartitionIndex,
        dims: ModelDims,
    ) -> Result<MomentExpression> {
        let s2 = noise_variance(dims.sigma)?;
        self.sp_fold(parts, dims.rows, dims.cols, false, Some(s2), Basis::D)
    }

    /// Unbiased estimator of `D_parts` from one observation, in the Y-basis.
    pub fn estimator_coeffs(
        &self,
        parts: &PartitionIndex,
        dims: ModelDims,
    ) -> Result<MomentExpression> {
        self.sp_fold(parts, dims.rows, dims.cols, true, None, Basis::Y)
    }

    /// Unbiased estimator of `D_parts` from the compound matrix of `scheme`.
    ///
    /// Y-moments refer to the compound matrix normalized by `1/(N·L2)`.
    pub fn stacked_estimator_coeffs(
        &self,
        parts: &PartitionIndex,
        dims: ModelDims,
        scheme: StackingScheme,
    ) -> Result<MomentExpression> {
        let c = dims.compound(scheme);
        let expr = self.sp_fold(parts, c.rows, c.cols, true, None, Basis::Y)?;
        Ok(expr.scaled(&scale_moments(parts, scheme.l1()).recip()))
    }

    /// Estimator for `Y = D + σX` with known `σ > 0` from `dims.sigma`.
    pub fn noisy_estimator_coeffs(
        &self,
        parts: &PartitionIndex,
        dims: ModelDims,
    ) -> Result<MomentExpression> {
        let s2 = noise_variance(dims.sigma)?;
        self.sp_fold(parts, dims.rows, dims.cols, true, Some(s2), Basis::Y)
    }

    pub(crate) fn spr_fold<X>(
        &self,
        p: usize,
        rows: u64,
        cols: u64,
        extra: X,
    ) -> Result<MomentExpression>
    where
        X: Fn(&PartitionIndex) -> BigRational,
    {
        let table = self.spr_table(p)?;
        Ok(table.fold(rows, cols, |_| BigRational::one(), extra, Basis::D))
    }
}

fn noise_variance(sigma: f64) -> Result<BigRational> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::input(format!(
            "noise scale must be positive, got {sigma}"
        )));
    }
    let s = rational::from_f64(sigma).expect("finite");
    Ok(&s * &s)
}

/// `Π L1^{p_i - 1}`: maps `D_parts` to the moments of the compound of
/// `L1` vertical copies of `D`.
pub fn scale_moments(parts: &PartitionIndex, l1: u64) -> BigRational {
    let exp: usize = parts.parts().iter().map(|&p| p as usize - 1).sum();
    num_traits::pow(int(l1), exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn p(parts: &[u32]) -> PartitionIndex {
        PartitionIndex::new(parts.to_vec()).unwrap()
    }

    fn dims(n: u64, big_n: u64) -> ModelDims {
        ModelDims::new(n, big_n).unwrap()
    }

    #[test]
    fn first_moment() {
        let calc = Calculus::default();
        let m1 = calc.forward_map(&p(&[1]), dims(3, 7)).unwrap();
        assert_eq!(m1.coefficient(&p(&[1])), q(1, 1));
        assert_eq!(m1.coefficient(&p(&[])), q(1, 1));
        assert_eq!(m1.len(), 2);

        let est = calc.estimator_coeffs(&p(&[1]), dims(3, 7)).unwrap();
        assert_eq!(est.coefficient(&p(&[1])), q(1, 1));
        assert_eq!(est.coefficient(&p(&[])), q(-1, 1));
    }

    #[test]
    fn second_moment_general_dims() {
        let calc = Calculus::default();
        for (n, big_n) in [(1, 1), (2, 3), (5, 2)] {
            let ratio = q(n as i64, big_n as i64);
            let m2 = calc.forward_map(&p(&[2]), dims(n, big_n)).unwrap();
            assert_eq!(m2.coefficient(&p(&[2])), q(1, 1));
            assert_eq!(m2.coefficient(&p(&[1])), q(2, 1) + &ratio * q(2, 1));
            assert_eq!(m2.coefficient(&p(&[])), q(1, 1) + &ratio);
            assert_eq!(m2.len(), 3);

            let est = calc.estimator_coeffs(&p(&[2]), dims(n, big_n)).unwrap();
            assert_eq!(est.coefficient(&p(&[2])), q(1, 1));
            assert_eq!(est.coefficient(&p(&[1])), -(q(2, 1) + &ratio * q(2, 1)));
            assert_eq!(est.coefficient(&p(&[])), q(1, 1) + &ratio);
        }
    }

    #[test]
    fn scalar_second_moment() {
        let calc = Calculus::default();
        let m2 = calc.forward_map(&p(&[2]), dims(1, 1)).unwrap();
        assert_eq!(m2.to_string(), "D(2) + 4*D(1) + 2");
        let est = calc.estimator_coeffs(&p(&[2]), dims(1, 1)).unwrap();
        assert_eq!(est.to_string(), "Y(2) - 4*Y(1) + 2");
    }

    #[test]
    fn stacked_examples() {
        let calc = Calculus::default();
        for (l1, l2) in [(1, 1), (2, 3), (4, 1)] {
            let s = StackingScheme::new(l1, l2).unwrap();
            let e = calc
                .stacked_estimator_coeffs(&p(&[1]), dims(3, 2), s)
                .unwrap();
            assert_eq!(e.coefficient(&p(&[1])), q(1, 1));
            assert_eq!(e.coefficient(&p(&[])), q(-1, 1));
        }
        let plain = calc.estimator_coeffs(&p(&[2]), dims(3, 2)).unwrap();
        let degenerate = calc
            .stacked_estimator_coeffs(&p(&[2]), dims(3, 2), StackingScheme::single())
            .unwrap();
        assert_eq!(plain, degenerate);

        let e = calc
            .stacked_estimator_coeffs(&p(&[2]), dims(1, 1), StackingScheme::new(2, 1).unwrap())
            .unwrap();
        assert_eq!(e.coefficient(&p(&[2])), q(1, 2));
        assert_eq!(e.coefficient(&p(&[1])), q(-3, 1));
        assert_eq!(e.coefficient(&p(&[])), q(3, 2));
    }

    #[test]
    fn noisy_examples() {
        let calc = Calculus::default();
        let sigma = 0.5;
        let e = calc
            .noisy_estimator_coeffs(&p(&[1]), dims(4, 4).with_sigma(sigma))
            .unwrap();
        assert_eq!(e.coefficient(&p(&[])), q(-1, 4));
        let e = calc
            .noisy_estimator_coeffs(&p(&[2]), dims(1, 1).with_sigma(sigma))
            .unwrap();
        assert_eq!(e.coefficient(&p(&[1])), q(-1, 1));
        assert_eq!(e.coefficient(&p(&[])), q(2, 16));
        for parts in PartitionIndex::up_to_weight(3) {
            let a = calc.estimator_coeffs(&parts, dims(2, 3)).unwrap();
            let b = calc.noisy_estimator_coeffs(&parts, dims(2, 3)).unwrap();
            assert_eq!(a, b);
        }
        assert!(matches!(
            calc.noisy_estimator_coeffs(&p(&[1]), dims(2, 2).with_sigma(0.0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn capacity_is_enforced() {
        let calc = Calculus::default();
        assert_eq!(
            calc.forward_map(&p(&[3, 2]), dims(2, 2)).unwrap_err(),
            Error::Capacity {
                weight: 5,
                p_max: 4
            }
        );
        let big = Calculus::new(Capacity::new(5));
        assert!(big.forward_map(&p(&[3, 2]), dims(2, 2)).is_ok());
    }

    #[test]
    fn scale_factors() {
        assert_eq!(scale_moments(&p(&[1]), 7), q(1, 1));
        assert_eq!(scale_moments(&p(&[3]), 2), q(4, 1));
        assert_eq!(scale_moments(&p(&[2, 1]), 3), q(3, 1));
        assert_eq!(scale_moments(&p(&[]), 3), q(1, 1));
    }

    #[test]
    fn empty_partition_is_constant() {
        let calc = Calculus::default();
        let e = calc.estimator_coeffs(&p(&[]), dims(2, 2)).unwrap();
        assert_eq!(e.coefficient(&p(&[])), q(1, 1));
        assert!(!e.coefficient(&p(&[])).is_zero());
    }

    #[test]
    fn table_sizes() {
        let calc = Calculus::default();
        assert_eq!(calc.sp_table(&p(&[3])).unwrap().diagram_count(), 34);
        assert_eq!(calc.spr_table(2).unwrap().diagram_count(), 48);
        assert!(calc.spr_table(2).unwrap().monomial_count() > 0);
    }
}

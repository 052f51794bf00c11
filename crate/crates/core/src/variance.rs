//! Exact variances of the additive-model estimators and the stacking
//! comparison built on them.
//!
//! The single-observation variance of `D̂_p` is a sum over the nonempty
//! partial permutations of two `p`-circles whose identifications all cross
//! between the circles. For a stacking `(L1, L2)` the same sum is evaluated at
//! the compound dimensions `(n L1, N L2)` on the compound moments
//! `F_μ = scale_moments(μ, L1) · D_μ`, times `L1^{2-2p}`.

use std::cmp::Ordering;
use std::io;

use num_rational::BigRational;

use crate::calculus::{scale_moments, Calculus, ModelDims, StackingKind, StackingScheme};
use crate::error::{Error, Result};
use crate::expr::{MomentExpression, MomentValues};
use crate::partition::PartitionIndex;
use crate::rational::{int, powi};
use crate::report::fmt_sig;

/// How `L` observations are combined into one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    Stacked(StackingScheme),
    Averaged { count: u64 },
}

impl Combination {
    pub fn count(&self) -> u64 {
        match self {
            Combination::Stacked(s) => s.count(),
            Combination::Averaged { count } => *count,
        }
    }

    pub fn kind(&self) -> StackingKind {
        match self {
            Combination::Stacked(s) => s.kind(),
            Combination::Averaged { .. } => StackingKind::Averaging,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub p: usize,
    pub dims: ModelDims,
    pub combination: Combination,
    pub value: f64,
    /// D-basis expression `value` was evaluated from; all coefficients are
    /// positive.
    pub expression: MomentExpression,
}

/// `lim L · v_{p,·,L}` for rectangular, vertical and horizontal stacking and
/// for averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticLimits {
    pub rect: f64,
    pub vert: f64,
    pub horiz: f64,
    pub avg: f64,
}

impl Calculus {
    /// `v_p` for a single observation, as a D-basis expression.
    pub fn variance_expression(&self, p: usize, dims: ModelDims) -> Result<MomentExpression> {
        self.spr_fold(p, dims.rows, dims.cols, |_| int(1))
    }

    /// Variance of `D̂_{p,L1,L2}` as a D-basis expression.
    pub fn stacked_variance_expression(
        &self,
        p: usize,
        dims: ModelDims,
        scheme: StackingScheme,
    ) -> Result<MomentExpression> {
        let c = dims.compound(scheme);
        let l1 = scheme.l1();
        let expr = self.spr_fold(p, c.rows, c.cols, |mu| scale_moments(mu, l1))?;
        Ok(expr.scaled(&powi(&int(l1), 2 - 2 * p as i32)))
    }

    pub fn stacked_variance(
        &self,
        p: usize,
        dims: ModelDims,
        scheme: StackingScheme,
        d_moments: &MomentValues,
    ) -> Result<VarianceReport> {
        let expression = self.stacked_variance_expression(p, dims, scheme)?;
        let value = expression.evaluate(d_moments)?;
        Ok(VarianceReport {
            p,
            dims,
            combination: Combination::Stacked(scheme),
            value,
            expression,
        })
    }

    /// Variance of the mean of `count` single-observation estimates.
    pub fn averaging_variance(
        &self,
        p: usize,
        dims: ModelDims,
        count: u64,
        d_moments: &MomentValues,
    ) -> Result<VarianceReport> {
        if count == 0 {
            return Err(Error::input("averaging needs at least one observation"));
        }
        let expression = self
            .variance_expression(p, dims)?
            .scaled(&int(count).recip());
        let value = expression.evaluate(d_moments)?;
        Ok(VarianceReport {
            p,
            dims,
            combination: Combination::Averaged { count },
            value,
            expression,
        })
    }

    pub fn asymptotic_limits(
        &self,
        p: usize,
        dims: ModelDims,
        d_moments: &MomentValues,
    ) -> Result<AsymptoticLimits> {
        if p == 0 {
            return Err(Error::input("moment order must be at least 1"));
        }
        let n = dims.rows as f64;
        let big_n = dims.cols as f64;
        let moment = |q: usize| {
            d_moments
                .single(q as u32)
                .ok_or_else(|| Error::MissingMoment(PartitionIndex::single(q as u32)))
        };
        if p == 1 {
            let v = (2.0 * moment(1)? + 1.0) / (n * big_n);
            return Ok(AsymptoticLimits {
                rect: v,
                vert: v,
                horiz: v,
                avg: v,
            });
        }
        let p2 = (p * p) as f64;
        let rect = 2.0 * p2 / (n * big_n) * moment(2 * p - 1)?;
        let lower = moment(2 * p - 2)?;
        let avg = self.variance_expression(p, dims)?.evaluate(d_moments)?;
        Ok(AsymptoticLimits {
            rect,
            vert: rect + p2 / (big_n * big_n) * lower,
            horiz: rect + p2 / (n * big_n) * lower,
            avg,
        })
    }

    /// Brute-force search over all factorizations of `count` by exact
    /// variance; ties go to the smaller `L1`.
    pub fn lowest_variance_stacking(
        &self,
        p: usize,
        dims: ModelDims,
        count: u64,
        d_moments: &MomentValues,
    ) -> Result<StackingScheme> {
        let mut best: Option<(StackingScheme, f64)> = None;
        for s in factorizations(count)? {
            let v = self.stacked_variance(p, dims, s, d_moments)?.value;
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((s, v));
            }
        }
        Ok(best.expect("at least one factorization").0)
    }

    /// One row per factorization of each `L` in `counts`.
    pub fn variance_curve(
        &self,
        p: usize,
        dims: ModelDims,
        counts: &[u64],
        d_moments: &MomentValues,
    ) -> Result<Vec<CurvePoint>> {
        let mut rows = Vec::new();
        for &l in counts {
            for s in factorizations(l)? {
                let report = self.stacked_variance(p, dims, s, d_moments)?;
                rows.push(CurvePoint {
                    scheme: s,
                    aspect: aspect_ratio(dims, s),
                    variance: report.value,
                });
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub scheme: StackingScheme,
    pub aspect: f64,
    pub variance: f64,
}

/// Writes `L,L1,L2,c,kind,variance,L_times_variance`.
pub fn write_curve_csv<W: io::Write>(points: &[CurvePoint], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["L", "L1", "L2", "c", "kind", "variance", "L_times_variance"])?;
    for pt in points {
        let l = pt.scheme.count();
        w.write_record([
            l.to_string(),
            pt.scheme.l1().to_string(),
            pt.scheme.l2().to_string(),
            fmt_sig(pt.aspect),
            pt.scheme.kind().to_string(),
            fmt_sig(pt.variance),
            fmt_sig(pt.variance * l as f64),
        ])?;
    }
    w.flush()
}

/// Every `(L1, L2)` with `L1 · L2 = count`, ascending in `L1`.
pub fn factorizations(count: u64) -> Result<Vec<StackingScheme>> {
    if count == 0 {
        return Err(Error::input("number of observations must be at least 1"));
    }
    Ok((1..=count)
        .filter(|l1| count.is_multiple_of(*l1))
        .map(|l1| StackingScheme::new(l1, count / l1).expect("nonzero factors"))
        .collect())
}

/// `c = n L1 / (N L2)`.
pub fn aspect_ratio(dims: ModelDims, scheme: StackingScheme) -> f64 {
    (dims.rows * scheme.l1()) as f64 / (dims.cols * scheme.l2()) as f64
}

/// `max(c, 1/c)` as an exact fraction; orders stackings like `|log c|`.
fn squareness(dims: ModelDims, scheme: StackingScheme) -> BigRational {
    let c = BigRational::new(
        (dims.rows * scheme.l1()).into(),
        (dims.cols * scheme.l2()).into(),
    );
    let inv = c.recip();
    if c >= inv {
        c
    } else {
        inv
    }
}

/// Compares two stackings by how square their compound matrices are.
pub fn compare_squareness(dims: ModelDims, a: StackingScheme, b: StackingScheme) -> Ordering {
    squareness(dims, a).cmp(&squareness(dims, b))
}

/// The factorization of `count` whose compound matrix is closest to square,
/// i.e. minimizing `|log(n L1 / (N L2))|`; ties go to the smaller `L1`.
pub fn optimal_stacking(dims: ModelDims, count: u64) -> Result<StackingScheme> {
    let all = factorizations(count)?;
    Ok(all
        .into_iter()
        .min_by(|a, b| compare_squareness(dims, *a, *b).then(a.l1().cmp(&b.l1())))
        .expect("at least one factorization"))
}

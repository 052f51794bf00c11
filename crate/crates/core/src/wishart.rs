//! Two-stage estimation for `Y = D X1 + X2`.
//!
//! Stage one treats `D X1` as the signal of an additive model and estimates
//! the mixed moments of `S = D ((1/N') X1 X1ᴴ) Dᴴ` with the additive
//! estimators. Stage two inverts the complex Wishart moment map
//!
//! ```text
//! E[Π_j tr_n(S^{p_j})] = Σ_{σ ∈ S_w} N'^{#σ - w} n^{#(γσ) - k} Δ_{type(γσ)}
//! ```
//!
//! where `γ` has cycle type `(p_1, ..., p_k)` and
//! `Δ_λ = Π tr_n((D Dᴴ)^{λ_i})`. Mixed `Δ_λ` are separate unknowns.

use std::collections::BTreeMap;
use std::io;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::Zero;

use crate::calculus::{Calculus, ModelDims};
use crate::error::{Error, Result};
use crate::expr::Basis;
use crate::matrix::{moment_values, stack, ComplexMatrixBuffer};
use crate::partition::PartitionIndex;
use crate::rational::{self, int, powi};
use crate::report::fmt_sig;
use crate::StackingScheme;

/// Moments for every partition of weight `1..=p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub basis: Basis,
    entries: BTreeMap<PartitionIndex, f64>,
}

impl MomentVector {
    pub fn new(basis: Basis, entries: BTreeMap<PartitionIndex, f64>) -> Self {
        Self { basis, entries }
    }

    pub fn get(&self, partition: &PartitionIndex) -> Option<f64> {
        self.entries.get(partition).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartitionIndex, &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `partition,value` rows.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["partition", "value"])?;
        for (p, v) in &self.entries {
            w.write_record([p.to_string(), fmt_sig(*v)])?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    /// Δ-moments to S-moments.
    Forward,
    /// S-moments to Δ-moments.
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WishartMap {
    pub p: usize,
    pub n: u64,
    pub n_eff: u64,
    pub direction: MapDirection,
    index: Vec<PartitionIndex>,
    matrix: Vec<Vec<BigRational>>,
}

impl WishartMap {
    /// Row/column order: weight, then lexicographic.
    pub fn index(&self) -> &[PartitionIndex] {
        &self.index
    }

    pub fn coefficient(&self, row: &PartitionIndex, col: &PartitionIndex) -> Option<BigRational> {
        let r = self.index.binary_search(row).ok()?;
        let c = self.index.binary_search(col).ok()?;
        Some(self.matrix[r][c].clone())
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.matrix
    }

    pub fn determinant(&self) -> BigRational {
        rational::determinant(&self.matrix)
    }

    /// Applies the map to a vector over the same index.
    pub fn apply(&self, input: &MomentVector) -> Result<MomentVector> {
        let values: Vec<f64> = self
            .index
            .iter()
            .map(|p| input.get(p).ok_or_else(|| Error::MissingMoment(p.clone())))
            .collect::<Result<_>>()?;
        let out = self
            .index
            .iter()
            .zip(&self.matrix)
            .map(|(p, row)| {
                let v = row
                    .iter()
                    .zip(&values)
                    .map(|(c, x)| rational::to_f64(c) * x)
                    .sum();
                (p.clone(), v)
            })
            .collect();
        let basis = match self.direction {
            MapDirection::Forward => Basis::S,
            MapDirection::Inverse => Basis::Delta,
        };
        Ok(MomentVector::new(basis, out))
    }

    fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .iter()
            .map(|row| row.iter().map(rational::to_f64).collect())
            .collect()
    }
}

/// Permutation with cycles `(0..p_1)(p_1..p_1+p_2)...`.
fn canonical_permutation(parts: &[u32]) -> Vec<usize> {
    let mut perm = Vec::new();
    let mut start = 0;
    for &len in parts {
        let len = len as usize;
        perm.extend((0..len).map(|i| start + (i + 1) % len));
        start += len;
    }
    perm
}

fn cycle_lengths(perm: &[usize]) -> Vec<u32> {
    let mut seen = vec![false; perm.len()];
    let mut lengths = Vec::new();
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut x = s;
        while !seen[x] {
            seen[x] = true;
            x = perm[x];
            len += 1;
        }
        lengths.push(len);
    }
    lengths
}

pub fn wishart_forward(calc: &Calculus, p: usize, n: u64, n_eff: u64) -> Result<WishartMap> {
    calc.capacity().check(p)?;
    if p == 0 || n == 0 || n_eff == 0 {
        return Err(Error::input("order and dimensions must be at least 1"));
    }
    let index = PartitionIndex::up_to_weight(p);
    let pos: BTreeMap<&PartitionIndex, usize> =
        index.iter().enumerate().map(|(i, q)| (q, i)).collect();
    let n_r = int(n);
    let ne_r = int(n_eff);
    let mut matrix = vec![vec![BigRational::zero(); index.len()]; index.len()];
    for (r, target) in index.iter().enumerate() {
        let w = target.weight();
        let k = target.len() as i32;
        let gamma = canonical_permutation(target.parts());
        for sigma in (0..w).permutations(w) {
            let composed: Vec<usize> = sigma.iter().map(|&s| gamma[s]).collect();
            let blocks = cycle_lengths(&composed);
            let coeff = powi(&ne_r, cycle_lengths(&sigma).len() as i32 - w as i32)
                * powi(&n_r, blocks.len() as i32 - k);
            let col = pos[&PartitionIndex::from_positive(blocks)];
            matrix[r][col] += coeff;
        }
    }
    Ok(WishartMap {
        p,
        n,
        n_eff,
        direction: MapDirection::Forward,
        index,
        matrix,
    })
}

pub fn invert_map(map: &WishartMap) -> Result<WishartMap> {
    let inv = rational::invert(&map.matrix).ok_or(Error::Singular { n_eff: map.n_eff })?;
    Ok(WishartMap {
        direction: match map.direction {
            MapDirection::Forward => MapDirection::Inverse,
            MapDirection::Inverse => MapDirection::Forward,
        },
        matrix: inv,
        ..map.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoStageMode {
    /// One estimate from the `n × (N L)` horizontal compound.
    HorizontalStack,
    /// Mean of per-observation estimates.
    Average,
}

impl TwoStageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TwoStageMode::HorizontalStack => "stack",
            TwoStageMode::Average => "average",
        }
    }
}

/// Precomputed two-stage estimator for a fixed `(n, N, L, p, mode)`.
#[derive(Debug, Clone)]
pub struct TwoStageEstimator {
    mode: TwoStageMode,
    rows: usize,
    cols: usize,
    count: usize,
    p: usize,
    index: Vec<PartitionIndex>,
    stage_one: Vec<Vec<(PartitionIndex, f64)>>,
    stage_two: Vec<Vec<f64>>,
}

impl TwoStageEstimator {
    /// `rows × cols` is the shape of one observation, `count` the number of
    /// observations per estimate.
    pub fn new(
        calc: &Calculus,
        rows: usize,
        cols: usize,
        count: usize,
        p: usize,
        mode: TwoStageMode,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::input("two-stage estimation needs observations"));
        }
        let stage_cols = match mode {
            TwoStageMode::HorizontalStack => cols * count,
            TwoStageMode::Average => cols,
        };
        let dims = ModelDims::new(rows as u64, stage_cols as u64)?;
        let forward = wishart_forward(calc, p, rows as u64, stage_cols as u64)?;
        let inverse = invert_map(&forward)?;
        let stage_one = forward
            .index()
            .iter()
            .map(|part| Ok(calc.estimator_coeffs(part, dims)?.to_f64_terms()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode,
            rows,
            cols,
            count,
            p,
            index: forward.index().to_vec(),
            stage_one,
            stage_two: inverse.to_f64_rows(),
        })
    }

    pub fn mode(&self) -> TwoStageMode {
        self.mode
    }

    fn s_estimates(&self, y: &ComplexMatrixBuffer, col_norm: f64) -> Vec<f64> {
        let values = moment_values(y, col_norm, self.p);
        self.stage_one
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(part, c)| c * values.get(part).expect("orders up to p computed"))
                    .sum()
            })
            .collect()
    }

    /// Unbiased estimates of the S-moments (stage one only).
    pub fn estimate_s(&self, observations: &[ComplexMatrixBuffer]) -> Result<MomentVector> {
        if observations.len() != self.count {
            return Err(Error::input(format!(
                "expected {} observations, got {}",
                self.count,
                observations.len()
            )));
        }
        if observations
            .iter()
            .any(|o| o.rows() != self.rows || o.cols() != self.cols)
        {
            return Err(Error::input(format!(
                "observations must be {}x{}",
                self.rows, self.cols
            )));
        }
        let s_hat = match self.mode {
            TwoStageMode::HorizontalStack => {
                let compound = stack(
                    observations,
                    StackingScheme::new(1, self.count as u64).expect("count >= 1"),
                )?;
                self.s_estimates(&compound, (self.cols * self.count) as f64)
            }
            TwoStageMode::Average => {
                let mut acc = vec![0.0; self.index.len()];
                for obs in observations {
                    for (a, v) in acc.iter_mut().zip(self.s_estimates(obs, self.cols as f64)) {
                        *a += v;
                    }
                }
                acc.iter().map(|a| a / self.count as f64).collect()
            }
        };
        Ok(MomentVector::new(
            Basis::S,
            self.index.iter().cloned().zip(s_hat).collect(),
        ))
    }

    /// Estimates of every `Δ_λ`, weight `1..=p`.
    pub fn estimate(&self, observations: &[ComplexMatrixBuffer]) -> Result<MomentVector> {
        let s_hat = self.estimate_s(observations)?;
        let s: Vec<f64> = self.index.iter().map(|p| s_hat.get(p).unwrap()).collect();
        let delta = self
            .stage_two
            .iter()
            .map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum());
        Ok(MomentVector::new(
            Basis::Delta,
            self.index.iter().cloned().zip(delta).collect(),
        ))
    }
}

/// One-shot two-stage estimate from observations of `Y = D X1 + X2`.
pub fn two_stage_estimate(
    calc: &Calculus,
    observations: &[ComplexMatrixBuffer],
    p: usize,
    mode: TwoStageMode,
) -> Result<MomentVector> {
    let first = observations
        .first()
        .ok_or_else(|| Error::input("two-stage estimation needs observations"))?;
    TwoStageEstimator::new(
        calc,
        first.rows(),
        first.cols(),
        observations.len(),
        p,
        mode,
    )?
    .estimate(observations)
}

/// `Δ_q = tr_n((D Dᴴ)^q)` for `q = 1..=max_order`.
pub fn delta_moments(d: &ComplexMatrixBuffer, max_order: usize) -> Vec<f64> {
    crate::matrix::trace_powers(d, 1.0, max_order)
}

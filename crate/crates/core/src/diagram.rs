//! Partial permutations over multi-circle diagrams.
//!
//! A diagram consists of `k` circles, circle `i` carrying `2 p_i` edges. Edges
//! and vertices are labelled `1..=2p` consecutively circle by circle, edge `e`
//! bordering vertices `e` and `e + 1` (wrapping around within its circle).
//! Odd edges stand for factors of the observation, even edges for factors of
//! its adjoint. A partial permutation glues even edge `2i` to odd edge
//! `2q(i) - 1`; glued edges are the random (noise) edges, the rest are
//! deterministic.
//!
//! Internally everything is 0-based: pair `i` owns odd edge `2i` and even
//! edge `2i + 1`, and vertex `v` sits between edges `v - 1` and `v`.

use itertools::Itertools;

use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::partition::PartitionIndex;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiagramShape {
    pair_counts: Vec<usize>,
    /// `successor[v]` is the vertex following `v` on its circle.
    successor: Vec<usize>,
}

impl DiagramShape {
    pub fn new(pair_counts: Vec<usize>) -> Result<Self> {
        if pair_counts.is_empty() {
            return Err(Error::input("a diagram needs at least one circle"));
        }
        if pair_counts.contains(&0) {
            return Err(Error::input("every circle needs at least one edge pair"));
        }
        let mut successor = Vec::with_capacity(2 * pair_counts.iter().sum::<usize>());
        let mut offset = 0;
        for &p in &pair_counts {
            let len = 2 * p;
            successor.extend((0..len).map(|v| offset + (v + 1) % len));
            offset += len;
        }
        Ok(Self {
            pair_counts,
            successor,
        })
    }

    /// One circle per part of `parts`.
    pub fn for_partition(parts: &PartitionIndex) -> Result<Self> {
        Self::new(parts.parts().iter().map(|&p| p as usize).collect())
    }

    /// Two circles of `p` pairs each, the layout behind the variance sum.
    pub fn two_circles(p: usize) -> Result<Self> {
        Self::new(vec![p, p])
    }

    pub fn pair_counts(&self) -> &[usize] {
        &self.pair_counts
    }

    pub fn total_pairs(&self) -> usize {
        self.successor.len() / 2
    }

    pub fn circle_count(&self) -> usize {
        self.pair_counts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.successor.len()
    }
}

/// A bijection `q` between two equal-size subsets of the pair indices.
///
/// Stored as `(i, q(i))` pairs sorted by `i`, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PartialPermutation {
    pairs: Vec<(usize, usize)>,
}

impl PartialPermutation {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds from 0-based `(i, q(i))` pairs; rejects non-injective maps.
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        let domain_ok = pairs.windows(2).all(|w| w[0].0 != w[1].0);
        let image_ok = pairs.iter().map(|&(_, j)| j).all_unique();
        if !domain_ok || !image_ok {
            return Err(Error::input("partial permutation must be one-to-one"));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `ρ1`, 0-based, ascending.
    pub fn rho1(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(i, _)| i).collect()
    }

    /// `ρ2`, 0-based, ascending.
    pub fn rho2(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .map(|&(_, j)| j)
            .sorted_unstable()
            .collect()
    }

    pub fn image(&self, i: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&i, |&(a, _)| a)
            .ok()
            .map(|k| self.pairs[k].1)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Graph-derived counts of one glued diagram.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiagramSummary {
    pub rho1_size: usize,
    /// Deterministic-component sizes halved; these index the D-moment.
    pub sigma_block_halves: PartitionIndex,
    pub sigma_count: usize,
    /// Classes of even (column-index) vertices.
    pub even_classes: usize,
    /// Even classes bordering at least one deterministic edge.
    pub even_classes_det: usize,
    /// Classes of odd (row-index) vertices.
    pub odd_classes: usize,
    pub odd_classes_det: usize,
}

/// Number of partial permutations of `p` elements, `Σ_a C(p,a)² a!`.
pub fn sp_count(p: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut fact: u128 = 1;
    for a in 0..=p {
        if a > 0 {
            binom = binom * (p - a + 1) as u128 / a as u128;
            fact *= a as u128;
        }
        total += binom * binom * fact;
    }
    total
}

/// Every partial bijection from `domain` into `codomain`: by size, then
/// domain subset, then image subset (lexicographic), then bijection in
/// lexicographic image order.
fn partial_bijections(
    domain: Vec<usize>,
    codomain: Vec<usize>,
) -> impl Iterator<Item = Vec<(usize, usize)>> + Clone {
    let max = domain.len().min(codomain.len());
    (0..=max).flat_map(move |a| {
        let codomain = codomain.clone();
        domain
            .clone()
            .into_iter()
            .combinations(a)
            .flat_map(move |dom| {
                codomain
                    .clone()
                    .into_iter()
                    .combinations(a)
                    .flat_map(move |img| {
                        let dom = dom.clone();
                        img.into_iter()
                            .permutations(a)
                            .map(move |perm| dom.iter().copied().zip(perm).collect::<Vec<_>>())
                    })
            })
    })
}

/// Lazily enumerates every partial permutation of the shape's pairs, each
/// exactly once, in a fixed order.
pub fn enumerate_sp(shape: &DiagramShape) -> impl Iterator<Item = PartialPermutation> + Clone {
    let p = shape.total_pairs();
    partial_bijections((0..p).collect(), (0..p).collect())
        .map(|pairs| PartialPermutation::from_pairs(pairs).expect("generated bijection"))
}

/// Partial permutations of `2p` pairs (two circles of `p`) whose every
/// identification crosses between the halves. Includes the empty one.
pub fn enumerate_spr(p: usize) -> impl Iterator<Item = PartialPermutation> + Clone {
    let first: Vec<usize> = (0..p).collect();
    let second: Vec<usize> = (p..2 * p).collect();
    let backward = partial_bijections(second.clone(), first.clone());
    partial_bijections(first, second).flat_map(move |fwd| {
        backward.clone().map(move |bwd| {
            let mut pairs = fwd.clone();
            pairs.extend(bwd);
            PartialPermutation::from_pairs(pairs).expect("generated bijection")
        })
    })
}

/// Glues the diagram according to `pp` and returns its counts.
pub fn summarize(shape: &DiagramShape, pp: &PartialPermutation) -> Result<DiagramSummary> {
    let pairs = shape.total_pairs();
    let edges = shape.edge_count();
    let succ = &shape.successor;

    let mut vertices = DisjointSet::new(edges);
    let mut random = vec![false; edges];
    for &(i, j) in pp.pairs() {
        if i >= pairs || j >= pairs {
            return Err(Error::input(format!(
                "identification ({}, {}) out of range for {pairs} pairs",
                i + 1,
                j + 1
            )));
        }
        let even_edge = 2 * i + 1;
        let odd_edge = 2 * j;
        random[even_edge] = true;
        random[odd_edge] = true;
        // opposite orientation: v_{2i} ~ v_{2j}, v_{2i+1} ~ v_{2j-1} (1-based)
        vertices.union(even_edge, odd_edge + 1);
        vertices.union(succ[even_edge], odd_edge);
    }

    let roots: Vec<usize> = (0..edges).map(|v| vertices.find(v)).collect();
    for (v, &r) in roots.iter().enumerate() {
        assert_eq!(v % 2, r % 2, "vertex class mixes parities");
    }

    let mut borders_det = vec![false; edges];
    let mut components = vertices.clone();
    for e in (0..edges).filter(|&e| !random[e]) {
        borders_det[roots[e]] = true;
        borders_det[roots[succ[e]]] = true;
        components.union(e, succ[e]);
    }

    let (mut even_classes, mut even_det, mut odd_classes, mut odd_det) = (0, 0, 0, 0);
    for v in (0..edges).filter(|&v| roots[v] == v) {
        // 0-based odd index = 1-based even vertex
        if v % 2 == 1 {
            even_classes += 1;
            even_det += usize::from(borders_det[v]);
        } else {
            odd_classes += 1;
            odd_det += usize::from(borders_det[v]);
        }
    }

    let mut block_sizes = std::collections::BTreeMap::<usize, u32>::new();
    for e in (0..edges).filter(|&e| !random[e]) {
        *block_sizes.entry(components.find(e)).or_default() += 1;
    }
    let halves: Vec<u32> = block_sizes
        .values()
        .map(|&size| {
            assert!(size % 2 == 0, "deterministic component with odd edge count");
            size / 2
        })
        .collect();

    Ok(DiagramSummary {
        rho1_size: pp.len(),
        sigma_count: halves.len(),
        sigma_block_halves: PartitionIndex::from_positive(halves),
        even_classes,
        even_classes_det: even_det,
        odd_classes,
        odd_classes_det: odd_det,
    })
}

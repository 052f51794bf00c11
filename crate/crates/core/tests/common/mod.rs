//! Independent reference computations shared by the integration tests and
//! the acceptance runner.
#![allow(dead_code)]

use std::collections::HashMap;

use momentstack::{
    scale_moments, Basis, Calculus, Capacity, ModelDims, MomentExpression, MomentValues,
    PartitionIndex, Result, StackingScheme,
};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn part(parts: &[u32]) -> PartitionIndex {
    PartitionIndex::new(parts.to_vec()).unwrap()
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// D = diag(2, 1, 1, 0.5), n = N = 4.
pub fn example_diag() -> [f64; 4] {
    [2.0, 1.0, 1.0, 0.5]
}

/// Single moments `tr_n(((1/N) D Dᴴ)^q)`, `q = 1..=max`, of a real diagonal.
pub fn diag_moments(diag: &[f64], n: usize, big_n: usize, max: usize) -> MomentValues {
    let singles: Vec<f64> = (1..=max as i32)
        .map(|k| {
            diag.iter()
                .map(|d| (d * d / big_n as f64).powi(k))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    MomentValues::from_singles(&singles)
}

/// Visits every assignment of `ranges.len()` indices.
fn for_each_assignment(ranges: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; ranges.len()];
    if ranges.contains(&0) {
        return;
    }
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < ranges[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn factorial(k: u64) -> u64 {
    (1..=k).product()
}

/// `E[Π x_e^{a_e} conj(x_e)^{b_e}]` for i.i.d. standard complex Gaussians:
/// `Π a_e!` when `a_e = b_e` for every entry, zero otherwise.
fn complex_gaussian_moment(plain: &[(usize, usize)], conj: &[(usize, usize)]) -> u64 {
    let mut balance: HashMap<(usize, usize), (u64, u64)> = HashMap::new();
    for e in plain {
        balance.entry(*e).or_default().0 += 1;
    }
    for e in conj {
        balance.entry(*e).or_default().1 += 1;
    }
    balance
        .values()
        .map(|&(a, b)| if a == b { factorial(a) } else { 0 })
        .product()
}

/// `E[Π_j tr_n(((1/N) Y Yᴴ)^{p_j})]` for `Y = D + X`, by summing every index
/// and every D/X choice and applying the Gaussian moment rule to each term.
pub fn wick_forward(d: &[Vec<Complex64>], big_n: usize, parts: &[u32]) -> f64 {
    let n = d.len();
    // factor = (conjugated, row var, col var); vars: rows first then cols
    let w: usize = parts.iter().map(|&p| p as usize).sum();
    let mut factors = Vec::new();
    let mut offset = 0;
    for &p in parts {
        let p = p as usize;
        for t in 0..p {
            factors.push((false, offset + t, w + offset + t));
            factors.push((true, offset + (t + 1) % p, w + offset + t));
        }
        offset += p;
    }
    let ranges: Vec<usize> = (0..2 * w).map(|v| if v < w { n } else { big_n }).collect();
    let mut total = Complex64::zero();
    for_each_assignment(&ranges, |idx| {
        for mask in 0u32..(1 << factors.len()) {
            let mut det = Complex64::one();
            let mut plain = Vec::new();
            let mut conj = Vec::new();
            for (f, &(is_conj, r, c)) in factors.iter().enumerate() {
                let entry = (idx[r], idx[c]);
                if mask & (1 << f) != 0 {
                    if is_conj {
                        conj.push(entry);
                    } else {
                        plain.push(entry);
                    }
                } else {
                    let v = d[entry.0][entry.1];
                    det *= if is_conj { v.conj() } else { v };
                }
            }
            if det.is_zero() || plain.len() != conj.len() {
                continue;
            }
            let g = complex_gaussian_moment(&plain, &conj);
            if g != 0 {
                total += det * g as f64;
            }
        }
    });
    let norm: f64 = parts
        .iter()
        .map(|&p| n as f64 * (big_n as f64).powi(p as i32))
        .product();
    total.re / norm
}

/// Mixed moments `Π tr_n(((1/N) D Dᴴ)^{p_j})` of a dense complex `D`.
pub fn dense_moment(d: &[Vec<Complex64>], big_n: usize, parts: &[u32]) -> f64 {
    let n = d.len();
    let mut gram = vec![vec![Complex64::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            gram[i][j] = (0..big_n)
                .map(|k| d[i][k] * d[j][k].conj())
                .sum::<Complex64>()
                / big_n as f64;
        }
    }
    parts
        .iter()
        .map(|&p| {
            let mut power = gram.clone();
            for _ in 1..p {
                power = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| (0..n).map(|k| power[i][k] * gram[k][j]).sum())
                            .collect()
                    })
                    .collect();
            }
            (0..n).map(|i| power[i][i].re).sum::<f64>() / n as f64
        })
        .product()
}

/// `E[Π_j tr_n(S^{p_j})]` for `S = D ((1/N') X Xᴴ) Dᴴ` with real rational
/// `D` (`n × m`), by explicit index sums.
pub fn wick_wishart(d: &[Vec<BigRational>], n_eff: usize, parts: &[u32]) -> BigRational {
    let n = d.len();
    let m = d[0].len();
    let w: usize = parts.iter().map(|&p| p as usize).sum();
    // vars: r_t (n), a_t (m), a'_t (m), b_t (N') for every global step t
    let mut next_r = Vec::with_capacity(w);
    let mut offset = 0;
    for &p in parts {
        let p = p as usize;
        next_r.extend((0..p).map(|t| offset + (t + 1) % p));
        offset += p;
    }
    let mut ranges = vec![n; w];
    ranges.extend(vec![m; 2 * w]);
    ranges.extend(vec![n_eff; w]);
    let mut total = BigRational::zero();
    for_each_assignment(&ranges, |idx| {
        let r = &idx[..w];
        let a = &idx[w..2 * w];
        let a2 = &idx[2 * w..3 * w];
        let b = &idx[3 * w..];
        let plain: Vec<_> = (0..w).map(|t| (a[t], b[t])).collect();
        let conj: Vec<_> = (0..w).map(|t| (a2[t], b[t])).collect();
        let g = complex_gaussian_moment(&plain, &conj);
        if g == 0 {
            return;
        }
        let mut prod = BigRational::from_integer(BigInt::from(g));
        for t in 0..w {
            prod *= &d[r[t]][a[t]] * &d[r[next_r[t]]][a2[t]];
            if prod.is_zero() {
                return;
            }
        }
        total += prod;
    });
    let mut norm = BigRational::one();
    for &p in parts {
        norm *= BigRational::from_integer(BigInt::from(n as u64 * (n_eff as u64).pow(p)));
    }
    total / norm
}

/// `Δ_λ = Π tr_n((D Dᴴ)^{λ_i})` for real rational `D`.
pub fn exact_delta(d: &[Vec<BigRational>], parts: &[u32]) -> BigRational {
    let n = d.len();
    let m = d[0].len();
    let gram: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..m).map(|k| &d[i][k] * &d[j][k]).sum())
                .collect()
        })
        .collect();
    let mut out = BigRational::one();
    for &p in parts {
        let mut power = gram.clone();
        for _ in 1..p {
            power = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|k| &power[i][k] * &gram[k][j]).sum())
                        .collect()
                })
                .collect();
        }
        let tr: BigRational = (0..n).map(|i| power[i][i].clone()).sum();
        out *= tr / BigRational::from_integer(BigInt::from(n as u64));
    }
    out
}

/// Engine large enough for products of two weight-`p_max` moments.
pub fn wide_calculus(p_max: usize) -> Calculus {
    Calculus::new(Capacity::new(2 * p_max))
}

/// `F_μ → scale_moments(μ, L1) D_μ`: compound moments in terms of `D`.
fn compound_to_d(expr: &MomentExpression, l1: u64) -> MomentExpression {
    let mut out = MomentExpression::zero(Basis::D);
    for (mu, c) in expr.terms() {
        out.add_term(mu.clone(), c * scale_moments(mu, l1));
    }
    out
}

/// Expected value of the stacked estimator of `D_parts`, in the D-basis.
pub fn estimator_expectation(
    calc: &Calculus,
    parts: &PartitionIndex,
    dims: ModelDims,
    scheme: StackingScheme,
) -> Result<MomentExpression> {
    let c = dims.compound(scheme);
    let est = calc.stacked_estimator_coeffs(parts, dims, scheme)?;
    let compound = est.compose(|lambda| calc.forward_map(lambda, c))?;
    Ok(compound_to_d(&compound, scheme.l1()))
}

/// `Var(D̂_p) = E[D̂_p²] - D_p²` with `E[Y_λ Y_μ] = M_{λ⊎μ}`, as a D-basis
/// expression.
pub fn variance_via_forward(
    calc: &Calculus,
    p: usize,
    dims: ModelDims,
    scheme: StackingScheme,
) -> Result<MomentExpression> {
    let target = PartitionIndex::single(p as u32);
    let c = dims.compound(scheme);
    let est = calc.stacked_estimator_coeffs(&target, dims, scheme)?;
    let mut second = MomentExpression::zero(Basis::D);
    for (lambda, cl) in est.terms() {
        for (mu, cm) in est.terms() {
            let m = calc.forward_map(&lambda.merge(mu), c)?;
            second.add_scaled(&m, &(cl * cm));
        }
    }
    let mut out = compound_to_d(&second, scheme.l1());
    out.add_term(target.merge(&target), -BigRational::one());
    Ok(out)
}

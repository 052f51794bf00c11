//! Seeded Monte-Carlo runs of the estimators.
//!
//! Run `r` draws its observations from streams `(r, 0), (r, 1), ...` of the
//! master seed, so results do not depend on thread scheduling. Different
//! estimators given the same seed see the same observations.

use rayon::prelude::*;

use crate::calculus::{Calculus, ModelDims, StackingScheme};
use crate::error::{Error, Result};
use crate::matrix::{moment_values, stack, ComplexMatrixBuffer};
use crate::partition::PartitionIndex;
use crate::sampling::SeededSampler;
use crate::wishart::{TwoStageEstimator, TwoStageMode};

pub const DEFAULT_SEED: u64 = 20_240_917;

/// Model `Y = D + σX` with a fixed `D`.
#[derive(Debug, Clone)]
pub struct AdditiveModel {
    pub d: ComplexMatrixBuffer,
    pub sigma: f64,
}

impl AdditiveModel {
    pub fn new(d: ComplexMatrixBuffer, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::input(format!(
                "noise scale must be positive, got {sigma}"
            )));
        }
        Ok(Self { d, sigma })
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims::new(self.d.rows() as u64, self.d.cols() as u64)
            .expect("matrix buffers are nonempty")
            .with_sigma(self.sigma)
    }

    fn observations(&self, seed: u64, run: u64, count: u64) -> Result<Vec<ComplexMatrixBuffer>> {
        (0..count)
            .map(|i| {
                SeededSampler::for_observation(seed, run, i).observe_additive(&self.d, self.sigma)
            })
            .collect()
    }
}

/// `D̂_p` from one stacked batch, with coefficients converted once.
#[derive(Debug, Clone)]
pub struct StackedEstimator {
    scheme: StackingScheme,
    order: usize,
    cols: f64,
    /// `σ^{2 |parts|}`; the estimator runs on `Y / σ`.
    rescale: f64,
    sigma: f64,
    terms: Vec<(PartitionIndex, f64)>,
}

impl StackedEstimator {
    pub fn new(
        calc: &Calculus,
        parts: &PartitionIndex,
        dims: ModelDims,
        scheme: StackingScheme,
    ) -> Result<Self> {
        if dims.sigma.is_nan() || dims.sigma <= 0.0 {
            return Err(Error::input(format!(
                "noise scale must be positive, got {}",
                dims.sigma
            )));
        }
        let expr = calc.stacked_estimator_coeffs(parts, dims, scheme)?;
        Ok(Self {
            scheme,
            order: parts.parts().first().copied().unwrap_or(0) as usize,
            cols: (dims.cols * scheme.l2()) as f64,
            rescale: dims.sigma.powi(2 * parts.weight() as i32),
            sigma: dims.sigma,
            terms: expr.to_f64_terms(),
        })
    }

    pub fn scheme(&self) -> StackingScheme {
        self.scheme
    }

    pub fn estimate(&self, observations: &[ComplexMatrixBuffer]) -> Result<f64> {
        let compound = stack(observations, self.scheme)?.scale(1.0 / self.sigma);
        let values = moment_values(&compound, self.cols, self.order);
        let mut acc = 0.0;
        for (p, c) in &self.terms {
            acc += c * values
                .get(p)
                .ok_or_else(|| Error::MissingMoment(p.clone()))?;
        }
        Ok(acc * self.rescale)
    }
}

/// `runs` independent stacked estimates of `D_p`.
pub fn stacked_runs(
    calc: &Calculus,
    model: &AdditiveModel,
    p: usize,
    scheme: StackingScheme,
    runs: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let est = StackedEstimator::new(calc, &single(p)?, model.dims(), scheme)?;
    (0..runs)
        .into_par_iter()
        .map(|r| est.estimate(&model.observations(seed, r, scheme.count())?))
        .collect()
}

/// `runs` independent averages of `count` single-observation estimates.
pub fn averaged_runs(
    calc: &Calculus,
    model: &AdditiveModel,
    p: usize,
    count: u64,
    runs: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::input("averaging needs at least one observation"));
    }
    let est = StackedEstimator::new(calc, &single(p)?, model.dims(), StackingScheme::single())?;
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let obs = model.observations(seed, r, count)?;
            let mut sum = 0.0;
            for o in obs {
                sum += est.estimate(std::slice::from_ref(&o))?;
            }
            Ok(sum / count as f64)
        })
        .collect()
}

/// One `D̂_{p,√L,√L}` per entry of `schedule`, each from fresh observations
/// (entry `i` uses run `i`).
pub fn square_stacking_estimates(
    calc: &Calculus,
    model: &AdditiveModel,
    p: usize,
    schedule: &[u64],
    seed: u64,
) -> Result<Vec<f64>> {
    let schemes: Vec<StackingScheme> = schedule
        .iter()
        .map(|&l| {
            let root = l.isqrt();
            if l == 0 || root * root != l {
                return Err(Error::input(format!("{l} is not a positive square")));
            }
            StackingScheme::new(root, root)
        })
        .collect::<Result<_>>()?;
    let parts = single(p)?;
    schemes
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let est = StackedEstimator::new(calc, &parts, model.dims(), s)?;
            est.estimate(&model.observations(seed, i as u64, s.count())?)
        })
        .collect()
}

/// Model `Y = D X1 + X2`.
#[derive(Debug, Clone)]
pub struct WishartModel {
    /// `n × m`
    pub d: ComplexMatrixBuffer,
    /// `N`
    pub cols: usize,
}

impl WishartModel {
    pub fn new(d: ComplexMatrixBuffer, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::input("observation needs at least one column"));
        }
        Ok(Self { d, cols })
    }

    pub fn observations(
        &self,
        seed: u64,
        run: u64,
        count: u64,
    ) -> Result<Vec<ComplexMatrixBuffer>> {
        (0..count)
            .map(|i| {
                SeededSampler::for_observation(seed, run, i).observe_model2(&self.d, self.cols)
            })
            .collect()
    }
}

/// `runs` two-stage estimates of `Δ_p` from `count` observations each.
pub fn two_stage_runs(
    calc: &Calculus,
    model: &WishartModel,
    p: usize,
    count: u64,
    mode: TwoStageMode,
    runs: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let target = single(p)?;
    let est = TwoStageEstimator::new(calc, model.d.rows(), model.cols, count as usize, p, mode)?;
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let v = est.estimate(&model.observations(seed, r, count)?)?;
            Ok(v.get(&target).expect("target order estimated"))
        })
        .collect()
}

fn single(p: usize) -> Result<PartitionIndex> {
    if p == 0 {
        return Err(Error::input("moment order must be at least 1"));
    }
    Ok(PartitionIndex::single(p as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, standard_error};

    fn example_d() -> ComplexMatrixBuffer {
        ComplexMatrixBuffer::from_diagonal(4, 4, &[2.0, 1.0, 1.0, 0.5]).unwrap()
    }

    #[test]
    fn runs_are_reproducible() {
        let calc = Calculus::default();
        let model = AdditiveModel::new(example_d(), 1.0).unwrap();
        let s = StackingScheme::new(2, 3).unwrap();
        let a = stacked_runs(&calc, &model, 2, s, 20, 7).unwrap();
        let b = stacked_runs(&calc, &model, 2, s, 20, 7).unwrap();
        let c = stacked_runs(&calc, &model, 2, s, 20, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_stacking_matches_one_average() {
        let calc = Calculus::default();
        let model = AdditiveModel::new(example_d(), 1.0).unwrap();
        let a = stacked_runs(&calc, &model, 3, StackingScheme::single(), 10, 3).unwrap();
        let b = averaged_runs(&calc, &model, 3, 1, 10, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn additive_mean_is_unbiased() {
        let calc = Calculus::default();
        let model = AdditiveModel::new(example_d(), 1.0).unwrap();
        let s = StackingScheme::new(2, 2).unwrap();
        let est = stacked_runs(&calc, &model, 2, s, 4000, DEFAULT_SEED).unwrap();
        // D_2 = (1 + 1/16 + 1/16 + 1/256) / 4
        let truth = (1.0 + 0.0625 + 0.0625 + 0.00390625) / 4.0;
        assert!((mean(&est) - truth).abs() < 4.0 * standard_error(&est));
    }

    #[test]
    fn noisy_model_is_unbiased() {
        let calc = Calculus::default();
        let model = AdditiveModel::new(example_d(), 0.5).unwrap();
        let est = averaged_runs(&calc, &model, 2, 3, 4000, DEFAULT_SEED).unwrap();
        let truth = (1.0 + 0.0625 + 0.0625 + 0.00390625) / 4.0;
        assert!((mean(&est) - truth).abs() < 4.0 * standard_error(&est));
    }

    #[test]
    fn schedule_must_be_square() {
        let calc = Calculus::default();
        let model = AdditiveModel::new(example_d(), 1.0).unwrap();
        assert!(square_stacking_estimates(&calc, &model, 3, &[1, 4, 5], 1).is_err());
        let v = square_stacking_estimates(&calc, &model, 3, &[1, 4], 1).unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn two_stage_zero_spectrum() {
        let calc = Calculus::default();
        let model = WishartModel::new(ComplexMatrixBuffer::zeros(3, 2), 3).unwrap();
        for mode in [TwoStageMode::HorizontalStack, TwoStageMode::Average] {
            let v = two_stage_runs(&calc, &model, 1, 4, mode, 4000, DEFAULT_SEED).unwrap();
            assert!(mean(&v).abs() < 4.0 * standard_error(&v));
        }
    }
}

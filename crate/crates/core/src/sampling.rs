//! Seeded complex Gaussian sampling and the two observation models.
//!
//! Each `(master_seed, stream_id)` pair owns an independent ChaCha stream, so
//! an observation is reproducible no matter which thread draws it or in
//! which order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrixBuffer;

#[derive(Debug, Clone)]
pub struct SeededSampler {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededSampler {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    /// Stream of observation `index` within run `run`.
    pub fn for_observation(master_seed: u64, run: u64, index: u64) -> Self {
        Self::new(master_seed, observation_stream(run, index))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// `rows × cols` standard complex Gaussian: independent real and
    /// imaginary parts, each of variance 1/2.
    pub fn gaussian(&mut self, rows: usize, cols: usize) -> ComplexMatrixBuffer {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = self.rng.sample(StandardNormal);
            let im: f64 = self.rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        });
        ComplexMatrixBuffer::from_matrix(m)
    }

    /// `D + σX`.
    pub fn observe_additive(
        &mut self,
        d: &ComplexMatrixBuffer,
        sigma: f64,
    ) -> Result<ComplexMatrixBuffer> {
        if sigma.is_nan() || sigma < 0.0 {
            return Err(Error::input(format!(
                "noise scale must be nonnegative, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(d.clone());
        }
        let x = self.gaussian(d.rows(), d.cols());
        d.add(&x.scale(sigma))
    }

    /// `D X1 + X2` with `D` of size `n × m`, `X1` of size `m × cols` and
    /// `X2` of size `n × cols`.
    pub fn observe_model2(
        &mut self,
        d: &ComplexMatrixBuffer,
        cols: usize,
    ) -> Result<ComplexMatrixBuffer> {
        if cols == 0 {
            return Err(Error::input("observation needs at least one column"));
        }
        let x1 = self.gaussian(d.cols(), cols);
        let x2 = self.gaussian(d.rows(), cols);
        d.mul(&x1)?.add(&x2)
    }
}

/// Stream id for observation `index` of run `run`; runs are spaced 2^24
/// observations apart.
pub fn observation_stream(run: u64, index: u64) -> u64 {
    assert!(index < 1 << 24, "observation index out of stream range");
    (run << 24) | index
}

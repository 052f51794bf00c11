use crate::error::{Error, Result};

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Unbiased sample variance `(1/(K-1)) Σ (x_i - x̄)²`.
pub fn empirical_variance(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::input(format!(
            "empirical variance needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let m = mean(samples);
    let ss: f64 = samples.iter().map(|x| (x - m) * (x - m)).sum();
    Ok(ss / (samples.len() - 1) as f64)
}

/// Standard error of the sample mean.
pub fn standard_error(samples: &[f64]) -> f64 {
    (empirical_variance(samples).unwrap_or(f64::NAN) / samples.len() as f64).sqrt()
}

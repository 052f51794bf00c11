//! The figure experiments and a free-form stacking sweep, each producing one
//! CSV table.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use momentstack::simulate::{
    square_stacking_estimates, stacked_runs, two_stage_runs, AdditiveModel, WishartModel,
};
use momentstack::stats::{empirical_variance, mean};
use momentstack::wishart::delta_moments;
use momentstack::{
    aspect_ratio, factorizations, fmt_sig, trace_powers, Calculus, Capacity, ComplexMatrixBuffer,
    ModelDims, MomentValues, TwoStageMode, DEFAULT_P_MAX,
};

use crate::config::{ExperimentConfig, ExperimentId};

/// A finished table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// `# config_hash=... seed=...`, then the header and rows.
    pub fn write<W: Write>(&self, config: &ExperimentConfig, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# experiment={} config_hash={} seed={}",
            config.experiment.as_str(),
            config.hash(),
            config.seed()
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    /// Writes `<out_dir>/<experiment>.csv` and returns its path.
    pub fn save(&self, config: &ExperimentConfig) -> Result<PathBuf> {
        let dir = config.resolved_out_dir();
        fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let path = dir.join(format!("{}.csv", config.experiment.as_str()));
        let file =
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        self.write(config, io::BufWriter::new(file))?;
        Ok(path)
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    match config.experiment {
        ExperimentId::Fig1 => run_fig1(config),
        ExperimentId::Fig2 => run_fig2(config),
        ExperimentId::Fig3 => run_fig3(config),
        ExperimentId::Custom => run_custom(config),
    }
}

fn calculus_for(config: &ExperimentConfig) -> Calculus {
    Calculus::new(Capacity::new(config.p_max.unwrap_or(DEFAULT_P_MAX)))
}

fn additive_setup(config: &ExperimentConfig) -> Result<(AdditiveModel, ModelDims)> {
    let d = config.signal()?;
    let model = AdditiveModel::new(d, config.sigma)?;
    let dims = model.dims();
    Ok((model, dims))
}

/// Moments of `D / σ`, normalized by `N`, up to `max_order`.
pub fn noise_scaled_moments(d: &ComplexMatrixBuffer, sigma: f64, max_order: usize) -> MomentValues {
    MomentValues::from_singles(&trace_powers(
        &d.scale(1.0 / sigma),
        d.cols() as f64,
        max_order,
    ))
}

/// `tr_n(((1/N) D Dᴴ)^p)`.
fn true_moment(d: &ComplexMatrixBuffer, p: usize) -> f64 {
    trace_powers(d, d.cols() as f64, p)[p - 1]
}

/// One square-stacked estimate per `L`, fresh observations each.
pub fn run_fig1(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let calc = calculus_for(config);
    let (model, _) = additive_setup(config)?;
    let est = square_stacking_estimates(&calc, &model, config.p, &config.schedule, config.seed())?;
    let truth = fmt_sig(true_moment(&model.d, config.p));
    let truth_col = format!("true_D{}", config.p);
    let mut t = Table::new(&["L", "estimate", &truth_col]);
    for (l, e) in config.schedule.iter().zip(est) {
        t.rows.push(vec![l.to_string(), fmt_sig(e), truth.clone()]);
    }
    Ok(t)
}

/// Exact `L · v` for every factorization, the limit lines and empirical
/// `L · v` for the configured stackings.
pub fn run_fig2(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let p = config.p;
    let calc = calculus_for(config);
    let (model, dims) = additive_setup(config)?;
    let values = noise_scaled_moments(&model.d, config.sigma, 2 * p);
    let noise = config.sigma.powi(4 * p as i32);
    let limits = calc.asymptotic_limits(p, dims, &values)?;
    let mut t = Table::new(&[
        "L",
        "L1",
        "L2",
        "c",
        "exact_Lv",
        "limit_rect",
        "limit_horiz",
        "limit_avg",
        "empirical_Lv",
    ]);
    for &l in &config.schedule {
        for s in factorizations(l)? {
            let lf = l as f64;
            let exact = calc.stacked_variance(p, dims, s, &values)?.value * noise;
            let empirical = if config.stackings.contains(s) {
                let est = stacked_runs(&calc, &model, p, s, config.runs, config.seed())?;
                fmt_sig(lf * empirical_variance(&est)?)
            } else {
                String::new()
            };
            t.rows.push(vec![
                l.to_string(),
                s.l1().to_string(),
                s.l2().to_string(),
                fmt_sig(aspect_ratio(dims, s)),
                fmt_sig(lf * exact),
                fmt_sig(limits.rect * noise),
                fmt_sig(limits.horiz * noise),
                fmt_sig(limits.avg * noise),
                empirical,
            ]);
        }
    }
    Ok(t)
}

/// Two-stage estimates of `Δ_p` in both modes.
pub fn run_fig3(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let p = config.p;
    let calc = calculus_for(config);
    let d = config.signal()?;
    let model = WishartModel::new(d, config.observation_cols()?)?;
    let truth = fmt_sig(delta_moments(&model.d, p)[p - 1]);
    let mut t = Table::new(&[
        "L",
        "mode",
        "estimate_mean",
        "empirical_variance",
        "true_moment",
    ]);
    for &l in &config.schedule {
        for mode in [TwoStageMode::HorizontalStack, TwoStageMode::Average] {
            let est = two_stage_runs(&calc, &model, p, l, mode, config.runs, config.seed())?;
            t.rows.push(vec![
                l.to_string(),
                mode.as_str().to_string(),
                fmt_sig(mean(&est)),
                fmt_sig(empirical_variance(&est)?),
                truth.clone(),
            ]);
        }
    }
    Ok(t)
}

/// Monte-Carlo mean and variance next to the exact variance for each
/// selected stacking of each `L`.
pub fn run_custom(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let p = config.p;
    let calc = calculus_for(config);
    let (model, dims) = additive_setup(config)?;
    let values = noise_scaled_moments(&model.d, config.sigma, 2 * p);
    let noise = config.sigma.powi(4 * p as i32);
    let truth = fmt_sig(true_moment(&model.d, p));
    let mut t = Table::new(&[
        "L",
        "L1",
        "L2",
        "c",
        "kind",
        "exact_variance",
        "estimate_mean",
        "empirical_variance",
        "true_moment",
    ]);
    for &l in &config.schedule {
        for s in factorizations(l)?
            .into_iter()
            .filter(|s| config.stackings.contains(*s))
        {
            let exact = calc.stacked_variance(p, dims, s, &values)?.value * noise;
            let est = stacked_runs(&calc, &model, p, s, config.runs, config.seed())?;
            let var = if est.len() > 1 {
                fmt_sig(empirical_variance(&est)?)
            } else {
                String::new()
            };
            t.rows.push(vec![
                l.to_string(),
                s.l1().to_string(),
                s.l2().to_string(),
                fmt_sig(aspect_ratio(dims, s)),
                s.kind().to_string(),
                fmt_sig(exact),
                fmt_sig(mean(&est)),
                var,
                truth.clone(),
            ]);
        }
    }
    Ok(t)
}

//! Experiment configuration: JSON file, per-experiment defaults, flag
//! overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use momentstack::{ComplexMatrixBuffer, StackingScheme, DEFAULT_SEED};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MOMENTSTACK_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig1,
    Fig2,
    Fig3,
    Custom,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Custom => "custom",
        }
    }
}

/// Either an explicit `[[L1, L2], ...]` list or `"all-factorizations"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stackings {
    Named(String),
    List(Vec<[u64; 2]>),
}

impl Stackings {
    pub fn all() -> Self {
        Stackings::Named("all-factorizations".into())
    }

    pub fn is_all(&self) -> bool {
        matches!(self, Stackings::Named(_))
    }

    pub fn contains(&self, s: StackingScheme) -> bool {
        match self {
            Stackings::Named(_) => true,
            Stackings::List(list) => list.iter().any(|&[a, b]| a == s.l1() && b == s.l2()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Stackings::Named(name) if name != "all-factorizations" => {
                bail!(
                    "unknown stacking list {name:?}; use \"all-factorizations\" or [[L1, L2], ...]"
                )
            }
            Stackings::List(list) => {
                for &[a, b] in list {
                    StackingScheme::new(a, b)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Text matrix file; takes precedence over `diag`.
    pub matrix: Option<PathBuf>,
    pub diag: Option<Vec<f64>>,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    /// Inner dimension of `D` in the two-stage model; defaults to `n`.
    pub m: Option<usize>,
    pub p: usize,
    /// Values of `L`.
    pub schedule: Vec<u64>,
    pub stackings: Stackings,
    /// Runs per point for empirical variances.
    #[serde(rename = "K")]
    pub runs: u64,
    pub sigma: f64,
    pub seed: Option<u64>,
    /// Largest moment weight the engine may build; default 4.
    pub p_max: Option<usize>,
    /// Not part of the config hash.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        let base = Self {
            experiment,
            matrix: None,
            diag: Some(vec![2.0, 1.0, 1.0, 0.5]),
            n: Some(4),
            big_n: Some(4),
            m: None,
            p: 3,
            schedule: vec![],
            stackings: Stackings::all(),
            runs: 1000,
            sigma: 1.0,
            seed: Some(DEFAULT_SEED),
            p_max: None,
            out_dir: None,
        };
        match experiment {
            ExperimentId::Fig1 => Self {
                schedule: (1..=30).map(|r| r * r).collect(),
                runs: 1,
                ..base
            },
            ExperimentId::Fig2 => Self {
                schedule: vec![5, 50],
                stackings: Stackings::List(vec![[1, 50], [2, 25], [5, 10], [10, 5]]),
                ..base
            },
            ExperimentId::Fig3 => Self {
                schedule: (1..=10).map(|k| 10 * k).collect(),
                runs: 50,
                ..base
            },
            ExperimentId::Custom => Self {
                schedule: vec![16],
                runs: 200,
                ..base
            },
        }
    }

    /// Reads a JSON file. Missing fields take the defaults of its
    /// `experiment` (or of `fallback` when the file names none).
    pub fn from_json_file(path: &Path, fallback: ExperimentId) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json_str(&text, fallback)
            .with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn from_json_str(text: &str, fallback: ExperimentId) -> Result<Self> {
        let given: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(given) = given else {
            bail!("config must be a JSON object");
        };
        let id = match given.get("experiment") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => fallback,
        };
        let serde_json::Value::Object(mut merged) = serde_json::to_value(Self::defaults(id))?
        else {
            unreachable!("config serializes to an object");
        };
        for (k, v) in given {
            merged.insert(k, v);
        }
        Ok(serde_json::from_value(serde_json::Value::Object(merged))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            bail!("p must be at least 1");
        }
        if self.schedule.is_empty() || self.schedule.contains(&0) {
            bail!("the L schedule must be nonempty and positive");
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            bail!("sigma must be positive");
        }
        if self.runs == 0 {
            bail!("K must be at least 1");
        }
        if self.seed.is_none() {
            bail!("experiments need a seed (--seed or \"seed\" in the config)");
        }
        self.stackings.validate()?;
        if self.experiment == ExperimentId::Fig1 {
            for &l in &self.schedule {
                let r = l.isqrt();
                if r * r != l {
                    bail!("fig1 schedule entries must be perfect squares, got {l}");
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// The signal matrix. For the two-stage experiment it is `n × m`,
    /// otherwise `n × N`.
    pub fn signal(&self) -> Result<ComplexMatrixBuffer> {
        let cols = if self.experiment == ExperimentId::Fig3 {
            self.m.or(self.n)
        } else {
            self.big_n
        };
        load_signal(self.matrix.as_deref(), self.diag.as_deref(), self.n, cols)
    }

    /// `N` of one observation.
    pub fn observation_cols(&self) -> Result<usize> {
        match (self.big_n, self.experiment) {
            (Some(c), _) => Ok(c),
            (None, ExperimentId::Fig3) => bail!("N is required for the two-stage experiment"),
            (None, _) => Ok(self.signal()?.cols()),
        }
    }

    /// SHA-256 of the canonical JSON, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Explicit directory, else `$MOMENTSTACK_OUT`, else the working
    /// directory.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Builds `D` from a matrix file or a diagonal list. Given dimensions must
/// agree with a file; for a diagonal they default to a square matrix.
pub fn load_signal(
    matrix: Option<&Path>,
    diag: Option<&[f64]>,
    rows: Option<usize>,
    cols: Option<usize>,
) -> Result<ComplexMatrixBuffer> {
    if let Some(path) = matrix {
        let d = ComplexMatrixBuffer::read_file(path)?;
        if rows.is_some_and(|r| r != d.rows()) || cols.is_some_and(|c| c != d.cols()) {
            bail!(
                "{} is {}x{}, which contradicts the given dimensions",
                path.display(),
                d.rows(),
                d.cols()
            );
        }
        return Ok(d);
    }
    let Some(diag) = diag else {
        bail!("no signal matrix given (use --matrix or --diag)");
    };
    if diag.is_empty() {
        bail!("diagonal list is empty");
    }
    let rows = rows.unwrap_or(diag.len());
    let cols = cols.unwrap_or(rows);
    Ok(ComplexMatrixBuffer::from_diagonal(rows, cols, diag)?)
}

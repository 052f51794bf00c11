use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use momentstack::simulate::{AdditiveModel, StackedEstimator};
use momentstack::{
    enumerate_sp, enumerate_spr, fmt_sig, optimal_stacking, trace_powers, Calculus, Capacity,
    ComplexMatrixBuffer, DiagramShape, ModelDims, PartitionIndex, SeededSampler, StackingScheme,
};
use momentstack_cli::config::load_signal;
use momentstack_cli::experiments::noise_scaled_moments;
use momentstack_cli::{run, ExperimentConfig, ExperimentId};

#[derive(Parser)]
#[command(
    name = "momentstack",
    version,
    about = "Moment estimators for stacked noisy matrix observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a moment of D from observation files or simulated ones.
    Estimate(EstimateArgs),
    /// Exact variance of a stacked or averaged estimator.
    Variance(VarianceArgs),
    /// Limits of L times the variance for each stacking family.
    Limits(LimitsArgs),
    /// Factorization of L whose compound matrix is closest to square.
    OptimalStacking(OptimalArgs),
    /// Count partial permutations.
    Enumerate(EnumerateArgs),
    /// Print forward-map, estimator or variance coefficients.
    Coeffs(CoeffsArgs),
    /// Square-stacked estimates over an L schedule.
    Fig1(ExperimentArgs),
    /// Exact and empirical variances for every factorization.
    Fig2(ExperimentArgs),
    /// Two-stage estimation, stacked against averaged.
    Fig3(ExperimentArgs),
    /// Run whatever experiment a config file names.
    Run(ExperimentArgs),
}

#[derive(Args)]
struct SignalArgs {
    /// Text matrix file: "rows cols", then 2*cols reals (re im) per row.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Diagonal entries of D, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    diag: Option<Vec<f64>>,
    /// Rows of one observation.
    #[arg(long)]
    n: Option<usize>,
    /// Columns of one observation.
    #[arg(long = "N")]
    big_n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Raise the moment capacity.
    #[arg(long)]
    p_max: Option<usize>,
}

impl SignalArgs {
    fn signal(&self) -> Result<ComplexMatrixBuffer> {
        load_signal(
            self.matrix.as_deref(),
            self.diag.as_deref(),
            self.n,
            self.big_n,
        )
    }

    fn calculus(&self) -> Calculus {
        Calculus::new(Capacity::new(
            self.p_max.unwrap_or(momentstack::DEFAULT_P_MAX),
        ))
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    signal: SignalArgs,
    /// Moment partition, e.g. 3 or 2,1.
    #[arg(long, default_value = "3")]
    p: PartitionIndex,
    #[arg(long = "L1", default_value_t = 1)]
    l1: u64,
    #[arg(long = "L2", default_value_t = 1)]
    l2: u64,
    /// Observation files, filled into the grid row by row.
    #[arg(long = "obs", num_args = 1..)]
    observations: Vec<PathBuf>,
    /// Seed for simulated observations.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    signal: SignalArgs,
    #[arg(long)]
    p: usize,
    #[arg(long = "L1", default_value_t = 1)]
    l1: u64,
    #[arg(long = "L2", default_value_t = 1)]
    l2: u64,
    /// Average L single-observation estimates instead of stacking.
    #[arg(long, requires = "l")]
    average: bool,
    #[arg(long = "L")]
    l: Option<u64>,
}

#[derive(Args)]
struct LimitsArgs {
    #[command(flatten)]
    signal: SignalArgs,
    #[arg(long)]
    p: usize,
}

#[derive(Args)]
struct OptimalArgs {
    #[arg(long)]
    n: u64,
    #[arg(long = "N")]
    big_n: u64,
    #[arg(long = "L")]
    l: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagramKind {
    /// All partial permutations on one circle.
    Sp,
    /// Cross identifications between two circles.
    Spr,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long, value_enum, default_value = "sp")]
    kind: DiagramKind,
    /// Allow p beyond the default capacity.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoeffKind {
    Forward,
    Estimator,
    Variance,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long, default_value = "3")]
    p: PartitionIndex,
    #[arg(long)]
    n: u64,
    #[arg(long = "N")]
    big_n: u64,
    #[arg(long = "L1", default_value_t = 1)]
    l1: u64,
    #[arg(long = "L2", default_value_t = 1)]
    l2: u64,
    /// Known noise scale; only used by forward and estimator.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "estimator")]
    kind: CoeffKind,
    /// Emit partition,numerator,denominator rows.
    #[arg(long)]
    csv: bool,
    /// Raise the moment capacity.
    #[arg(long)]
    p_max: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $MOMENTSTACK_OUT, then ".").
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    diag: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "N")]
    big_n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// L schedule, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    schedule: Option<Vec<u64>>,
    /// Runs per point.
    #[arg(long = "K")]
    runs: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Raise the moment capacity.
    #[arg(long)]
    p_max: Option<usize>,
}

impl ExperimentArgs {
    fn resolve(&self, id: Option<ExperimentId>) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, id) {
            (Some(path), Some(id)) => {
                let c = ExperimentConfig::from_json_file(path, id)?;
                if c.experiment != id {
                    bail!(
                        "config is for {} but {} was requested",
                        c.experiment.as_str(),
                        id.as_str()
                    );
                }
                c
            }
            (Some(path), None) => ExperimentConfig::from_json_file(path, ExperimentId::Custom)?,
            (None, Some(id)) => ExperimentConfig::defaults(id),
            (None, None) => bail!("run needs --config"),
        };
        if let Some(m) = &self.matrix {
            c.matrix = Some(m.clone());
            c.diag = None;
            c.n = None;
            c.big_n = None;
        }
        if let Some(d) = &self.diag {
            c.diag = Some(d.clone());
            c.matrix = None;
        }
        c.n = self.n.or(c.n);
        c.big_n = self.big_n.or(c.big_n);
        c.m = self.m.or(c.m);
        c.p = self.p.unwrap_or(c.p);
        if let Some(s) = &self.schedule {
            c.schedule = s.clone();
        }
        c.runs = self.runs.unwrap_or(c.runs);
        c.sigma = self.sigma.unwrap_or(c.sigma);
        c.seed = self.seed.or(c.seed);
        c.p_max = self.p_max.or(c.p_max);
        c.out_dir = self.out.clone().or(c.out_dir);
        Ok(c)
    }
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let scheme = StackingScheme::new(args.l1, args.l2)?;
    let calc = args.signal.calculus();
    let (observations, truth) = if args.observations.is_empty() {
        let Some(seed) = args.seed else {
            bail!("simulated observations need --seed (or pass --obs files)");
        };
        let d = args.signal.signal()?;
        let model = AdditiveModel::new(d, args.signal.sigma)?;
        let obs = (0..scheme.count())
            .map(|i| {
                SeededSampler::for_observation(seed, 0, i).observe_additive(&model.d, model.sigma)
            })
            .collect::<momentstack::Result<Vec<_>>>()?;
        let singles = trace_powers(&model.d, model.d.cols() as f64, args.p.parts()[0] as usize);
        let truth: f64 = args
            .p
            .parts()
            .iter()
            .map(|&q| singles[q as usize - 1])
            .product();
        (obs, Some(truth))
    } else {
        let obs = args
            .observations
            .iter()
            .map(ComplexMatrixBuffer::read_file)
            .collect::<momentstack::Result<Vec<_>>>()?;
        (obs, None)
    };
    let first = &observations[0];
    let dims =
        ModelDims::new(first.rows() as u64, first.cols() as u64)?.with_sigma(args.signal.sigma);
    let est = StackedEstimator::new(&calc, &args.p, dims, scheme)?;
    println!("partition={}", args.p);
    println!("L1={}", scheme.l1());
    println!("L2={}", scheme.l2());
    println!("estimate={}", fmt_sig(est.estimate(&observations)?));
    if let Some(t) = truth {
        println!("true={}", fmt_sig(t));
    }
    Ok(())
}

fn variance_inputs(
    signal: &SignalArgs,
    p: usize,
) -> Result<(Calculus, ModelDims, momentstack::MomentValues, f64)> {
    let d = signal.signal()?;
    let model = AdditiveModel::new(d, signal.sigma)?;
    let values = noise_scaled_moments(&model.d, signal.sigma, 2 * p);
    Ok((
        signal.calculus(),
        model.dims(),
        values,
        signal.sigma.powi(4 * p as i32),
    ))
}

fn variance(args: &VarianceArgs) -> Result<()> {
    let (calc, dims, values, noise) = variance_inputs(&args.signal, args.p)?;
    let report = if args.average {
        calc.averaging_variance(args.p, dims, args.l.expect("clap requires L"), &values)?
    } else {
        let scheme = StackingScheme::new(args.l1, args.l2)?;
        if args.l.is_some_and(|l| l != scheme.count()) {
            bail!(
                "--L {} does not match L1*L2 = {}",
                args.l.unwrap(),
                scheme.count()
            );
        }
        calc.stacked_variance(args.p, dims, scheme, &values)?
    };
    println!("p={}", args.p);
    println!("L={}", report.combination.count());
    println!("kind={}", report.combination.kind());
    println!("variance={}", fmt_sig(report.value * noise));
    Ok(())
}

fn limits(args: &LimitsArgs) -> Result<()> {
    let (calc, dims, values, noise) = variance_inputs(&args.signal, args.p)?;
    let l = calc.asymptotic_limits(args.p, dims, &values)?;
    println!("rect={}", fmt_sig(l.rect * noise));
    println!("vert={}", fmt_sig(l.vert * noise));
    println!("horiz={}", fmt_sig(l.horiz * noise));
    println!("avg={}", fmt_sig(l.avg * noise));
    Ok(())
}

fn enumerate(args: &EnumerateArgs) -> Result<()> {
    if args.p == 0 {
        bail!("p must be at least 1");
    }
    let limit = match args.kind {
        DiagramKind::Sp => momentstack::DEFAULT_P_MAX,
        DiagramKind::Spr => momentstack::DEFAULT_P_MAX - 1,
    };
    if args.p > limit && !args.force {
        bail!(
            "p = {} exceeds {limit}; pass --force to enumerate anyway",
            args.p
        );
    }
    let count = match args.kind {
        DiagramKind::Sp => {
            let shape = DiagramShape::for_partition(&PartitionIndex::single(args.p as u32))?;
            enumerate_sp(&shape).count()
        }
        DiagramKind::Spr => enumerate_spr(args.p).count(),
    };
    println!("{count}");
    Ok(())
}

fn coeffs(args: &CoeffsArgs) -> Result<()> {
    let p_max = args.p_max.unwrap_or(momentstack::DEFAULT_P_MAX);
    let calc = Calculus::new(Capacity::new(p_max));
    let mut dims = ModelDims::new(args.n, args.big_n)?;
    let scheme = StackingScheme::new(args.l1, args.l2)?;
    let noisy = args.sigma.is_some();
    if let Some(s) = args.sigma {
        dims = dims.with_sigma(s);
    }
    let expr = match args.kind {
        CoeffKind::Forward => {
            let c = dims.compound(scheme);
            if noisy {
                calc.noisy_forward_map(&args.p, c)?
            } else {
                calc.forward_map(&args.p, c)?
            }
        }
        CoeffKind::Estimator if noisy => {
            if scheme != StackingScheme::single() {
                bail!("known-noise estimators are available for a single observation only");
            }
            calc.noisy_estimator_coeffs(&args.p, dims)?
        }
        CoeffKind::Estimator => calc.stacked_estimator_coeffs(&args.p, dims, scheme)?,
        CoeffKind::Variance => {
            if args.p.len() != 1 {
                bail!("variances are defined for single moments");
            }
            calc.stacked_variance_expression(args.p.parts()[0] as usize, dims, scheme)?
        }
    };
    if args.csv {
        expr.write_csv(std::io::stdout().lock())?;
    } else {
        println!("{expr}");
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs, id: Option<ExperimentId>) -> Result<()> {
    let config = args.resolve(id)?;
    let table = run(&config)?;
    let path = table.save(&config)?;
    println!("wrote={}", path.display());
    println!("config_hash={}", config.hash());
    println!("seed={}", config.seed());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => estimate(&a),
        Command::Variance(a) => variance(&a),
        Command::Limits(a) => limits(&a),
        Command::OptimalStacking(a) => {
            let dims = ModelDims::new(a.n, a.big_n)?;
            println!("{}", optimal_stacking(dims, a.l)?);
            Ok(())
        }
        Command::Enumerate(a) => enumerate(&a),
        Command::Coeffs(a) => coeffs(&a),
        Command::Fig1(a) => experiment(&a, Some(ExperimentId::Fig1)),
        Command::Fig2(a) => experiment(&a, Some(ExperimentId::Fig2)),
        Command::Fig3(a) => experiment(&a, Some(ExperimentId::Fig3)),
        Command::Run(a) => experiment(&a, None),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use splitkit::bench::{
    compare, emit, fit_rate_slope_window, read_records, reference_solution, run_experiment, Checkpoints,
    CompareConfig, ExperimentConfig, Format, MethodConfig, MethodName, ProblemSource, Quantity, ReferenceConfig,
};
use splitkit::{Error, Result};

const DEFAULT_ITERS: usize = 100_000;
const FULL_ITERS: usize = 1_000_000;

#[derive(Parser)]
#[command(name = "splitkit", version, about = "Fast splitting methods: runs, comparisons and rate fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one problem.
    Solve(SolveArgs),
    /// Run a grid of methods on one problem.
    Compare(CompareArgs),
    /// Fit log-log slopes to stored record files.
    Rates(RatesArgs),
    /// Build or refresh a cached reference solution.
    Reference(ReferenceArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON problem file; overrides the generated dimensions.
    #[arg(long)]
    problem: Option<PathBuf>,
}

impl ProblemArgs {
    fn source(&self) -> ProblemSource {
        match &self.problem {
            Some(path) => ProblemSource::File { path: path.clone() },
            None => ProblemSource::Generated { m: self.m, p: self.p, n: self.n, seed: self.seed },
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Iteration budget; defaults to 1e5, or 1e6 with --full.
    #[arg(long)]
    iters: Option<usize>,
    /// Use the long 1e6-iteration budget.
    #[arg(long)]
    full: bool,
    /// Checkpoints per decade.
    #[arg(long, default_value_t = splitkit::bench::DEFAULT_PER_DECADE)]
    per_decade: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Fill the ns column with wall-clock time; outputs are then no longer reproducible.
    #[arg(long)]
    timing: bool,
    /// Structured JSON config; replaces problem, method and budget flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn iters(&self) -> usize {
        self.iters.unwrap_or(if self.full { FULL_ITERS } else { DEFAULT_ITERS })
    }

    fn checkpoints(&self) -> Checkpoints {
        Checkpoints::LogSpaced { per_decade: self.per_decade }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args, Clone)]
struct MethodArgs {
    #[arg(long, default_value = "fpd")]
    method: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

impl MethodArgs {
    fn config(&self) -> Result<MethodConfig> {
        let mut cfg = MethodConfig::new(self.method.parse()?);
        cfg.alpha = self.alpha;
        cfg.gamma = self.gamma;
        cfg.tau = self.tau;
        cfg.sigma = self.sigma;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct ReferenceOptions {
    /// Compute a reference solution so that the gap column is filled.
    #[arg(long)]
    reference: bool,
    #[arg(long, default_value_t = 1_000_000)]
    reference_budget: usize,
    #[arg(long, default_value_t = 10.0)]
    reference_alpha: f64,
    /// Reference cache directory; defaults to `<out>/cache`.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl ReferenceOptions {
    fn config(&self, out: &Path) -> ReferenceConfig {
        ReferenceConfig {
            budget: self.reference_budget,
            alpha: self.reference_alpha,
            cache_dir: Some(self.cache_dir.clone().unwrap_or_else(|| out.join("cache"))),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    reference: ReferenceOptions,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Methods as NAME or NAME:ALPHA, repeatable. Default: fpd:5, fpd:10, flag.
    #[arg(long = "method")]
    methods: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    reference: ReferenceOptions,
}

#[derive(Args)]
struct RatesArgs {
    /// CSV or JSON record files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = QuantityArg::Velocity)]
    quantity: QuantityArg,
    #[arg(long, default_value_t = 1000)]
    k_min: usize,
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Velocity,
    Rtan,
    Rfix,
    Feasibility,
    Gap,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Velocity => Quantity::Velocity,
            QuantityArg::Rtan => Quantity::Rtan,
            QuantityArg::Rfix => Quantity::Rfix,
            QuantityArg::Feasibility => Quantity::Feasibility,
            QuantityArg::Gap => Quantity::Gap,
        }
    }
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long, default_value = "out/cache")]
    cache_dir: PathBuf,
    /// Ignore any cached entry and recompute.
    #[arg(long)]
    refresh: bool,
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_method_spec(spec: &str) -> Result<MethodConfig> {
    let (name, alpha) = match spec.split_once(':') {
        Some((name, alpha)) => {
            let alpha = alpha.parse().map_err(|_| Error::Config(format!("bad alpha in method spec {spec:?}")))?;
            (name, Some(alpha))
        }
        None => (spec, None),
    };
    let mut cfg = MethodConfig::new(name.parse::<MethodName>()?);
    cfg.alpha = alpha;
    Ok(cfg)
}

fn solve(args: SolveArgs) -> Result<()> {
    let config = match &args.run.config {
        Some(path) => read_config(path)?,
        None => ExperimentConfig {
            problem: args.problem.source(),
            method: args.method.config()?,
            iters: args.run.iters(),
            checkpoints: args.run.checkpoints(),
            timing: args.run.timing,
        },
    };
    let reference = if args.reference.reference {
        let g = config.problem.load()?;
        let (r, _) = reference_solution(&g.problem, &g.hash, &args.reference.config(&args.run.out))?;
        if !r.converged {
            eprintln!("warning: reference feasibility {:.3e} exceeds tolerance", r.feasibility);
        }
        Some(r)
    } else {
        None
    };
    let out = run_experiment(&config, reference.as_ref())?;
    let files = emit(&out.records, args.run.format.into(), &args.run.out, &out.label)?;
    if let Some(last) = out.records.last() {
        println!(
            "{}: k={} objective={} feasibility={:.3e} velocity={:.3e}",
            out.label, last.k, last.objective, last.feasibility, last.velocity
        );
    }
    println!("wrote {} files to {}", files.len(), args.run.out.display());
    match out.diverged_at {
        Some(k) => Err(Error::Diverged { k }),
        None => Ok(()),
    }
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let config = match &args.run.config {
        Some(path) => read_config(path)?,
        None => CompareConfig {
            problem: args.problem.source(),
            methods: if args.methods.is_empty() {
                CompareConfig::default_methods()
            } else {
                args.methods.iter().map(|s| parse_method_spec(s)).collect::<Result<_>>()?
            },
            iters: args.run.iters(),
            checkpoints: args.run.checkpoints(),
            timing: args.run.timing,
            reference: args.reference.reference.then(|| args.reference.config(&args.run.out)),
            out: args.run.out.clone(),
            format: args.run.format.into(),
        },
    };
    let (summary, _) = compare(&config)?;
    if let Some(r) = summary.reference.as_ref().filter(|r| !r.converged) {
        eprintln!("warning: reference feasibility {:.3e} exceeds tolerance", r.feasibility);
    }
    println!("label\tk\tobjective\tfeasibility\tvelocity");
    for run in &summary.runs {
        if let Some(last) = &run.final_record {
            println!("{}\t{}\t{}\t{:.3e}\t{:.3e}", run.label, last.k, last.objective, last.feasibility, last.velocity);
        }
    }
    match summary.runs.iter().find_map(|r| r.diverged_at) {
        Some(k) => Err(Error::Diverged { k }),
        None => Ok(()),
    }
}

fn rates(args: RatesArgs) -> Result<()> {
    let quantity: Quantity = args.quantity.into();
    println!("file\tquantity\tslope\tintercept\tr2\tk_min\tk_max\tpoints");
    for file in &args.files {
        let records = read_records(file)?;
        let fit = fit_rate_slope_window(&records, quantity, args.k_min, args.k_max.unwrap_or(usize::MAX))?;
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
            file.display(),
            quantity.name(),
            fit.slope,
            fit.intercept,
            fit.r2,
            fit.k_min,
            fit.k_max,
            fit.points
        );
    }
    Ok(())
}

fn reference(args: ReferenceArgs) -> Result<()> {
    let g = args.problem.source().load()?;
    let config = ReferenceConfig { budget: args.budget, alpha: args.alpha, cache_dir: Some(args.cache_dir.clone()) };
    if args.refresh {
        let stale = config.cache_path(&args.cache_dir, &g.hash);
        if stale.exists() {
            std::fs::remove_file(stale)?;
        }
    }
    let (r, hit) = reference_solution(&g.problem, &g.hash, &config)?;
    if !r.converged {
        eprintln!("warning: reference feasibility {:.3e} exceeds tolerance", r.feasibility);
    }
    println!(
        "hash={} f_star={} feasibility={:.3e} converged={} cached={hit}",
        r.problem_hash, r.f_star, r.feasibility, r.converged
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Compare(a) => run_compare(a),
        Command::Rates(a) => rates(a),
        Command::Reference(a) => reference(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcca::clusterability::{hopkins, HopkinsOptions};
use mcca::data_io::{
    read_dataset, read_score_table, write_dataset, write_report, write_scatter, write_scores_csv,
    ClusterabilitySection, Report,
};
use mcca::experiments::{convergence_study, gen_latent_dataset, ConvergenceMethod, SyntheticSpec};
use mcca::functional_mcca::{sample_weight_functions, solve_functional_mcca, BasisSpec};
use mcca::kernel_mcca::{kernel_specs, solve_kernel_mcca};
use mcca::{AnalysisConfig, MccaSolution, Method, RepeatedMeasuresDataset};

#[derive(Parser)]
#[command(
    name = "mcca",
    version,
    about = "Multiple kernel and functional CCA with a Hopkins clusterability test"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiple kernel CCA of a repeated-measures dataset.
    Kcca(AnalysisArgs),
    /// Multiple functional CCA (Fourier basis) of a repeated-measures dataset.
    Fcca(AnalysisArgs),
    /// Hopkins statistic of selected score columns.
    Hopkins(HopkinsArgs),
    /// Generate a shared-latent-factor dataset.
    Synth(SynthArgs),
    /// Median error of the leading correlation across sample sizes.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(short = 'o', long = "out", default_value = "out")]
    out: PathBuf,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct AnalysisArgs {
    /// Long-format dataset CSV.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Also run the Hopkins test on the first two score columns of
    /// component 1 and add it to the report.
    #[arg(long)]
    hopkins: bool,
}

#[derive(Args)]
struct HopkinsArgs {
    /// Score CSV (`unit,component,feature,score`) or a plain numeric matrix.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Comma-separated columns, `component:feature` for score files.
    /// Defaults to the first two columns.
    #[arg(long, value_delimiter = ',')]
    select: Vec<String>,
}

#[derive(Args, Clone, Copy)]
struct LatentArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of features.
    #[arg(long = "features", default_value_t = 3)]
    l: usize,
    /// Time points per block.
    #[arg(long = "time-points", default_value_t = 10)]
    t: usize,
    /// Variables per block.
    #[arg(long = "variables", default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    latent_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    loading_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
}

impl LatentArgs {
    fn spec(self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n: self.n,
            l: self.l,
            t: self.t,
            p: self.p,
            latent_dim: self.latent_dim,
            loading_scale: self.loading_scale,
            noise_sd: self.noise_sd,
            seed,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    latent: LatentArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    latent: LatentArgs,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
}

enum Failure {
    Core(mcca::Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
}

impl From<mcca::Error> for Failure {
    fn from(e: mcca::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{}: {e}", path.display()),
            Failure::Usage(msg) => f.write_str(msg),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn load_config(common: &Common) -> Outcome<AnalysisConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(path.clone(), e))?;
            AnalysisConfig::parse(&text)?
        }
        None => AnalysisConfig::default(),
    };
    for pair in &common.overrides {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{pair}'")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn hopkins_options(cfg: &AnalysisConfig, n: usize) -> HopkinsOptions {
    HopkinsOptions {
        region: cfg.hopkins_region,
        classical: cfg.hopkins_classical,
        ..HopkinsOptions::new(cfg.hopkins_m.resolve(n), cfg.hopkins_reps, cfg.rng_seed)
    }
}

fn analyse(args: &AnalysisArgs, method: Method) -> Outcome {
    let mut cfg = load_config(&args.common)?;
    cfg.method = method;
    let mut ds: RepeatedMeasuresDataset = read_dataset(&args.input)?;
    if cfg.standardize {
        ds = ds.standardized();
    }
    let n = ds.n_units();
    let eps = cfg.epsilon.resolve(n);
    eprintln!(
        "{method}: n = {n}, L = {}, T = {}, epsilon = {eps}",
        ds.n_features(),
        ds.time_points()
    );
    let (solution, basis): (MccaSolution, Option<BasisSpec>) = match method {
        Method::Kernel => {
            let specs = kernel_specs(&ds, cfg.kernel, cfg.kernel_gamma)?;
            (solve_kernel_mcca(&ds, &specs, eps, cfg.n_components)?, None)
        }
        Method::Functional => {
            let basis = BasisSpec::new(cfg.basis_size, ds.time_points())?;
            (
                solve_functional_mcca(&ds, &basis, eps, cfg.n_components)?,
                Some(basis),
            )
        }
    };
    for w in &solution.diagnostics.warnings {
        eprintln!("warning: {w}");
    }

    let scores = &solution.scores[0];
    let clusterability = if args.hopkins {
        let points = scores.columns(0, 2.min(scores.ncols())).into_owned();
        let result = hopkins(&points, &hopkins_options(&cfg, n))?;
        Some(ClusterabilitySection {
            columns: ds
                .feature_names()
                .iter()
                .take(2)
                .map(|f| format!("1:{f}"))
                .collect(),
            result,
        })
    } else {
        None
    };

    let out = &args.common.out;
    prepare_out(out)?;
    let report = Report::new(
        &solution,
        ds.unit_labels(),
        ds.feature_names(),
        Some(&cfg),
        clusterability,
    );
    write_report(&report, &out.join("report.json"))?;
    write_scores_csv(
        &solution,
        ds.unit_labels(),
        ds.feature_names(),
        &out.join("scores.csv"),
    )?;
    write_scatter(
        scores,
        0,
        1,
        ds.group_labels(),
        &out.join("scatter_1_2.svg"),
    )?;

    if let Some(basis) = basis {
        for c in 0..solution.n_components() {
            let mut text = String::from("feature,variable,t,value\n");
            for s in sample_weight_functions(&solution, &basis, c)? {
                let _ = writeln!(
                    text,
                    "{},{},{},{}",
                    ds.feature_names()[s.feature],
                    s.variable + 1,
                    s.t,
                    s.value
                );
            }
            write_text(&out.join(format!("weights_{}.csv", c + 1)), &text)?;
        }
    }
    Ok(())
}

fn run_hopkins(args: &HopkinsArgs) -> Outcome {
    let cfg = load_config(&args.common)?;
    let text =
        std::fs::read_to_string(&args.input).map_err(|e| Failure::Io(args.input.clone(), e))?;
    let table = read_score_table(&text)?;
    let columns = if args.select.is_empty() {
        table.columns.iter().take(2).cloned().collect()
    } else {
        args.select.clone()
    };
    let points = table.select(&columns)?;
    let n = points.nrows();
    let result = hopkins(&points, &hopkins_options(&cfg, n))?;
    eprintln!(
        "hopkins: n = {n}, d = {}, m = {}, H = {:.6}, p = {:.6}",
        result.dim, result.m, result.h, result.p_value
    );
    prepare_out(&args.common.out)?;
    let section = ClusterabilitySection { columns, result };
    let mut json = serde_json::to_string_pretty(&section).expect("serializable");
    json.push('\n');
    write_text(&args.common.out.join("hopkins.json"), &json)
}

fn run_synth(args: &SynthArgs) -> Outcome {
    let cfg = load_config(&args.common)?;
    let ds = gen_latent_dataset(&args.latent.spec(cfg.rng_seed))?;
    prepare_out(&args.common.out)?;
    write_dataset(&ds, &args.common.out.join("dataset.csv"))?;
    Ok(())
}

fn run_convergence(args: &ConvergenceArgs) -> Outcome {
    let cfg = load_config(&args.common)?;
    let method = match cfg.method {
        Method::Kernel => ConvergenceMethod::Kernel,
        Method::Functional => ConvergenceMethod::Functional {
            basis_size: cfg.basis_size,
        },
    };
    let report = convergence_study(
        &args.latent.spec(cfg.rng_seed),
        &args.sizes,
        args.reps,
        method,
    )?;
    for (n, m) in report.sample_sizes.iter().zip(&report.median_error) {
        eprintln!("convergence: n = {n}, median error = {m:.6e}");
    }
    prepare_out(&args.common.out)?;
    let mut json = serde_json::to_string_pretty(&report).expect("serializable");
    json.push('\n');
    write_text(&args.common.out.join("convergence.json"), &json)?;
    write_text(&args.common.out.join("errors.csv"), &report.errors_csv())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Kcca(a) => analyse(a, Method::Kernel),
        Command::Fcca(a) => analyse(a, Method::Functional),
        Command::Hopkins(a) => run_hopkins(a),
        Command::Synth(a) => run_synth(a),
        Command::Convergence(a) => run_convergence(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

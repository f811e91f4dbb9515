use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neyman::{CiMethod, EstimatorKind, VarianceFlavor};

#[derive(Debug, Parser)]
#[command(
    name = "neyman",
    version,
    about = "Regression-adjusted treatment effect estimates for completely randomized experiments"
)]
pub struct Cli {
    /// Worker threads for simulations (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the treatment effect from an experiment CSV.
    Analyze(AnalyzeArgs),
    /// Monte Carlo randomization study over one or more designs.
    Simulate(SimulateArgs),
    /// Asymptotic standard deviations, sandwich limits and bias terms.
    Asymptotics(AsymptoticsArgs),
    /// Exact randomization distribution over every assignment.
    Enumerate(EnumerateArgs),
    /// Plug-in estimates of the leading bias of the adjusted estimators.
    Bias(BiasArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dgp {
    /// z ~ U[-4, 4]; a, b exponential in z plus standard normal noise.
    Lin2013,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub outcome: String,
    #[arg(long)]
    pub group: String,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Treatment and control labels, e.g. `--contrast treated,control`.
    #[arg(long, value_delimiter = ',')]
    pub contrast: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "unadjusted,adjusted,interact")]
    pub estimator: Vec<EstimatorKind>,
    #[arg(long, value_delimiter = ',', default_value = "hc2")]
    pub se: Vec<VarianceFlavor>,
    /// Welch intervals apply to the difference in means only.
    #[arg(long, value_delimiter = ',', default_value = "normal")]
    pub ci: Vec<CiMethod>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PopulationArgs {
    /// Built-in data-generating process.
    #[arg(long, value_enum, required_unless_present = "population", conflicts_with = "population")]
    pub dgp: Option<Dgp>,
    /// Population CSV with columns a, b, z1..zK.
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// Subjects drawn from the built-in process.
    #[arg(long, requires = "dgp")]
    pub n: Option<usize>,
}

/// Treated group sizes; without either flag the shares 0.75, 0.6, 0.5, 0.4
/// and 0.25 are used.
#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Comma-separated numbers of subjects assigned to treatment A.
    #[arg(long, value_delimiter = ',', conflicts_with = "p_a")]
    pub n_treated: Option<Vec<usize>>,
    /// Comma-separated shares assigned to A; rounded to whole subjects.
    #[arg(long, value_delimiter = ',')]
    pub p_a: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: PopulationArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub reps: usize,
    /// Seeds both the built-in population and every replication.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "unadjusted,adjusted,interact,tyranny")]
    pub estimator: Vec<EstimatorKind>,
    #[arg(long, value_delimiter = ',', default_value = "hc2")]
    pub se: Vec<VarianceFlavor>,
    #[arg(long, value_delimiter = ',', default_value = "normal")]
    pub ci: Vec<CiMethod>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    #[command(flatten)]
    pub source: PopulationArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long)]
    pub n_treated: usize,
    #[arg(long, default_value = "unadjusted")]
    pub estimator: EstimatorKind,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Standard error used for the bias-to-SE ratios.
    #[arg(long, default_value = "hc2")]
    pub se: VarianceFlavor,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

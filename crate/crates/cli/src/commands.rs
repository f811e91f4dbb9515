use std::path::Path;

use neyman::asymptotics::{
    asymptotic_report, bias_estimate_from_sample, bias_leading_adjusted, bias_leading_interact, AsymptoticReport,
    BiasEstimates, Population,
};
use neyman::estimators::estimate;
use neyman::simulate::{
    enumerate_assignments, generate_lin_population, run_replications, ExactDistribution, ReplicationConfig,
    RngState, SimulationReport, RNG_ALGORITHM,
};
use neyman::variance::{ate_standard_error, confidence_interval, t_quantile, welch_interval, z_quantile};
use neyman::{CiMethod, EstimatorKind, VarianceFlavor};
use serde::Serialize;

use crate::args::{
    AnalyzeArgs, AsymptoticsArgs, BiasArgs, DataArgs, DesignArgs, Dgp, EnumerateArgs, Format, PopulationArgs,
    SimulateArgs,
};
use crate::data::{load_experiment, load_population, CsvTable, Experiment};
use crate::error::{CliError, CliResult};
use crate::format::{opt, sig6, TextTable};

/// Stream of the base seed reserved for drawing built-in populations;
/// replications use streams `0..reps`.
pub const POPULATION_STREAM: u64 = u64::MAX;

/// Default size of a built-in population.
pub const DEFAULT_DGP_SIZE: usize = 1000;

/// Bias-to-SE ratio above which `bias` flags an estimate.
pub const BIAS_FLAG_THRESHOLD: f64 = 0.1;

fn render<T: Serialize>(format: Format, report: &T, table: impl FnOnce(&T) -> String) -> CliResult<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Table => Ok(table(report)),
    }
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--level must lie strictly between 0 and 1, got {level}")))
    }
}

fn experiment(args: &DataArgs) -> CliResult<Experiment> {
    let table = CsvTable::read(&args.input)?;
    load_experiment(&table, &args.outcome, &args.group, &args.covariates, args.contrast.as_deref())
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, Serialize)]
pub struct GroupSize {
    pub label: String,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StandardError {
    pub flavor: VarianceFlavor,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Interval {
    pub method: CiMethod,
    pub se_flavor: VarianceFlavor,
    pub se: f64,
    /// Critical value: the interval is `point +/- quantile * se`.
    pub quantile: f64,
    pub df: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub estimator: EstimatorKind,
    pub point: f64,
    pub standard_errors: Vec<StandardError>,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub input: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub treatment: String,
    pub control: String,
    pub n: usize,
    pub groups: Vec<GroupSize>,
    pub level: f64,
    pub estimates: Vec<EstimateRow>,
}

pub fn analyze_report(args: &AnalyzeArgs) -> CliResult<AnalyzeReport> {
    check_level(args.level)?;
    let Experiment { data, contrast } = experiment(&args.data)?;
    let p = (1.0 + args.level) / 2.0;
    let mut estimates = Vec::with_capacity(args.estimator.len());
    for &kind in &args.estimator {
        let est = estimate(kind, &data, contrast)?;
        let flavors: Vec<VarianceFlavor> = args
            .se
            .iter()
            .copied()
            .filter(|&f| f != VarianceFlavor::Neyman || kind == EstimatorKind::Unadjusted)
            .collect();
        let standard_errors = flavors
            .iter()
            .map(|&flavor| Ok(StandardError { flavor, se: ate_standard_error(&est, &data, flavor)? }))
            .collect::<CliResult<Vec<_>>>()?;
        let mut intervals = Vec::new();
        for &method in &args.ci {
            match method {
                CiMethod::Normal => {
                    for s in &standard_errors {
                        let ci = confidence_interval(est.point, s.se, s.flavor, method, args.level, None)?;
                        intervals.push(Interval {
                            method,
                            se_flavor: s.flavor,
                            se: s.se,
                            quantile: z_quantile(p)?,
                            df: None,
                            lower: ci.lower,
                            upper: ci.upper,
                            width: ci.width(),
                        });
                    }
                }
                CiMethod::WelchT if kind == EstimatorKind::Unadjusted => {
                    let ci = welch_interval(&est, &data, args.level)?;
                    let df = ci.df.expect("welch interval carries df");
                    intervals.push(Interval {
                        method,
                        se_flavor: ci.se_flavor,
                        se: ate_standard_error(&est, &data, ci.se_flavor)?,
                        quantile: t_quantile(p, df)?,
                        df: Some(df),
                        lower: ci.lower,
                        upper: ci.upper,
                        width: ci.width(),
                    });
                }
                CiMethod::WelchT => {}
            }
        }
        estimates.push(EstimateRow {
            estimator: kind,
            point: est.point,
            standard_errors,
            intervals,
        });
    }
    Ok(AnalyzeReport {
        input: args.data.input.display().to_string(),
        outcome: args.data.outcome.clone(),
        covariates: args.data.covariates.clone(),
        treatment: data.labels()[contrast.treatment].clone(),
        control: data.labels()[contrast.control].clone(),
        n: data.n(),
        groups: (0..data.n_groups())
            .map(|g| GroupSize {
                label: data.labels()[g].clone(),
                size: data.group_size(g),
            })
            .collect(),
        level: args.level,
        estimates,
    })
}

fn analyze_table(r: &AnalyzeReport) -> String {
    let sizes: Vec<String> = r.groups.iter().map(|g| format!("{}: {}", g.label, g.size)).collect();
    let mut out = format!(
        "{} vs {} on {} (n = {}; {})\n\n",
        r.treatment,
        r.control,
        r.outcome,
        r.n,
        sizes.join(", ")
    );
    let mut t = TextTable::new(["estimator", "point", "se flavor", "se"]);
    for e in &r.estimates {
        if e.standard_errors.is_empty() {
            t.row([e.estimator.name().to_owned(), sig6(e.point), "-".into(), "-".into()]);
        }
        for s in &e.standard_errors {
            t.row([e.estimator.name().to_owned(), sig6(e.point), s.flavor.name().into(), sig6(s.se)]);
        }
    }
    out.push_str(&t.render());
    let level = sig6(100.0 * r.level);
    let mut t = TextTable::new([
        "estimator".to_owned(),
        "interval".to_owned(),
        "se flavor".to_owned(),
        format!("{level}% lower"),
        format!("{level}% upper"),
    ]);
    let mut any = false;
    for e in &r.estimates {
        for i in &e.intervals {
            any = true;
            t.row([
                e.estimator.name().to_owned(),
                i.method.name().into(),
                i.se_flavor.name().into(),
                sig6(i.lower),
                sig6(i.upper),
            ]);
        }
    }
    if any {
        out.push('\n');
        out.push_str(&t.render());
    }
    out
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<String> {
    render(args.format, &analyze_report(args)?, analyze_table)
}

// ------------------------------------------------------------ populations

#[derive(Debug, Clone, Serialize)]
pub struct PopulationInfo {
    /// `"lin2013"` or the population file path.
    pub source: String,
    pub n: usize,
    pub k: usize,
    pub ate: f64,
}

fn population(args: &PopulationArgs, seed: u64) -> CliResult<(Population<f64>, PopulationInfo)> {
    let (pop, source) = match (&args.dgp, &args.population) {
        (Some(Dgp::Lin2013), None) => {
            let n = args.n.unwrap_or(DEFAULT_DGP_SIZE);
            let mut rng = RngState::new(seed, POPULATION_STREAM);
            (generate_lin_population(n, &mut rng)?, "lin2013".to_owned())
        }
        (None, Some(path)) => (load_population(path)?, path.display().to_string()),
        _ => return Err(CliError::Usage("give exactly one of --dgp and --population".into())),
    };
    let info = PopulationInfo {
        source,
        n: pop.n(),
        k: pop.k(),
        ate: pop.ate(),
    };
    Ok((pop, info))
}

/// Treated shares used when no design is given.
pub const DEFAULT_SHARES: [f64; 5] = [0.75, 0.6, 0.5, 0.4, 0.25];

/// Resolves the requested designs to treated counts.
fn treated_counts(design: &DesignArgs, n: usize) -> CliResult<Vec<usize>> {
    let counts = match (&design.n_treated, &design.p_a) {
        (Some(c), None) => c.clone(),
        (None, ps) => ps
            .as_deref()
            .unwrap_or(&DEFAULT_SHARES)
            .iter()
            .map(|&p| {
                if p > 0.0 && p < 1.0 {
                    Ok((p * n as f64).round() as usize)
                } else {
                    Err(CliError::Usage(format!("--p-a values must lie in (0, 1), got {p}")))
                }
            })
            .collect::<CliResult<_>>()?,
        (Some(_), Some(_)) => return Err(CliError::Usage("give at most one of --n-treated and --p-a".into())),
    };
    if counts.is_empty() {
        return Err(CliError::Usage("no design requested".into()));
    }
    for &c in &counts {
        if c == 0 || c >= n {
            return Err(CliError::Usage(format!(
                "{c} treated subjects out of {n} leaves a group empty"
            )));
        }
    }
    Ok(counts)
}

fn share(n_treated: usize, n: usize) -> f64 {
    n_treated as f64 / n as f64
}

// --------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct DesignPanel {
    pub p_a: f64,
    pub n_treated: usize,
    pub asymptotic: AsymptoticReport<f64>,
    pub simulation: SimulationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub rng: &'static str,
    pub seed: u64,
    pub reps: usize,
    pub level: f64,
    pub estimators: Vec<EstimatorKind>,
    pub se_flavors: Vec<VarianceFlavor>,
    pub ci_methods: Vec<CiMethod>,
    pub population: PopulationInfo,
    pub designs: Vec<DesignPanel>,
}

pub fn simulate_report(args: &SimulateArgs) -> CliResult<SimulateOutput> {
    check_level(args.level)?;
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let (pop, info) = population(&args.source, args.seed)?;
    let mut designs = Vec::new();
    for n_treated in treated_counts(&args.design, pop.n())? {
        let p_a = share(n_treated, pop.n());
        let config = ReplicationConfig {
            n_treated,
            reps: args.reps,
            seed: args.seed,
            estimators: args.estimator.clone(),
            se_flavors: args.se.clone(),
            ci_methods: args.ci.clone(),
            level: args.level,
        };
        designs.push(DesignPanel {
            p_a,
            n_treated,
            asymptotic: asymptotic_report(&pop, p_a)?,
            simulation: run_replications(&pop, &config)?,
        });
    }
    Ok(SimulateOutput {
        rng: RNG_ALGORITHM,
        seed: args.seed,
        reps: args.reps,
        level: args.level,
        estimators: args.estimator.clone(),
        se_flavors: args.se.clone(),
        ci_methods: args.ci.clone(),
        population: info,
        designs,
    })
}

fn asymptotic_sd(r: &AsymptoticReport<f64>, kind: EstimatorKind) -> Option<f64> {
    match kind {
        EstimatorKind::Unadjusted => Some(r.unadjusted.sd),
        EstimatorKind::Adjusted => Some(r.adjusted.sd),
        EstimatorKind::Interact => Some(r.interact.sd),
        EstimatorKind::Tyranny => Some(r.tyranny.sd),
        EstimatorKind::TargetedAncova => None,
    }
}

fn simulate_table(r: &SimulateOutput) -> String {
    let mut out = format!(
        "{} population: n = {}, ATE = {}; {} replications, seed {}\n\n",
        r.population.source,
        r.population.n,
        sig6(r.population.ate),
        r.reps,
        r.seed
    );
    let mut header = vec!["p_A".to_owned()];
    header.extend(r.designs.iter().map(|d| sig6(d.p_a)));
    let mut t = TextTable::new(header);
    let mut panel = |title: &str, cell: &dyn Fn(&DesignPanel, EstimatorKind) -> Option<f64>| {
        t.row([title.to_owned()]);
        for &kind in &r.estimators {
            let mut row = vec![format!("  {}", kind.name())];
            row.extend(r.designs.iter().map(|d| opt(cell(d, kind))));
            t.row(row);
        }
    };
    panel("SD (asymptotic)", &|d, k| asymptotic_sd(&d.asymptotic, k));
    panel("SD (empirical)", &|d, k| d.simulation.estimator(k).and_then(|s| s.sd));
    panel("Bias (empirical)", &|d, k| d.simulation.estimator(k).map(|s| s.bias));
    out.push_str(&t.render());

    let mut t = TextTable::new(["p_A", "estimator", "interval", "se flavor", "coverage", "mean width"]);
    for d in &r.designs {
        for s in &d.simulation.estimators {
            for i in &s.intervals {
                t.row([
                    sig6(d.p_a),
                    s.kind.name().to_owned(),
                    i.method.name().to_owned(),
                    i.se_flavor.name().to_owned(),
                    sig6(i.coverage),
                    sig6(i.mean_width),
                ]);
            }
        }
    }
    out.push('\n');
    out.push_str(&t.render());
    let failures: usize = r
        .designs
        .iter()
        .flat_map(|d| &d.simulation.estimators)
        .map(|s| s.failures)
        .sum();
    if failures > 0 {
        out.push_str(&format!("\n{failures} failed estimator replications excluded\n"));
    }
    out
}

pub fn simulate(args: &SimulateArgs) -> CliResult<String> {
    let text = render(args.format, &simulate_report(args)?, simulate_table)?;
    match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ------------------------------------------------------------ asymptotics

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsOutput {
    pub population: PopulationInfo,
    pub designs: Vec<AsymptoticReport<f64>>,
}

pub fn asymptotics_report(args: &AsymptoticsArgs) -> CliResult<AsymptoticsOutput> {
    let (pop, info) = population(&args.source, args.seed)?;
    let designs = treated_counts(&args.design, pop.n())?
        .into_iter()
        .map(|c| Ok(asymptotic_report(&pop, share(c, pop.n()))?))
        .collect::<CliResult<_>>()?;
    Ok(AsymptoticsOutput {
        population: info,
        designs,
    })
}

fn asymptotics_table(r: &AsymptoticsOutput) -> String {
    let mut out = format!(
        "{} population: n = {}, K = {}, ATE = {}\n\n",
        r.population.source,
        r.population.n,
        r.population.k,
        sig6(r.population.ate)
    );
    let mut header = vec!["p_A".to_owned()];
    header.extend(r.designs.iter().map(|d| sig6(d.p_a)));
    let mut t = TextTable::new(header);
    let rows: [(&str, &dyn Fn(&AsymptoticReport<f64>) -> Option<f64>); 13] = [
        ("SD unadjusted", &|d| Some(d.unadjusted.sd)),
        ("SD adjusted", &|d| Some(d.adjusted.sd)),
        ("SD interact", &|d| Some(d.interact.sd)),
        ("SD tyranny", &|d| Some(d.tyranny.sd)),
        ("n var unadjusted", &|d| Some(d.unadjusted.variance)),
        ("n var adjusted", &|d| Some(d.adjusted.variance)),
        ("n var interact", &|d| Some(d.interact.variance)),
        ("sandwich limit adjusted", &|d| Some(d.sandwich.adjusted)),
        ("sandwich limit interact", &|d| Some(d.sandwich.interact)),
        ("gap unadjusted - interact", &|d| Some(d.gaps.unadjusted_minus_interact)),
        ("gap adjusted - interact", &|d| Some(d.gaps.adjusted_minus_interact)),
        ("bias term adjusted", &|d| d.bias_adjusted),
        ("bias term interact", &|d| d.bias_interact),
    ];
    for (label, f) in rows {
        let mut row = vec![label.to_owned()];
        row.extend(r.designs.iter().map(|d| opt(f(d))));
        t.row(row);
    }
    out.push_str(&t.render());
    out
}

pub fn asymptotics(args: &AsymptoticsArgs) -> CliResult<String> {
    render(args.format, &asymptotics_report(args)?, asymptotics_table)
}

// -------------------------------------------------------------- enumerate

#[derive(Debug, Clone, Serialize)]
pub struct EnumerateOutput {
    pub population: PopulationInfo,
    pub n_treated: usize,
    pub estimator: EstimatorKind,
    pub exact: ExactDistribution,
    /// Exact mean minus the ATE.
    pub bias: f64,
    /// Leading-order bias approximation, where one is available.
    pub bias_leading: Option<f64>,
}

pub fn enumerate_report(args: &EnumerateArgs) -> CliResult<EnumerateOutput> {
    let pop = load_population(&args.population)?;
    let exact = enumerate_assignments(&pop, args.n_treated, args.estimator)?;
    let bias_leading = match (args.estimator, pop.k()) {
        (EstimatorKind::Adjusted, 1) => Some(bias_leading_adjusted(&pop)?),
        (EstimatorKind::Interact, 1) => Some(bias_leading_interact(&pop, share(args.n_treated, pop.n()))?),
        (EstimatorKind::Unadjusted, _) => Some(0.0),
        _ => None,
    };
    Ok(EnumerateOutput {
        population: PopulationInfo {
            source: args.population.display().to_string(),
            n: pop.n(),
            k: pop.k(),
            ate: pop.ate(),
        },
        n_treated: args.n_treated,
        estimator: args.estimator,
        bias: exact.mean - pop.ate(),
        exact,
        bias_leading,
    })
}

fn enumerate_table(r: &EnumerateOutput) -> String {
    let mut t = TextTable::new(["quantity", "value"]);
    t.row(["estimator".to_owned(), r.estimator.name().to_owned()]);
    t.row(["assignments".to_owned(), r.exact.assignments.to_string()]);
    t.row(["ATE".to_owned(), sig6(r.population.ate)]);
    t.row(["mean".to_owned(), sig6(r.exact.mean)]);
    t.row(["variance".to_owned(), sig6(r.exact.variance)]);
    t.row(["min".to_owned(), sig6(r.exact.min)]);
    t.row(["max".to_owned(), sig6(r.exact.max)]);
    t.row(["bias".to_owned(), sig6(r.bias)]);
    t.row(["bias (leading term)".to_owned(), opt(r.bias_leading)]);
    t.render()
}

pub fn enumerate(args: &EnumerateArgs) -> CliResult<String> {
    render(args.format, &enumerate_report(args)?, enumerate_table)
}

// ------------------------------------------------------------------- bias

#[derive(Debug, Clone, Serialize)]
pub struct BiasRow {
    pub estimator: EstimatorKind,
    pub bias: f64,
    pub se: f64,
    pub ratio: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasOutput {
    pub treatment: String,
    pub control: String,
    pub n: usize,
    pub se_flavor: VarianceFlavor,
    /// Rows with `|bias / se|` above this are flagged.
    pub threshold: f64,
    pub rows: Vec<BiasRow>,
}

pub fn bias_report(args: &BiasArgs) -> CliResult<BiasOutput> {
    let Experiment { data, contrast } = experiment(&args.data)?;
    let BiasEstimates { adjusted, interact } = bias_estimate_from_sample(&data, contrast)?;
    let rows = [(EstimatorKind::Adjusted, adjusted), (EstimatorKind::Interact, interact)]
        .into_iter()
        .map(|(kind, bias)| {
            let est = estimate(kind, &data, contrast)?;
            let se = ate_standard_error(&est, &data, args.se)?;
            let ratio = if se > 0.0 { bias / se } else { 0.0 };
            Ok(BiasRow {
                estimator: kind,
                bias,
                se,
                ratio,
                flagged: ratio.abs() > BIAS_FLAG_THRESHOLD,
            })
        })
        .collect::<CliResult<_>>()?;
    Ok(BiasOutput {
        treatment: data.labels()[contrast.treatment].clone(),
        control: data.labels()[contrast.control].clone(),
        n: data.n(),
        se_flavor: args.se,
        threshold: BIAS_FLAG_THRESHOLD,
        rows,
    })
}

fn bias_table(r: &BiasOutput) -> String {
    let mut t = TextTable::new(["estimator", "bias estimate", "se", "bias / se", "flag"]);
    for row in &r.rows {
        t.row([
            row.estimator.name().to_owned(),
            sig6(row.bias),
            sig6(row.se),
            sig6(row.ratio),
            if row.flagged { "large".into() } else { String::new() },
        ]);
    }
    format!(
        "{} vs {} (n = {}), se flavor {}\n\n{}",
        r.treatment,
        r.control,
        r.n,
        r.se_flavor,
        t.render()
    )
}

pub fn bias(args: &BiasArgs) -> CliResult<String> {
    render(args.format, &bias_report(args)?, bias_table)
}

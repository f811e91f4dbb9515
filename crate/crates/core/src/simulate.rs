//! Randomization machinery: seeded random streams, completely randomized
//! assignments, the heterogeneous-effect example population, a parallel
//! Monte Carlo engine and exact enumeration over all assignments.
//!
//! Every replication draws from its own stream keyed by `(seed, index)`,
//! and per-replication results are reduced in index order with compensated
//! summation, so a report depends only on its inputs and never on the
//! number of worker threads.

use itertools::Itertools;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::Population;
use crate::combinatorics::check_enumerable;
use crate::error::{Error, Result};
use crate::estimators::{estimate, Contrast, EstimatorKind};
use crate::linalg::Matrix;
use crate::scalar::{KahanSum, Real};
use crate::variance::{ate_standard_error, confidence_interval, welch_interval, CiMethod, VarianceFlavor};

/// Name of the generator recorded in reports.
pub const RNG_ALGORITHM: &str = "xoshiro256++ (splitmix64 seeding)";

/// Deterministic random stream identified by a base seed and a stream index.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        // Two SplitMix64 outputs from each key fill the 256-bit state; SplitMix64
        // is a bijection of its state, so distinct keys give distinct states.
        let mut a = SplitMix64::seed_from_u64(seed);
        let mut b = SplitMix64::seed_from_u64(stream ^ 0x6A09_E667_F3BC_C909);
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes
            .chunks_exact_mut(8)
            .zip([a.next_u64(), a.next_u64(), b.next_u64(), b.next_u64()])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self {
            seed,
            stream,
            inner: Xoshiro256PlusPlus::from_seed(bytes),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` from the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer on `0..bound` (Lemire's multiply-and-reject).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
            }
        }
        (m >> 64) as u64
    }

    /// Standard normal by the Marsaglia polar method.
    ///
    /// Each accepted pair `(u, v)` yields `u f` now and `v f` on the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Completely randomized assignment of `n` subjects to treatments A and B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    treated: Vec<bool>,
    counts: [usize; 2],
}

impl Assignment {
    /// `true` for subjects assigned to A.
    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    /// Sizes of A and B.
    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }
}

fn check_design(n: usize, n_treated: usize) -> Result<()> {
    if n_treated == 0 || n_treated >= n {
        return Err(Error::InvalidDesign(format!(
            "{n_treated} treated out of {n}"
        )));
    }
    Ok(())
}

/// Simple random sample of `n_treated` subjects assigned to A by a partial
/// Fisher–Yates shuffle; the first `n_treated` shuffled positions go to A.
pub fn draw_assignment(n: usize, n_treated: usize, rng: &mut RngState) -> Result<Assignment> {
    check_design(n, n_treated)?;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut treated = vec![false; n];
    for i in 0..n_treated {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
        treated[idx[i]] = true;
    }
    Ok(Assignment {
        treated,
        counts: [n_treated, n - n_treated],
    })
}

/// Example population with strongly heterogeneous effects:
/// `z ~ U[-4, 4]`, `a = (e^z + e^{z/2})/4 + nu`, `b = (-e^z + e^{z/2})/4 + eps`.
///
/// Draws per subject, in order: `z`, `nu`, `eps`.
pub fn generate_lin_population<T: Real>(n: usize, rng: &mut RngState) -> Result<Population<T>> {
    if n < 2 {
        return Err(Error::InvalidSampleSize { n, population: n });
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = -4.0 + 8.0 * rng.uniform();
        let nu = rng.standard_normal();
        let eps = rng.standard_normal();
        let (e1, e2) = (zi.exp(), (zi / 2.0).exp());
        a.push(T::lit((e1 + e2) / 4.0 + nu));
        b.push(T::lit((-e1 + e2) / 4.0 + eps));
        z.push(T::lit(zi));
    }
    Population::new(a, b, Matrix::from_columns(n, &[z])?)
}

/// What to compute in each replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationConfig {
    pub n_treated: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub se_flavors: Vec<VarianceFlavor>,
    pub ci_methods: Vec<CiMethod>,
    pub level: f64,
}

impl ReplicationConfig {
    /// All five estimators, the four sandwich flavors and both interval methods.
    pub fn full(n_treated: usize, reps: usize, seed: u64) -> Self {
        Self {
            n_treated,
            reps,
            seed,
            estimators: EstimatorKind::ALL.to_vec(),
            se_flavors: VarianceFlavor::SANDWICH.to_vec(),
            ci_methods: vec![CiMethod::Normal, CiMethod::WelchT],
            level: 0.95,
        }
    }

    /// Interval specifications evaluated for `kind`: a normal interval per
    /// applicable SE flavor, plus the Welch interval for the difference in means.
    fn intervals(&self, kind: EstimatorKind) -> Vec<(CiMethod, VarianceFlavor)> {
        let mut out = Vec::new();
        for &m in &self.ci_methods {
            match m {
                CiMethod::Normal => out.extend(self.flavors(kind).into_iter().map(|f| (m, f))),
                CiMethod::WelchT if kind == EstimatorKind::Unadjusted => out.push((m, VarianceFlavor::Hc2)),
                CiMethod::WelchT => {}
            }
        }
        out
    }

    fn flavors(&self, kind: EstimatorKind) -> Vec<VarianceFlavor> {
        self.se_flavors
            .iter()
            .copied()
            .filter(|&f| f != VarianceFlavor::Neyman || kind == EstimatorKind::Unadjusted)
            .collect()
    }
}

#[derive(Debug, Clone)]
struct RepOutcome {
    point: f64,
    ses: Vec<f64>,
    covered: Vec<bool>,
    widths: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeSummary {
    pub flavor: VarianceFlavor,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSummary {
    pub method: CiMethod,
    pub se_flavor: VarianceFlavor,
    pub coverage: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub kind: EstimatorKind,
    /// Replications in which the estimate and every requested SE succeeded.
    pub successes: usize,
    pub failures: usize,
    pub mean: f64,
    /// Empirical standard deviation (divisor `successes - 1`).
    pub sd: Option<f64>,
    pub bias: f64,
    /// Monte Carlo standard error of `bias`.
    pub bias_mc_se: Option<f64>,
    pub standard_errors: Vec<SeSummary>,
    pub intervals: Vec<IntervalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub rng: &'static str,
    pub seed: u64,
    pub reps: usize,
    pub n: usize,
    pub n_treated: usize,
    pub level: f64,
    pub ate: f64,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimulationReport {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.kind == kind)
    }
}

fn one_estimator<T: Real>(
    kind: EstimatorKind,
    data: &crate::estimators::ObservedData<T>,
    config: &ReplicationConfig,
    ate: f64,
) -> Result<RepOutcome> {
    let ab = Contrast::new(0, 1);
    let est = estimate(kind, data, ab)?;
    let point = est.point.to_f64().unwrap();
    let flavors = config.flavors(kind);
    let mut ses = Vec::with_capacity(flavors.len());
    for &f in &flavors {
        ses.push(ate_standard_error(&est, data, f)?);
    }
    let level = T::lit(config.level);
    let specs = config.intervals(kind);
    let mut covered = Vec::with_capacity(specs.len());
    let mut widths = Vec::with_capacity(specs.len());
    for (method, flavor) in specs {
        let ci = match method {
            CiMethod::WelchT => welch_interval(&est, data, level)?,
            CiMethod::Normal => {
                let se = ses[flavors.iter().position(|&f| f == flavor).unwrap()];
                confidence_interval(est.point, se, flavor, method, level, None)?
            }
        };
        covered.push(ci.contains(T::lit(ate)));
        widths.push(ci.width().to_f64().unwrap());
    }
    Ok(RepOutcome {
        point,
        ses: ses.into_iter().map(|s| s.to_f64().unwrap()).collect(),
        covered,
        widths,
    })
}

fn replicate<T: Real>(
    pop: &Population<T>,
    config: &ReplicationConfig,
    ate: f64,
    rep: usize,
) -> Result<Vec<Option<RepOutcome>>> {
    let mut rng = RngState::new(config.seed, rep as u64);
    let assignment = draw_assignment(pop.n(), config.n_treated, &mut rng)?;
    let data = pop.observe(assignment.treated())?;
    Ok(config
        .estimators
        .iter()
        .map(|&k| one_estimator(k, &data, config, ate).ok())
        .collect())
}

/// Mean and sample standard deviation, reduced in order with compensation.
fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, Option<f64>, usize) {
    let mut sum = KahanSum::new();
    let mut m = 0usize;
    for v in values.clone() {
        sum.add(v);
        m += 1;
    }
    let mean = sum.total() / m as f64;
    let sd = (m > 1).then(|| {
        let ss: KahanSum = values.map(|v| (v - mean) * (v - mean)).collect();
        (ss.total() / (m - 1) as f64).sqrt()
    });
    (mean, sd, m)
}

fn summarize(kind: EstimatorKind, config: &ReplicationConfig, ate: f64, outcomes: &[&RepOutcome], failures: usize) -> EstimatorSummary {
    let (mean, sd, m) = moments(outcomes.iter().map(|o| o.point));
    let standard_errors = config
        .flavors(kind)
        .into_iter()
        .enumerate()
        .map(|(j, flavor)| {
            let (mean, sd, _) = moments(outcomes.iter().map(move |o| o.ses[j]));
            SeSummary { flavor, mean, sd }
        })
        .collect();
    let intervals = config
        .intervals(kind)
        .into_iter()
        .enumerate()
        .map(|(j, (method, se_flavor))| {
            let hits = outcomes.iter().filter(|o| o.covered[j]).count();
            let (mean_width, _, _) = moments(outcomes.iter().map(move |o| o.widths[j]));
            IntervalSummary {
                method,
                se_flavor,
                coverage: hits as f64 / m as f64,
                mean_width,
            }
        })
        .collect();
    EstimatorSummary {
        kind,
        successes: m,
        failures,
        mean,
        sd,
        bias: mean - ate,
        bias_mc_se: sd.map(|s| s / (m as f64).sqrt()),
        standard_errors,
        intervals,
    }
}

/// Runs `config.reps` independent randomizations of `pop` on the current
/// rayon pool. Replication `r` uses stream `r` of `config.seed`.
///
/// Replications in which an estimator (or one of its standard errors)
/// fails are excluded from that estimator's aggregates and counted; more
/// than 0.1% failures for any estimator is an error.
pub fn run_replications<T: Real>(pop: &Population<T>, config: &ReplicationConfig) -> Result<SimulationReport> {
    check_design(pop.n(), config.n_treated)?;
    if config.reps == 0 {
        return Err(Error::InvalidDesign("at least one replication is required".into()));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::OutOfDomain(format!("level {}", config.level)));
    }
    let ate = pop.ate().to_f64().unwrap();
    let results: Vec<Vec<Option<RepOutcome>>> = (0..config.reps)
        .into_par_iter()
        .map(|r| replicate(pop, config, ate, r))
        .collect::<Result<_>>()?;

    let mut estimators = Vec::with_capacity(config.estimators.len());
    for (e, &kind) in config.estimators.iter().enumerate() {
        let ok: Vec<&RepOutcome> = results.iter().filter_map(|r| r[e].as_ref()).collect();
        let failures = config.reps - ok.len();
        if failures * 1000 > config.reps || ok.is_empty() {
            return Err(Error::ExcessiveFailures {
                failures,
                reps: config.reps,
            });
        }
        estimators.push(summarize(kind, config, ate, &ok, failures));
    }
    Ok(SimulationReport {
        rng: RNG_ALGORITHM,
        seed: config.seed,
        reps: config.reps,
        n: pop.n(),
        n_treated: config.n_treated,
        level: config.level,
        ate,
        estimators,
    })
}

/// Exact randomization distribution of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub assignments: u64,
    pub mean: f64,
    /// Divisor equals the number of assignments.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

/// Evaluates `kind` on every assignment of `n_treated` subjects to A, in
/// lexicographic order of the treated index sets.
pub fn enumerate_assignments<T: Real>(
    pop: &Population<T>,
    n_treated: usize,
    kind: EstimatorKind,
) -> Result<ExactDistribution> {
    check_design(pop.n(), n_treated)?;
    let count = check_enumerable(pop.n(), n_treated)?;
    let mut values = Vec::with_capacity(count as usize);
    let mut treated = vec![false; pop.n()];
    for subset in (0..pop.n()).combinations(n_treated) {
        treated.iter_mut().for_each(|t| *t = false);
        subset.iter().for_each(|&i| treated[i] = true);
        let data = pop.observe(&treated)?;
        values.push(estimate(kind, &data, Contrast::new(0, 1))?.point.to_f64().unwrap());
    }
    let mean = values.iter().copied().collect::<KahanSum>().total() / count as f64;
    let variance = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .total()
        / count as f64;
    Ok(ExactDistribution {
        assignments: count,
        mean,
        variance,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

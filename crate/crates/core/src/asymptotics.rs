//! Randomization-based asymptotic variances and bias terms for the ATE
//! estimators, evaluated as finite-population plug-ins.
//!
//! Every "limit" is replaced by the corresponding moment of the supplied
//! population (divisor `n`), with `p_A` the share assigned to treatment A.
//! Variances are on the `sqrt(n)` scale: `v` is the variance of
//! `sqrt(n) (estimate - ATE)`, so the estimator's own standard deviation
//! is `sqrt(v / n)`.
//!
//! The unadjusted and pooled-adjusted variances are written in the same
//! template as the interacted one, with centered outcomes and pooled-slope
//! prediction errors respectively. These forms follow algebraically from
//! the sandwich-limit gaps rather than being transcribed formulas.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{Contrast, ObservedData};
use crate::linalg::{dot, least_squares, Matrix};
use crate::scalar::{covariance, mean, variance, Real};

/// Both potential outcomes and the covariates of every subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    a: Vec<T>,
    b: Vec<T>,
    z: Matrix<T>,
}

impl<T: Real> Population<T> {
    pub fn new(a: Vec<T>, b: Vec<T>, z: Matrix<T>) -> Result<Self> {
        if a.len() != b.len() || a.len() != z.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "a has {}, b has {}, covariates have {} rows",
                a.len(),
                b.len(),
                z.nrows()
            )));
        }
        if a.len() < 2 {
            return Err(Error::InvalidSampleSize {
                n: a.len(),
                population: a.len(),
            });
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) || !z.is_finite() {
            return Err(Error::NonFinite("population"));
        }
        Ok(Self { a, b, z })
    }

    /// Population with a single covariate.
    pub fn with_covariate(a: Vec<T>, b: Vec<T>, z: Vec<T>) -> Result<Self> {
        let n = z.len();
        Self::new(a, b, Matrix::from_columns(n, &[z])?)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn covariates(&self) -> &Matrix<T> {
        &self.z
    }

    pub fn ate(&self) -> T {
        mean(&self.a).unwrap() - mean(&self.b).unwrap()
    }

    /// Same subjects with the roles of the two treatments exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
            z: self.z.clone(),
        }
    }

    /// Outcomes observed under `treated` (`true` means treatment A).
    pub fn observe(&self, treated: &[bool]) -> Result<ObservedData<T>> {
        if treated.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} assignments for {} subjects",
                treated.len(),
                self.n()
            )));
        }
        let y = treated
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(&t, (&a, &b))| if t { a } else { b })
            .collect();
        ObservedData::two_group(y, treated, self.z.clone())
    }

    fn centered_covariates(&self) -> Matrix<T> {
        let means = self.z.column_means();
        let mut zc = self.z.clone();
        for i in 0..zc.nrows() {
            for (j, m) in means.iter().enumerate() {
                zc[(i, j)] = zc[(i, j)] - *m;
            }
        }
        zc
    }

    fn single_covariate(&self) -> Result<Vec<T>> {
        if self.k() != 1 {
            return Err(Error::MultiCovariateUnsupported(self.k()));
        }
        Ok(self.z.column(0))
    }
}

/// Per-arm population least-squares slopes and their combinations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlsSummary<T> {
    pub qa: Vec<T>,
    pub qb: Vec<T>,
    /// `p_A Qa + (1 - p_A) Qb`.
    pub q: Vec<T>,
    /// `(1 - p_A) Qa + p_A Qb`.
    pub q_e: Vec<T>,
    /// `Qa - Qb`.
    pub q_diff: Vec<T>,
    pub p_a: T,
}

/// Centered potential outcomes net of their population linear fits.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionErrors<T> {
    /// Residuals using each arm's own slope.
    pub a_star: Vec<T>,
    pub b_star: Vec<T>,
    /// Residuals using the pooled slope `Q`.
    pub a_dstar: Vec<T>,
    pub b_dstar: Vec<T>,
}

fn check_share<T: Real>(p_a: T) -> Result<()> {
    if p_a > T::zero() && p_a < T::one() {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("treated share {p_a}")))
    }
}

fn slopes<T: Real>(pop: &Population<T>, y: &[T]) -> Result<Vec<T>> {
    let (n, k) = (pop.n(), pop.k());
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut x = Matrix::zeros(n, k + 1);
    for i in 0..n {
        x[(i, 0)] = T::one();
        for j in 0..k {
            x[(i, j + 1)] = pop.z[(i, j)];
        }
    }
    let fit = least_squares(&x, y, None)?;
    Ok(fit.coefficients[1..].to_vec())
}

pub fn pls_summary<T: Real>(pop: &Population<T>, p_a: T) -> Result<PlsSummary<T>> {
    check_share(p_a)?;
    let qa = slopes(pop, &pop.a)?;
    let qb = slopes(pop, &pop.b)?;
    let comb = |wa: T, wb: T| -> Vec<T> { qa.iter().zip(&qb).map(|(&x, &y)| wa * x + wb * y).collect() };
    let q = comb(p_a, T::one() - p_a);
    let q_e = comb(T::one() - p_a, p_a);
    let q_diff = comb(T::one(), -T::one());
    Ok(PlsSummary {
        qa,
        qb,
        q,
        q_e,
        q_diff,
        p_a,
    })
}

fn residualize<T: Real>(y: &[T], zc: &Matrix<T>, slope: &[T]) -> Vec<T> {
    let ybar = mean(y).unwrap();
    y.iter()
        .enumerate()
        .map(|(i, &v)| (v - ybar) - dot(zc.row(i), slope))
        .collect()
}

pub fn prediction_errors<T: Real>(pop: &Population<T>, pls: &PlsSummary<T>) -> Result<PredictionErrors<T>> {
    if pls.qa.len() != pop.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} slopes for {} covariates",
            pls.qa.len(),
            pop.k()
        )));
    }
    let zc = pop.centered_covariates();
    Ok(PredictionErrors {
        a_star: residualize(&pop.a, &zc, &pls.qa),
        b_star: residualize(&pop.b, &zc, &pls.qb),
        a_dstar: residualize(&pop.a, &zc, &pls.q),
        b_dstar: residualize(&pop.b, &zc, &pls.q),
    })
}

/// `((1-p)/p) var(x) + (p/(1-p)) var(y) + 2 cov(x, y)`, divisor `n`.
fn neyman_form<T: Real>(x: &[T], y: &[T], p: T) -> T {
    let q = T::one() - p;
    let v = q / p * variance(x, 0) + p / q * variance(y, 0) + T::lit(2.0) * covariance(x, y, 0);
    v.max(T::zero())
}

fn errors_at<T: Real>(pop: &Population<T>, p_a: T) -> Result<PredictionErrors<T>> {
    let pls = pls_summary(pop, p_a)?;
    prediction_errors(pop, &pls)
}

/// Normalized asymptotic variance of the interacted estimator.
pub fn asym_var_interact<T: Real>(pop: &Population<T>, p_a: T) -> Result<T> {
    let e = errors_at(pop, p_a)?;
    Ok(neyman_form(&e.a_star, &e.b_star, p_a))
}

/// Normalized asymptotic variance of the difference in means.
pub fn asym_var_unadjusted<T: Real>(pop: &Population<T>, p_a: T) -> Result<T> {
    check_share(p_a)?;
    Ok(neyman_form(&pop.a, &pop.b, p_a))
}

/// Normalized asymptotic variance of the pooled OLS-adjusted estimator.
pub fn asym_var_adjusted<T: Real>(pop: &Population<T>, p_a: T) -> Result<T> {
    let e = errors_at(pop, p_a)?;
    Ok(neyman_form(&e.a_dstar, &e.b_dstar, p_a))
}

/// Probability limits of `n` times the sandwich variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichLimits<T> {
    /// `var(a**)/p + var(b**)/(1-p)`.
    pub adjusted: T,
    /// `var(a*)/p + var(b*)/(1-p)`.
    pub interact: T,
}

pub fn sandwich_limits<T: Real>(pop: &Population<T>, p_a: T) -> Result<SandwichLimits<T>> {
    let e = errors_at(pop, p_a)?;
    let q = T::one() - p_a;
    Ok(SandwichLimits {
        adjusted: variance(&e.a_dstar, 0) / p_a + variance(&e.b_dstar, 0) / q,
        interact: variance(&e.a_star, 0) / p_a + variance(&e.b_star, 0) / q,
    })
}

/// Precision lost relative to the interacted estimator, on the normalized scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionGaps<T> {
    /// `var(E) / (p(1-p))` with `E = (z - zbar) Q_E`.
    pub unadjusted_minus_interact: T,
    /// `(2p-1)^2 var(D) / (p(1-p))` with `D = (z - zbar)(Qa - Qb)`.
    pub adjusted_minus_interact: T,
}

pub fn precision_gaps<T: Real>(pop: &Population<T>, p_a: T) -> Result<PrecisionGaps<T>> {
    let pls = pls_summary(pop, p_a)?;
    let zc = pop.centered_covariates();
    let project = |slope: &[T]| -> Vec<T> { (0..pop.n()).map(|i| dot(zc.row(i), slope)).collect() };
    let var_e = variance(&project(&pls.q_e), 0);
    let var_d = variance(&project(&pls.q_diff), 0);
    let pq = p_a * (T::one() - p_a);
    let imbalance = T::lit(2.0) * p_a - T::one();
    Ok(PrecisionGaps {
        unadjusted_minus_interact: var_e / pq,
        adjusted_minus_interact: imbalance * imbalance * var_d / pq,
    })
}

/// Leading `1/n` term in the bias of the pooled OLS-adjusted estimator
/// (single covariate). Does not depend on the treated share.
pub fn bias_leading_adjusted<T: Real>(pop: &Population<T>) -> Result<T> {
    let z = pop.single_covariate()?;
    let vz = variance(&z, 0);
    if vz <= T::zero() {
        return Err(Error::DegenerateAuxiliary);
    }
    let zbar = mean(&z).unwrap();
    let ate = pop.ate();
    let n = T::of_usize(pop.n());
    let moment = pop
        .a
        .iter()
        .zip(&pop.b)
        .zip(&z)
        .map(|((&a, &b), &zi)| {
            let d = zi - zbar;
            ((a - b) - ate) * d * d
        })
        .sum::<T>()
        / n;
    Ok(-moment / (n * vz))
}

/// Leading term in the bias of the interacted estimator (single covariate).
pub fn bias_leading_interact<T: Real>(pop: &Population<T>, p_a: T) -> Result<T> {
    let z = pop.single_covariate()?;
    let vz = variance(&z, 0);
    if vz <= T::zero() {
        return Err(Error::DegenerateAuxiliary);
    }
    let e = errors_at(pop, p_a)?;
    let zbar = mean(&z).unwrap();
    let n = T::of_usize(pop.n());
    let third = |r: &[T]| -> T {
        r.iter()
            .zip(&z)
            .map(|(&ri, &zi)| {
                let d = zi - zbar;
                ri * d * d
            })
            .sum::<T>()
            / n
    };
    let inv_n = T::one() / n;
    let fa = T::one() / (p_a * n) - inv_n;
    let fb = T::one() / ((T::one() - p_a) * n) - inv_n;
    Ok(-(fa * third(&e.a_star) - fb * third(&e.b_star)) / vz)
}

/// Sample plug-in estimates of the two leading bias terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasEstimates<T> {
    pub adjusted: T,
    pub interact: T,
}

/// Plug-in estimates of the leading bias terms from one experiment:
/// sample variance of the covariate, and within-group sample covariances
/// of the outcome (or its within-group regression residual) with the
/// squared centered covariate.
pub fn bias_estimate_from_sample<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<BiasEstimates<T>> {
    if data.n_groups() != 2 {
        return Err(Error::UnsupportedGroupCount(data.n_groups()));
    }
    if data.k() != 1 {
        return Err(Error::MultiCovariateUnsupported(data.k()));
    }
    for g in [contrast.treatment, contrast.control] {
        if g >= 2 || contrast.treatment == contrast.control {
            return Err(Error::InvalidDesign(format!(
                "contrast {} vs {}",
                contrast.treatment, contrast.control
            )));
        }
        if data.group_size(g) < 3 {
            return Err(Error::GroupTooSmall {
                group: g,
                size: data.group_size(g),
                required: 3,
            });
        }
    }
    let z = data.covariates().column(0);
    let s2z = variance(&z, 1);
    if s2z <= T::zero() {
        return Err(Error::DegenerateAuxiliary);
    }
    let zbar = mean(&z).unwrap();
    let n = T::of_usize(data.n());

    let group_terms = |g: usize| -> Result<(T, T, usize)> {
        let idx = data.members(g);
        let y: Vec<T> = idx.iter().map(|&i| data.y()[i]).collect();
        let zg: Vec<T> = idx.iter().map(|&i| z[i]).collect();
        let sq: Vec<T> = zg.iter().map(|&v| (v - zbar) * (v - zbar)).collect();
        let vzg = variance(&zg, 0);
        if vzg <= T::zero() {
            return Err(Error::DegenerateAuxiliary);
        }
        let slope = covariance(&zg, &y, 0) / vzg;
        let (ym, zm) = (mean(&y).unwrap(), mean(&zg).unwrap());
        let resid: Vec<T> = y
            .iter()
            .zip(&zg)
            .map(|(&yi, &zi)| (yi - ym) - slope * (zi - zm))
            .collect();
        Ok((covariance(&y, &sq, 1), covariance(&resid, &sq, 1), idx.len()))
    };
    let (ca, ra, na) = group_terms(contrast.treatment)?;
    let (cb, rb, nb) = group_terms(contrast.control)?;

    let adjusted = -(ca - cb) / (n * s2z);
    let inv_n = T::one() / n;
    let fa = T::one() / T::of_usize(na) - inv_n;
    let fb = T::one() / T::of_usize(nb) - inv_n;
    let interact = -(fa * ra - fb * rb) / s2z;
    Ok(BiasEstimates { adjusted, interact })
}

/// Normalized variance and the implied standard deviation of one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticSpread<T> {
    pub variance: T,
    pub sd: T,
}

impl<T: Real> AsymptoticSpread<T> {
    fn new(variance: T, n: usize) -> Self {
        Self {
            variance,
            sd: (variance / T::of_usize(n)).sqrt(),
        }
    }
}

/// Everything the asymptotic theory says about one population and design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport<T> {
    pub n: usize,
    pub p_a: T,
    pub ate: T,
    pub pls: PlsSummary<T>,
    pub unadjusted: AsymptoticSpread<T>,
    pub adjusted: AsymptoticSpread<T>,
    pub interact: AsymptoticSpread<T>,
    /// Asymptotically equivalent to the interacted estimator.
    pub tyranny: AsymptoticSpread<T>,
    pub sandwich: SandwichLimits<T>,
    pub gaps: PrecisionGaps<T>,
    /// Present only with a single covariate.
    pub bias_adjusted: Option<T>,
    pub bias_interact: Option<T>,
}

pub fn asymptotic_report<T: Real>(pop: &Population<T>, p_a: T) -> Result<AsymptoticReport<T>> {
    let n = pop.n();
    let interact = AsymptoticSpread::new(asym_var_interact(pop, p_a)?, n);
    let (bias_adjusted, bias_interact) = if pop.k() == 1 {
        (
            Some(bias_leading_adjusted(pop)?),
            Some(bias_leading_interact(pop, p_a)?),
        )
    } else {
        (None, None)
    };
    Ok(AsymptoticReport {
        n,
        p_a,
        ate: pop.ate(),
        pls: pls_summary(pop, p_a)?,
        unadjusted: AsymptoticSpread::new(asym_var_unadjusted(pop, p_a)?, n),
        adjusted: AsymptoticSpread::new(asym_var_adjusted(pop, p_a)?, n),
        interact,
        tyranny: interact,
        sandwich: sandwich_limits(pop, p_a)?,
        gaps: precision_gaps(pop, p_a)?,
        bias_adjusted,
        bias_interact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
    }

    fn toy_linear() -> Population<f64> {
        let z = vec![0.0, 2.0, 1.0, 3.0];
        Population::with_covariate(z.clone(), vec![0.0; 4], z).unwrap()
    }

    #[test]
    fn pls_examples() {
        let pop = toy_linear();
        let s = pls_summary(&pop, 0.5).unwrap();
        assert!((s.qa[0] - 1.0).abs() < 1e-14);
        assert!(s.qb[0].abs() < 1e-14);
        let sw = pls_summary(&pop.swapped(), 0.5).unwrap();
        assert_eq!((sw.qa[0], sw.qb[0]), (s.qb[0], s.qa[0]));
        assert!(matches!(pls_summary(&pop, 1.0), Err(Error::OutOfDomain(_))));

        let flat = Population::with_covariate(vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 3.0]).unwrap();
        assert!(matches!(pls_summary(&flat, 0.5), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn prediction_error_examples() {
        let pop = toy_linear();
        let e = errors_at(&pop, 0.3).unwrap();
        assert!(e.a_star.iter().all(|v| v.abs() < 1e-14));

        let k0 = Population::new(vec![1.0, 4.0, 7.0], vec![0.0, 1.0, 5.0], Matrix::zeros(3, 0)).unwrap();
        let e0 = errors_at(&k0, 0.5).unwrap();
        assert_eq!(e0.a_star, vec![-3.0, 0.0, 3.0]);
        assert_eq!(e0.b_star, vec![-2.0, -1.0, 3.0]);
    }

    #[test]
    fn toy_variances() {
        let pop = toy_linear();
        assert!(close(asym_var_unadjusted(&pop, 0.5).unwrap(), 1.25, 1e-14));
        assert!(asym_var_interact(&pop, 0.5).unwrap().abs() < 1e-14);
        for p in [0.1, 0.5, 0.77] {
            assert!(asym_var_interact(&pop, p).unwrap().abs() < 1e-14);
        }
        let gaps = precision_gaps(&pop, 0.5).unwrap();
        assert!(close(gaps.unadjusted_minus_interact, 1.25, 1e-14));
        assert!(gaps.adjusted_minus_interact.abs() < 1e-15);

        let constant = Population::with_covariate(vec![2.0; 4], vec![-1.0; 4], vec![0.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(asym_var_unadjusted(&constant, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn equal_slopes_make_adjusted_match_interact() {
        let z = vec![0.3, -1.0, 2.2, 0.9, 1.4, -0.5];
        let a = vec![1.0, 0.2, 3.1, -0.7, 2.5, 0.0];
        let b: Vec<f64> = a.iter().map(|v| v - 2.0).collect();
        let pop = Population::with_covariate(a, b, z).unwrap();
        for p in [0.2, 0.5, 0.9] {
            let adj = asym_var_adjusted(&pop, p).unwrap();
            let int = asym_var_interact(&pop, p).unwrap();
            assert!(close(adj, int, 1e-12), "{adj} vs {int}");
        }
        assert!(sandwich_limits(&pop, 0.3).unwrap().adjusted >= asym_var_adjusted(&pop, 0.3).unwrap());
    }

    #[test]
    fn sandwich_gap_examples() {
        // Constant effect: no adjusted gap.
        let z = vec![0.3, -1.0, 2.2, 0.9, 1.4];
        let a = vec![1.0, 0.2, 3.1, -0.7, 2.5];
        let b: Vec<f64> = a.iter().map(|v| v - 0.5).collect();
        let pop = Population::with_covariate(a.clone(), b, z.clone()).unwrap();
        let s = sandwich_limits(&pop, 0.35).unwrap();
        assert!(close(s.adjusted, asym_var_adjusted(&pop, 0.35).unwrap(), 1e-12));

        // Effect linear in z: no interact gap.
        let b: Vec<f64> = a.iter().zip(&z).map(|(v, zi)| v - 3.0 * zi + 1.0).collect();
        let pop = Population::with_covariate(a, b, z).unwrap();
        let s = sandwich_limits(&pop, 0.35).unwrap();
        assert!(close(s.interact, asym_var_interact(&pop, 0.35).unwrap(), 1e-12));
    }

    #[test]
    fn unadjusted_gap_cancels_when_q_e_vanishes() {
        // Choose b so that (1-p) Qa + p Qb = 0.
        let p = 0.3;
        let z = vec![-1.5, -0.4, 0.1, 0.8, 1.7, 2.4, -0.9];
        let noise = [0.4, -0.2, 0.9, -1.1, 0.3, 0.05, -0.35];
        let a: Vec<f64> = z.iter().zip(&noise).map(|(zi, e)| 2.0 * zi + e).collect();
        let raw_b: Vec<f64> = a.iter().map(|v| -(1.0 - p) / p * v).collect();
        let pop = Population::with_covariate(a.clone(), raw_b, z.clone()).unwrap();
        let s = pls_summary(&pop, p).unwrap();
        assert!(s.q_e[0].abs() < 1e-12);
        let gaps = precision_gaps(&pop, p).unwrap();
        assert!(gaps.unadjusted_minus_interact.abs() < 1e-10);
        let direct = asym_var_unadjusted(&pop, p).unwrap() - asym_var_interact(&pop, p).unwrap();
        assert!(direct.abs() < 1e-10);
    }

    #[test]
    fn bias_leading_examples() {
        let z = vec![-1.0, 0.0, 1.0, 2.0, 0.5];
        let a = vec![0.3, 1.2, -0.4, 2.0, 0.1];
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let pop = Population::with_covariate(a, b, z).unwrap();
        assert!(bias_leading_adjusted(&pop).unwrap().abs() < 1e-16);

        // Symmetric z with an odd effect: zero third moment.
        let z = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let a: Vec<f64> = z.iter().map(|v: &f64| v.powi(3)).collect();
        let pop = Population::with_covariate(a, vec![0.0; 5], z.clone()).unwrap();
        assert!(bias_leading_adjusted(&pop).unwrap().abs() < 1e-15);

        // Linear outcomes: no interacted bias.
        let a: Vec<f64> = z.iter().map(|v| 1.0 + 2.0 * v).collect();
        let b: Vec<f64> = z.iter().map(|v| -0.5 * v).collect();
        let pop = Population::with_covariate(a, b, z.clone()).unwrap();
        assert!(bias_leading_interact(&pop, 0.3).unwrap().abs() < 1e-15);

        // Balanced design with identical residual patterns.
        let a: Vec<f64> = z.iter().map(|v| v * v).collect();
        let b: Vec<f64> = z.iter().map(|v| v * v + 3.0 * v).collect();
        let pop = Population::with_covariate(a, b, z).unwrap();
        assert!(bias_leading_interact(&pop, 0.5).unwrap().abs() < 1e-15);

        let two = Population::new(vec![1.0, 2.0, 3.0], vec![0.0; 3], Matrix::zeros(3, 0)).unwrap();
        assert_eq!(bias_leading_adjusted(&two), Err(Error::MultiCovariateUnsupported(0)));
        assert_eq!(bias_leading_interact(&two, 0.5), Err(Error::MultiCovariateUnsupported(0)));
    }

    #[test]
    fn sample_bias_estimates() {
        let treated = [true, true, true, false, false, false, false];
        let z = Matrix::from_columns(7, &[vec![0.1, 1.0, -2.0, 0.5, 3.0, -1.0, 2.0]]).unwrap();
        let flat = ObservedData::two_group(vec![4.0; 7], &treated, z.clone()).unwrap();
        let est = bias_estimate_from_sample(&flat, Contrast::new(0, 1)).unwrap();
        assert_eq!((est.adjusted, est.interact), (0.0, 0.0));

        let small = ObservedData::two_group(vec![1.0; 5], &treated[2..], z.select_rows(&[2, 3, 4, 5, 6])).unwrap();
        assert!(matches!(
            bias_estimate_from_sample(&small, Contrast::new(0, 1)),
            Err(Error::GroupTooSmall { required: 3, .. })
        ));
    }

    #[test]
    fn report_is_consistent() {
        let z = vec![-1.5, -0.4, 0.1, 0.8, 1.7, 2.4, -0.9, 0.0];
        let a: Vec<f64> = z.iter().map(|v: &f64| v.exp()).collect();
        let b: Vec<f64> = z.iter().map(|v| -v + 0.3 * v * v).collect();
        let pop = Population::with_covariate(a, b, z).unwrap();
        let r = asymptotic_report(&pop, 0.25).unwrap();
        assert_eq!(r.tyranny, r.interact);
        assert!(close(r.unadjusted.sd, (r.unadjusted.variance / 8.0).sqrt(), 1e-15));
        assert!(r.bias_adjusted.is_some() && r.bias_interact.is_some());
    }

    fn population_strategy() -> impl Strategy<Value = (Population<f64>, f64)> {
        (6usize..30, 1usize..=3).prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-2.0f64..2.0, n * k),
                0.05f64..0.95,
            )
                .prop_map(move |(a, b, z, p)| {
                    let mut b = b;
                    // Nonlinear coupling so the slopes differ.
                    for (i, bi) in b.iter_mut().enumerate() {
                        *bi += z[i * k] * z[i * k];
                    }
                    (Population::new(a, b, Matrix::new(n, k, z).unwrap()).unwrap(), p)
                })
        })
    }

    proptest! {
        #[test]
        fn gap_identities((pop, p) in population_strategy()) {
            let (u, a, i) = (
                asym_var_unadjusted(&pop, p).unwrap(),
                asym_var_adjusted(&pop, p).unwrap(),
                asym_var_interact(&pop, p).unwrap(),
            );
            let g = precision_gaps(&pop, p).unwrap();
            let scale = u.max(a).max(1e-12);
            prop_assert!(((u - i) - g.unadjusted_minus_interact).abs() <= 1e-10 * scale);
            prop_assert!(((a - i) - g.adjusted_minus_interact).abs() <= 1e-10 * scale);
            prop_assert!(i <= u + 1e-12 * scale && i <= a + 1e-12 * scale);
        }

        #[test]
        fn prediction_error_invariants((pop, p) in population_strategy()) {
            let e = errors_at(&pop, p).unwrap();
            let zc = pop.centered_covariates();
            for r in [&e.a_star, &e.b_star, &e.a_dstar, &e.b_dstar] {
                prop_assert!(mean(r).unwrap().abs() < 1e-10);
            }
            for j in 0..pop.k() {
                let col = zc.column(j);
                let scale = dot(&col, &col).sqrt() * 10.0;
                prop_assert!(dot(&e.a_star, &col).abs() <= 1e-8 * scale);
                prop_assert!(dot(&e.b_star, &col).abs() <= 1e-8 * scale);
            }
            let ate = pop.ate();
            for i in 0..pop.n() {
                let lhs = e.a_dstar[i] - e.b_dstar[i];
                let rhs = (pop.a()[i] - pop.b()[i]) - ate;
                prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn affine_recoding_invariance((pop, p) in population_strategy(), shift in -5.0f64..5.0, scale in 0.2f64..4.0) {
            let mut z = pop.covariates().clone();
            for i in 0..z.nrows() {
                for j in 0..z.ncols() {
                    z[(i, j)] = scale * z[(i, j)] + shift * (j as f64 + 1.0);
                }
            }
            let moved = Population::new(pop.a().to_vec(), pop.b().to_vec(), z).unwrap();
            for f in [asym_var_unadjusted::<f64>, asym_var_adjusted, asym_var_interact] {
                let (x, y) = (f(&pop, p).unwrap(), f(&moved, p).unwrap());
                prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-12));
            }
        }

        #[test]
        fn balanced_share_equalizes_adjusted((pop, _p) in population_strategy()) {
            let a = asym_var_adjusted(&pop, 0.5).unwrap();
            let i = asym_var_interact(&pop, 0.5).unwrap();
            prop_assert!((a - i).abs() <= 1e-10 * a.max(1e-12));
        }
    }
}

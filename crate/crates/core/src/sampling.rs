//! Regression estimators of a finite-population mean under simple random
//! sampling, with their exact variance and leading-order bias.
//!
//! Population moments use divisor `N`.

use itertools::Itertools;

use crate::combinatorics::{check_enumerable, MAX_SUBSETS};
use crate::error::{Error, Result};
use crate::scalar::{covariance, mean, variance, Real};

/// Study variable `y` and auxiliary variable `z` for every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopulation1D<T> {
    y: Vec<T>,
    z: Vec<T>,
}

impl<T: Real> FinitePopulation1D<T> {
    pub fn new(y: Vec<T>, z: Vec<T>) -> Result<Self> {
        if y.len() != z.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} study values, {} auxiliary values",
                y.len(),
                z.len()
            )));
        }
        if y.len() < 2 {
            return Err(Error::InvalidSampleSize {
                n: y.len(),
                population: y.len(),
            });
        }
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("population"));
        }
        Ok(Self { y, z })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    fn z_variance(&self) -> Result<T> {
        let v = variance(&self.z, 0);
        if v <= T::zero() {
            return Err(Error::DegenerateAuxiliary);
        }
        Ok(v)
    }
}

/// Population least-squares slope of `y` on `z`.
pub fn q_pls<T: Real>(pop: &FinitePopulation1D<T>) -> Result<T> {
    let vz = pop.z_variance()?;
    Ok(covariance(&pop.z, &pop.y, 0) / vz)
}

/// `ybar_S + q (zbar - zbar_S)`.
pub fn regression_estimate<T: Real>(
    sample_y: &[T],
    sample_z: &[T],
    pop_mean_z: T,
    q: T,
) -> Result<T> {
    if sample_y.len() != sample_z.len() {
        return Err(Error::DimensionMismatch("sample y and z differ in length".into()));
    }
    let ys = mean(sample_y).ok_or(Error::EmptySample)?;
    let zs = mean(sample_z).ok_or(Error::EmptySample)?;
    Ok(ys + q * (pop_mean_z - zs))
}

fn check_sample_size<T: Real>(pop: &FinitePopulation1D<T>, n: usize) -> Result<()> {
    if n == 0 || n > pop.len() {
        return Err(Error::InvalidSampleSize {
            n,
            population: pop.len(),
        });
    }
    Ok(())
}

/// Exact variance of the fixed-slope estimator with slope `q0` under SRS of size `n`.
pub fn fixed_slope_variance<T: Real>(pop: &FinitePopulation1D<T>, q0: T, n: usize) -> Result<T> {
    check_sample_size(pop, n)?;
    let big_n = T::of_usize(pop.len());
    let small_n = T::of_usize(n);
    let ybar = mean(&pop.y).unwrap();
    let zbar = mean(&pop.z).unwrap();
    let ss = pop
        .y
        .iter()
        .zip(&pop.z)
        .map(|(&y, &z)| {
            let d = (y - ybar) - q0 * (z - zbar);
            d * d
        })
        .sum::<T>();
    let fpc = (big_n - small_n) / (big_n - T::one());
    Ok(fpc / small_n * ss / big_n)
}

/// Leading term of the bias of the sample-OLS regression estimator.
pub fn ols_sampling_bias_leading<T: Real>(pop: &FinitePopulation1D<T>, n: usize) -> Result<T> {
    check_sample_size(pop, n)?;
    let vz = pop.z_variance()?;
    let q = q_pls(pop)?;
    let ybar = mean(&pop.y).unwrap();
    let zbar = mean(&pop.z).unwrap();
    let big_n = T::of_usize(pop.len());
    let moment = pop
        .y
        .iter()
        .zip(&pop.z)
        .map(|(&y, &z)| {
            let dz = z - zbar;
            let e = (y - ybar) - q * dz;
            e * dz * dz
        })
        .sum::<T>()
        / big_n;
    let factor = T::one() / T::of_usize(n) - T::one() / big_n;
    Ok(-(factor * moment) / vz)
}

/// Estimators of the population mean evaluated by [`enumerate_srs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SrsEstimator<T> {
    SampleMean,
    FixedSlope(T),
    /// Slope re-estimated by OLS within each sample.
    OlsRegression,
}

/// Exact moments of an estimator over every equally likely sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments<T> {
    pub samples: u64,
    pub mean: T,
    /// Divisor equals the number of samples.
    pub variance: T,
}

/// Evaluates `estimator` on all `C(N, n)` samples in lexicographic order.
pub fn enumerate_srs<T: Real>(
    pop: &FinitePopulation1D<T>,
    n: usize,
    estimator: SrsEstimator<T>,
) -> Result<ExactMoments<T>> {
    check_sample_size(pop, n)?;
    let count = check_enumerable(pop.len(), n)?;
    let zbar = mean(&pop.z).unwrap();

    let mut values = Vec::with_capacity(count as usize);
    let mut ys = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for idx in (0..pop.len()).combinations(n) {
        ys.clear();
        zs.clear();
        ys.extend(idx.iter().map(|&i| pop.y[i]));
        zs.extend(idx.iter().map(|&i| pop.z[i]));
        let q = match estimator {
            SrsEstimator::SampleMean => T::zero(),
            SrsEstimator::FixedSlope(q0) => q0,
            SrsEstimator::OlsRegression => {
                let vz = variance(&zs, 0);
                if vz <= T::zero() {
                    return Err(Error::DegenerateAuxiliary);
                }
                covariance(&zs, &ys, 0) / vz
            }
        };
        values.push(regression_estimate(&ys, &zs, zbar, q)?);
    }
    debug_assert!(values.len() as u64 <= MAX_SUBSETS);
    let m = mean(&values).unwrap();
    Ok(ExactMoments {
        samples: count,
        mean: m,
        variance: variance(&values, 0),
    })
}

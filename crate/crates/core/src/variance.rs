//! Coefficient covariance estimators and confidence intervals.
//!
//! The sandwich flavors follow the usual HC numbering. Under weighted least
//! squares the meat uses weighted residuals and weighted-metric leverages,
//! which reduces to the textbook formulas when all weights are one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{normal_quantile, student_t_quantile};
use crate::error::{Error, Result};
use crate::estimators::{AteEstimate, Contrast, EstimatorKind, ObservedData};
use crate::linalg::{DesignMatrix, FitResult, Matrix};
use crate::scalar::{variance, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceFlavor {
    /// Homoskedastic OLS variance `s^2 (X'X)^{-1}`.
    Classic,
    Hc0,
    Hc1,
    Hc2,
    Hc3,
    /// `s_A^2/n_A + s_B^2/n_B`; difference in means only.
    Neyman,
}

impl VarianceFlavor {
    pub const ALL: [VarianceFlavor; 6] = [
        VarianceFlavor::Classic,
        VarianceFlavor::Hc0,
        VarianceFlavor::Hc1,
        VarianceFlavor::Hc2,
        VarianceFlavor::Hc3,
        VarianceFlavor::Neyman,
    ];

    pub const SANDWICH: [VarianceFlavor; 4] = [
        VarianceFlavor::Hc0,
        VarianceFlavor::Hc1,
        VarianceFlavor::Hc2,
        VarianceFlavor::Hc3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VarianceFlavor::Classic => "classic",
            VarianceFlavor::Hc0 => "hc0",
            VarianceFlavor::Hc1 => "hc1",
            VarianceFlavor::Hc2 => "hc2",
            VarianceFlavor::Hc3 => "hc3",
            VarianceFlavor::Neyman => "neyman",
        }
    }
}

impl fmt::Display for VarianceFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VarianceFlavor {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        VarianceFlavor::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown variance flavor '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Normal,
    WelchT,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::Normal => "normal",
            CiMethod::WelchT => "welch_t",
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CiMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normal" => Ok(CiMethod::Normal),
            "welch" | "welch_t" => Ok(CiMethod::WelchT),
            _ => Err(format!("unknown interval method '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval<T> {
    pub lower: T,
    pub upper: T,
    pub level: T,
    pub method: CiMethod,
    pub se_flavor: VarianceFlavor,
    pub df: Option<T>,
}

impl<T: Real> ConfidenceInterval<T> {
    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, x: T) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Covariance matrix of the coefficients of `fit` under `flavor`.
pub fn coefficient_covariance<T: Real>(
    fit: &FitResult<T>,
    x: &DesignMatrix<T>,
    flavor: VarianceFlavor,
) -> Result<Matrix<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    if fit.residuals.len() != n || fit.coefficients.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} rows and {} coefficients, design is {n}x{p}",
            fit.residuals.len(),
            fit.coefficients.len()
        )));
    }
    if fit.rank < p {
        return Err(Error::RankDeficient { rank: fit.rank, cols: p });
    }
    let bread = fit.gram_inverse();
    let n_eff = fit.effective_n();

    let meat_scale = match flavor {
        VarianceFlavor::Neyman => return Err(Error::FlavorNotApplicable("neyman")),
        VarianceFlavor::Classic => {
            if n_eff <= p {
                return Err(Error::OutOfDomain(format!("{n_eff} observations for {p} coefficients")));
            }
            let s2 = fit.rss / T::of_usize(n_eff - p);
            let mut v = bread.clone();
            for i in 0..p {
                for j in 0..p {
                    v[(i, j)] = v[(i, j)] * s2;
                }
            }
            return Ok(v);
        }
        VarianceFlavor::Hc1 => {
            if n_eff <= p {
                return Err(Error::OutOfDomain(format!("{n_eff} observations for {p} coefficients")));
            }
            T::of_usize(n_eff) / T::of_usize(n_eff - p)
        }
        _ => T::one(),
    };

    let near_one = T::one() - T::epsilon() * T::lit(64.0);
    let mut meat = Matrix::<T>::zeros(p, p);
    for i in 0..n {
        let w = fit.weight(i);
        if w <= T::zero() {
            continue;
        }
        let h = fit.hat_diagonals[i];
        let e = fit.residuals[i];
        let mut omega = w * w * e * e;
        match flavor {
            VarianceFlavor::Hc2 | VarianceFlavor::Hc3 => {
                if h >= near_one {
                    return Err(Error::LeverageOne(i));
                }
                let inflate = T::one() / (T::one() - h);
                omega = omega * inflate;
                if flavor == VarianceFlavor::Hc3 {
                    omega = omega * inflate;
                }
            }
            _ => {}
        }
        if omega == T::zero() {
            continue;
        }
        let row = x.row(i);
        for a in 0..p {
            let ra = omega * row[a];
            for b in a..p {
                meat[(a, b)] = meat[(a, b)] + ra * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }

    // bread * meat * bread
    let mut bm = Matrix::<T>::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            bm[(i, j)] = (0..p).fold(T::zero(), |acc, k| acc + bread[(i, k)] * meat[(k, j)]);
        }
    }
    let mut v = Matrix::<T>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let s = (0..p).fold(T::zero(), |acc, k| acc + bm[(i, k)] * bread[(k, j)]);
            v[(i, j)] = s * meat_scale;
            v[(j, i)] = v[(i, j)];
        }
    }
    Ok(v)
}

/// Sample variances (divisor `n_g - 1`) and sizes of the two contrasted groups.
pub fn group_sample_variances<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<[(T, usize); 2]> {
    let mut out = [(T::zero(), 0); 2];
    for (slot, g) in out.iter_mut().zip([contrast.treatment, contrast.control]) {
        if g >= data.n_groups() {
            return Err(Error::InvalidDesign(format!("no group {g}")));
        }
        let ys = data.group_outcomes(g);
        if ys.len() < 2 {
            return Err(Error::GroupTooSmall {
                group: g,
                size: ys.len(),
                required: 2,
            });
        }
        *slot = (variance(&ys, 1), ys.len());
    }
    Ok(out)
}

/// `s_A^2/n_A + s_B^2/n_B`.
pub fn neyman_variance<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<T> {
    let [(sa, na), (sb, nb)] = group_sample_variances(data, contrast)?;
    Ok(sa / T::of_usize(na) + sb / T::of_usize(nb))
}

/// Welch–Satterthwaite degrees of freedom.
pub fn welch_df<T: Real>(s2a: T, na: usize, s2b: T, nb: usize) -> Result<T> {
    if na < 2 || nb < 2 {
        return Err(Error::GroupTooSmall {
            group: if na < 2 { 0 } else { 1 },
            size: na.min(nb),
            required: 2,
        });
    }
    if s2a < T::zero() || s2b < T::zero() {
        return Err(Error::OutOfDomain("negative variance".into()));
    }
    if s2a + s2b <= T::zero() {
        return Err(Error::DegenerateVariance);
    }
    let va = s2a / T::of_usize(na);
    let vb = s2b / T::of_usize(nb);
    let num = (va + vb) * (va + vb);
    let den = va * va / T::of_usize(na - 1) + vb * vb / T::of_usize(nb - 1);
    Ok(num / den)
}

/// Standard normal quantile, in the caller's precision.
pub fn z_quantile<T: Real>(p: T) -> Result<T> {
    let p = p.to_f64().unwrap_or(f64::NAN);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfDomain(format!("probability {p}")));
    }
    Ok(T::lit(normal_quantile(p)))
}

/// Student-t quantile, in the caller's precision.
pub fn t_quantile<T: Real>(p: T, df: T) -> Result<T> {
    let q = student_t_quantile(p.to_f64().unwrap_or(f64::NAN), df.to_f64().unwrap_or(f64::NAN))?;
    Ok(T::lit(q))
}

/// `point +/- q se`, with `q` the normal or Student-t quantile at `(1 + level)/2`.
pub fn confidence_interval<T: Real>(
    point: T,
    se: T,
    se_flavor: VarianceFlavor,
    method: CiMethod,
    level: T,
    df: Option<T>,
) -> Result<ConfidenceInterval<T>> {
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::OutOfDomain(format!("level {level}")));
    }
    if !(se >= T::zero()) {
        return Err(Error::OutOfDomain(format!("standard error {se}")));
    }
    let p = (T::one() + level) / T::lit(2.0);
    let (q, df) = match method {
        CiMethod::Normal => (z_quantile(p)?, None),
        CiMethod::WelchT => {
            let df = df.ok_or(Error::MissingDf)?;
            (t_quantile(p, df)?, Some(df))
        }
    };
    let half = q * se;
    Ok(ConfidenceInterval {
        lower: point - half,
        upper: point + half,
        level,
        method,
        se_flavor,
        df,
    })
}

/// Variance of an ATE estimate: the contrast quadratic form of the sandwich
/// from the estimate's own fit, or the Neyman formula for the difference in means.
pub fn ate_variance<T: Real>(
    est: &AteEstimate<T>,
    data: &ObservedData<T>,
    flavor: VarianceFlavor,
) -> Result<T> {
    if flavor == VarianceFlavor::Neyman {
        if est.kind != EstimatorKind::Unadjusted {
            return Err(Error::FlavorNotApplicable("neyman"));
        }
        return neyman_variance(data, est.contrast);
    }
    let v = coefficient_covariance(&est.fit, &est.design, flavor)?;
    Ok(v.quadratic_form(&est.contrast_vector).max(T::zero()))
}

pub fn ate_standard_error<T: Real>(
    est: &AteEstimate<T>,
    data: &ObservedData<T>,
    flavor: VarianceFlavor,
) -> Result<T> {
    Ok(ate_variance(est, data, flavor)?.sqrt())
}

/// Welch interval: difference in means, HC2 (= Neyman) standard error and
/// Welch–Satterthwaite degrees of freedom.
pub fn welch_interval<T: Real>(
    est: &AteEstimate<T>,
    data: &ObservedData<T>,
    level: T,
) -> Result<ConfidenceInterval<T>> {
    if est.kind != EstimatorKind::Unadjusted {
        return Err(Error::FlavorNotApplicable("welch_t"));
    }
    let [(sa, na), (sb, nb)] = group_sample_variances(data, est.contrast)?;
    let df = welch_df(sa, na, sb, nb)?;
    let se = ate_standard_error(est, data, VarianceFlavor::Hc2)?;
    confidence_interval(est.point, se, VarianceFlavor::Hc2, CiMethod::WelchT, level, Some(df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ate_adjusted, ate_interact, ate_unadjusted};
    use proptest::prelude::*;

    fn toy_k0() -> ObservedData<f64> {
        ObservedData::two_group(vec![0.0, 4.0, 1.0, 1.0], &[true, true, false, false], Matrix::zeros(4, 0))
            .unwrap()
    }

    fn ab() -> Contrast {
        Contrast::new(0, 1)
    }

    #[test]
    fn sandwich_hand_values() {
        let d = toy_k0();
        let est = ate_unadjusted(&d, ab()).unwrap();
        let hc0 = ate_variance(&est, &d, VarianceFlavor::Hc0).unwrap();
        assert!((hc0 - 2.0).abs() < 1e-13);
        let hc2 = ate_variance(&est, &d, VarianceFlavor::Hc2).unwrap();
        assert!((hc2 - 4.0).abs() < 1e-13);
        assert_eq!(neyman_variance(&d, ab()).unwrap(), 4.0);
        assert_eq!(ate_variance(&est, &d, VarianceFlavor::Neyman).unwrap(), 4.0);
        // hc1: n/(n-p) = 2
        let hc1 = ate_variance(&est, &d, VarianceFlavor::Hc1).unwrap();
        assert!((hc1 - 4.0).abs() < 1e-13);
        // hc3 doubles hc2 again for h = 1/2
        let hc3 = ate_variance(&est, &d, VarianceFlavor::Hc3).unwrap();
        assert!((hc3 - 8.0).abs() < 1e-12);
        // classic: rss 8 / 2 * (1/2 + 1/2)
        let classic = ate_variance(&est, &d, VarianceFlavor::Classic).unwrap();
        assert!((classic - 4.0).abs() < 1e-13);
    }

    #[test]
    fn exact_fit_gives_zero_sandwich() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 4.0]]).unwrap();
        let fit = crate::linalg::least_squares(&x, &[1.0, 3.0, 5.0, 9.0], None).unwrap();
        for f in VarianceFlavor::SANDWICH {
            let v = coefficient_covariance(&fit, &x, f).unwrap();
            assert!(v.as_slice().iter().all(|x: &f64| x.abs() < 1e-25));
        }
    }

    #[test]
    fn leverage_one_rejected() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let fit = crate::linalg::least_squares(&x, &[1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(coefficient_covariance(&fit, &x, VarianceFlavor::Hc2).unwrap_err(), Error::LeverageOne(2));
        assert_eq!(coefficient_covariance(&fit, &x, VarianceFlavor::Hc3).unwrap_err(), Error::LeverageOne(2));
        assert!(coefficient_covariance(&fit, &x, VarianceFlavor::Hc0).is_ok());
        assert!(matches!(
            coefficient_covariance(&fit, &x, VarianceFlavor::Neyman),
            Err(Error::FlavorNotApplicable(_))
        ));
    }

    #[test]
    fn neyman_only_for_difference_in_means() {
        let d = ObservedData::two_group(
            vec![0.0, 4.0, 1.0, 1.0, 3.0, 2.0],
            &[true, true, true, false, false, false],
            Matrix::new(6, 1, vec![0.0, 2.0, 1.0, 3.0, 1.0, 2.0]).unwrap(),
        )
        .unwrap();
        let est = ate_adjusted(&d, ab()).unwrap();
        assert!(matches!(ate_variance(&est, &d, VarianceFlavor::Neyman), Err(Error::FlavorNotApplicable(_))));
        let constant = ObservedData::two_group(vec![2.0; 4], &[true, true, false, false], Matrix::zeros(4, 0)).unwrap();
        assert_eq!(neyman_variance(&constant, ab()).unwrap(), 0.0);
        let tiny = ObservedData::two_group(vec![1.0, 2.0, 3.0], &[true, false, false], Matrix::zeros(3, 0)).unwrap();
        assert!(matches!(neyman_variance(&tiny, ab()), Err(Error::GroupTooSmall { .. })));
    }

    #[test]
    fn welch_df_examples() {
        assert!((welch_df::<f64>(3.0, 10, 3.0, 10).unwrap() - 18.0).abs() < 1e-12);
        assert!((welch_df::<f64>(8.0, 2, 0.0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((welch_df::<f64>(5.0, 7, 0.0, 30).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(welch_df::<f64>(0.0, 3, 0.0, 3).unwrap_err(), Error::DegenerateVariance);
        assert!(matches!(welch_df::<f64>(1.0, 1, 1.0, 3), Err(Error::GroupTooSmall { .. })));
    }

    #[test]
    fn interval_examples() {
        let ci = confidence_interval::<f64>(0.0, 1.0, VarianceFlavor::Hc2, CiMethod::Normal, 0.95, None).unwrap();
        assert!((ci.upper - 1.95996).abs() < 1e-4 && (ci.lower + 1.95996).abs() < 1e-4);
        let ci = confidence_interval::<f64>(3.0, 0.0, VarianceFlavor::Hc2, CiMethod::Normal, 0.95, None).unwrap();
        assert_eq!((ci.lower, ci.upper), (3.0, 3.0));
        let ci = confidence_interval::<f64>(0.0, 1.0, VarianceFlavor::Hc2, CiMethod::WelchT, 0.95, Some(1.0)).unwrap();
        assert!((ci.upper - 12.7062).abs() < 1e-3);
        assert_eq!(
            confidence_interval::<f64>(0.0, 1.0, VarianceFlavor::Hc2, CiMethod::WelchT, 0.95, None).unwrap_err(),
            Error::MissingDf
        );
        assert!(confidence_interval::<f64>(0.0, 1.0, VarianceFlavor::Hc2, CiMethod::Normal, 1.0, None).is_err());
        assert!(confidence_interval::<f64>(0.0, -1.0, VarianceFlavor::Hc2, CiMethod::Normal, 0.9, None).is_err());
    }

    #[test]
    fn welch_interval_on_toy() {
        let d = toy_k0();
        let est = ate_unadjusted(&d, ab()).unwrap();
        let ci = welch_interval(&est, &d, 0.95).unwrap();
        assert!((ci.df.unwrap() - 1.0).abs() < 1e-12);
        assert!((ci.width() - 2.0 * 12.7062 * 2.0).abs() < 4e-3);
    }

    #[test]
    fn weighted_hc_flavors_reduce_to_unweighted_at_unit_weights() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 4.0], [1.0, 2.5]]).unwrap();
        let y = [1.0, 2.5, 5.0, 8.0, 4.0];
        let a = crate::linalg::least_squares(&x, &y, None).unwrap();
        let b = crate::linalg::least_squares(&x, &y, Some(&[1.0; 5])).unwrap();
        for f in VarianceFlavor::SANDWICH.into_iter().chain([VarianceFlavor::Classic]) {
            let va = coefficient_covariance(&a, &x, f).unwrap();
            let vb = coefficient_covariance(&b, &x, f).unwrap();
            assert_eq!(va, vb);
        }
    }

    fn dataset() -> impl Strategy<Value = ObservedData<f64>> {
        (3usize..12, 3usize..12).prop_flat_map(|(na, nb)| {
            let n = na + nb;
            (
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(-3.0..3.0f64, n),
            )
                .prop_map(move |(y, z)| {
                    let t: Vec<bool> = (0..n).map(|i| i < na).collect();
                    ObservedData::two_group(y, &t, Matrix::new(n, 1, z).unwrap()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn hc2_equals_neyman(d in dataset()) {
            let est = ate_unadjusted(&d, ab()).unwrap();
            let hc2 = ate_variance(&est, &d, VarianceFlavor::Hc2).unwrap();
            let ney = neyman_variance(&d, ab()).unwrap();
            prop_assert!((hc2 - ney).abs() <= 1e-12 * ney.max(1e-300));
        }

        #[test]
        fn flavor_ordering(d in dataset()) {
            for est in [ate_unadjusted(&d, ab()).unwrap(), ate_adjusted(&d, ab()).unwrap()] {
                let v = |f| ate_variance(&est, &d, f).unwrap();
                let (h0, h1, h2, h3) = (v(VarianceFlavor::Hc0), v(VarianceFlavor::Hc1), v(VarianceFlavor::Hc2), v(VarianceFlavor::Hc3));
                let slack = 1e-12 * h3.max(1.0);
                prop_assert!(h0 <= h1 + slack);
                prop_assert!(h0 <= h2 + slack);
                prop_assert!(h2 <= h3 + slack);
            }
        }

        #[test]
        fn scale_equivariance(d in dataset(), c in 0.1..20.0f64) {
            let scaled = ObservedData::new(
                d.y().iter().map(|v| c * v).collect(),
                d.groups().to_vec(),
                d.labels().to_vec(),
                d.covariates().clone(),
            ).unwrap();
            let e1 = ate_adjusted(&d, ab()).unwrap();
            let e2 = ate_adjusted(&scaled, ab()).unwrap();
            for f in [VarianceFlavor::Classic, VarianceFlavor::Hc0, VarianceFlavor::Hc1, VarianceFlavor::Hc2, VarianceFlavor::Hc3] {
                let a = ate_variance(&e1, &d, f).unwrap() * c * c;
                let b = ate_variance(&e2, &scaled, f).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
            }
        }

        #[test]
        fn interval_contains_point_with_exact_width(point in -5.0..5.0f64, se in 0.0..3.0f64, level in 0.5..0.999f64) {
            let ci = confidence_interval(point, se, VarianceFlavor::Hc2, CiMethod::Normal, level, None).unwrap();
            prop_assert!(ci.contains(point));
            let q = normal_quantile((1.0 + level) / 2.0);
            prop_assert!((ci.width() - 2.0 * q * se).abs() <= 1e-12 * (1.0 + q * se));
        }
    }

    #[test]
    fn interact_hc_variance_is_finite() {
        let d = ObservedData::two_group(
            vec![0.0, 4.0, 1.0, 3.0, 1.0, 1.0, 2.0, 0.0],
            &[true, true, true, true, false, false, false, false],
            Matrix::new(8, 1, vec![0.0, 2.0, 1.0, 3.0, 1.0, 3.0, 0.5, 2.0]).unwrap(),
        )
        .unwrap();
        let est = ate_interact(&d, ab()).unwrap();
        for f in VarianceFlavor::SANDWICH {
            assert!(ate_variance(&est, &d, f).unwrap() > 0.0);
        }
    }
}

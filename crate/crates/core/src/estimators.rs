//! Average-treatment-effect point estimators computed from observed data.
//!
//! Every estimator is expressed as a linear contrast `c'b` of the
//! coefficients of one least-squares fit, so the sandwich machinery in
//! [`crate::variance`] applies uniformly. Estimates for a contrast `(A, B)`
//! are always computed on the canonically ordered pair and negated when
//! needed, so swapping the contrast flips the sign bit-for-bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, DesignMatrix, FitResult, Matrix};
use crate::scalar::{mean, Real};

/// Outcome, group label and covariate row for each subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData<T> {
    y: Vec<T>,
    groups: Vec<usize>,
    labels: Vec<String>,
    covariates: Matrix<T>,
    sizes: Vec<usize>,
}

impl<T: Real> ObservedData<T> {
    /// `groups[i]` indexes into `labels`; every label must be used.
    pub fn new(y: Vec<T>, groups: Vec<usize>, labels: Vec<String>, covariates: Matrix<T>) -> Result<Self> {
        let n = y.len();
        if groups.len() != n || covariates.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} outcomes, {} labels, {} covariate rows",
                groups.len(),
                covariates.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("outcome"));
        }
        if !covariates.is_finite() {
            return Err(Error::NonFinite("covariates"));
        }
        let mut sizes = vec![0usize; labels.len()];
        for &g in &groups {
            if g >= labels.len() {
                return Err(Error::DimensionMismatch(format!("group index {g} has no label")));
            }
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyGroup(g));
        }
        Ok(Self {
            y,
            groups,
            labels,
            covariates,
            sizes,
        })
    }

    /// Groups are indexed in order of first appearance.
    pub fn from_labels<S: AsRef<str>>(y: Vec<T>, raw: &[S], covariates: Matrix<T>) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let groups = raw
            .iter()
            .map(|s| {
                let s = s.as_ref();
                labels.iter().position(|l| l == s).unwrap_or_else(|| {
                    labels.push(s.to_owned());
                    labels.len() - 1
                })
            })
            .collect();
        Self::new(y, groups, labels, covariates)
    }

    /// Two-arm data: group 0 is `"A"` (treated), group 1 is `"B"`.
    pub fn two_group(y: Vec<T>, treated: &[bool], covariates: Matrix<T>) -> Result<Self> {
        let groups = treated.iter().map(|&t| usize::from(!t)).collect();
        Self::new(y, groups, vec!["A".into(), "B".into()], covariates)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates `K`.
    pub fn k(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn covariates(&self) -> &Matrix<T> {
        &self.covariates
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.groups[i] == g).collect()
    }

    pub fn group_outcomes(&self, g: usize) -> Vec<T> {
        self.y
            .iter()
            .zip(&self.groups)
            .filter(|(_, &gi)| gi == g)
            .map(|(&y, _)| y)
            .collect()
    }
}

/// Ordered pair of distinct groups; the estimand is `mean(A) - mean(B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Contrast {
    pub treatment: usize,
    pub control: usize,
}

impl Contrast {
    pub fn new(treatment: usize, control: usize) -> Self {
        Self { treatment, control }
    }

    pub fn swapped(self) -> Self {
        Self::new(self.control, self.treatment)
    }

    fn check<T: Real>(self, data: &ObservedData<T>) -> Result<()> {
        let g = data.n_groups();
        if self.treatment == self.control || self.treatment >= g || self.control >= g {
            return Err(Error::InvalidDesign(format!(
                "contrast ({}, {}) with {g} groups",
                self.treatment, self.control
            )));
        }
        Ok(())
    }

    /// Lower index first, plus the sign that maps the canonical estimate back.
    fn canonical<T: Real>(self) -> (usize, usize, T) {
        if self.treatment < self.control {
            (self.treatment, self.control, T::one())
        } else {
            (self.control, self.treatment, -T::one())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Unadjusted,
    Adjusted,
    Interact,
    Tyranny,
    TargetedAncova,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Unadjusted,
        EstimatorKind::Adjusted,
        EstimatorKind::Interact,
        EstimatorKind::Tyranny,
        EstimatorKind::TargetedAncova,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Unadjusted => "unadjusted",
            EstimatorKind::Adjusted => "adjusted",
            EstimatorKind::Interact => "interact",
            EstimatorKind::Tyranny => "tyranny",
            EstimatorKind::TargetedAncova => "targeted_ancova",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown estimator '{s}'"))
    }
}

/// A point estimate together with the regression it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct AteEstimate<T> {
    pub kind: EstimatorKind,
    pub contrast: Contrast,
    pub point: T,
    /// Regressors of `fit`, restricted to the rows that entered it.
    pub design: DesignMatrix<T>,
    pub fit: FitResult<T>,
    /// `point == contrast_vector . fit.coefficients`.
    pub contrast_vector: Vec<T>,
}

/// Dispatches on `kind`.
pub fn estimate<T: Real>(kind: EstimatorKind, data: &ObservedData<T>, contrast: Contrast) -> Result<AteEstimate<T>> {
    match kind {
        EstimatorKind::Unadjusted => ate_unadjusted(data, contrast),
        EstimatorKind::Adjusted => ate_adjusted(data, contrast),
        EstimatorKind::Interact => ate_interact(data, contrast),
        EstimatorKind::Tyranny => ate_tyranny(data, contrast),
        EstimatorKind::TargetedAncova => ate_targeted_ancova(data, contrast),
    }
}

fn indicator<T: Real>(cond: bool) -> T {
    if cond {
        T::one()
    } else {
        T::zero()
    }
}

fn rows_of<T: Real>(data: &ObservedData<T>, a: usize, b: usize) -> Vec<usize> {
    (0..data.n())
        .filter(|&i| data.groups[i] == a || data.groups[i] == b)
        .collect()
}

fn unit_vector<T: Real>(p: usize, at: usize, sign: T) -> Vec<T> {
    let mut c = vec![T::zero(); p];
    c[at] = sign;
    c
}

fn finish<T: Real>(
    kind: EstimatorKind,
    contrast: Contrast,
    design: DesignMatrix<T>,
    fit: FitResult<T>,
    contrast_vector: Vec<T>,
) -> AteEstimate<T> {
    let point = contrast_vector
        .iter()
        .zip(&fit.coefficients)
        .fold(T::zero(), |acc, (&c, &b)| acc + c * b);
    AteEstimate {
        kind,
        contrast,
        point,
        design,
        fit,
        contrast_vector,
    }
}

/// `(1, D_a)` over the rows of groups `a` and `b`.
fn two_group_design<T: Real>(data: &ObservedData<T>, rows: &[usize], a: usize) -> DesignMatrix<T> {
    let mut x = Matrix::zeros(rows.len(), 2);
    for (r, &i) in rows.iter().enumerate() {
        x[(r, 0)] = T::one();
        x[(r, 1)] = indicator(data.groups[i] == a);
    }
    x
}

/// `(1, D_a, Z)` over the given rows.
fn dummy_covariate_design<T: Real>(data: &ObservedData<T>, rows: &[usize], a: usize) -> DesignMatrix<T> {
    let k = data.k();
    let mut x = Matrix::zeros(rows.len(), 2 + k);
    for (r, &i) in rows.iter().enumerate() {
        x[(r, 0)] = T::one();
        x[(r, 1)] = indicator(data.groups[i] == a);
        for j in 0..k {
            x[(r, 2 + j)] = data.covariates[(i, j)];
        }
    }
    x
}

fn require_nonempty<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<()> {
    contrast.check(data)?;
    for g in [contrast.treatment, contrast.control] {
        if data.group_size(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    Ok(())
}

fn require_two_groups<T: Real>(data: &ObservedData<T>) -> Result<()> {
    if data.n_groups() != 2 {
        return Err(Error::UnsupportedGroupCount(data.n_groups()));
    }
    Ok(())
}

/// Difference in group means, read off the regression of `Y` on `(1, T)`
/// over the two contrasted groups.
pub fn ate_unadjusted<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<AteEstimate<T>> {
    require_nonempty(data, contrast)?;
    let (a, b, sign) = contrast.canonical::<T>();
    let rows = rows_of(data, a, b);
    let x = two_group_design(data, &rows, a);
    let y: Vec<T> = rows.iter().map(|&i| data.y[i]).collect();
    let fit = least_squares(&x, &y, None)?;
    let mut est = finish(EstimatorKind::Unadjusted, contrast, x, fit, unit_vector(2, 1, sign));
    // exact group-mean form; the regression coefficient agrees to rounding
    let ma = mean(&data.group_outcomes(a)).unwrap();
    let mb = mean(&data.group_outcomes(b)).unwrap();
    est.point = sign * (ma - mb);
    Ok(est)
}

/// Coefficient contrast from one pooled OLS of `Y` on an intercept, a dummy
/// for every group but one, and the covariates.
pub fn ate_adjusted<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<AteEstimate<T>> {
    require_nonempty(data, contrast)?;
    let (a, b, sign) = contrast.canonical::<T>();
    let g = data.n_groups();
    let k = data.k();
    // reference level is `b`; dummies follow group order
    let dummies: Vec<usize> = (0..g).filter(|&h| h != b).collect();
    let p = 1 + dummies.len() + k;
    let mut x = Matrix::zeros(data.n(), p);
    for i in 0..data.n() {
        x[(i, 0)] = T::one();
        for (d, &h) in dummies.iter().enumerate() {
            x[(i, 1 + d)] = indicator(data.groups[i] == h);
        }
        for j in 0..k {
            x[(i, 1 + dummies.len() + j)] = data.covariates[(i, j)];
        }
    }
    let fit = least_squares(&x, &data.y, None)?;
    let at = 1 + dummies.iter().position(|&h| h == a).unwrap();
    let c = unit_vector(p, at, sign);
    Ok(finish(EstimatorKind::Adjusted, contrast, x, fit, c))
}

/// Prediction at `center` from an OLS fit of `y` on `(1, z)` within one group.
///
/// This is the per-arm regression estimator of a potential-outcome mean;
/// it only needs the group fit to be full rank.
pub fn group_regression_prediction<T: Real>(
    data: &ObservedData<T>,
    group: usize,
    center: &[T],
) -> Result<T> {
    let rows = data.members(group);
    if rows.is_empty() {
        return Err(Error::EmptyGroup(group));
    }
    let k = data.k();
    let mut x = Matrix::zeros(rows.len(), 1 + k);
    for (r, &i) in rows.iter().enumerate() {
        x[(r, 0)] = T::one();
        for j in 0..k {
            x[(r, 1 + j)] = data.covariates[(i, j)];
        }
    }
    let y: Vec<T> = rows.iter().map(|&i| data.y[i]).collect();
    let fit = least_squares(&x, &y, None)?;
    let slope_part = center
        .iter()
        .zip(&fit.coefficients[1..])
        .fold(T::zero(), |acc, (&z, &q)| acc + z * q);
    Ok(fit.coefficients[0] + slope_part)
}

/// Difference of per-group regression predictions at the full-sample
/// covariate mean, with the single interacted regression
/// `Y ~ 1 + T + (z - zbar) + T (z - zbar)` kept as the fit.
pub fn ate_interact<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<AteEstimate<T>> {
    require_nonempty(data, contrast)?;
    let k = data.k();
    for g in [contrast.treatment, contrast.control] {
        if data.group_size(g) < k + 2 {
            return Err(Error::GroupTooSmall {
                group: g,
                size: data.group_size(g),
                required: k + 2,
            });
        }
    }
    let (a, b, sign) = contrast.canonical::<T>();
    let zbar = data.covariates.column_means();
    let point_a = group_regression_prediction(data, a, &zbar)?;
    let point_b = group_regression_prediction(data, b, &zbar)?;

    let rows = rows_of(data, a, b);
    let p = 2 + 2 * k;
    let mut x = Matrix::zeros(rows.len(), p);
    for (r, &i) in rows.iter().enumerate() {
        let t = indicator::<T>(data.groups[i] == a);
        x[(r, 0)] = T::one();
        x[(r, 1)] = t;
        for j in 0..k {
            let zc = data.covariates[(i, j)] - zbar[j];
            x[(r, 2 + j)] = zc;
            x[(r, 2 + k + j)] = t * zc;
        }
    }
    let y: Vec<T> = rows.iter().map(|&i| data.y[i]).collect();
    let fit = least_squares(&x, &y, None)?;
    let mut est = finish(EstimatorKind::Interact, contrast, x, fit, unit_vector(p, 1, sign));
    est.point = sign * (point_a - point_b);
    Ok(est)
}

/// Weight `n_B/n_A` on group-A rows and `n_A/n_B` on group-B rows.
fn minority_weights<T: Real>(data: &ObservedData<T>, a: usize, b: usize) -> Vec<T> {
    let na = data.group_size(a);
    let nb = data.group_size(b);
    let (wa, wb) = if na == nb {
        (T::one(), T::one())
    } else {
        let (na, nb) = (T::of_usize(na), T::of_usize(nb));
        (nb / na, na / nb)
    };
    data.groups
        .iter()
        .map(|&g| if g == a { wa } else { wb })
        .collect()
}

/// Treatment coefficient from WLS of `Y` on `(1, T, Z)` with each group
/// weighted by the other group's share.
pub fn ate_tyranny<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<AteEstimate<T>> {
    require_two_groups(data)?;
    require_nonempty(data, contrast)?;
    let (a, b, sign) = contrast.canonical::<T>();
    let rows: Vec<usize> = (0..data.n()).collect();
    let x = dummy_covariate_design(data, &rows, a);
    let w = minority_weights(data, a, b);
    let fit = least_squares(&x, &data.y, Some(&w))?;
    let p = x.ncols();
    Ok(finish(EstimatorKind::Tyranny, contrast, x, fit, unit_vector(p, 1, sign)))
}

/// Difference in group means of the residuals from a WLS fit of `Y` on
/// `(1, Z)` with the minority weights. The kept fit is the second step,
/// OLS of those residuals on `(1, T)`.
pub fn ate_targeted_ancova<T: Real>(data: &ObservedData<T>, contrast: Contrast) -> Result<AteEstimate<T>> {
    require_two_groups(data)?;
    require_nonempty(data, contrast)?;
    let (a, b, sign) = contrast.canonical::<T>();
    let k = data.k();
    let mut z1 = Matrix::zeros(data.n(), 1 + k);
    for i in 0..data.n() {
        z1[(i, 0)] = T::one();
        for j in 0..k {
            z1[(i, 1 + j)] = data.covariates[(i, j)];
        }
    }
    let w = minority_weights(data, a, b);
    let first = least_squares(&z1, &data.y, Some(&w))?;
    let resid = first.residuals;

    let rows: Vec<usize> = (0..data.n()).collect();
    let x = two_group_design(data, &rows, a);
    let fit = least_squares(&x, &resid, None)?;
    let mut est = finish(EstimatorKind::TargetedAncova, contrast, x, fit, unit_vector(2, 1, sign));
    let group_mean = |g: usize| {
        let r: Vec<T> = rows.iter().filter(|&&i| data.groups[i] == g).map(|&i| resid[i]).collect();
        mean(&r).unwrap()
    };
    est.point = sign * (group_mean(a) - group_mean(b));
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ObservedData<f64> {
        ObservedData::two_group(
            vec![0.0, 4.0, 1.0, 1.0],
            &[true, true, false, false],
            Matrix::new(4, 1, vec![0.0, 2.0, 1.0, 3.0]).unwrap(),
        )
        .unwrap()
    }

    fn ab() -> Contrast {
        Contrast::new(0, 1)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn unadjusted_examples() {
        let d = toy();
        assert!(close(ate_unadjusted(&d, ab()).unwrap().point, 1.0, 1e-15));
        assert_eq!(ate_unadjusted(&d, ab().swapped()).unwrap().point, -1.0);
        let eq = ObservedData::two_group(
            vec![1.0, 3.0, 2.0, 2.0],
            &[true, true, false, false],
            Matrix::zeros(4, 0),
        )
        .unwrap();
        assert_eq!(ate_unadjusted(&eq, ab()).unwrap().point, 0.0);
    }

    #[test]
    fn adjusted_hand_solution() {
        let est = ate_adjusted(&toy(), ab()).unwrap();
        assert!(close(est.point, 2.0, 1e-13));
        // intercept, T, z
        assert!(close(est.fit.coefficients[2], 1.0, 1e-13));
    }

    #[test]
    fn adjusted_without_covariates_is_difference_in_means() {
        let d = ObservedData::two_group(
            vec![0.0, 4.0, 1.0, 1.0, 2.5],
            &[true, true, false, false, true],
            Matrix::zeros(5, 0),
        )
        .unwrap();
        let u = ate_unadjusted(&d, ab()).unwrap().point;
        assert!(close(ate_adjusted(&d, ab()).unwrap().point, u, 1e-13));
        assert!(close(ate_tyranny(&d, ab()).unwrap().point, u, 1e-13));
        assert!(close(ate_targeted_ancova(&d, ab()).unwrap().point, u, 1e-13));
        assert!(close(ate_interact(&d, ab()).unwrap().point, u, 1e-13));
    }

    #[test]
    fn adjusted_with_balanced_covariate() {
        // zbar_A == zbar_B
        let d = ObservedData::two_group(
            vec![1.0, 5.0, 2.0, 0.5, 3.0, 4.0],
            &[true, true, true, false, false, false],
            Matrix::new(6, 1, vec![0.0, 3.0, 6.0, 1.0, 3.0, 5.0]).unwrap(),
        )
        .unwrap();
        let u = ate_unadjusted(&d, ab()).unwrap().point;
        assert!(close(ate_adjusted(&d, ab()).unwrap().point, u, 1e-10));
    }

    #[test]
    fn per_group_predictions_hand_example() {
        // slopes 2 and 0, predictions 3 and 1 at zbar = 1.5
        let d = toy();
        let pa = group_regression_prediction(&d, 0, &[1.5]).unwrap();
        let pb = group_regression_prediction(&d, 1, &[1.5]).unwrap();
        assert!(close(pa, 3.0, 1e-14));
        assert!(close(pb, 1.0, 1e-14));
        assert!(close(pa - pb, 2.0, 1e-14));
    }

    #[test]
    fn interact_needs_k_plus_two_per_group() {
        assert_eq!(
            ate_interact(&toy(), ab()).unwrap_err(),
            Error::GroupTooSmall {
                group: 0,
                size: 2,
                required: 3
            }
        );
    }

    #[test]
    fn interact_shared_line_is_zero() {
        let z = [0.0, 1.0, 2.0, 3.0, 0.5, 1.5, 2.5, 4.0];
        let y: Vec<f64> = z.iter().map(|v| 1.0 + 2.0 * v).collect();
        let d = ObservedData::two_group(
            y,
            &[true, true, true, true, false, false, false, false],
            Matrix::new(8, 1, z.to_vec()).unwrap(),
        )
        .unwrap();
        assert!(ate_interact(&d, ab()).unwrap().point.abs() < 1e-13);
        assert!(ate_targeted_ancova(&d, ab()).unwrap().point.abs() < 1e-13);
    }

    #[test]
    fn interact_poststratifies_categorical_covariate() {
        // strata sizes 3 and 3; within-stratum differences 2 and 5
        let y = vec![1.0, 3.0, 10.0, 0.0, 4.0, 6.0];
        let treated = [true, true, true, false, false, false];
        let stratum = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let d = ObservedData::two_group(y, &treated, Matrix::new(6, 1, stratum).unwrap()).unwrap();
        let est = ate_interact(&d, ab()).unwrap();
        assert!(close(est.point, 0.5 * 2.0 + 0.5 * 5.0, 1e-13));
        // single-regression form
        let coef: f64 = est.contrast_vector.iter().zip(&est.fit.coefficients).map(|(c, b)| c * b).sum();
        assert!(close(coef, est.point, 1e-10));
    }

    #[test]
    fn tyranny_balanced_equals_adjusted() {
        let d = ObservedData::two_group(
            vec![1.0, 5.0, 2.0, 0.5, 3.0, 4.0],
            &[true, false, true, false, true, false],
            Matrix::new(6, 1, vec![0.2, 3.0, 6.0, 1.0, 3.5, 5.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(
            ate_tyranny(&d, ab()).unwrap().point,
            ate_adjusted(&d, ab()).unwrap().point
        );
    }

    #[test]
    fn targeted_ancova_balanced_hand_example() {
        // balanced, weights 1; residual-mean difference on 8 points
        let z = [1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 5.0];
        let y = [2.0, 3.0, 5.0, 4.0, 1.0, 1.0, 2.0, 4.0];
        let t = [true, true, true, true, false, false, false, false];
        let d = ObservedData::two_group(y.to_vec(), &t, Matrix::new(8, 1, z.to_vec()).unwrap()).unwrap();
        // pooled slope of y on z: zbar = 2.625, ybar = 2.75
        let (zb, yb) = (2.625, 2.75);
        let sxy: f64 = z.iter().zip(&y).map(|(a, b)| (a - zb) * (b - yb)).sum();
        let sxx: f64 = z.iter().map(|a| (a - zb) * (a - zb)).sum();
        let q = sxy / sxx;
        let r: Vec<f64> = z.iter().zip(&y).map(|(a, b)| (b - yb) - q * (a - zb)).collect();
        let hand = r[..4].iter().sum::<f64>() / 4.0 - r[4..].iter().sum::<f64>() / 4.0;
        let ta: f64 = ate_targeted_ancova(&d, ab()).unwrap().point;
        assert!(close(ta, hand, 1e-12));
    }

    #[test]
    fn targeted_ancova_and_tyranny_agree_when_covariate_balanced() {
        // zbar_A == zbar_B: both reduce to the difference in means, 11/4 - 9/4
        let z = [1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0];
        let y = [2.0, 3.0, 2.5, 3.5, 1.0, 3.0, 2.0, 3.0];
        let t = [true, true, true, true, false, false, false, false];
        let d = ObservedData::two_group(y.to_vec(), &t, Matrix::new(8, 1, z.to_vec()).unwrap()).unwrap();
        let ta: f64 = ate_targeted_ancova(&d, ab()).unwrap().point;
        let ty: f64 = ate_tyranny(&d, ab()).unwrap().point;
        assert!((ta - 0.5).abs() < 1e-6);
        assert!((ty - 0.5).abs() < 1e-6);
        assert!((ta - ty).abs() < 1e-6);
    }

    #[test]
    fn two_group_only_estimators_reject_three_groups() {
        let d = ObservedData::from_labels(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &["x", "y", "z", "x", "y", "z"],
            Matrix::zeros(6, 0),
        )
        .unwrap();
        assert_eq!(ate_tyranny(&d, ab()).unwrap_err(), Error::UnsupportedGroupCount(3));
        assert_eq!(ate_targeted_ancova(&d, ab()).unwrap_err(), Error::UnsupportedGroupCount(3));
        assert!(close(ate_unadjusted(&d, Contrast::new(0, 2)).unwrap().point, -2.0, 1e-15));
        assert!(close(ate_adjusted(&d, Contrast::new(0, 2)).unwrap().point, -2.0, 1e-12));
    }

    #[test]
    fn invalid_contrasts_and_labels() {
        let d = toy();
        assert!(matches!(ate_unadjusted(&d, Contrast::new(0, 0)), Err(Error::InvalidDesign(_))));
        assert!(matches!(ate_unadjusted(&d, Contrast::new(0, 5)), Err(Error::InvalidDesign(_))));
        let bad = ObservedData::new(vec![1.0, 2.0], vec![0, 0], vec!["a".into(), "b".into()], Matrix::zeros(2, 0));
        assert_eq!(bad.unwrap_err(), Error::EmptyGroup(1));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("ols".parse::<EstimatorKind>().is_err());
    }
}

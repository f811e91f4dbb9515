//! Dense least squares by Householder QR with column pivoting.
//!
//! Everything here is small-`p`, tall-`n`: the regressions behind the ATE
//! estimators have a handful of columns and up to a few thousand rows.
//! Weighted problems are reduced to ordinary ones by scaling each row by
//! `sqrt(w_i)`, so hat diagonals come out in the weighted metric and sum to
//! the rank.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Regressor matrix `X`, one row per subject.
pub type DesignMatrix<T> = Matrix<T>;

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds an `n x k` matrix from `k` columns of length `n`.
    pub fn from_columns<C: AsRef<[T]>>(n: usize, columns: &[C]) -> Result<Self> {
        let k = columns.len();
        let mut m = Self::zeros(n, k);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} entries, expected {n}",
                    c.len()
                )));
            }
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    /// Quadratic form `c' M c` for a square matrix.
    pub fn quadratic_form(&self, c: &[T]) -> T {
        assert_eq!(self.rows, self.cols);
        dot(c, &self.mul_vec(c))
    }

    /// Selects a subset of rows.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<T> {
        let n = T::of_usize(self.rows.max(1));
        let mut m = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (acc, &v) in m.iter_mut().zip(self.row(i)) {
                *acc = *acc + v;
            }
        }
        m.iter_mut().for_each(|v| *v = *v / n);
        m
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Output of [`least_squares`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub coefficients: Vec<T>,
    /// Unweighted residuals `y_i - x_i b`.
    pub residuals: Vec<T>,
    /// Leverages in the weighted metric; zero for zero-weight rows.
    pub hat_diagonals: Vec<T>,
    pub weights: Option<Vec<T>>,
    pub rank: usize,
    /// Weighted residual sum of squares.
    pub rss: T,
    gram_inverse: Matrix<T>,
}

impl<T: Real> FitResult<T> {
    /// `(X'WX)^{-1}`, the bread of the sandwich.
    pub fn gram_inverse(&self) -> &Matrix<T> {
        &self.gram_inverse
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights.as_ref().map_or(T::one(), |w| w[i])
    }

    /// Number of rows carrying positive weight.
    pub fn effective_n(&self) -> usize {
        match &self.weights {
            Some(w) => w.iter().filter(|&&v| v > T::zero()).count(),
            None => self.residuals.len(),
        }
    }
}

/// Householder QR of a (row-scaled) design, `A P = Q R`.
struct PivotedQr<T> {
    /// Upper triangle holds `R`; the rest is scratch.
    r: Matrix<T>,
    reflectors: Vec<(Vec<T>, T)>,
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Real> PivotedQr<T> {
    fn factor(mut a: Matrix<T>) -> Self {
        let (n, p) = (a.nrows(), a.ncols());
        let mut perm: Vec<usize> = (0..p).collect();
        let mut reflectors = Vec::with_capacity(p);
        let mut rank = p;
        let mut r11 = T::zero();
        let tol_factor = T::epsilon() * T::of_usize(n.max(p));

        for k in 0..p {
            // pivot: largest remaining column norm, lowest index on ties
            let mut best = k;
            let mut best_norm = T::neg_infinity();
            for j in k..p {
                let s = (k..n).fold(T::zero(), |acc, i| acc + a[(i, j)] * a[(i, j)]);
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..n {
                    a.data.swap(i * p + k, i * p + best);
                }
                perm.swap(k, best);
            }

            let norm = best_norm.sqrt();
            if k == 0 {
                r11 = norm;
            }
            if norm <= tol_factor * r11 || norm == T::zero() {
                rank = k;
                break;
            }

            let x0 = a[(k, k)];
            let alpha = if x0 >= T::zero() { -norm } else { norm };
            let mut v: Vec<T> = (k..n).map(|i| a[(i, k)]).collect();
            v[0] = v[0] - alpha;
            let vtv = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
            let beta = if vtv > T::zero() {
                (T::one() + T::one()) / vtv
            } else {
                T::zero()
            };

            a[(k, k)] = alpha;
            for i in k + 1..n {
                a[(i, k)] = T::zero();
            }
            for j in k + 1..p {
                let s = v
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (t, &vi)| acc + vi * a[(k + t, j)]);
                let f = beta * s;
                for (t, &vi) in v.iter().enumerate() {
                    a[(k + t, j)] = a[(k + t, j)] - f * vi;
                }
            }
            reflectors.push((v, beta));
        }

        Self {
            r: a,
            reflectors,
            perm,
            rank,
        }
    }

    fn apply_qt(&self, y: &mut [T]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            let s = v
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (t, &vi)| acc + vi * y[k + t]);
            let f = *beta * s;
            for (t, &vi) in v.iter().enumerate() {
                y[k + t] = y[k + t] - f * vi;
            }
        }
    }

    /// Squared row norms of the thin `Q`.
    fn leverages(&self) -> Vec<T> {
        let n = self.r.nrows();
        let p = self.rank;
        let mut q = Matrix::<T>::zeros(n, p);
        for j in 0..p {
            q[(j, j)] = T::one();
        }
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            for j in 0..p {
                let s = v
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (t, &vi)| acc + vi * q[(k + t, j)]);
                let f = *beta * s;
                for (t, &vi) in v.iter().enumerate() {
                    q[(k + t, j)] = q[(k + t, j)] - f * vi;
                }
            }
        }
        (0..n)
            .map(|i| {
                let h = q.row(i).iter().fold(T::zero(), |acc, &x| acc + x * x);
                h.min(T::one())
            })
            .collect()
    }

    /// Solves `R b = c` for the leading `p x p` block and undoes the pivoting.
    fn back_substitute(&self, c: &[T]) -> Vec<T> {
        let p = self.r.ncols();
        let mut z = vec![T::zero(); p];
        for i in (0..p).rev() {
            let mut s = c[i];
            for j in i + 1..p {
                s = s - self.r[(i, j)] * z[j];
            }
            z[i] = s / self.r[(i, i)];
        }
        let mut out = vec![T::zero(); p];
        for (k, &j) in self.perm.iter().enumerate() {
            out[j] = z[k];
        }
        out
    }

    /// `(A'A)^{-1} = P R^{-1} R^{-T} P'`.
    fn gram_inverse(&self) -> Matrix<T> {
        let p = self.r.ncols();
        let mut rinv = Matrix::<T>::zeros(p, p);
        for col in 0..p {
            for i in (0..=col).rev() {
                let mut s = if i == col { T::one() } else { T::zero() };
                for j in i + 1..=col {
                    s = s - self.r[(i, j)] * rinv[(j, col)];
                }
                rinv[(i, col)] = s / self.r[(i, i)];
            }
        }
        let mut g = Matrix::<T>::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                let s = (a.max(b)..p).fold(T::zero(), |acc, k| acc + rinv[(a, k)] * rinv[(b, k)]);
                g[(self.perm[a], self.perm[b])] = s;
            }
        }
        g
    }
}

fn validate<T: Real>(x: &Matrix<T>, w: Option<&[T]>) -> Result<()> {
    let (n, p) = (x.nrows(), x.ncols());
    if p == 0 || n < p {
        return Err(Error::DimensionMismatch(format!(
            "design is {n}x{p}, need n >= p >= 1"
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("design matrix"));
    }
    if let Some(w) = w {
        if w.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {n} rows",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        if w.iter().any(|&v| v < T::zero()) {
            return Err(Error::InvalidWeights("negative weight".into()));
        }
        let positive = w.iter().filter(|&&v| v > T::zero()).count();
        if positive < p {
            return Err(Error::InvalidWeights(format!(
                "{positive} positive weights for {p} columns"
            )));
        }
    }
    Ok(())
}

fn scaled_design<T: Real>(x: &Matrix<T>, w: Option<&[T]>) -> Matrix<T> {
    match w {
        None => x.clone(),
        Some(w) => {
            let mut a = x.clone();
            for (i, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                for j in 0..a.ncols() {
                    a[(i, j)] = a[(i, j)] * s;
                }
            }
            a
        }
    }
}

fn factor_checked<T: Real>(x: &Matrix<T>, w: Option<&[T]>) -> Result<PivotedQr<T>> {
    validate(x, w)?;
    let qr = PivotedQr::factor(scaled_design(x, w));
    if qr.rank < x.ncols() {
        return Err(Error::RankDeficient {
            rank: qr.rank,
            cols: x.ncols(),
        });
    }
    Ok(qr)
}

/// Minimizes `sum w_i (y_i - x_i b)^2`; ordinary least squares when `w` is `None`.
pub fn least_squares<T: Real>(x: &Matrix<T>, y: &[T], w: Option<&[T]>) -> Result<FitResult<T>> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("outcome"));
    }
    let qr = factor_checked(x, w)?;

    let mut qty: Vec<T> = match w {
        None => y.to_vec(),
        Some(w) => y.iter().zip(w).map(|(&yi, &wi)| yi * wi.sqrt()).collect(),
    };
    qr.apply_qt(&mut qty);
    let coefficients = qr.back_substitute(&qty[..x.ncols()]);

    let fitted = x.mul_vec(&coefficients);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let rss = residuals
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &e)| {
            acc + w.map_or(T::one(), |w| w[i]) * e * e
        });

    Ok(FitResult {
        coefficients,
        residuals,
        hat_diagonals: qr.leverages(),
        weights: w.map(<[T]>::to_vec),
        rank: qr.rank,
        rss,
        gram_inverse: qr.gram_inverse(),
    })
}

/// Diagonal of `W^{1/2} X (X'WX)^{-1} X' W^{1/2}`.
pub fn hat_diagonals<T: Real>(x: &Matrix<T>, w: Option<&[T]>) -> Result<Vec<T>> {
    Ok(factor_checked(x, w)?.leverages())
}

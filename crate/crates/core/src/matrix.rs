//! Dense square matrices, Metzler validation and the small amount of dense
//! linear algebra the certificates need: LU determinants and solves, a
//! cycle-factor determinant, and Schur complements.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, WeightedDigraph};

/// Relative pivot threshold for LU, applied against the infinity norm of the
/// pivot's original row.
const PIVOT_RTOL: f64 = 1e-12;

/// Dense row-major `n x n` matrix of finite reals, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRows", into = "MatrixRows")]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

/// Wire form `{"n": .., "rows": [[..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRows {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRows> for SquareMatrix {
    type Error = Error;

    fn try_from(value: MatrixRows) -> Result<Self> {
        if value.rows.len() != value.n {
            return Err(Error::DimensionMismatch {
                expected: value.n,
                found: value.rows.len(),
            });
        }
        SquareMatrix::from_rows(value.rows)
    }
}

impl From<SquareMatrix> for MatrixRows {
    fn from(m: SquareMatrix) -> Self {
        MatrixRows {
            n: m.n,
            rows: m.rows(),
        }
    }
}

impl SquareMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    row: i + 1,
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i + 1, col: j + 1 });
                }
                data.push(v);
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from `f(i, j)` with 0-based indices.
    ///
    /// Panics if `n == 0` or `f` yields a non-finite value.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n > 0, "matrix dimension must be positive");
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = f(i, j);
                assert!(v.is_finite(), "entry ({i}, {j}) is not finite");
                data.push(v);
            }
        }
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(value.is_finite(), "entry ({i}, {j}) is not finite");
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn neg(&self) -> Self {
        Self::from_fn(self.n, |i, j| -self.get(i, j))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// The top-left `size x size` block. `size` is the prefix length, so
    /// `leading_submatrix(n)` is the matrix itself.
    pub fn leading_submatrix(&self, size: usize) -> Result<Self> {
        if size == 0 || size > self.n {
            return Err(Error::IndexOutOfRange { size, dim: self.n });
        }
        Ok(Self::from_fn(size, |i, j| self.get(i, j)))
    }

    /// Principal submatrix on the given 0-based indices, in the given order.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |i, j| self.get(indices[i], indices[j]))
    }

    /// `P M P^T` where row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        self.principal_submatrix(perm)
    }

    pub fn lu(&self) -> Lu {
        Lu::new(self)
    }

    /// Determinant by Gaussian elimination with partial pivoting. Returns an
    /// exact `0.0` when a pivot column is negligible.
    pub fn determinant_lu(&self) -> f64 {
        self.lu().determinant()
    }

    /// Determinant as the signed sum over all factors of the associated
    /// digraph (disjoint covers of the nodes by self-loops and simple cycles).
    pub fn determinant_by_factors(&self, g: &WeightedDigraph, cycle_cap: usize, family_cap: usize) -> Result<f64> {
        if g.node_count() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: g.node_count(),
            });
        }
        let cycles = graph::enumerate_simple_cycles(g, cycle_cap)?;
        let weights: Vec<f64> = cycles.iter().map(|c| c.weight(g)).collect();
        let n = self.n;
        let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut total = 0.0;
        graph::for_each_disjoint_family(&cycles, family_cap, true, |family, covered| {
            let mut term = 1.0;
            let mut parts = family.len();
            for &idx in family {
                term *= weights[idx];
            }
            for v in 0..n {
                if covered.contains(v) {
                    continue;
                }
                match g.self_loop(v) {
                    Some(w) => {
                        term *= w;
                        parts += 1;
                    }
                    None => return,
                }
            }
            let sign = if parts % 2 == 0 { 1.0 } else { -1.0 };
            total += sign_n * sign * term;
        })?;
        Ok(total)
    }

    /// Solves `self * x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        self.lu().solve(b)
    }

    /// Schur complement with respect to the last diagonal entry:
    /// `A - b c^T / d` for the partition `[[A, b], [c^T, d]]`.
    pub fn schur_complement_last(&self) -> Result<Self> {
        let k = self.n;
        if k < 2 {
            return Err(Error::IndexOutOfRange { size: k, dim: k });
        }
        let last = k - 1;
        let d = self.get(last, last);
        let scale = self.row(last).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if d.abs() <= PIVOT_RTOL * scale || d == 0.0 {
            return Err(Error::ZeroPivot { size: k });
        }
        Ok(Self::from_fn(last, |i, j| {
            self.get(i, j) - self.get(i, last) * self.get(last, j) / d
        }))
    }
}

/// LU factorisation `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    fn new(m: &SquareMatrix) -> Self {
        let n = m.n;
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scales: Vec<f64> = (0..n)
            .map(|i| m.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut best = k;
            let mut best_abs = lu[k * n + k].abs();
            for i in k + 1..n {
                let a = lu[i * n + k].abs();
                if a > best_abs {
                    best = i;
                    best_abs = a;
                }
            }
            let threshold = PIVOT_RTOL * scales[perm[best]];
            if best_abs == 0.0 || best_abs <= threshold {
                singular = true;
                break;
            }
            if best != k {
                for j in 0..n {
                    lu.swap(k * n + j, best * n + j);
                }
                perm.swap(k, best);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            sign,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.n).fold(self.sign, |acc, k| acc * self.lu[k * self.n + k])
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.singular {
            return Err(Error::SingularMatrix);
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        Ok(x)
    }
}

/// A square matrix whose off-diagonal entries are all nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MetzlerMatrix(SquareMatrix);

impl MetzlerMatrix {
    /// Exact check, no tolerance: any negative off-diagonal entry is rejected.
    pub fn new(m: SquareMatrix) -> Result<Self> {
        for i in 0..m.n {
            for j in 0..m.n {
                let v = m.get(i, j);
                if i != j && v < 0.0 {
                    return Err(Error::NotMetzler {
                        row: i + 1,
                        col: j + 1,
                        value: v,
                    });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_inner(self) -> SquareMatrix {
        self.0
    }

    pub fn leading_submatrix(&self, size: usize) -> Result<Self> {
        self.0.leading_submatrix(size).map(Self)
    }

    pub fn principal_submatrix(&self, indices: &[usize]) -> Self {
        Self(self.0.principal_submatrix(indices))
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(self.0.permuted(perm))
    }

    /// One Schur reduction step `M[k] -> M[k-1]`, eliminating the last node.
    /// The result is Metzler whenever the eliminated diagonal is negative;
    /// it is returned as a plain matrix because a positive pivot can break
    /// that.
    pub fn schur_reduce(&self) -> Result<SquareMatrix> {
        self.0.schur_complement_last()
    }

    pub fn all_diagonals_below(&self, threshold: f64) -> bool {
        (0..self.dim()).all(|i| self.get(i, i) < threshold)
    }
}

impl Deref for MetzlerMatrix {
    type Target = SquareMatrix;

    fn deref(&self) -> &SquareMatrix {
        &self.0
    }
}

impl TryFrom<SquareMatrix> for MetzlerMatrix {
    type Error = Error;

    fn try_from(m: SquareMatrix) -> Result<Self> {
        Self::new(m)
    }
}

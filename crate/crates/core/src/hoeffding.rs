//! Score matrices, Ewens-weighted centering, and the statistics
//! `Y = sum_i a_{i, pi(i)}` and the remainder statistic `T`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::sum::CompensatedSum;

/// Relative tolerance for `|a_dot_dot| < tol * max(1, M)` on centered input.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

/// Square, exactly symmetric, finite real matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl ScoreMatrix {
    /// Rejects non-square, non-finite and asymmetric input. Symmetry is
    /// checked with exact equality; asymmetric matrices are never
    /// symmetrized.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "score matrix must be at least 1x1".into(),
            ));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite entry at ({}, {})",
                k / n + 1,
                k % n + 1
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "row {} has {} columns, expected {n}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::new(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Zero-based entry access.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Ewens-weighted grand mean
    /// `(theta sum_i a_ii + sum_{i != j} a_ij) / (n (theta + n - 1))`,
    /// so that `E_theta Y = n a_dot_dot`.
    pub fn a_dot_dot(&self, theta: f64) -> f64 {
        let n = self.n;
        // Weighted mean of deviations from a reference entry; exact for
        // constant matrices.
        let reference = self.entries[0];
        let mut diag = CompensatedSum::new();
        let mut off = CompensatedSum::new();
        for i in 0..n {
            for j in 0..n {
                let d = self.get(i, j) - reference;
                if i == j {
                    diag += d;
                } else {
                    off += d;
                }
            }
        }
        reference + (theta * diag.value() + off.value()) / (n as f64 * (theta + n as f64 - 1.0))
    }

    /// `M = max_{i,j} |a_ij - a_dot_dot|`.
    pub fn m_max(&self, theta: f64) -> f64 {
        let shift = self.a_dot_dot(theta);
        self.entries
            .iter()
            .map(|a| (a - shift).abs())
            .fold(0.0, f64::max)
    }

    /// Subtracts `a_dot_dot(theta)` from every entry.
    pub fn center(&self, theta: f64) -> CenteredMatrix {
        let shift = self.a_dot_dot(theta);
        let entries: Vec<f64> = self.entries.iter().map(|a| a - shift).collect();
        CenteredMatrix::build(ScoreMatrix { n: self.n, entries }, theta, shift)
    }

    /// `Y = sum_i a_{i, pi(i)}`.
    pub fn statistic_y(&self, pi: &Permutation) -> f64 {
        assert_eq!(pi.len(), self.n, "permutation size does not match matrix");
        pi.as_zero_based()
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }

    /// Matrix with entries relabelled by `rho`: `b_ij = a_{rho(i) rho(j)}`.
    pub fn relabel(&self, rho: &Permutation) -> ScoreMatrix {
        let r = rho.as_zero_based();
        let n = self.n;
        let entries = (0..n * n).map(|k| self.get(r[k / n], r[k % n])).collect();
        ScoreMatrix { n, entries }
    }
}

/// A score matrix with `a_dot_dot = 0` under a fixed `theta`, plus the
/// cached quantities the statistics need.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    matrix: ScoreMatrix,
    theta: f64,
    a_dot_dot_before: f64,
    m_max: f64,
    row_sums: Vec<f64>,
    trace: f64,
}

impl CenteredMatrix {
    fn build(matrix: ScoreMatrix, theta: f64, a_dot_dot_before: f64) -> Self {
        let m_max = matrix.entries.iter().map(|a| a.abs()).fold(0.0, f64::max);
        let row_sums = (0..matrix.n)
            .map(|i| crate::sum::compensated_sum(matrix.row(i).iter().copied()))
            .collect();
        let trace = matrix.trace();
        Self {
            matrix,
            theta,
            a_dot_dot_before,
            m_max,
            row_sums,
            trace,
        }
    }

    /// Accepts a matrix that is already centered for `theta`.
    pub fn try_from_centered(matrix: ScoreMatrix, theta: f64) -> Result<Self> {
        let a_dot_dot = matrix.a_dot_dot(theta);
        let m = matrix.entries.iter().map(|a| a.abs()).fold(0.0, f64::max);
        if a_dot_dot.abs() >= CENTERING_TOLERANCE * m.max(1.0) {
            return Err(Error::NotCentered { a_dot_dot, theta });
        }
        Ok(Self::build(matrix, theta, 0.0))
    }

    pub fn matrix(&self) -> &ScoreMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ScoreMatrix {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    /// The `theta` this matrix was centered for.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `a_dot_dot` of the matrix this one was centered from.
    pub fn a_dot_dot_before(&self) -> f64 {
        self.a_dot_dot_before
    }

    /// `M = max |a_ij|` (the entries are already centered).
    pub fn m_max(&self) -> f64 {
        self.m_max
    }

    /// Coupling gap bound `c = 20 M`.
    pub fn coupling_constant(&self) -> f64 {
        20.0 * self.m_max
    }

    pub fn statistic_y(&self, pi: &Permutation) -> f64 {
        self.matrix.statistic_y(pi)
    }

    /// Remainder statistic
    ///
    /// ```text
    /// T = 2 (n + c1 - 2(theta + 1)) sum_{|i|=1} a_ii + 2 (c1 - 2 theta) sum_{|i|>=2} a_ii
    ///     - 4 sum_{|i|=1, |j|=1, j != i} a_ij - 4 sum_{|i|=1, |j|>=2} a_ij
    /// ```
    ///
    /// where `|i|` is the length of the cycle of `i` and `c1` the number of
    /// fixed points. With this `T`, `E[Y'' | pi] = (1 - 4/n) Y + T / (n(n-1))`
    /// holds for every `pi` under the transposition-conjugation pair.
    pub fn statistic_t(&self, pi: &Permutation) -> f64 {
        let n = self.n();
        assert_eq!(pi.len(), n, "permutation size does not match matrix");
        let fixed: Vec<usize> = pi
            .as_zero_based()
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (i == v).then_some(i))
            .collect();
        self.statistic_t_from_fixed_points(&fixed)
    }

    /// `T` depends on `pi` only through its fixed-point set.
    pub fn statistic_t_from_fixed_points(&self, fixed: &[usize]) -> f64 {
        let n = self.n() as f64;
        let c1 = fixed.len() as f64;
        let theta = self.theta;

        let trace_fixed: f64 = fixed.iter().map(|&i| self.matrix.get(i, i)).sum();
        let trace_moved = self.trace - trace_fixed;
        let mut block = 0.0; // sum over i, j both fixed, including i == j
        for &i in fixed {
            for &j in fixed {
                block += self.matrix.get(i, j);
            }
        }
        let fixed_off_diag = block - trace_fixed;
        let fixed_rows: f64 = fixed.iter().map(|&i| self.row_sums[i]).sum();
        let fixed_to_moved = fixed_rows - block;

        2.0 * (n + c1 - 2.0 * (theta + 1.0)) * trace_fixed + 2.0 * (c1 - 2.0 * theta) * trace_moved
            - 4.0 * fixed_off_diag
            - 4.0 * fixed_to_moved
    }

    /// Per-sample remainder proxy `T / (n (n - 1))`; its conditional mean
    /// given `Y` is the remainder `R(Y)`.
    pub fn remainder_proxy(&self, pi: &Permutation) -> f64 {
        let n = self.n() as f64;
        self.statistic_t(pi) / (n * (n - 1.0))
    }

    /// Almost-sure bound `|T| <= (10 n^2 + 8 theta n) M`.
    pub fn t_bound(&self) -> f64 {
        t_bound(self.n(), self.theta, self.m_max)
    }
}

pub fn t_bound(n: usize, theta: f64, m: f64) -> f64 {
    let n = n as f64;
    (10.0 * n * n + 8.0 * theta * n) * m
}

/// Random symmetric matrices `A = B - b_dot_dot` with `B = X + X^T` and each
/// `X_ij` drawn from `N(1, variance)` or `N(-1, variance)` with equal
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMatrixGenerator {
    pub n: usize,
    /// Variance of each mixture component.
    #[serde(default = "default_variance")]
    pub variance: f64,
}

pub const DEFAULT_GENERATOR_VARIANCE: f64 = 0.2;

fn default_variance() -> f64 {
    DEFAULT_GENERATOR_VARIANCE
}

impl TestMatrixGenerator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            variance: DEFAULT_GENERATOR_VARIANCE,
        }
    }

    pub fn with_variance(mut self, variance: f64) -> Self {
        self.variance = variance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(
                "generated matrices need n >= 2".into(),
            ));
        }
        if !(self.variance.is_finite() && self.variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "generator variance must be finite and nonnegative, got {}",
                self.variance
            )));
        }
        Ok(())
    }

    /// One draw, centered for `theta`.
    pub fn generate<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<CenteredMatrix> {
        self.validate()?;
        let n = self.n;
        let noise = Normal::new(0.0, self.variance.sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let x: Vec<f64> = (0..n * n)
            .map(|_| {
                let mean = if rng.random::<bool>() { 1.0 } else { -1.0 };
                mean + noise.sample(rng)
            })
            .collect();
        let entries = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                x[i * n + j] + x[j * n + i]
            })
            .collect();
        Ok(ScoreMatrix::new(n, entries)?.center(theta))
    }
}

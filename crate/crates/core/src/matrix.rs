//! Dense row-major matrices and spectral-norm estimation.
//!
//! Row batches are the unit of work everywhere in this crate, so the matrix
//! type is deliberately minimal: contiguous row-major `f64` storage, checked
//! construction (finite entries only), and row access by slice. Batches are
//! addressed through [`RowView`], a borrowed selection of distinct rows.
//!
//! Three interchangeable ways of measuring a batch's squared spectral norm
//! `‖B‖²` drive the sampling weights and step sizes ([`Estimator`]):
//!
//! * converged power iteration on the batch Gram matrix (the reference
//!   value),
//! * a fixed-iteration power method whose iteration count depends only on a
//!   requested relative accuracy and the batch size (cheaper, with a known
//!   one-sided error), and
//! * the largest squared row norm (cheapest; exact for orthogonal rows and a
//!   good proxy when rows are nearly orthogonal).
//!
//! The power iterations run on the smaller of `B Bᵀ` and `Bᵀ B`, which share
//! their nonzero spectrum, so a batch of `b` short rows costs `b²` per
//! iteration regardless of the ambient dimension.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

/// Iteration cap for converged power iterations.
const POWER_CAP: usize = 1_000_000;

/// Relative tolerance on successive Rayleigh quotients for convergence.
const POWER_TOL: f64 = 1e-14;

/// Fixed seed for the start vectors of converged power iterations.
///
/// A deterministic non-random start (such as the Gram diagonal) can be
/// exactly orthogonal to the top eigenvector of a real batch Gram, so the
/// start is drawn from a ChaCha stream rooted at this constant instead:
/// reproducible across runs, orthogonal only on a measure-zero set.
const CONVERGED_START_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

// ── DenseMatrix ─────────────────────────────────────────────────────────────

/// Dense row-major matrix with finite `f64` entries.
///
/// ```
/// use bwsgd::matrix::DenseMatrix;
///
/// let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
/// assert_eq!(a.row(1), &[3.0, 4.0]);
/// assert_eq!(a.matvec(&[1.0, 0.0]), vec![1.0, 3.0]);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a `rows × cols` matrix from row-major data.
    ///
    /// Rejects empty shapes, length mismatches, and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix shape {rows}x{cols} must be nonempty"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        for (pos, &x) in data.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    row: pos / cols,
                    col: pos % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("no rows given".into()));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Row `i` as a slice.
    ///
    /// Panics if `i` is out of range, like slice indexing.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Entry at `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Row-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Matrix-vector product `A x`.
    ///
    /// Each output entry is an independent row dot product accumulated in
    /// ascending column order, so the result does not depend on how rows are
    /// scheduled across workers.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| math::dot(self.row(i), x)).collect()
    }

    /// Transposed product `Aᵀ y`, accumulated in ascending row order.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let c = y[i];
            for j in 0..self.cols {
                out[j] += c * row[j];
            }
        }
        out
    }

    /// Squared Frobenius norm (sum of squared entries).
    pub fn frobenius_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += math::norm_sq(self.row(i));
        }
        acc
    }
}

/// Squared Euclidean norm of every row, in row order.
pub fn row_norms_sq(a: &DenseMatrix) -> Vec<f64> {
    (0..a.nrows()).map(|i| math::norm_sq(a.row(i))).collect()
}

// ── RowView ─────────────────────────────────────────────────────────────────

/// Borrowed selection of distinct rows of a [`DenseMatrix`].
///
/// The selection order is preserved: `view.row(k)` is the matrix row at the
/// `k`-th selected index.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    matrix: &'a DenseMatrix,
    indices: &'a [usize],
}

impl<'a> RowView<'a> {
    /// Selects `indices` from `matrix`, rejecting empty, out-of-range, or
    /// duplicated selections.
    pub fn new(matrix: &'a DenseMatrix, indices: &'a [usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty row selection".into()));
        }
        let mut seen = vec![false; matrix.nrows()];
        for &i in indices {
            if i >= matrix.nrows() {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    matrix.nrows()
                )));
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!("duplicate row index {i}")));
            }
            seen[i] = true;
        }
        Ok(Self { matrix, indices })
    }

    /// Number of selected rows.
    pub fn nrows(&self) -> usize {
        self.indices.len()
    }

    /// Number of columns of the underlying matrix.
    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The `k`-th selected row.
    pub fn row(&self, k: usize) -> &[f64] {
        self.matrix.row(self.indices[k])
    }

    /// Selected row indices, in selection order.
    pub fn indices(&self) -> &[usize] {
        self.indices
    }

    /// Largest squared row norm over the selection.
    pub fn max_row_norm_sq(&self) -> f64 {
        let mut best = 0.0;
        for k in 0..self.nrows() {
            let v = math::norm_sq(self.row(k));
            if v > best {
                best = v;
            }
        }
        best
    }

    /// Gram matrix on the smaller side: `B Bᵀ` when the batch is short and
    /// wide is unnecessary (`b ≤ m`), else `Bᵀ B`. Both have the same nonzero
    /// eigenvalues, and the returned side is `min(b, m)`.
    fn small_gram(&self) -> (Vec<f64>, usize) {
        let b = self.nrows();
        let m = self.ncols();
        if b <= m {
            let mut g = vec![0.0; b * b];
            for i in 0..b {
                for j in 0..b {
                    g[i * b + j] = math::dot(self.row(i), self.row(j));
                }
            }
            (g, b)
        } else {
            let mut g = vec![0.0; m * m];
            for k in 0..b {
                let row = self.row(k);
                for p in 0..m {
                    for q in 0..m {
                        g[p * m + q] += row[p] * row[q];
                    }
                }
            }
            (g, m)
        }
    }
}

// ── Spectral estimates ──────────────────────────────────────────────────────

/// How a spectral value was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralMethod {
    /// Power iteration run to a relative tolerance on the Rayleigh quotient.
    Converged,
    /// Power iteration run for a fixed, precomputed number of steps.
    Power {
        /// Planned iteration count.
        planned: usize,
        /// Seed of the start-vector stream.
        seed: u64,
    },
}

/// Estimated largest eigenvalue of a batch Gram matrix (`‖B‖²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// The estimate itself; an exact zero for a zero batch.
    pub value: f64,
    /// Producing method.
    pub method: SpectralMethod,
    /// Matrix-vector products actually spent.
    pub iterations_used: usize,
}

/// Symmetric matrix-vector product `G v` for row-major `g` of side `s`.
fn sym_matvec(g: &[f64], s: usize, v: &[f64]) -> Vec<f64> {
    (0..s)
        .map(|i| math::dot(&g[i * s..(i + 1) * s], v))
        .collect()
}

/// Power iteration on a PSD matrix until successive Rayleigh quotients agree
/// to [`POWER_TOL`] twice in a row. Returns `(eigenvalue, iterations)`.
fn power_converged(g: &[f64], s: usize, mut v: Vec<f64>) -> Result<(f64, usize)> {
    let mut rho_prev = f64::NAN;
    let mut hits = 0;
    for it in 1..=POWER_CAP {
        let w = sym_matvec(g, s, &v);
        let rho = math::dot(&v, &w);
        let wn = math::sqrt(math::norm_sq(&w));
        if wn == 0.0 {
            // The start landed exactly in the kernel; for a nonzero PSD
            // matrix this is a measure-zero event of the seeded start.
            return Err(Error::NoConvergence { iterations: it });
        }
        for (x, &wi) in v.iter_mut().zip(w.iter()) {
            *x = wi / wn;
        }
        if math::abs(rho - rho_prev) <= POWER_TOL * math::abs(rho) {
            hits += 1;
            if hits >= 2 {
                return Ok((rho, it));
            }
        } else {
            hits = 0;
        }
        rho_prev = rho;
    }
    Err(Error::NoConvergence {
        iterations: POWER_CAP,
    })
}

/// Power iteration for exactly `t` matrix-vector products; returns the final
/// Rayleigh quotient.
fn power_fixed(g: &[f64], s: usize, t: usize, mut v: Vec<f64>) -> f64 {
    let mut rho = 0.0;
    for _ in 0..t {
        let w = sym_matvec(g, s, &v);
        rho = math::dot(&v, &w);
        let wn = math::sqrt(math::norm_sq(&w));
        if wn == 0.0 {
            break;
        }
        for (x, &wi) in v.iter_mut().zip(w.iter()) {
            *x = wi / wn;
        }
    }
    rho
}

/// Largest diagonal entry; zero exactly when a PSD matrix is zero.
fn max_diag(g: &[f64], s: usize) -> f64 {
    let mut best = 0.0;
    for i in 0..s {
        if g[i * s + i] > best {
            best = g[i * s + i];
        }
    }
    best
}

/// Largest eigenvalue of the batch Gram matrix (`‖B‖²`), run to convergence.
///
/// Stops when successive Rayleigh quotients agree to `1e-14` relative, twice
/// in a row; fails with [`Error::NoConvergence`] after `1e6` iterations. A
/// zero batch short-circuits to an exact zero.
pub fn gram_spectral_norm_converged(view: &RowView<'_>) -> Result<SpectralEstimate> {
    let (g, s) = view.small_gram();
    if max_diag(&g, s) == 0.0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            method: SpectralMethod::Converged,
            iterations_used: 0,
        });
    }
    let start = rng::unit_sphere_vec(
        &mut rng::stream(CONVERGED_START_SEED, rng::domain::POWER, 0),
        s,
    );
    let (value, iterations_used) = power_converged(&g, s, start)?;
    Ok(SpectralEstimate {
        value,
        method: SpectralMethod::Converged,
        iterations_used,
    })
}

/// Number of power-method iterations for accuracy `pm_epsilon` and batch
/// size `b`: `⌈pm_epsilon⁻¹ · ln(pm_epsilon⁻¹ · b)⌉`, at least one.
pub fn power_iteration_count(pm_epsilon: f64, b: usize) -> usize {
    let inv = 1.0 / pm_epsilon;
    let t = math::ceil(inv * math::ln(inv * b as f64));
    if t < 1.0 {
        1
    } else {
        t as usize
    }
}

/// Fixed-budget power estimate of the batch Gram's largest eigenvalue.
///
/// Runs exactly [`power_iteration_count`]`(pm_epsilon, b)` iterations from a
/// seeded random unit start and returns the final Rayleigh quotient, which
/// never exceeds the true value and reaches at least `truth / (1 +
/// pm_epsilon)` with overwhelming probability over the start. A zero batch
/// reports zero without spending iterations.
pub fn gram_spectral_norm_power(
    view: &RowView<'_>,
    pm_epsilon: f64,
    b: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    if !(pm_epsilon > 0.0 && pm_epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "pm_epsilon must lie in (0, 1), got {pm_epsilon}"
        )));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let planned = power_iteration_count(pm_epsilon, b);
    let method = SpectralMethod::Power { planned, seed };
    let (g, s) = view.small_gram();
    if max_diag(&g, s) == 0.0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            method,
            iterations_used: 0,
        });
    }
    let start = rng::unit_sphere_vec(&mut rng::stream(seed, rng::domain::POWER, 0), s);
    let value = power_fixed(&g, s, planned, start);
    Ok(SpectralEstimate {
        value,
        method,
        iterations_used: planned,
    })
}

// ── Batch norm estimators ───────────────────────────────────────────────────

/// Strategy for estimating a batch's squared spectral norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Converged power iteration; the reference value.
    Exact,
    /// Largest squared row norm of the batch.
    MaxNorm,
    /// Fixed-budget power method with the given accuracy parameter; batch
    /// start vectors derive from `seed` and the batch index.
    Power {
        /// Relative accuracy parameter in `(0, 1)`.
        epsilon: f64,
        /// Base seed for start-vector streams.
        seed: u64,
    },
}

impl Estimator {
    /// Estimated `‖B‖²` for one batch, plus the multiply-adds charged.
    ///
    /// The cost model charges every Gram power-iteration step at `b²`
    /// multiply-adds (the per-step price of iterating on a `b×b` Gram
    /// matrix), even when the implementation iterates on the cheaper
    /// `m×m` side; the row-norm scan costs `b·m`. `batch_index` separates
    /// the random streams of sibling batches under [`Estimator::Power`].
    pub fn batch_norm_sq(
        &self,
        view: &RowView<'_>,
        batch_size: usize,
        batch_index: u64,
    ) -> Result<(f64, u64)> {
        let b = view.nrows() as u64;
        match *self {
            Estimator::Exact => {
                let est = gram_spectral_norm_converged(view)?;
                Ok((est.value, est.iterations_used as u64 * b * b))
            }
            Estimator::MaxNorm => {
                let flops = (view.nrows() * view.ncols()) as u64;
                Ok((view.max_row_norm_sq(), flops))
            }
            Estimator::Power { epsilon, seed } => {
                let batch_seed = seed ^ batch_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let est = gram_spectral_norm_power(view, epsilon, batch_size, batch_seed)?;
                Ok((est.value, est.iterations_used as u64 * b * b))
            }
        }
    }
}

// ── Full-matrix spectral quantities ─────────────────────────────────────────

/// Column Gram matrix `Aᵀ A`, accumulated row by row.
pub(crate) fn column_gram(a: &DenseMatrix) -> Vec<f64> {
    let m = a.ncols();
    let mut g = vec![0.0; m * m];
    for i in 0..a.nrows() {
        let row = a.row(i);
        for p in 0..m {
            for q in 0..m {
                g[p * m + q] += row[p] * row[q];
            }
        }
    }
    g
}

/// Converged top eigenvalue of a PSD matrix, zero-matrix aware.
fn top_eig(g: &[f64], s: usize) -> Result<f64> {
    if max_diag(g, s) == 0.0 {
        return Ok(0.0);
    }
    let start = rng::unit_sphere_vec(
        &mut rng::stream(CONVERGED_START_SEED, rng::domain::POWER, 1),
        s,
    );
    power_converged(g, s, start).map(|(rho, _)| rho)
}

/// Extreme singular values `(smallest, largest)` of `A`.
///
/// The largest comes from power iteration on `Aᵀ A`; the smallest from power
/// iteration on `λ_max I − Aᵀ A`, whose top eigenvalue is `λ_max − λ_min`.
/// The subtraction limits the relative accuracy of a tiny `λ_min` to roughly
/// the squared condition number times machine precision.
pub(crate) fn singular_extremes(a: &DenseMatrix) -> Result<(f64, f64)> {
    let m = a.ncols();
    let mut g = column_gram(a);
    let lam_max = top_eig(&g, m)?;
    if lam_max == 0.0 {
        return Ok((0.0, 0.0));
    }
    for p in 0..m {
        for q in 0..m {
            let x = g[p * m + q];
            g[p * m + q] = if p == q { lam_max - x } else { -x };
        }
    }
    let theta = top_eig(&g, m)?;
    let lam_min = (lam_max - theta).max(0.0);
    Ok((math::sqrt(lam_min), math::sqrt(lam_max)))
}

/// Smallest singular value of a full-column-rank matrix.
///
/// Fails with [`Error::RankDeficient`] when the converged estimate falls
/// below `1e-10` times the largest singular value (which covers `n < m`
/// shapes as well).
pub fn smallest_singular_value(a: &DenseMatrix) -> Result<f64> {
    let (smallest, largest) = singular_extremes(a)?;
    if smallest < 1e-10 * largest || largest == 0.0 {
        return Err(Error::RankDeficient { smallest, largest });
    }
    Ok(smallest)
}

/// Minimum-residual solution `argmin ‖A x − b‖₂` by Householder QR.
///
/// Requires full column rank (checked as in [`smallest_singular_value`]) and
/// `b.len() == A.nrows()`. The returned solution's residual gradient
/// satisfies `‖Aᵀ(A x − b)‖ ≤ 1e-8 · ‖A‖_F · ‖b‖` for well-conditioned
/// systems.
pub fn least_squares_oracle(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (a.nrows(), a.ncols());
    if b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    smallest_singular_value(a)?;

    let mut r = a.data().to_vec();
    let mut rhs = b.to_vec();
    for k in 0..m {
        // Householder reflector for column k, rows k..n.
        let mut col_norm_sq = 0.0;
        for i in k..n {
            col_norm_sq += r[i * m + k] * r[i * m + k];
        }
        let col_norm = math::sqrt(col_norm_sq);
        if col_norm == 0.0 {
            return Err(Error::RankDeficient {
                smallest: 0.0,
                largest: f64::MAX,
            });
        }
        let pivot = r[k * m + k];
        let alpha = if pivot > 0.0 { -col_norm } else { col_norm };
        let mut v = vec![0.0; n - k];
        v[0] = pivot - alpha;
        for i in k + 1..n {
            v[i - k] = r[i * m + k];
        }
        let beta = math::norm_sq(&v);
        if beta > 0.0 {
            for j in k..m {
                let mut c = 0.0;
                for i in k..n {
                    c += v[i - k] * r[i * m + j];
                }
                c *= 2.0 / beta;
                for i in k..n {
                    r[i * m + j] -= c * v[i - k];
                }
            }
            let mut c = 0.0;
            for i in k..n {
                c += v[i - k] * rhs[i];
            }
            c *= 2.0 / beta;
            for i in k..n {
                rhs[i] -= c * v[i - k];
            }
        }
        r[k * m + k] = alpha;
        for i in k + 1..n {
            r[i * m + k] = 0.0;
        }
    }

    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut acc = rhs[k];
        for j in k + 1..m {
            acc -= r[k * m + j] * x[j];
        }
        x[k] = acc / r[k * m + k];
    }
    Ok(x)
}

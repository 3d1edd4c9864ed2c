//! Problem definitions and synthetic instance generators.
//!
//! Two objectives are supported. The least-squares objective over an
//! `n×m` system `(A, b)` is
//!
//! ```text
//! F(x) = (1/n) Σᵢ (n/2)(bᵢ − ⟨aᵢ, x⟩)²  =  ½‖Ax − b‖²,
//! ```
//!
//! whose component scaling makes each row a functional with gradient
//! Lipschitz constant `n‖aᵢ‖²`. The regularized hinge objective over
//! labeled rows `(aᵢ, yᵢ)` is
//!
//! ```text
//! F(x) = (1/n) Σᵢ [1 − yᵢ⟨x, aᵢ⟩]₊ + (λ/2)‖x‖².
//! ```
//!
//! The generators produce the synthetic families used by the experiment
//! harness: Gaussian rows, two heteroscedastic variants whose row norms
//! grow like the row index, an orthonormal basis, a sparse Gaussian, a
//! random-line tomography system, and a two-cloud Gaussian classification
//! set for the hinge solver.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::matrix::{least_squares_oracle, DenseMatrix};
use crate::tomography;
use crate::{rng, Error, Result};

/// Full-batch iterations of the hinge reference minimizer.
pub const REFERENCE_DESCENT_STEPS: usize = 1_000_000;

// ── Least squares ───────────────────────────────────────────────────────────

/// An `n×m` least-squares instance with an optional cached reference
/// solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresProblem {
    a: DenseMatrix,
    b: Vec<f64>,
    x_star: Option<Vec<f64>>,
    residual_norm: Option<f64>,
}

impl LeastSquaresProblem {
    /// Validates dimensions and finiteness; the reference solution stays
    /// empty until [`LeastSquaresProblem::with_reference`].
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side has {} entries for {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(LeastSquaresProblem {
            a,
            b,
            x_star: None,
            residual_norm: None,
        })
    }

    /// Solves the system with the dense factorization oracle and caches
    /// the minimizer and its residual norm.
    pub fn with_reference(mut self) -> Result<Self> {
        let x = least_squares_oracle(&self.a, &self.b)?;
        let r = self.residual(&x);
        self.residual_norm = Some(math::sqrt(math::norm_sq(&r)));
        self.x_star = Some(x);
        Ok(self)
    }

    /// Coefficient matrix.
    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    /// Right-hand side.
    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Rows.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Columns (iterate dimension).
    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    /// Cached minimizer, if computed.
    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    /// Cached `‖Ax* − b‖`, if computed.
    pub fn residual_norm(&self) -> Option<f64> {
        self.residual_norm
    }

    /// Residual vector `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    /// Objective `½‖Ax − b‖²`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * math::norm_sq(&self.residual(x))
    }

    /// Full gradient `A*(Ax − b)` of the objective.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a.matvec_t(&self.residual(x))
    }

    /// Distance `‖x − x*‖` to the cached reference solution.
    pub fn error(&self, x: &[f64]) -> Result<f64> {
        let x_star = self.x_star.as_ref().ok_or(Error::MissingReference)?;
        let mut acc = 0.0;
        for i in 0..x.len() {
            let dlt = x[i] - x_star[i];
            acc += dlt * dlt;
        }
        Ok(math::sqrt(acc))
    }
}

// ── Hinge loss ──────────────────────────────────────────────────────────────

/// A regularized hinge-loss classification instance with an optional
/// cached reference minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeLossProblem {
    a: DenseMatrix,
    y: Vec<f64>,
    lambda: f64,
    x_star: Option<Vec<f64>>,
    objective_star: Option<f64>,
}

impl HingeLossProblem {
    /// Validates labels (exactly ±1) and the regularization weight.
    pub fn new(a: DenseMatrix, y: Vec<f64>, lambda: f64) -> Result<Self> {
        if y.len() != a.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} rows",
                y.len(),
                a.nrows()
            )));
        }
        if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(format!(
                "label at row {i} is not exactly +1 or -1"
            )));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidArgument(
                "regularization weight must be a positive finite number".to_string(),
            ));
        }
        Ok(HingeLossProblem {
            a,
            y,
            lambda,
            x_star: None,
            objective_star: None,
        })
    }

    /// Runs the deterministic reference minimizer and caches its iterate
    /// and objective value.
    pub fn with_reference(mut self) -> Self {
        let (x, obj) = reference_minimizer_impl(&self);
        self.x_star = Some(x);
        self.objective_star = Some(obj);
        self
    }

    /// Feature rows.
    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    /// Labels, each exactly ±1.
    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// Regularization weight λ (also the objective's strong convexity).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Rows.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Columns (iterate dimension).
    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    /// Cached reference minimizer, if computed.
    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    /// Objective value at the cached reference, if computed.
    pub fn objective_star(&self) -> Option<f64> {
        self.objective_star
    }

    /// Label-scaled matrix whose row `i` is `yᵢ·aᵢ`.
    pub fn signed_matrix(&self) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = (0..self.n())
            .map(|i| self.a.row(i).iter().map(|&v| self.y[i] * v).collect())
            .collect();
        DenseMatrix::from_rows(&rows).expect("scaled copy of a valid matrix")
    }

    /// Objective `(1/n)Σ[1 − yᵢ⟨x, aᵢ⟩]₊ + (λ/2)‖x‖²`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut hinge = 0.0;
        for i in 0..n {
            let margin = self.y[i] * math::dot(self.a.row(i), x);
            if margin < 1.0 {
                hinge += 1.0 - margin;
            }
        }
        hinge / n as f64 + 0.5 * self.lambda * math::norm_sq(x)
    }

    /// Gap `F(x) − F(x*)` against the cached reference objective.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        let star = self.objective_star.ok_or(Error::MissingReference)?;
        Ok(self.objective(x) - star)
    }
}

/// Deterministic reference minimizer for the hinge objective: full-batch
/// subgradient descent with step `1/(λk)` for [`REFERENCE_DESCENT_STEPS`]
/// iterations from zero, returning the half-tail average unless the best
/// iterate seen beats it by more than `1e-6` in objective value.
pub fn hinge_reference_minimizer(p: &HingeLossProblem) -> Vec<f64> {
    reference_minimizer_impl(p).0
}

fn reference_minimizer_impl(p: &HingeLossProblem) -> (Vec<f64>, f64) {
    let n = p.n();
    let m = p.m();
    let lambda = p.lambda();
    let total = REFERENCE_DESCENT_STEPS;
    let tail_len = total / 2;
    let snapshot_at = total - tail_len;

    let mut x = alloc::vec![0.0; m];
    let mut sum = alloc::vec![0.0; m];
    let mut lag_sum = alloc::vec![0.0; m];
    // x₀ = 0 scores objective 1 (every hinge term active at full height).
    let mut best_obj = 1.0;
    let mut best_x = x.clone();
    let mut active = alloc::vec![0.0; m];

    for k in 1..=total {
        // One margins pass serves both the subgradient and the objective
        // of the current iterate.
        let mut hinge = 0.0;
        for v in active.iter_mut() {
            *v = 0.0;
        }
        for i in 0..n {
            let row = p.a.row(i);
            let margin = p.y[i] * math::dot(row, &x);
            if margin < 1.0 {
                hinge += 1.0 - margin;
                for j in 0..m {
                    active[j] += p.y[i] * row[j];
                }
            }
        }
        let obj = hinge / n as f64 + 0.5 * lambda * math::norm_sq(&x);
        if obj < best_obj {
            best_obj = obj;
            best_x.copy_from_slice(&x);
        }
        // x ← x − (1/(λk))(λx − active/n) = (1 − 1/k)x + active/(λkn).
        let decay = 1.0 - 1.0 / k as f64;
        let gain = 1.0 / (lambda * k as f64 * n as f64);
        for j in 0..m {
            x[j] = decay * x[j] + gain * active[j];
            sum[j] += x[j];
        }
        if k == snapshot_at {
            lag_sum.copy_from_slice(&sum);
        }
    }

    let final_obj = p.objective(&x);
    if final_obj < best_obj {
        best_obj = final_obj;
        best_x.copy_from_slice(&x);
    }

    let mut tail = alloc::vec![0.0; m];
    for j in 0..m {
        tail[j] = (sum[j] - lag_sum[j]) / tail_len as f64;
    }
    let tail_obj = p.objective(&tail);
    if tail_obj <= best_obj + 1e-6 {
        (tail, tail_obj)
    } else {
        (best_x, best_obj)
    }
}

// ── Generators ──────────────────────────────────────────────────────────────

/// Synthetic instance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Independent standard-normal entries.
    Gaussian,
    /// Row `k` (1-indexed) has entries `N(0, k²)`, so squared row norms
    /// grow like `m·k²`.
    GaussianVarK2,
    /// Row `k` has entries uniform on `[0, √3·k)`: positive, mutually
    /// correlated rows with second moment `k²` per entry.
    CorrelatedUniformVarK2,
    /// Square orthonormal transform (normalized type-II cosine basis).
    Orthonormal,
    /// Standard-normal entries kept with probability `density`, else zero.
    SparseGaussian,
    /// Intersection lengths of random lines with a square pixel grid.
    Tomography,
    /// Two Gaussian clouds at `±μ·𝟙/√m` with alternating ±1 labels, for
    /// the hinge solver.
    SvmGaussian,
}

/// Everything a generator needs; unused knobs are ignored per family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    /// Which family to draw.
    pub family: Family,
    /// Rows (ignored by `Tomography`, which uses `oversample_f·grid_n²`).
    pub n: usize,
    /// Columns (ignored by `Tomography`, which uses `grid_n²`).
    pub m: usize,
    /// Seed of the generation stream.
    pub seed: u64,
    /// Exact Euclidean norm of the additive residual; zero keeps the
    /// system consistent.
    pub noise_norm: f64,
    /// Nonzero fraction for `SparseGaussian`, in `(0, 1]`.
    pub density: f64,
    /// Grid side `N` for `Tomography`.
    pub grid_n: usize,
    /// Row oversampling factor `f` for `Tomography` (`n = f·N²`).
    pub oversample_f: usize,
    /// Regularization weight for `SvmGaussian`.
    pub lambda: f64,
    /// Cloud separation `μ` for `SvmGaussian`.
    pub svm_separation: f64,
}

impl GeneratorSpec {
    /// Spec with library defaults: consistent system, 20% density,
    /// 20×20 grid oversampled 3×, λ = 0.1, separation 2.
    pub fn new(family: Family, n: usize, m: usize, seed: u64) -> Self {
        GeneratorSpec {
            family,
            n,
            m,
            seed,
            noise_norm: 0.0,
            density: 0.2,
            grid_n: 20,
            oversample_f: 3,
            lambda: 0.1,
            svm_separation: 2.0,
        }
    }
}

/// A generated instance: least squares or hinge loss.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// Least-squares instance with cached reference.
    LeastSquares(LeastSquaresProblem),
    /// Hinge-loss instance (reference computed on demand).
    Hinge(HingeLossProblem),
}

impl Problem {
    /// Unwraps a least-squares instance.
    pub fn into_least_squares(self) -> Result<LeastSquaresProblem> {
        match self {
            Problem::LeastSquares(p) => Ok(p),
            Problem::Hinge(_) => Err(Error::InvalidArgument(
                "expected a least-squares instance, found a hinge-loss one".to_string(),
            )),
        }
    }

    /// Unwraps a hinge-loss instance.
    pub fn into_hinge(self) -> Result<HingeLossProblem> {
        match self {
            Problem::Hinge(p) => Ok(p),
            Problem::LeastSquares(_) => Err(Error::InvalidArgument(
                "expected a hinge-loss instance, found a least-squares one".to_string(),
            )),
        }
    }
}

/// Draws an instance of `spec.family`.
///
/// Least-squares families build `b = A·x_true (+ e)` with a standard
/// normal `x_true` and an optional residual `e` of exact norm
/// `noise_norm`, then cache the reference solution. The generation
/// stream is consumed in a fixed order — matrix entries row-major, then
/// `x_true`, then the residual direction — so instances replay exactly
/// from `(family, dims, seed)`.
pub fn generate(spec: &GeneratorSpec) -> Result<Problem> {
    if !spec.noise_norm.is_finite() || spec.noise_norm < 0.0 {
        return Err(Error::InvalidArgument(
            "noise norm must be finite and nonnegative".to_string(),
        ));
    }
    let mut stream = rng::stream(spec.seed, rng::domain::GENERATOR, 0);
    match spec.family {
        Family::Gaussian => {
            let a = dense_from_fn(spec.n, spec.m, &mut stream, |_, _, r| {
                rng::standard_normal(r)
            })?;
            require_tall(spec.n, spec.m)?;
            finish_least_squares(a, &mut stream, spec.noise_norm)
        }
        Family::GaussianVarK2 => {
            let a = dense_from_fn(spec.n, spec.m, &mut stream, |i, _, r| {
                (i + 1) as f64 * rng::standard_normal(r)
            })?;
            require_tall(spec.n, spec.m)?;
            finish_least_squares(a, &mut stream, spec.noise_norm)
        }
        Family::CorrelatedUniformVarK2 => {
            let root3 = math::sqrt(3.0);
            let a = dense_from_fn(spec.n, spec.m, &mut stream, |i, _, r| {
                r.gen::<f64>() * root3 * (i + 1) as f64
            })?;
            require_tall(spec.n, spec.m)?;
            finish_least_squares(a, &mut stream, spec.noise_norm)
        }
        Family::Orthonormal => {
            if spec.n != spec.m {
                return Err(Error::InvalidArgument(format!(
                    "the orthonormal family needs a square system, got {}×{}",
                    spec.n, spec.m
                )));
            }
            let a = cosine_basis(spec.n)?;
            finish_least_squares(a, &mut stream, spec.noise_norm)
        }
        Family::SparseGaussian => {
            if !(spec.density > 0.0 && spec.density <= 1.0) {
                return Err(Error::InvalidArgument(
                    "density must lie in (0, 1]".to_string(),
                ));
            }
            // Per entry: one uniform gate, then a normal draw only for
            // kept entries (fixed consumption order for replay).
            let a = dense_from_fn(spec.n, spec.m, &mut stream, |_, _, r| {
                if r.gen::<f64>() < spec.density {
                    rng::standard_normal(r)
                } else {
                    0.0
                }
            })?;
            require_tall(spec.n, spec.m)?;
            finish_least_squares(a, &mut stream, spec.noise_norm)
        }
        Family::Tomography => {
            let base = tomography::generate_tomography(spec.grid_n, spec.oversample_f, spec.seed)?;
            if spec.noise_norm == 0.0 {
                return Ok(Problem::LeastSquares(base));
            }
            // Perturb the consistent right-hand side on a dedicated
            // substream (the attempt streams are spoken for).
            let mut noise_stream = rng::stream(spec.seed, rng::domain::GENERATOR, 999);
            let direction = rng::unit_sphere_vec(&mut noise_stream, base.n());
            let mut b = base.rhs().to_vec();
            for (bi, ui) in b.iter_mut().zip(&direction) {
                *bi += spec.noise_norm * ui;
            }
            let problem = LeastSquaresProblem::new(base.a().clone(), b)?.with_reference()?;
            Ok(Problem::LeastSquares(problem))
        }
        Family::SvmGaussian => {
            if spec.n == 0 || spec.m == 0 {
                return Err(Error::InvalidArgument(
                    "system dimensions must be positive".to_string(),
                ));
            }
            if !spec.svm_separation.is_finite() || spec.svm_separation < 0.0 {
                return Err(Error::InvalidArgument(
                    "cloud separation must be finite and nonnegative".to_string(),
                ));
            }
            let center = spec.svm_separation / math::sqrt(spec.m as f64);
            let mut rows = Vec::with_capacity(spec.n);
            let mut labels = Vec::with_capacity(spec.n);
            for i in 0..spec.n {
                let y = if i % 2 == 0 { 1.0 } else { -1.0 };
                let mut row = Vec::with_capacity(spec.m);
                for _ in 0..spec.m {
                    row.push(y * center + rng::standard_normal(&mut stream));
                }
                rows.push(row);
                labels.push(y);
            }
            let a = DenseMatrix::from_rows(&rows)?;
            Ok(Problem::Hinge(HingeLossProblem::new(
                a,
                labels,
                spec.lambda,
            )?))
        }
    }
}

fn require_tall(n: usize, m: usize) -> Result<()> {
    if n < m {
        return Err(Error::InvalidArgument(format!(
            "least-squares families need n ≥ m, got {n}×{m}"
        )));
    }
    Ok(())
}

fn dense_from_fn(
    n: usize,
    m: usize,
    stream: &mut ChaCha8Rng,
    mut entry: impl FnMut(usize, usize, &mut ChaCha8Rng) -> f64,
) -> Result<DenseMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "system dimensions must be positive".to_string(),
        ));
    }
    let mut data = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            data.push(entry(i, j, stream));
        }
    }
    DenseMatrix::new(n, m, data)
}

/// Normalized type-II cosine basis: row `k`, column `j` holds
/// `s_k·cos(π(2j+1)k/(2N))` with `s_0 = √(1/N)` and `s_k = √(2/N)`
/// otherwise — a real matrix with exactly orthonormal rows.
fn cosine_basis(n: usize) -> Result<DenseMatrix> {
    let nf = n as f64;
    let mut data = Vec::with_capacity(n * n);
    for k in 0..n {
        let scale = if k == 0 {
            math::sqrt(1.0 / nf)
        } else {
            math::sqrt(2.0 / nf)
        };
        for j in 0..n {
            let angle = core::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf);
            data.push(scale * math::cos(angle));
        }
    }
    DenseMatrix::new(n, n, data)
}

fn finish_least_squares(
    a: DenseMatrix,
    stream: &mut ChaCha8Rng,
    noise_norm: f64,
) -> Result<Problem> {
    let x_true = rng::standard_normal_vec(stream, a.ncols());
    let mut b = a.matvec(&x_true);
    if noise_norm > 0.0 {
        let direction = rng::unit_sphere_vec(stream, a.nrows());
        for (bi, ui) in b.iter_mut().zip(&direction) {
            *bi += noise_norm * ui;
        }
    }
    let problem = LeastSquaresProblem::new(a, b)?.with_reference()?;
    Ok(Problem::LeastSquares(problem))
}

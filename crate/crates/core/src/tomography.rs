//! Random-line tomography systems over a square pixel grid.
//!
//! The grid is `[0, N]²` split into `N²` unit cells, flattened row-major
//! with cell `(row, col) = (⌊y⌋, ⌊x⌋)` at index `row·N + col`. Each
//! system row measures total absorption along one random line: the row's
//! entry for a cell is the length of the line segment crossing that
//! cell. Lines are sampled by drawing two points on the grid's boundary
//! (resampling until they sit on different sides and actually cross the
//! interior), and the cell lengths come from a parametric grid traversal
//! that splits the segment at every integer x- and y-plane crossing and
//! assigns each piece to the cell containing its midpoint. A line can
//! touch at most `2N−1` cells, so rows are sparse even though they are
//! stored dense.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::matrix::DenseMatrix;
use crate::problems::LeastSquaresProblem;
use crate::{rng, Error, Result};

/// Retries for one line draw before giving up on the geometry.
const LINE_RESAMPLE_CAP: usize = 10_000;
/// Fresh-seed attempts when a drawn system turns out rank deficient.
const RANK_RETRY_CAP: u64 = 10;

/// Intersection lengths of the segment `p0 → p1` with every cell of an
/// `N×N` unit grid, flattened row-major.
///
/// Both points must lie inside `[0, N]²`. A degenerate (zero-length)
/// segment yields an all-zero row; callers sampling random lines should
/// treat such rows as misses and redraw.
pub fn line_intersection_row(grid_n: usize, p0: (f64, f64), p1: (f64, f64)) -> Result<Vec<f64>> {
    if grid_n == 0 {
        return Err(Error::InvalidArgument(
            "grid side must be positive".to_string(),
        ));
    }
    let nf = grid_n as f64;
    for (x, y) in [p0, p1] {
        if !(x.is_finite() && y.is_finite()) || !(0.0..=nf).contains(&x) || !(0.0..=nf).contains(&y)
        {
            return Err(Error::InvalidArgument(
                "line endpoints must lie inside the grid square".to_string(),
            ));
        }
    }
    let (x0, y0) = p0;
    let dx = p1.0 - x0;
    let dy = p1.1 - y0;
    let len = math::sqrt(dx * dx + dy * dy);
    let mut row = alloc::vec![0.0; grid_n * grid_n];
    if len <= 1e-12 {
        return Ok(row);
    }

    // Split [0, 1] at every integer-plane crossing.
    let mut ts = Vec::with_capacity(2 * grid_n);
    ts.push(0.0);
    ts.push(1.0);
    if dx != 0.0 {
        for k in 1..grid_n {
            let t = (k as f64 - x0) / dx;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    if dy != 0.0 {
        for k in 1..grid_n {
            let t = (k as f64 - y0) / dy;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).expect("crossing parameters are finite"));

    for w in ts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        if tb - ta <= 1e-12 {
            continue;
        }
        let tm = 0.5 * (ta + tb);
        let cx = cell_coordinate(x0 + tm * dx, grid_n);
        let cy = cell_coordinate(y0 + tm * dy, grid_n);
        row[cy * grid_n + cx] += (tb - ta) * len;
    }
    Ok(row)
}

fn cell_coordinate(v: f64, grid_n: usize) -> usize {
    let c = math::floor(v);
    if c < 0.0 {
        0
    } else {
        (c as usize).min(grid_n - 1)
    }
}

/// Point on the boundary of `[0, N]²` at perimeter parameter
/// `u ∈ [0, 4N)`, walking bottom → right → top → left.
fn boundary_point(u: f64, nf: f64) -> (usize, (f64, f64)) {
    let side = (math::floor(u / nf) as usize).min(3);
    let t = u - side as f64 * nf;
    let point = match side {
        0 => (t, 0.0),
        1 => (nf, t),
        2 => (nf - t, nf),
        _ => (0.0, nf - t),
    };
    (side, point)
}

fn sample_line_row(grid_n: usize, stream: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let nf = grid_n as f64;
    for _ in 0..LINE_RESAMPLE_CAP {
        let (s0, p0) = boundary_point(stream.gen::<f64>() * 4.0 * nf, nf);
        let (s1, p1) = boundary_point(stream.gen::<f64>() * 4.0 * nf, nf);
        if s0 == s1 {
            continue;
        }
        let row = line_intersection_row(grid_n, p0, p1)?;
        if row.iter().sum::<f64>() > 1e-12 {
            return Ok(row);
        }
    }
    Err(Error::NoConvergence {
        iterations: LINE_RESAMPLE_CAP,
    })
}

/// Consistent `f·N² × N²` tomography system: random-line rows over an
/// `N×N` grid and a right-hand side measured from a nonnegative random
/// phantom (cell values uniform on `[0, 1)`).
///
/// A drawn system that turns out rank deficient is discarded and redrawn
/// on the next attempt substream, up to ten attempts.
pub fn generate_tomography(
    grid_n: usize,
    oversample_f: usize,
    seed: u64,
) -> Result<LeastSquaresProblem> {
    if grid_n < 2 {
        return Err(Error::InvalidArgument(
            "grid side must be at least 2".to_string(),
        ));
    }
    if oversample_f < 1 {
        return Err(Error::InvalidArgument(
            "oversampling factor must be at least 1".to_string(),
        ));
    }
    let m = grid_n * grid_n;
    let n = oversample_f * m;
    let mut last = Error::NoConvergence { iterations: 0 };
    for attempt in 0..RANK_RETRY_CAP {
        let mut stream = rng::stream(seed, rng::domain::GENERATOR, attempt);
        let mut data = Vec::with_capacity(n * m);
        for _ in 0..n {
            data.extend_from_slice(&sample_line_row(grid_n, &mut stream)?);
        }
        let a = DenseMatrix::new(n, m, data)?;
        let phantom: Vec<f64> = (0..m).map(|_| stream.gen::<f64>()).collect();
        let b = a.matvec(&phantom);
        match LeastSquaresProblem::new(a, b)?.with_reference() {
            Ok(problem) => return Ok(problem),
            Err(e @ Error::RankDeficient { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

//! Shared oracles for the integration suites: a dense symmetric
//! eigensolver independent of the library's power-iteration code path,
//! plus small statistics helpers.

#![allow(dead_code)]

use bwsgd::matrix::DenseMatrix;

/// Eigenvalues of a dense symmetric `n×n` matrix (row-major) via cyclic
/// Jacobi rotations. Independent of the library's spectral estimators, so
/// it can serve as ground truth for them.
pub fn jacobi_eigenvalues(mat: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Column Gram matrix `AᵀA` as a row-major `m×m` buffer.
pub fn column_gram(a: &DenseMatrix) -> Vec<f64> {
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

/// Row Gram matrix `BBᵀ` of the selected rows, row-major `b×b`.
pub fn row_gram(a: &DenseMatrix, indices: &[usize]) -> Vec<f64> {
    let b = indices.len();
    let mut g = vec![0.0; b * b];
    for (p, &ip) in indices.iter().enumerate() {
        for (q, &iq) in indices.iter().enumerate() {
            g[p * b + q] = a.row(ip).iter().zip(a.row(iq)).map(|(x, y)| x * y).sum();
        }
    }
    g
}

/// Smallest and largest singular values of `a` via the Jacobi oracle on
/// `AᵀA`.
pub fn singular_extremes_oracle(a: &DenseMatrix) -> (f64, f64) {
    let m = a.ncols();
    let eig = jacobi_eigenvalues(&column_gram(a), m);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for v in eig {
        let v = v.max(0.0);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo.sqrt(), hi.sqrt())
}

/// Median of a sample (averages the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson correlation coefficient of two equal-length samples.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

//! Dense vector/matrix helpers for the desk-scale dimensions used here
//! (`dim <= 100`). Matrices are row-major `Vec<Vec<f64>>`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// `M x` for a row-major square or rectangular matrix.
pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// `M^T y`
pub fn mat_t_vec(m: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (row, yi) in m.iter().zip(y) {
        for (o, mij) in out.iter_mut().zip(row) {
            *o += mij * yi;
        }
    }
    out
}

/// `A^T A` for a rectangular matrix.
pub fn gram(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut g = vec![vec![0.0; cols]; cols];
    for row in m {
        for i in 0..cols {
            for j in 0..cols {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    g
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration,
/// iterated until the Rayleigh quotient moves by less than `tol`.
pub fn largest_eigenvalue(m: &[Vec<f64>], tol: f64) -> f64 {
    let n = m.len();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with incommensurate components so no eigenvector
    // of a diagonal matrix is missed.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let w = mat_vec(m, &v);
        let new_lambda = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = scale(&w, 1.0 / nw);
        if (new_lambda - lambda).abs() <= tol * (1.0 + new_lambda.abs()) {
            return new_lambda;
        }
        lambda = new_lambda;
    }
    lambda
}

/// Smallest eigenvalue of a symmetric matrix via a shifted power iteration.
pub fn smallest_eigenvalue(m: &[Vec<f64>], tol: f64) -> f64 {
    let n = m.len();
    // Gershgorin upper bound as shift, then lambda_min = shift - lambda_max(shift*I - M).
    let shift = m
        .iter()
        .enumerate()
        .map(|(i, row)| row[i] + row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { shift - m[i][j] } else { -m[i][j] })
                .collect()
        })
        .collect();
    shift - largest_eigenvalue(&shifted, tol)
}

/// Solve `M x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` for (numerically) singular systems.
pub fn solve(m: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..=n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = a[row][n];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

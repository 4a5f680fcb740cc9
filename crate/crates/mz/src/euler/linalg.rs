//! Small dense helpers for symbol-rank computations.

/// Singular values of a `rows x cols` matrix (row-major), descending.
///
/// One-sided Jacobi on the columns of the tall orientation: rotations
/// orthogonalize column pairs, the final column norms are the singular
/// values.  Working on the matrix itself (never the Gram matrix) keeps tiny
/// singular values at the machine-epsilon floor instead of its square root,
/// which the 1e-8 relative rank threshold depends on.
pub fn singular_values(mat: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    // Column-major working copy of the tall orientation.
    let (m, n, col_major) = if rows >= cols {
        let mut a = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                a[c * rows + r] = mat[r * cols + c];
            }
        }
        (rows, cols, a)
    } else {
        // Transpose: singular values are shared.
        let mut a = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                a[r * cols + c] = mat[r * cols + c];
            }
        }
        (cols, rows, a)
    };
    let mut a = col_major;
    let tol = 1e-15;
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0f64, 0.0f64, 0.0f64);
                for r in 0..m {
                    let x = a[p * m + r];
                    let y = a[q * m + r];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..m {
                    let x = a[p * m + r];
                    let y = a[q * m + r];
                    a[p * m + r] = cs * x - sn * y;
                    a[q * m + r] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|c| (0..m).map(|r| a[c * m + r] * a[c * m + r]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Numerical rank with a threshold relative to the top singular value.
pub fn numerical_rank(mat: &[f64], rows: usize, cols: usize, rel_tol: f64) -> usize {
    let sv = singular_values(mat, rows, cols);
    match sv.first() {
        None => 0,
        Some(&top) if top <= 0.0 => 0,
        Some(&top) => sv.iter().filter(|&&s| s > rel_tol * top).count(),
    }
}

/// `rows x k` times `k x cols`, row-major.
pub fn matmul(a: &[f64], b: &[f64], rows: usize, k: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for m in 0..k {
            let v = a[r * k + m];
            if v != 0.0 {
                for c in 0..cols {
                    out[r * cols + c] += v * b[m * cols + c];
                }
            }
        }
    }
    out
}

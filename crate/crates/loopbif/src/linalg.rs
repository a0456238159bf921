//! Tridiagonal linear algebra: pivoting Thomas solve, bordered solves for
//! arclength correctors, and LDL^T inertia counts for symmetric pencils.

use crate::{Error, Result};

/// Solves a tridiagonal system by Gaussian elimination with partial
/// pivoting. Pivoting fills one extra superdiagonal. `sub` and `sup` have
/// length `n - 1`.
pub fn solve_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert_eq!(sub.len(), n - 1);
    assert_eq!(sup.len(), n - 1);
    assert_eq!(rhs.len(), n);

    let mut a = sub.to_vec(); // a[k] = entry (k+1, k)
    let mut b = diag.to_vec(); // b[k] = entry (k, k)
    let mut c = sup.to_vec(); // c[k] = entry (k, k+1)
    let mut c2 = vec![0.0; n]; // c2[k] = fill-in entry (k, k+2)
    let mut d = rhs.to_vec();

    for k in 0..n - 1 {
        if a[k].abs() > b[k].abs() {
            // swap rows k and k+1
            std::mem::swap(&mut a[k], &mut b[k]);
            std::mem::swap(&mut c[k], &mut b[k + 1]);
            if k + 1 < n - 1 {
                c2[k] = c[k + 1];
                c[k + 1] = 0.0;
            }
            d.swap(k, k + 1);
        }
        if b[k] == 0.0 {
            return Err(Error::SingularSystem);
        }
        let m = a[k] / b[k];
        b[k + 1] -= m * c[k];
        if k + 1 < n - 1 {
            c[k + 1] -= m * c2[k];
        }
        d[k + 1] -= m * d[k];
        if !b[k + 1].is_finite() || !d[k + 1].is_finite() {
            return Err(Error::SingularSystem);
        }
    }

    if b[n - 1] == 0.0 {
        return Err(Error::SingularSystem);
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1] / b[n - 1];
    if n >= 2 {
        x[n - 2] = (d[n - 2] - c[n - 2] * x[n - 1]) / b[n - 2];
    }
    for k in (0..n.saturating_sub(2)).rev() {
        x[k] = (d[k] - c[k] * x[k + 1] - c2[k] * x[k + 2]) / b[k];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x)
}

/// Solution of a bordered tridiagonal system
/// `[J  col; row^T  corner] [x; y] = [rhs; rhs_corner]`
/// via the Schur complement on the scalar border. `J` is given by bands.
/// Fails when `J` itself is numerically singular; the arclength stepper
/// treats that as a rejected step.
#[allow(clippy::too_many_arguments)]
pub fn solve_bordered(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    col: &[f64],
    row: &[f64],
    corner: f64,
    rhs: &[f64],
    rhs_corner: f64,
) -> Result<(Vec<f64>, f64)> {
    let y1 = solve_tridiag(sub, diag, sup, rhs)?;
    let y2 = solve_tridiag(sub, diag, sup, col)?;
    let row_y1: f64 = row.iter().zip(&y1).map(|(&r, &v)| r * v).sum();
    let row_y2: f64 = row.iter().zip(&y2).map(|(&r, &v)| r * v).sum();
    let denom = corner - row_y2;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularSystem);
    }
    let y = (rhs_corner - row_y1) / denom;
    let x: Vec<f64> = y1.iter().zip(&y2).map(|(&u, &v)| u - y * v).collect();
    if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok((x, y))
}

/// Number of negative eigenvalues of the symmetric tridiagonal matrix
/// `T - shift_diag` via the LDL^T recurrence (Sturm count). `off` has
/// length `n - 1`.
pub fn inertia_negative(diag: &[f64], off: &[f64], shift_diag: &[f64]) -> usize {
    let n = diag.len();
    let mut count = 0usize;
    let mut d_prev = diag[0] - shift_diag[0];
    if d_prev < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let dd = if d_prev != 0.0 { d_prev } else { f64::MIN_POSITIVE };
        let d_cur = (diag[i] - shift_diag[i]) - off[i - 1] * off[i - 1] / dd;
        if d_cur < 0.0 {
            count += 1;
        }
        d_prev = d_cur;
    }
    count
}

/// Inverse iteration on the symmetric tridiagonal matrix given by bands,
/// targeting the eigenvalue closest to zero. Returns the max-normalized
/// eigenvector. The caller supplies a matrix already shifted so that the
/// wanted eigenvalue is (nearly) zero.
pub fn inverse_iteration_near_zero(
    diag: &[f64],
    off: &[f64],
    start: &[f64],
    iterations: usize,
) -> Result<Vec<f64>> {
    let mut v = start.to_vec();
    let norm0 = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if norm0 == 0.0 {
        return Err(Error::Numerical("inverse iteration started from zero vector".into()));
    }
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut shift = 0.0f64;
    for _ in 0..iterations {
        let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let next = match solve_tridiag(off, &shifted, off, &v) {
            Ok(next) => next,
            Err(_) => {
                // exactly singular shift: nudge by one ulp-scale and retry
                let scale = diag.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
                shift += 1e-14 * scale.max(1.0);
                continue;
            }
        };
        let norm = next.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical("inverse iteration diverged".into()));
        }
        v = next.iter().map(|&x| x / norm).collect();
    }
    // orient by the largest-magnitude entry
    let imax = v
        .iter()
        .enumerate()
        .max_by(|l, r| l.1.abs().partial_cmp(&r.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if v[imax] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    Ok(v)
}

//! Dense complex linear algebra used by the Floquet solvers.
//!
//! nalgebra provides the complex Schur form; eigenvectors are recovered from
//! the triangular factor by back-substitution and polished with one step of
//! inverse iteration when the residual is poor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigenvalues closer than this (relative to the matrix scale) are treated as
/// one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("Schur iteration did not converge for a {dim}x{dim} matrix (1-norm {norm:.3e}, condition estimate {cond:.3e})")]
    NoConvergence { dim: usize, norm: f64, cond: f64 },
    #[error("linear system is singular or ill-conditioned (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
}

/// Eigenpairs of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit-norm right eigenvectors, one per column.
    pub vectors: CMat,
}

pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number from an explicit inverse; `inf` if singular.
pub fn condition_1(m: &CMat) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

pub fn eigen(m: &CMat) -> Result<Eigen, LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigen: matrix must be square");
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }
    let scale = norm1(m).max(f64::MIN_POSITIVE);
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 100 * n * n).ok_or_else(|| {
        LinalgError::NoConvergence {
            dim: n,
            norm: scale,
            cond: condition_1(m),
        }
    })?;
    let (q, t) = schur.unpack();
    let values: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let small = f64::EPSILON * scale;

    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = values[k];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            y[(j, k)] = -s / d;
        }
        // guard against overflow from tiny pivots
        let mx = (0..=k).map(|j| y[(j, k)].norm()).fold(0.0, f64::max);
        if mx > 1e100 {
            for j in 0..=k {
                y[(j, k)] /= mx;
            }
        }
    }
    let mut vectors = &q * &y;
    for k in 0..n {
        let nrm = vectors.column(k).norm();
        vectors.column_mut(k).unscale_mut(nrm);
    }

    orthonormalize_clusters(&values, &mut vectors, scale);

    for k in 0..n {
        let v = vectors.column(k).clone_owned();
        if residual(m, values[k], &v) > 1e-11 * scale {
            if let Some(better) = inverse_iteration(m, values[k], &v, scale) {
                if residual(m, values[k], &better) < residual(m, values[k], &v) {
                    vectors.set_column(k, &better);
                }
            }
        }
    }
    Ok(Eigen { values, vectors })
}

/// `‖(M − λ) v‖₂`.
pub fn residual(m: &CMat, lambda: Complex64, v: &CVec) -> f64 {
    (m * v - v * lambda).norm()
}

fn inverse_iteration(m: &CMat, lambda: Complex64, v: &CVec, scale: f64) -> Option<CVec> {
    let n = m.nrows();
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut x = lu.solve(v)?;
    let nrm = x.norm();
    if !nrm.is_finite() || nrm == 0.0 {
        return None;
    }
    x.unscale_mut(nrm);
    Some(x)
}

/// Gram-Schmidt inside each cluster of (numerically) equal eigenvalues.
fn orthonormalize_clusters(values: &[Complex64], vectors: &mut CMat, scale: f64) {
    let n = values.len();
    let tol = DEGENERACY_TOL * scale.max(1.0);
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let cluster: Vec<usize> = (i..n)
            .filter(|&j| !done[j] && (values[j] - values[i]).norm() < tol)
            .collect();
        for &j in &cluster {
            done[j] = true;
        }
        if cluster.len() < 2 {
            continue;
        }
        let mut basis: Vec<CVec> = Vec::new();
        for &j in &cluster {
            let mut v = vectors.column(j).clone_owned();
            for b in &basis {
                let p = b.dotc(&v);
                v -= b * p;
            }
            let nrm = v.norm();
            if nrm > 1e-8 {
                v.unscale_mut(nrm);
                vectors.set_column(j, &v);
                basis.push(v);
            }
        }
    }
}

/// Result of an equilibrated dense solve.
#[derive(Debug, Clone)]
pub struct Solved {
    pub x: CVec,
    /// 1-norm condition number of the row/column-equilibrated matrix.
    pub condition: f64,
    /// `‖A x − b‖ / (‖A‖‖x‖ + ‖b‖)`, measured on the unscaled system.
    pub relative_residual: f64,
}

/// Solve `A x = b` after scaling rows and columns to unit max-magnitude.
pub fn solve_equilibrated(a: &CMat, b: &CVec, max_condition: f64) -> Result<Solved, LinalgError> {
    let n = a.nrows();
    let mut rs = vec![1.0; n];
    let mut cs = vec![1.0; n];
    for i in 0..n {
        let mx = a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            rs[i] = 1.0 / mx;
        }
    }
    for j in 0..n {
        let mx = (0..n).map(|i| (a[(i, j)] * rs[i]).norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            cs[j] = 1.0 / mx;
        }
    }
    let scaled = CMat::from_fn(n, n, |i, j| a[(i, j)] * (rs[i] * cs[j]));
    let sb = CVec::from_fn(n, |i, _| b[i] * rs[i]);
    let lu = scaled.clone().lu();
    let inv = lu.try_inverse().ok_or(LinalgError::Singular { cond: f64::INFINITY })?;
    let condition = norm1(&scaled) * norm1(&inv);
    if !condition.is_finite() || condition > max_condition {
        return Err(LinalgError::Singular { cond: condition });
    }
    let mut y = &inv * &sb;
    // one step of iterative refinement
    let r = &sb - &scaled * &y;
    y += &inv * r;
    let x = CVec::from_fn(n, |j, _| y[j] * cs[j]);
    let res = (a * &x - b).norm();
    let relative_residual = res / (a.norm() * x.norm() + b.norm()).max(f64::MIN_POSITIVE);
    Ok(Solved {
        x,
        condition,
        relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMat::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn random_matrix_residuals() {
        for (n, seed) in [(6, 1), (30, 2), (80, 3)] {
            let m = pseudo_random(n, seed);
            let e = eigen(&m).unwrap();
            for k in 0..n {
                let v = e.vectors.column(k).clone_owned();
                assert!((v.norm() - 1.0).abs() < 1e-12);
                assert!(residual(&m, e.values[k], &v) < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn diagonal_with_repeated_values() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]));
        let e = eigen(&m).unwrap();
        let mut vals: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![1.0, 1.0, 2.0]);
        for k in 0..3 {
            for l in 0..k {
                if (e.values[k] - e.values[l]).norm() < 1e-12 {
                    let ov = e.vectors.column(k).dotc(&e.vectors.column(l));
                    assert!(ov.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn equilibrated_solve_recovers_solution() {
        let mut a = pseudo_random(12, 9);
        for i in 0..12 {
            a[(i, 0)] *= 1e6;
        }
        let x = CVec::from_fn(12, |i, _| c(i as f64, 1.0));
        let b = &a * &x;
        let s = solve_equilibrated(&a, &b, 1e12).unwrap();
        assert!((s.x - x).norm() < 1e-8);
        assert!(s.relative_residual < 1e-13);
    }

    #[test]
    fn singular_system_is_reported() {
        let mut a = pseudo_random(5, 4);
        for j in 0..5 {
            a[(4, j)] = a[(3, j)];
        }
        let b = CVec::from_element(5, c(1.0, 0.0));
        assert!(matches!(
            solve_equilibrated(&a, &b, 1e12),
            Err(LinalgError::Singular { .. })
        ));
    }
}

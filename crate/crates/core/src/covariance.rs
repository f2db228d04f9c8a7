//! Covariance estimation, shrinkage and Mahalanobis geometry.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    m.clone().cholesky().map(|c| c.l()).ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:.6e}",
            min_eigenvalue(m)
        ))
    })
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Ratio of the largest to the smallest eigenvalue; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = eigenvalues(m);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Unbiased sample covariance of the rows.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Data(format!("need at least two rows for a covariance, got {n}")));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: r.len(),
        });
    }
    let mean = column_means(rows);
    let mut s = DMatrix::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                s[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = s[(i, j)] / (n - 1) as f64;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for r in rows {
        for (acc, v) in m.iter_mut().zip(r) {
            *acc += v;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// A shrunk covariance matrix with its inverse and factor.
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    pub raw: DMatrix<f64>,
    pub rho: f64,
    pub shrunk: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub chol_lower: DMatrix<f64>,
    pub cond_raw: f64,
    pub cond_shrunk: f64,
}

/// `(1 - rho) S + rho diag(S)`.
pub fn shrink_covariance(raw: &DMatrix<f64>, rho: f64) -> Result<CovarianceModel> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("shrinkage weight must lie in [0,1], got {rho}")));
    }
    let d = raw.nrows();
    if raw.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: raw.ncols(),
        });
    }
    let scale = raw.amax().max(1.0);
    for i in 0..d {
        for j in 0..i {
            if (raw[(i, j)] - raw[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::domain(format!("covariance is not symmetric at ({i},{j})")));
            }
        }
        if !(raw[(i, i)] > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "diagonal entry {i} is {}",
                raw[(i, i)]
            )));
        }
    }
    let mut shrunk = raw * (1.0 - rho);
    for i in 0..d {
        shrunk[(i, i)] += rho * raw[(i, i)];
    }
    let chol = shrunk.clone().cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "shrunk covariance (rho = {rho}) has smallest eigenvalue {:.6e}",
            min_eigenvalue(&shrunk)
        ))
    })?;
    Ok(CovarianceModel {
        cond_raw: condition_number(raw),
        cond_shrunk: condition_number(&shrunk),
        inverse: chol.inverse(),
        chol_lower: chol.l(),
        raw: raw.clone(),
        rho,
        shrunk,
    })
}

/// `(x - c)' M (x - c)`; no dimension checks.
#[inline]
pub fn quadratic_form(x: &[f64], center: &[f64], m: &DMatrix<f64>) -> f64 {
    let d = center.len();
    let mut q = 0.0;
    for i in 0..d {
        let di = x[i] - center[i];
        let mut row = 0.0;
        for j in 0..d {
            row += m[(i, j)] * (x[j] - center[j]);
        }
        q += di * row;
    }
    q
}

/// Squared Mahalanobis distance given the inverse covariance.
pub fn mahalanobis_sq(x: &[f64], center: &[f64], inverse: &DMatrix<f64>) -> Result<f64> {
    let d = center.len();
    if x.len() != d || inverse.nrows() != d || inverse.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    Ok(quadratic_form(x, center, inverse))
}

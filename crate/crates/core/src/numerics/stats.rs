use super::matrix::Matrix;
use crate::error::{Error, Result};

/// `(1/N) Σ (xᵢ − c)(xᵢ − c)ᵀ` with divisor `N`.
pub fn sample_covariance(x: &Matrix, center: &[f64]) -> Result<Matrix> {
    let d = x.cols();
    if center.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "center has length {}, data has {d} columns",
            center.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Domain("sample covariance of zero rows".into()));
    }
    let mut centered = vec![0.0; d];
    let mut s = Matrix::zeros(d, d);
    for r in x.row_iter() {
        for ((c, &v), &m) in centered.iter_mut().zip(r).zip(center) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = s.row_mut(i);
            for j in i..d {
                row[j] += ci * centered[j];
            }
        }
    }
    let n = x.rows() as f64;
    for i in 0..d {
        for j in i..d {
            let v = s[(i, j)] / n;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// `E[Yᵖ]` for `Y ~ Normal(mean, var)`, `p ∈ {1, 2, 3, 4}`.
pub fn gaussian_raw_moment(mean: f64, var: f64, order: u32) -> Result<f64> {
    if var < 0.0 {
        return Err(Error::Domain(format!("negative variance {var}")));
    }
    let m = mean;
    let v = var;
    match order {
        1 => Ok(m),
        2 => Ok(m * m + v),
        3 => Ok(m * m * m + 3.0 * m * v),
        4 => Ok(m.powi(4) + 6.0 * m * m * v + 3.0 * v * v),
        p => Err(Error::Unsupported(format!("raw moment of order {p}"))),
    }
}

/// Population variance (divisor `N`) of each column.
pub fn column_variances(x: &Matrix) -> Vec<f64> {
    let means = x.column_means();
    let mut var = vec![0.0; x.cols()];
    for r in x.row_iter() {
        for ((v, &xi), &m) in var.iter_mut().zip(r).zip(&means) {
            *v += (xi - m) * (xi - m);
        }
    }
    let n = x.rows().max(1) as f64;
    var.iter_mut().for_each(|v| *v /= n);
    var
}

/// Mean and standard error of the mean.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Central-difference Jacobian with a uniform step `h`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let steps = vec![h; x.len()];
    fd_jacobian_with_steps(f, x, &steps)
}

/// Central-difference Jacobian with a per-column step:
/// `J[i][j] = (F_i(x + h_j e_j) − F_i(x − h_j e_j)) / (2 h_j)`.
pub fn fd_jacobian_with_steps<F>(mut f: F, x: &[f64], steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if steps.len() != x.len() {
        return Err(Error::Dimension { expected: x.len(), got: steps.len() });
    }
    let mut jac: Option<DMatrix<f64>> = None;
    let mut xp = x.to_vec();
    for (j, &h) in steps.iter().enumerate() {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("finite-difference step {j} must be positive, got {h}")));
        }
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        if fp.len() != fm.len() {
            return Err(Error::Dimension { expected: fp.len(), got: fm.len() });
        }
        let m = jac.get_or_insert_with(|| DMatrix::zeros(fp.len(), x.len()));
        if m.nrows() != fp.len() {
            return Err(Error::Dimension { expected: m.nrows(), got: fp.len() });
        }
        for i in 0..fp.len() {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A symmetric positive-definite covariance with the factorizations the
/// samplers and kernels need, computed once and shared.
#[derive(Debug, Clone)]
pub struct Covariance {
    dim: usize,
    /// Row-major Σ.
    sigma: Vec<f64>,
    /// Row-major Σ⁻¹.
    precision: Vec<f64>,
    /// Lower Cholesky factor of Σ, row-major.
    sigma_chol: Vec<f64>,
    /// Lower Cholesky factor of Σ⁻¹, row-major.
    precision_chol: Vec<f64>,
    log_det: f64,
    diagonal: bool,
}

const SYMMETRY_TOLERANCE: f64 = 1e-12;

impl Covariance {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let dim = sigma.nrows();
        if dim == 0 || sigma.ncols() != dim {
            return Err(Error::NotPositiveDefinite(format!(
                "expected a non-empty square matrix, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        let scale = sigma.amax().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let l = chol.l();
        if (0..dim).any(|i| l[(i, i)] <= 0.0 || !l[(i, i)].is_finite()) {
            return Err(Error::NotPositiveDefinite("zero pivot".into()));
        }
        let log_det = 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>();
        let precision = chol.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        let precision_chol = precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("precision not factorizable".into()))?
            .l();
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || sigma[(i, j)] == 0.0));
        Ok(Self {
            dim,
            sigma: row_major(&sigma),
            precision: row_major(&precision),
            sigma_chol: row_major(&l),
            precision_chol: row_major(&precision_chol),
            log_det,
            diagonal,
        })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(
            &nalgebra::DVector::from_column_slice(variances),
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.sigma)
    }

    pub fn precision_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.precision)
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.sigma[i * self.dim + i]
    }

    /// out = Σ x
    #[inline]
    pub fn mul_sigma(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.sigma, self.dim, x, out)
    }

    /// out = Σ⁻¹ x
    #[inline]
    pub fn mul_precision(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.precision, self.dim, x, out)
    }

    /// out = chol(Σ) z, so `out` ~ N(0, Σ) for standard normal z.
    #[inline]
    pub fn color(&self, z: &[f64], out: &mut [f64]) {
        lower_mat_vec(&self.sigma_chol, self.dim, z, out)
    }

    /// out = chol(Σ⁻¹) z, so `out` ~ N(0, Σ⁻¹) for standard normal z.
    #[inline]
    pub fn color_precision(&self, z: &[f64], out: &mut [f64]) {
        lower_mat_vec(&self.precision_chol, self.dim, z, out)
    }

    /// xᵀ Σ⁻¹ x
    #[inline]
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        quad_form(&self.precision, self.dim, x)
    }

    /// xᵀ Σ x
    #[inline]
    pub fn sigma_quad(&self, x: &[f64]) -> f64 {
        quad_form(&self.sigma, self.dim, x)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[inline]
fn mat_vec(a: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let row = &a[i * n..(i + 1) * n];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

#[inline]
fn lower_mat_vec(l: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let row = &l[i * n..i * n + i + 1];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

#[inline]
fn quad_form(a: &[f64], n: usize, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let ax: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        acc += x[i] * ax;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Covariance::new(bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Covariance::new(asym).is_err());
        assert!(Covariance::diagonal(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn factors_are_consistent() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let c = Covariance::new(s.clone()).unwrap();
        let prod = &s * c.precision_matrix();
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((c.log_det() - s.determinant().ln()).abs() < 1e-12);
        assert!(!c.is_diagonal());
        let x = [0.4, -1.0, 2.0];
        let mut px = [0.0; 3];
        c.mul_precision(&x, &mut px);
        let direct: f64 = x.iter().zip(&px).map(|(a, b)| a * b).sum();
        assert!((c.mahalanobis_sq(&x) - direct).abs() < 1e-12);
    }
}

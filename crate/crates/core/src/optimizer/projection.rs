//! Projection onto the PSD cone and the `M = LᵀL` factorisation.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::metric::{symmetrize, MetricMatrix};

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("cannot decompose a matrix with non-finite entries".into()));
    }
    SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))
}

/// Frobenius-nearest PSD matrix: `V max(D, 0) Vᵀ` of the symmetrised input.
pub fn psd_project(m: &DMatrix<f64>) -> Result<MetricMatrix> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(invalid!("cannot project a {}x{} matrix", m.nrows(), m.ncols()));
    }
    let eig = eigen(symmetrize(m))?;
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    // V diag(λ₊) Vᵀ, scaling columns of V instead of forming diag(λ₊).
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &l) in scaled.column_iter_mut().zip(clamped.iter()) {
        col *= l;
    }
    let out = scaled * eig.eigenvectors.transpose();
    Ok(MetricMatrix::from_psd_unchecked(symmetrize(&out)))
}

/// `out_dim × d` matrix `L` whose rows are the top eigenvectors of `M`
/// scaled by the square roots of their eigenvalues, in descending order.
pub fn decompose_projection(m: &MetricMatrix, out_dim: usize) -> Result<DMatrix<f64>> {
    let d = m.dim();
    if out_dim == 0 || out_dim > d {
        return Err(invalid!("projection dimension must lie in 1..={d}, got {out_dim}"));
    }
    let eig = eigen(m.as_matrix().clone())?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut l = DMatrix::zeros(out_dim, d);
    for (row, &idx) in order.iter().take(out_dim).enumerate() {
        let scale = eig.eigenvalues[idx].max(0.0).sqrt();
        for c in 0..d {
            l[(row, c)] = scale * eig.eigenvectors[(c, idx)];
        }
    }
    Ok(l)
}

/// Maps each row of `x` (`n × d`) through `L`, giving `n × out_dim`.
pub fn embed(l: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if l.ncols() != x.ncols() {
        return Err(invalid!("projection expects dimension {}, data has {}", l.ncols(), x.ncols()));
    }
    Ok(x * l.transpose())
}

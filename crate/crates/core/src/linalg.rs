//! Thin wrappers over `nalgebra` that fix ordering and sign conventions.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 100_000;

/// Eigen-decomposition of a real symmetric matrix.
///
/// Eigenvalues are returned ascending. Column `j` of the vector matrix is the
/// eigenvector of eigenvalue `j`, with its largest-magnitude entry positive.
pub fn symmetric_eigen(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::Domain(format!("expected a non-empty square matrix, got {}x{}", n, h.ncols())));
    }
    let eig = SymmetricEigen::try_new(h.clone(), EIG_EPS, EIG_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge (dim {n}, frobenius norm {:.3e}, max |h_ij| {:.3e})",
            h.norm(),
            h.amax()
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = eig.eigenvectors.column(k);
        let pivot = src
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, v)| if v.abs() > best.1 + 1e-12 { (i, v.abs()) } else { best })
            .0;
        let sign = if src[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(src * sign));
    }
    Ok((values, vectors))
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::Domain(format!("expected a non-empty square matrix, got {}x{}", n, h.ncols())));
    }
    let mut values: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite eigenvalue (dim {n}, frobenius norm {:.3e})", h.norm())));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `exp(-i h t)` for a Hermitian `h`.
pub fn unitary_step(h: &CMatrix, t: f64) -> CMatrix {
    (h * C64::new(0.0, -t)).exp()
}

/// `exp(-i h t)` for a real symmetric `h`, built from its spectral decomposition.
pub fn real_unitary_step(h: &DMatrix<f64>, t: f64) -> Result<CMatrix> {
    let (values, vectors) = symmetric_eigen(h)?;
    let n = values.len();
    let v = vectors.map(|x| C64::new(x, 0.0));
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        values.iter().map(|&e| C64::from_polar(1.0, -e * t)),
    ));
    Ok(&v * phases * v.transpose())
}

/// `exp(-i h t)` for a complex Hermitian `h` via its eigen-decomposition.
pub fn hermitian_step(h: &CMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::from_polar(1.0, -eig.eigenvalues[j] * t);
    }
    scaled * v.adjoint()
}

/// Largest absolute deviation of `u† u` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

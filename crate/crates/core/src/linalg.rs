//! Hermitian eigen-decomposition helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// nalgebra's solver tests off-diagonal convergence relative to the diagonal,
/// so exactly singular blocks can iterate into underflow. Shifting the
/// spectrum away from zero keeps every diagonal entry well scaled.
fn shift_for(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0)
}

/// Eigen-decomposition of the Hermitian part of `m`.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> SymmetricEigen<Complex64, nalgebra::Dyn> {
    let n = m.nrows();
    let c = shift_for(m);
    let shifted = (m + m.adjoint()).scale(0.5) + DMatrix::<Complex64>::identity(n, n).scale(c);
    let mut eig = shifted.symmetric_eigen();
    eig.eigenvalues.apply(|l| *l -= c);
    eig
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> DVector<f64> {
    hermitian_eigen(m).eigenvalues
}

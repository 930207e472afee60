//! Independent reference constructions shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Annihilation operator on `dim` levels.
pub fn annihilation(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(
        dim,
        dim,
        |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 },
    )
}

/// `exp[(ζ/2)(a² − a†²)]|0⟩` by dense matrix exponential on `dim` levels.
pub fn squeeze_operator_vacuum(zeta: f64, dim: usize) -> DVector<f64> {
    let a = annihilation(dim);
    let a2 = &a * &a;
    let generator = (&a2 - a2.transpose()) * (0.5 * zeta);
    let u = generator.exp();
    u.column(0).into_owned()
}

/// `exp[ζ(ab − a†b†)]|00⟩` on `levels²` states, basis index `n₁·levels + n₂`.
pub fn two_mode_squeeze_vacuum(zeta: f64, levels: usize) -> DVector<f64> {
    let a = annihilation(levels);
    let id = DMatrix::<f64>::identity(levels, levels);
    let a1 = a.kronecker(&id);
    let a2 = id.kronecker(&a);
    let ab = &a1 * &a2;
    let generator = (&ab - ab.transpose()) * zeta;
    generator.exp().column(0).into_owned()
}

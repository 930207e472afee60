//! Zero-mean multimode Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so the vacuum
//! variance is exactly [`VACUUM_VARIANCE`] = 0.5. The covariance matrix is
//! ordered `(x₁, p₁, x₂, p₂, …)`; [`mode_offset`] is the only place that
//! knows about the ordering.
//!
//! Conventions shared with [`crate::fock`]:
//!
//! * a squeezer with `zeta > 0` and `angle = 0` squeezes `x`, i.e. the
//!   quadrature `θ = 0` carries variance `0.5·e^{−2ζ}`;
//! * a phase shift by `φ` maps the variance profile `V(θ)` to `V(θ − φ)`;
//! * the beam splitter sends `(X₁, X₂) → ((X₁ − X₂)/√2, (X₁ + X₂)/√2)`
//!   on the `x` and `p` subspaces alike.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::hermitian_eigenvalues;

/// Quadrature variance of the vacuum state.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Tag written into covariance JSON files.
pub const CONVENTION_TAG: &str = "vacuum=0.5";

const SYMMETRY_TOL: f64 = 1e-12;
const PHYSICALITY_TOL: f64 = 1e-10;

#[inline]
fn mode_offset(mode: usize) -> usize {
    2 * mode
}

/// Parameters of an ideal single-mode squeezer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub zeta: f64,
    /// Orientation of the squeezed quadrature, in radians.
    pub angle: f64,
}

impl SqueezeParams {
    pub fn new(zeta: f64, angle: f64) -> Self {
        Self { zeta, angle }
    }
}

/// Pure-loss channel with transmissivity `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    eta: f64,
}

impl LossChannel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return invalid(format!("transmissivity {eta} outside [0, 1]"));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Which two-mode quadrature combination `(X₁ ± X₂)/√2` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    Sum,
    Difference,
}

impl Combination {
    fn sign(self) -> f64 {
        match self {
            Combination::Sum => 1.0,
            Combination::Difference => -1.0,
        }
    }
}

/// Zero-mean Gaussian state described by its covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return invalid("a Gaussian state needs at least one mode");
        }
        Ok(Self {
            n_modes,
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * VACUUM_VARIANCE,
        })
    }

    /// Wraps a covariance matrix after checking symmetry and the uncertainty
    /// principle `cov + (i/2)Ω ⪰ 0`.
    pub fn from_covariance(cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || cov.ncols() != dim {
            return invalid(format!(
                "covariance must be square with even dimension, got {}x{}",
                cov.nrows(),
                cov.ncols()
            ));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return invalid("covariance contains non-finite entries");
        }
        for i in 0..dim {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return invalid(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        let state = Self {
            n_modes: dim / 2,
            cov,
        };
        let margin = state.physicality_margin();
        if margin < -PHYSICALITY_TOL {
            return invalid(format!(
                "covariance violates the uncertainty principle (min eigenvalue {margin:e})"
            ));
        }
        Ok(state)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/2)Ω`.
    pub fn physicality_margin(&self) -> f64 {
        let omega = symplectic_form(self.n_modes);
        let dim = self.cov.nrows();
        let h = DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(self.cov[(i, j)], 0.5 * omega[(i, j)])
        });
        hermitian_eigenvalues(&h).min()
    }

    pub fn is_physical(&self) -> bool {
        self.physicality_margin() >= -PHYSICALITY_TOL
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return invalid(format!(
                "mode {mode} out of range for a {}-mode state",
                self.n_modes
            ));
        }
        Ok(())
    }

    fn congruence(&self, s: &DMatrix<f64>) -> Self {
        let cov = s * &self.cov * s.transpose();
        Self {
            n_modes: self.n_modes,
            cov: symmetrize(cov),
        }
    }

    pub fn squeeze(&self, mode: usize, params: SqueezeParams) -> Result<Self> {
        self.check_mode(mode)?;
        if !params.zeta.is_finite() || !params.angle.is_finite() {
            return invalid("squeezing parameters must be finite");
        }
        Ok(self.congruence(&squeeze_matrix(self.n_modes, mode, params)))
    }

    pub fn phase_shift(&self, mode: usize, phi: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !phi.is_finite() {
            return invalid("phase must be finite");
        }
        Ok(self.congruence(&phase_matrix(self.n_modes, mode, phi)))
    }

    pub fn beamsplit(&self, mode_a: usize, mode_b: usize) -> Result<Self> {
        self.check_mode(mode_a)?;
        self.check_mode(mode_b)?;
        if mode_a == mode_b {
            return invalid("beam splitter needs two distinct modes");
        }
        Ok(self.congruence(&beamsplitter_matrix(self.n_modes, mode_a, mode_b)))
    }

    /// Per-mode pure loss: the mode's block becomes `η·A + (1−η)/2·I` and its
    /// cross blocks are scaled by `√η`.
    pub fn loss(&self, mode: usize, channel: LossChannel) -> Result<Self> {
        self.check_mode(mode)?;
        let eta = channel.eta();
        let dim = self.cov.nrows();
        let o = mode_offset(mode);
        let mut scale = DMatrix::identity(dim, dim);
        scale[(o, o)] = eta.sqrt();
        scale[(o + 1, o + 1)] = eta.sqrt();
        let mut cov = &scale * &self.cov * &scale;
        cov[(o, o)] += (1.0 - eta) * VACUUM_VARIANCE;
        cov[(o + 1, o + 1)] += (1.0 - eta) * VACUUM_VARIANCE;
        Ok(Self {
            n_modes: self.n_modes,
            cov: symmetrize(cov),
        })
    }

    /// Variance of `X_θ = x·cosθ + p·sinθ` on one mode.
    pub fn quad_variance(&self, mode: usize, theta: f64) -> Result<f64> {
        self.check_mode(mode)?;
        let o = mode_offset(mode);
        let (s, c) = theta.sin_cos();
        let a = &self.cov;
        Ok(c * c * a[(o, o)] + 2.0 * c * s * a[(o, o + 1)] + s * s * a[(o + 1, o + 1)])
    }

    /// Covariance of `X_{θ₁}` on `mode_a` and `X_{θ₂}` on `mode_b`.
    pub fn quad_covariance(
        &self,
        mode_a: usize,
        theta_a: f64,
        mode_b: usize,
        theta_b: f64,
    ) -> Result<f64> {
        self.check_mode(mode_a)?;
        self.check_mode(mode_b)?;
        let (oa, ob) = (mode_offset(mode_a), mode_offset(mode_b));
        let (sa, ca) = theta_a.sin_cos();
        let (sb, cb) = theta_b.sin_cos();
        let a = &self.cov;
        Ok(ca * cb * a[(oa, ob)]
            + ca * sb * a[(oa, ob + 1)]
            + sa * cb * a[(oa + 1, ob)]
            + sa * sb * a[(oa + 1, ob + 1)])
    }

    /// `Var[(X_{1,θ₁} ± X_{2,θ₂})/√2]` for modes 0 and 1.
    pub fn joint_quad_variance(
        &self,
        theta1: f64,
        theta2: f64,
        combination: Combination,
    ) -> Result<f64> {
        if self.n_modes < 2 {
            return invalid("joint quadrature variance needs at least two modes");
        }
        let v1 = self.quad_variance(0, theta1)?;
        let v2 = self.quad_variance(1, theta2)?;
        let c12 = self.quad_covariance(0, theta1, 1, theta2)?;
        Ok(0.5 * (v1 + v2 + 2.0 * combination.sign() * c12))
    }

    /// Covariance submatrix of `(x₁, x₂)`.
    fn position_block(&self) -> Result<[[f64; 2]; 2]> {
        if self.n_modes != 2 {
            return invalid("joint position statistics need a two-mode state");
        }
        let a = &self.cov;
        Ok([[a[(0, 0)], a[(0, 2)]], [a[(2, 0)], a[(2, 2)]]])
    }

    /// Pearson correlation coefficient of the two position quadratures.
    pub fn position_correlation(&self) -> Result<f64> {
        let b = self.position_block()?;
        Ok(b[0][1] / (b[0][0] * b[1][1]).sqrt())
    }

    /// Bivariate density of `(x₁, x₂)` evaluated on `grid`.
    pub fn joint_position_pdf(&self, grid: &[(f64, f64)]) -> Result<Vec<f64>> {
        let b = self.position_block()?;
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        if !(det > 0.0 && b[0][0] > 0.0) {
            return Err(Error::Internal(format!(
                "position covariance is not positive definite (det {det:e})"
            )));
        }
        let norm = 1.0 / (2.0 * PI * det.sqrt());
        Ok(grid
            .iter()
            .map(|&(x1, x2)| {
                let q = (b[1][1] * x1 * x1 - 2.0 * b[0][1] * x1 * x2 + b[0][0] * x2 * x2) / det;
                norm * (-0.5 * q).exp()
            })
            .collect())
    }

    pub fn to_json(&self) -> CovarianceJson {
        CovarianceJson {
            n_modes: self.n_modes,
            convention: CONVENTION_TAG.to_string(),
            cov: self
                .cov
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }

    pub fn from_json(json: &CovarianceJson) -> Result<Self> {
        if json.convention != CONVENTION_TAG {
            return invalid(format!("unknown convention tag {:?}", json.convention));
        }
        let dim = 2 * json.n_modes;
        if json.cov.len() != dim || json.cov.iter().any(|r| r.len() != dim) {
            return invalid("covariance rows do not match n_modes");
        }
        Self::from_covariance(DMatrix::from_fn(dim, dim, |i, j| json.cov[i][j]))
    }
}

/// Serialized covariance matrix (row-major array of rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceJson {
    pub n_modes: usize,
    pub convention: String,
    pub cov: Vec<Vec<f64>>,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Block-diagonal symplectic form with blocks `[[0, 1], [−1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        let o = mode_offset(m);
        omega[(o, o + 1)] = 1.0;
        omega[(o + 1, o)] = -1.0;
    }
    omega
}

fn rotation(phi: f64) -> [[f64; 2]; 2] {
    let (s, c) = phi.sin_cos();
    [[c, -s], [s, c]]
}

fn embed_single(n_modes: usize, mode: usize, block: [[f64; 2]; 2]) -> DMatrix<f64> {
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    let o = mode_offset(mode);
    for i in 0..2 {
        for j in 0..2 {
            m[(o + i, o + j)] = block[i][j];
        }
    }
    m
}

/// `R(angle)·diag(e^{−ζ}, e^{ζ})·R(angle)ᵀ` on one mode.
pub fn squeeze_matrix(n_modes: usize, mode: usize, params: SqueezeParams) -> DMatrix<f64> {
    let r = rotation(params.angle);
    let d = [(-params.zeta).exp(), params.zeta.exp()];
    let mut block = [[0.0; 2]; 2];
    for (i, row) in block.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = r[i][0] * d[0] * r[j][0] + r[i][1] * d[1] * r[j][1];
        }
    }
    embed_single(n_modes, mode, block)
}

pub fn phase_matrix(n_modes: usize, mode: usize, phi: f64) -> DMatrix<f64> {
    embed_single(n_modes, mode, rotation(phi))
}

pub fn beamsplitter_matrix(n_modes: usize, mode_a: usize, mode_b: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    let (oa, ob) = (mode_offset(mode_a), mode_offset(mode_b));
    let h = FRAC_1_SQRT_2;
    for k in 0..2 {
        m[(oa + k, oa + k)] = h;
        m[(oa + k, ob + k)] = -h;
        m[(ob + k, oa + k)] = h;
        m[(ob + k, ob + k)] = h;
    }
    m
}

/// Closed-form variance of a squeezed vacuum after loss:
/// `(η/2)(cosh2ζ − cos2θ·sinh2ζ) + (1−η)/2`.
pub fn squeezed_variance(zeta: f64, eta: f64, theta: f64) -> f64 {
    let z2 = 2.0 * zeta;
    0.5 * eta * (z2.cosh() - (2.0 * theta).cos() * z2.sinh()) + 0.5 * (1.0 - eta)
}

/// Closed-form two-mode variance of the lossy EPR state as a function of
/// `θ₁ + θ₂`. The difference combination carries `+cos`, the sum `−cos`.
pub fn epr_variance(zeta: f64, eta: f64, theta_sum: f64, combination: Combination) -> f64 {
    let z2 = 2.0 * zeta;
    0.5 * eta * (z2.cosh() - combination.sign() * theta_sum.cos() * z2.sinh()) + 0.5 * (1.0 - eta)
}

/// Reduced single-mode (thermal) variance of the ideal lossy EPR state.
pub fn thermal_variance(zeta: f64, eta: f64) -> f64 {
    0.5 * eta * (2.0 * zeta).cosh() + 0.5 * (1.0 - eta)
}

/// Parameters of the squeeze → phase → interfere → lose pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub zeta: f64,
    /// Phase between the two squeezed vacua before interference.
    pub relative_phase: f64,
    pub eta: f64,
    /// Vacuum admixture into the second input ahead of the beam splitter
    /// (0 = perfect interference).
    pub mismatch: f64,
}

impl PipelineConfig {
    /// Ideal interference with the two squeezed quadratures orthogonal.
    pub fn ideal(zeta: f64, eta: f64) -> Self {
        Self {
            zeta,
            relative_phase: PI / 2.0,
            eta,
            mismatch: 0.0,
        }
    }
}

/// Builds the two-mode state: both modes squeezed along `x`, the second
/// rotated by `relative_phase` and blended with vacuum at transmissivity
/// `1 − mismatch`, then interfered and attenuated by `eta` on each mode.
///
/// With `mismatch = 0` and `relative_phase = π/2` the result is the lossy
/// two-mode squeezed vacuum.
pub fn epr_pipeline(config: &PipelineConfig) -> Result<GaussianState> {
    if !(0.0..=1.0).contains(&config.mismatch) {
        return invalid(format!("mismatch {} outside [0, 1]", config.mismatch));
    }
    let squeeze = SqueezeParams::new(config.zeta, 0.0);
    let detection = LossChannel::new(config.eta)?;
    GaussianState::vacuum(2)?
        .squeeze(0, squeeze)?
        .squeeze(1, squeeze)?
        .phase_shift(1, config.relative_phase)?
        .loss(1, LossChannel::new(1.0 - config.mismatch)?)?
        .beamsplit(0, 1)?
        .loss(0, detection)?
        .loss(1, detection)
}

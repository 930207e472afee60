//! Truncated Fock-basis density matrices for one or two modes.
//!
//! Two-mode basis states `|n₁ n₂⟩` are stored lexicographically, index
//! `n₁·(N+1) + n₂` for cutoff `N`. Squeezed states follow the Gaussian
//! module's conventions: `zeta > 0` squeezes `x`, and the Fock amplitudes are
//! real with alternating sign. For the two-mode squeezed vacuum this gives
//! `Σₙ (−tanh ζ)ⁿ |n n⟩ / cosh ζ`, the state produced by interfering an
//! `x`-squeezed and a `p`-squeezed vacuum on the beam splitter.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{epr_pipeline, GaussianState, LossChannel, PipelineConfig, SqueezeParams};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues};

/// Default photon-number cutoff per mode.
pub const DEFAULT_CUTOFF: usize = 5;

/// Default trace budget lost to truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;

/// Basis label written into density-matrix JSON files.
pub const BASIS_TAG: &str = "fock |n1 n2⟩ lexicographic";

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Density operator on `n_modes` modes truncated at `cutoff` photons per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct FockDensityMatrix {
    n_modes: usize,
    cutoff: usize,
    entries: DMatrix<Complex64>,
}

/// How much of a state was lost to the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub trace_deficit: f64,
    /// Largest diagonal population just beyond the cutoff.
    pub largest_discarded_population: f64,
}

fn basis_dim(n_modes: usize, cutoff: usize) -> usize {
    (cutoff + 1).pow(n_modes as u32)
}

fn check_shape(n_modes: usize, cutoff: usize) -> Result<()> {
    if !(1..=2).contains(&n_modes) {
        return invalid(format!("Fock states support 1 or 2 modes, got {n_modes}"));
    }
    if cutoff < 1 {
        return invalid("cutoff must be at least 1");
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl FockDensityMatrix {
    /// Wraps a matrix after checking its dimension. Physical validity is
    /// checked separately by [`FockDensityMatrix::validate`].
    pub fn from_entries(
        n_modes: usize,
        cutoff: usize,
        entries: DMatrix<Complex64>,
    ) -> Result<Self> {
        check_shape(n_modes, cutoff)?;
        let dim = basis_dim(n_modes, cutoff);
        if entries.nrows() != dim || entries.ncols() != dim {
            return invalid(format!(
                "expected a {dim}x{dim} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        Ok(Self {
            n_modes,
            cutoff,
            entries,
        })
    }

    /// `|ψ⟩⟨ψ|` for an amplitude vector in the lexicographic basis.
    pub fn from_pure(
        n_modes: usize,
        cutoff: usize,
        amplitudes: &DVector<Complex64>,
    ) -> Result<Self> {
        let entries = amplitudes * amplitudes.adjoint();
        Self::from_entries(n_modes, cutoff, entries)
    }

    /// `|n⟩⟨n|` (single mode) or `|n₁ n₂⟩⟨n₁ n₂|`.
    pub fn number_state(photons: &[usize], cutoff: usize) -> Result<Self> {
        check_shape(photons.len(), cutoff)?;
        if photons.iter().any(|&n| n > cutoff) {
            return invalid("photon number exceeds cutoff");
        }
        let dim = basis_dim(photons.len(), cutoff);
        let idx = photons.iter().fold(0, |acc, &n| acc * (cutoff + 1) + n);
        let mut entries = DMatrix::from_element(dim, dim, ZERO);
        entries[(idx, idx)] = Complex64::new(1.0, 0.0);
        Self::from_entries(photons.len(), cutoff, entries)
    }

    pub fn vacuum(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::number_state(&vec![0; n_modes], cutoff)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// Diagonal element for the given photon numbers.
    pub fn population(&self, photons: &[usize]) -> f64 {
        let idx = photons
            .iter()
            .fold(0, |acc, &n| acc * (self.cutoff + 1) + n);
        self.entries[(idx, idx)].re
    }

    /// Photon-number distribution of one mode, traced over the other.
    pub fn marginal_populations(&self, mode: usize) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        let n = self.cutoff + 1;
        let mut out = vec![0.0; n];
        for idx in 0..self.dim() {
            let photons = self.photons_of(idx);
            out[photons[mode]] += self.entries[(idx, idx)].re;
        }
        Ok(out)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries).min()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Checks Hermiticity, positivity and the trace budget.
    pub fn validate(&self, tail_tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return invalid(format!("density matrix not Hermitian ({herm:e})"));
        }
        let min = self.min_eigenvalue();
        if min < -1e-10 {
            return invalid(format!("density matrix has negative eigenvalue {min:e}"));
        }
        let tr = self.trace();
        if tr > 1.0 + 1e-10 || tr < 1.0 - tail_tol {
            return invalid(format!("trace {tr} outside [1 - {tail_tol}, 1]"));
        }
        Ok(())
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

    fn photons_of(&self, idx: usize) -> [usize; 2] {
        let n = self.cutoff + 1;
        if self.n_modes == 1 {
            [idx, 0]
        } else {
            [idx / n, idx % n]
        }
    }

    fn index_of(&self, photons: [usize; 2]) -> usize {
        if self.n_modes == 1 {
            photons[0]
        } else {
            photons[0] * (self.cutoff + 1) + photons[1]
        }
    }

    /// Phase-space rotation `e^{iφn̂}` on one mode; matches
    /// [`GaussianState::phase_shift`].
    pub fn phase_rotate(&self, mode: usize, phi: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let dim = self.dim();
        let entries = DMatrix::from_fn(dim, dim, |i, j| {
            let dn = self.photons_of(i)[mode] as f64 - self.photons_of(j)[mode] as f64;
            self.entries[(i, j)] * Complex64::from_polar(1.0, dn * phi)
        });
        Ok(Self {
            entries,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> DensityMatrixJson {
        DensityMatrixJson {
            n_modes: self.n_modes,
            cutoff: self.cutoff,
            entries: self
                .entries
                .row_iter()
                .flat_map(|r| r.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
                .collect(),
            basis: BASIS_TAG.to_string(),
        }
    }

    pub fn from_json(json: &DensityMatrixJson) -> Result<Self> {
        check_shape(json.n_modes, json.cutoff)?;
        let dim = basis_dim(json.n_modes, json.cutoff);
        if json.entries.len() != dim * dim {
            return invalid(format!(
                "expected {} entries, found {}",
                dim * dim,
                json.entries.len()
            ));
        }
        let entries = DMatrix::from_fn(dim, dim, |i, j| {
            let [re, im] = json.entries[i * dim + j];
            Complex64::new(re, im)
        });
        Self::from_entries(json.n_modes, json.cutoff, entries)
    }
}

/// Serialized density matrix: `entries` is row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub n_modes: usize,
    pub cutoff: usize,
    pub entries: Vec<[f64; 2]>,
    pub basis: String,
}

fn check_zeta(zeta: f64, cutoff: usize) -> Result<()> {
    if cutoff < 2 {
        return invalid(format!("cutoff must be at least 2, got {cutoff}"));
    }
    if !(zeta.is_finite() && zeta >= 0.0) {
        return invalid(format!(
            "squeezing parameter must be finite and non-negative, got {zeta}"
        ));
    }
    Ok(())
}

/// Fock amplitudes of the `x`-squeezed vacuum up to `cutoff`:
/// `c₂ₖ = √((2k)!)/(2ᵏ k!) · (−tanh ζ)ᵏ / √(cosh ζ)`.
pub fn squeezed_vacuum_amplitudes(zeta: f64, cutoff: usize) -> Vec<f64> {
    let t = -zeta.tanh();
    let mut amps = vec![0.0; cutoff + 1];
    let mut c = 1.0 / zeta.cosh().sqrt();
    let mut n = 0;
    while n <= cutoff {
        amps[n] = c;
        // c₂ₖ₊₂ / c₂ₖ = t·√((2k+1)(2k+2)) / (2(k+1))
        let k = (n / 2) as f64;
        c *= t * ((2.0 * k + 1.0) * (2.0 * k + 2.0)).sqrt() / (2.0 * (k + 1.0));
        n += 2;
    }
    amps
}

pub fn squeezed_vacuum_fock(zeta: f64, cutoff: usize) -> Result<FockDensityMatrix> {
    check_zeta(zeta, cutoff)?;
    let amps = squeezed_vacuum_amplitudes(zeta, cutoff);
    let psi = DVector::from_iterator(cutoff + 1, amps.into_iter().map(|a| Complex64::new(a, 0.0)));
    FockDensityMatrix::from_pure(1, cutoff, &psi)
}

/// Two-mode squeezed vacuum `Σₙ (−λ)ⁿ √(1−λ²) |n n⟩` with `λ = tanh ζ`.
pub fn tmsv_fock(zeta: f64, cutoff: usize) -> Result<FockDensityMatrix> {
    check_zeta(zeta, cutoff)?;
    let lambda = zeta.tanh();
    let norm = (1.0 - lambda * lambda).sqrt();
    let dim = (cutoff + 1) * (cutoff + 1);
    let mut psi = DVector::from_element(dim, ZERO);
    for n in 0..=cutoff {
        psi[n * (cutoff + 1) + n] = Complex64::new(norm * (-lambda).powi(n as i32), 0.0);
    }
    FockDensityMatrix::from_pure(2, cutoff, &psi)
}

/// Pure-loss channel on one mode via its binomial Kraus decomposition:
/// `⟨m|ρ'|n⟩ = Σₖ √(C(m+k,k)·C(n+k,k)) η^{(m+n)/2} (1−η)ᵏ ⟨m+k|ρ|n+k⟩`.
pub fn loss_fock(rho: &FockDensityMatrix, mode: usize, eta: f64) -> Result<FockDensityMatrix> {
    rho.check_mode(mode)?;
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("transmissivity {eta} outside [0, 1]"));
    }
    let n_max = rho.cutoff;
    // weights[m][k] = √C(m+k, k) · η^{m/2} (1−η)^{k/2}
    let weights: Vec<Vec<f64>> = (0..=n_max)
        .map(|m| {
            (0..=n_max - m)
                .map(|k| {
                    binomial(m + k, k).sqrt()
                        * eta.powf(0.5 * m as f64)
                        * (1.0 - eta).powf(0.5 * k as f64)
                })
                .collect()
        })
        .collect();
    let dim = rho.dim();
    let mut out = DMatrix::from_element(dim, dim, ZERO);
    for i in 0..dim {
        let pi = rho.photons_of(i);
        for j in 0..dim {
            let pj = rho.photons_of(j);
            let (m, n) = (pi[mode], pj[mode]);
            let mut acc = ZERO;
            for k in 0..=(n_max - m.max(n)) {
                let mut si = pi;
                let mut sj = pj;
                si[mode] += k;
                sj[mode] += k;
                let w = weights[m][k] * weights[n][k];
                acc += rho.entries[(rho.index_of(si), rho.index_of(sj))] * w;
            }
            out[(i, j)] = acc;
        }
    }
    Ok(FockDensityMatrix {
        entries: out,
        ..rho.clone()
    })
}

/// `Tr(ρ n̂_mode)`.
pub fn mean_photon(rho: &FockDensityMatrix, mode: usize) -> Result<f64> {
    Ok(rho
        .marginal_populations(mode)?
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum())
}

/// Square root of a positive semidefinite matrix. Eigenvalues at roundoff
/// level are set to zero rather than square-rooted into spurious weight.
fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = hermitian_eigen(m);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = m.nrows() as f64 * f64::EPSILON * top;
    let d = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|l| Complex64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0)),
    );
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` of the trace-normalized inputs,
/// clamped to `[0, 1]`. Evaluated as the squared nuclear norm of `√ρ·√σ`,
/// which avoids square-rooting roundoff in the eigenvalues of `√ρ σ √ρ`.
pub fn fidelity(rho: &FockDensityMatrix, sigma: &FockDensityMatrix) -> Result<f64> {
    if rho.n_modes != sigma.n_modes || rho.cutoff != sigma.cutoff {
        return invalid(format!(
            "fidelity needs matching shapes: ({}, {}) vs ({}, {})",
            rho.n_modes, rho.cutoff, sigma.n_modes, sigma.cutoff
        ));
    }
    let (tr_rho, tr_sigma) = (rho.trace(), sigma.trace());
    if !(tr_rho > 0.0 && tr_sigma > 0.0) {
        return invalid("fidelity needs states with positive trace");
    }
    let product =
        psd_sqrt(&rho.entries.unscale(tr_rho)) * psd_sqrt(&sigma.entries.unscale(tr_sigma));
    let nuclear: f64 = product.singular_values().iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// Quadrature covariance matrix `(x₁, p₁, x₂, p₂)` of a truncated state.
///
/// Same-mode second moments use the exact matrix elements of `x²`, `p²` and
/// `(xp + px)/2` rather than products of truncated ladder matrices, so the
/// only deviation from the untruncated state is the population beyond the
/// cutoff.
pub fn quadrature_covariance(rho: &FockDensityMatrix) -> DMatrix<f64> {
    let n = rho.cutoff + 1;
    let lower = |shift: usize, amp: fn(usize) -> f64| {
        DMatrix::from_fn(n, n, |i, j| {
            if j == i + shift {
                Complex64::new(amp(j), 0.0)
            } else {
                ZERO
            }
        })
    };
    let a = lower(1, |j| (j as f64).sqrt());
    let a2 = lower(2, |j| ((j * (j - 1)) as f64).sqrt());
    let num = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    });
    let eye = DMatrix::<Complex64>::identity(n, n);
    let embed = |op: &DMatrix<Complex64>, mode: usize| match (rho.n_modes, mode) {
        (1, _) => op.clone(),
        (_, 0) => op.kronecker(&eye),
        _ => eye.kronecker(op),
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let half = Complex64::new(0.5, 0.0);
    let i_half = Complex64::new(0.0, -0.5);
    let mut linear = Vec::new();
    let mut quadratic = Vec::new();
    for mode in 0..rho.n_modes {
        let (l, l2, nm) = (embed(&a, mode), embed(&a2, mode), embed(&num, mode));
        let id = DMatrix::<Complex64>::identity(l.nrows(), l.nrows());
        let (ld, l2d) = (l.adjoint(), l2.adjoint());
        linear.push((&l + &ld).scale(s));
        linear.push((&l - &ld) * Complex64::new(0.0, -s));
        let number_part = nm.scale(2.0) + &id;
        quadratic.push([
            (&l2 + &l2d + &number_part) * half,
            (&l2 - &l2d) * i_half,
            (-(&l2 + &l2d) + &number_part) * half,
        ]);
    }
    let expect = |op: &DMatrix<Complex64>| (&rho.entries * op).trace().re;
    let means: Vec<f64> = linear.iter().map(expect).collect();
    let d = linear.len();
    DMatrix::from_fn(d, d, |i, j| {
        let second = if i / 2 == j / 2 {
            let q = &quadratic[i / 2];
            expect(&q[i % 2 + j % 2])
        } else {
            expect(&(&linear[i] * &linear[j]))
        };
        second - means[i] * means[j]
    })
}

const FAMILY_TOL: f64 = 1e-9;

struct FamilyParams {
    zeta: f64,
    eta: f64,
    /// Squeezing orientation (one mode) or phase on the second mode (two modes).
    phase: f64,
}

/// Recovers `(ζ, η)` from the excess variance `s = η(cosh2ζ − 1)` and the
/// anisotropy `d = η·sinh2ζ`; `d/s = coth ζ`.
fn solve_zeta_eta(excess: f64, spread: f64) -> Result<(f64, f64)> {
    if spread <= FAMILY_TOL {
        if excess.abs() <= FAMILY_TOL {
            return Ok((0.0, 1.0));
        }
        return Err(Error::UnsupportedState(
            "phase-insensitive excess noise (thermal state) is not a lossy squeezed vacuum".into(),
        ));
    }
    if excess <= 0.0 || excess >= spread {
        return Err(Error::UnsupportedState(format!(
            "excess {excess:e} and anisotropy {spread:e} do not match a lossy squeezed vacuum"
        )));
    }
    let zeta = (excess / spread).atanh();
    let eta = spread / (2.0 * zeta).sinh();
    if eta > 1.0 + FAMILY_TOL {
        return Err(Error::UnsupportedState(format!(
            "implied transmissivity {eta} exceeds 1"
        )));
    }
    Ok((zeta, eta.min(1.0)))
}

fn identify_family(state: &GaussianState) -> Result<(FamilyParams, GaussianState)> {
    let c = state.cov();
    match state.n_modes() {
        1 => {
            let (a, b, d) = (c[(0, 0)], c[(0, 1)], c[(1, 1)]);
            let tr = a + d;
            let gap = ((a - d).powi(2) + 4.0 * b * b).sqrt();
            let (zeta, eta) = solve_zeta_eta(tr - 1.0, gap)?;
            let major = 0.5 * (2.0 * b).atan2(a - d);
            let angle = major + std::f64::consts::FRAC_PI_2;
            let model = GaussianState::vacuum(1)?
                .squeeze(0, SqueezeParams::new(zeta, angle))?
                .loss(0, LossChannel::new(eta)?)?;
            Ok((
                FamilyParams {
                    zeta,
                    eta,
                    phase: angle,
                },
                model,
            ))
        }
        2 => {
            let alpha = 0.25 * (c[(0, 0)] + c[(1, 1)] + c[(2, 2)] + c[(3, 3)]);
            let det_cross = c[(0, 2)] * c[(1, 3)] - c[(0, 3)] * c[(1, 2)];
            let g = (-det_cross).max(0.0).sqrt();
            let (zeta, eta) = solve_zeta_eta(2.0 * alpha - 1.0, 2.0 * g)?;
            let phase = if g > FAMILY_TOL {
                (-c[(0, 3)]).atan2(-c[(0, 2)])
            } else {
                0.0
            };
            let model = epr_pipeline(&PipelineConfig::ideal(zeta, eta))?.phase_shift(1, phase)?;
            Ok((FamilyParams { zeta, eta, phase }, model))
        }
        n => Err(Error::UnsupportedState(format!(
            "Fock conversion supports 1 or 2 modes, got {n}"
        ))),
    }
}

fn build_family(n_modes: usize, p: &FamilyParams, cutoff: usize) -> Result<FockDensityMatrix> {
    match n_modes {
        1 => {
            let rho = loss_fock(&squeezed_vacuum_fock(p.zeta, cutoff)?, 0, p.eta)?;
            rho.phase_rotate(0, p.phase)
        }
        _ => {
            let rho = tmsv_fock(p.zeta, cutoff)?;
            let rho = loss_fock(&loss_fock(&rho, 0, p.eta)?, 1, p.eta)?;
            rho.phase_rotate(1, p.phase)
        }
    }
}

/// Converts a lossy squeezed vacuum (one mode) or a lossy two-mode squeezed
/// vacuum with a phase on the second mode (two modes) into the Fock basis.
/// Other Gaussian states are rejected with [`Error::UnsupportedState`].
pub fn gaussian_to_fock(
    state: &GaussianState,
    cutoff: usize,
) -> Result<(FockDensityMatrix, TruncationReport)> {
    if cutoff < 2 {
        return invalid(format!("cutoff must be at least 2, got {cutoff}"));
    }
    let (params, model) = identify_family(state)?;
    let scale = state.cov().abs().max().max(1.0);
    let mismatch = (model.cov() - state.cov()).abs().max();
    if mismatch > FAMILY_TOL * scale {
        return Err(Error::UnsupportedState(format!(
            "covariance differs from the nearest lossy squeezed vacuum by {mismatch:e}"
        )));
    }
    let rho = build_family(state.n_modes(), &params, cutoff)?;

    let extended = build_family(state.n_modes(), &params, cutoff + 8)?;
    let largest_discarded_population = (0..extended.dim())
        .filter(|&i| {
            extended
                .photons_of(i)
                .iter()
                .take(state.n_modes())
                .any(|&n| n > cutoff)
        })
        .map(|i| extended.entries[(i, i)].re)
        .fold(0.0, f64::max);
    let report = TruncationReport {
        trace_deficit: (1.0 - rho.trace()).max(0.0),
        largest_discarded_population,
    };
    Ok((rho, report))
}

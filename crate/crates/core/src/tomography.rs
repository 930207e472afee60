//! Iterative maximum-likelihood reconstruction of one- and two-mode density
//! matrices from homodyne records.
//!
//! Each record `(θ, x)` defines the projector `|θ,x⟩⟨θ,x|` with overlaps
//! `⟨n|θ,x⟩ = e^{inθ} ψₙ(x)` (tensor products for two modes). The estimate
//! is updated by `ρ ← N[R ρ R]` with `R = (1/M) Σⱼ Πⱼ / Tr(ρΠⱼ)`. When a step
//! lowers the log-likelihood it is retried with the diluted operator
//! `(1−d)·I + d·R`, halving `d` until the likelihood does not decrease.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::FockDensityMatrix;
use crate::homodyne::QuadratureDataset;

/// Records per reduction chunk. Partial sums are combined in chunk order, so
/// serial and parallel runs give identical bits.
const CHUNK: usize = 4096;

/// Smallest admissible `Tr(ρΠⱼ)`.
const MIN_PROBABILITY: f64 = 1e-300;

/// Cramér's bound on normalized Hermite functions: `|ψₙ(x)| ≤ K·π^{−1/4}`.
pub const CRAMER_BOUND: f64 = 1.086_435 * 0.751_125_544_464_942_5;

/// Dilution below which a non-improving step counts as convergence.
const MIN_DILUTION: f64 = 1e-6;

/// Harmonic-oscillator eigenfunction `ψₙ(x)` for vacuum variance 0.5.
pub fn quad_wavefunction(n: usize, x: f64) -> f64 {
    wavefunctions(x, n)[n]
}

/// `ψ₀(x) … ψ_{n_max}(x)` by the upward recurrence
/// `ψ_{n+1} = (√2·x·ψₙ − √n·ψ_{n−1}) / √(n+1)`.
pub fn wavefunctions(x: f64, n_max: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n_max + 1);
    psi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n_max >= 1 {
        psi.push(std::f64::consts::SQRT_2 * x * psi[0]);
    }
    for n in 1..n_max {
        let next = (std::f64::consts::SQRT_2 * x * psi[n] - (n as f64).sqrt() * psi[n - 1])
            / ((n + 1) as f64).sqrt();
        psi.push(next);
    }
    psi
}

/// `⟨n|θ,x⟩ = e^{inθ} ψₙ(x)` for `n = 0 … cutoff`.
pub fn projector_overlaps(theta: f64, x: f64, cutoff: usize) -> Result<Vec<Complex64>> {
    if cutoff < 2 {
        return invalid(format!("cutoff must be at least 2, got {cutoff}"));
    }
    Ok(overlaps(theta, x, cutoff))
}

fn overlaps(theta: f64, x: f64, cutoff: usize) -> Vec<Complex64> {
    wavefunctions(x, cutoff)
        .into_iter()
        .enumerate()
        .map(|(n, psi)| Complex64::from_polar(psi, n as f64 * theta))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    pub cutoff: usize,
    pub max_iterations: usize,
    /// Relative log-likelihood change that ends the iteration.
    pub stop_tol: f64,
    /// Initial weight `d` of `R` in `(1−d)·I + d·R`; 1 is undiluted.
    pub dilution: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            cutoff: 4,
            max_iterations: 2000,
            stop_tol: 1e-8,
            dilution: 1.0,
        }
    }
}

impl TomographyConfig {
    fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return invalid(format!("cutoff must be at least 2, got {}", self.cutoff));
        }
        if !(self.stop_tol > 0.0) {
            return invalid("stop_tol must be positive");
        }
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return invalid(format!("dilution {} outside (0, 1]", self.dilution));
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be at least 1");
        }
        Ok(())
    }
}

/// Reduction order for the per-iteration sums over records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    /// Reference mode.
    Serial,
    #[default]
    Parallel,
}

/// Overlap vectors of every record, stored row-major (`len × dim`).
///
/// Memory is `M·(N+1)^{modes}` complex numbers.
#[derive(Clone, Debug)]
pub struct ProjectorCache {
    n_modes: usize,
    cutoff: usize,
    dim: usize,
    vectors: Vec<Complex64>,
    max_overlap: f64,
}

impl ProjectorCache {
    pub fn new(data: &QuadratureDataset, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return invalid(format!("cutoff must be at least 2, got {cutoff}"));
        }
        let n_modes = data.n_modes();
        let n = cutoff + 1;
        let dim = n.pow(n_modes as u32);
        let mut vectors = Vec::with_capacity(data.len() * dim);
        let mut max_overlap: f64 = 0.0;
        let peak = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for r in data.records() {
            let v1 = overlaps(r.theta[0], r.x[0], cutoff);
            max_overlap = max_overlap.max(peak(&v1));
            if n_modes == 1 {
                vectors.extend_from_slice(&v1);
            } else {
                let v2 = overlaps(r.theta[1], r.x[1], cutoff);
                max_overlap = max_overlap.max(peak(&v2));
                for a in &v1 {
                    for b in &v2 {
                        vectors.push(a * b);
                    }
                }
            }
        }
        if max_overlap > CRAMER_BOUND {
            return Err(Error::Internal(format!(
                "overlap magnitude {max_overlap} exceeds the Hermite-function bound"
            )));
        }
        Ok(Self {
            n_modes,
            cutoff,
            dim,
            vectors,
            max_overlap,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn vector(&self, j: usize) -> &[Complex64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    /// Largest single-mode overlap magnitude; never exceeds [`CRAMER_BOUND`].
    pub fn max_single_mode_overlap(&self) -> f64 {
        self.max_overlap
    }
}

/// Convergence record of a reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub loglik: f64,
    /// Fewer than three distinct LO phases on some mode.
    pub phase_deficient: bool,
    #[serde(skip)]
    pub converged: bool,
    /// Log-likelihood of every accepted estimate, starting from the initial one.
    #[serde(skip)]
    pub loglik_history: Vec<f64>,
    /// Number of proposals rejected and retried with a smaller dilution.
    #[serde(skip)]
    pub diluted_steps: usize,
}

fn phase_deficient(data: &QuadratureDataset) -> bool {
    (0..data.n_modes()).any(|m| {
        let mut seen: Vec<u64> = Vec::with_capacity(3);
        for r in data.records() {
            let bits = r.theta[m].to_bits();
            if !seen.contains(&bits) {
                seen.push(bits);
                if seen.len() >= 3 {
                    return false;
                }
            }
        }
        true
    })
}

struct Pass {
    loglik: f64,
    /// Lower triangle of `Σⱼ Πⱼ / pⱼ`, row-major `dim × dim`.
    r: Vec<Complex64>,
}

fn chunk_pass(cache: &ProjectorCache, rho: &[Complex64], start: usize, end: usize) -> Result<Pass> {
    let d = cache.dim;
    let mut r = vec![Complex64::new(0.0, 0.0); d * d];
    let mut w = vec![Complex64::new(0.0, 0.0); d];
    let mut loglik = 0.0;
    for j in start..end {
        let v = cache.vector(j);
        for (i, wi) in w.iter_mut().enumerate() {
            let row = &rho[i * d..(i + 1) * d];
            *wi = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        let p: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        if !(p >= MIN_PROBABILITY) {
            return Err(Error::IllConditionedDatum {
                index: j,
                probability: p,
            });
        }
        loglik += p.ln();
        let inv = 1.0 / p;
        for i in 0..d {
            let vi = v[i] * inv;
            let row = &mut r[i * d..i * d + i + 1];
            for (slot, vk) in row.iter_mut().zip(v) {
                *slot += vi * vk.conj();
            }
        }
    }
    Ok(Pass { loglik, r })
}

fn full_pass(cache: &ProjectorCache, rho: &[Complex64], exec: Execution) -> Result<Pass> {
    let m = cache.len();
    let starts: Vec<usize> = (0..m).step_by(CHUNK).collect();
    let run = |&s: &usize| chunk_pass(cache, rho, s, (s + CHUNK).min(m));
    let partials: Vec<Result<Pass>> = match exec {
        Execution::Serial => starts.iter().map(run).collect(),
        Execution::Parallel => starts.par_iter().map(run).collect(),
    };
    let d = cache.dim;
    let mut total = Pass {
        loglik: 0.0,
        r: vec![Complex64::new(0.0, 0.0); d * d],
    };
    for p in partials {
        let p = p?;
        total.loglik += p.loglik;
        for (a, b) in total.r.iter_mut().zip(&p.r) {
            *a += b;
        }
    }
    let scale = 1.0 / m as f64;
    for i in 0..d {
        for k in 0..i {
            let v = total.r[i * d + k] * scale;
            total.r[i * d + k] = v;
            total.r[k * d + i] = v.conj();
        }
        total.r[i * d + i] *= scale;
    }
    Ok(total)
}

fn to_matrix(d: usize, flat: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(d, d, flat)
}

fn to_flat(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.transpose().iter().copied().collect()
}

/// `N[(1−d·)I + d·R) ρ ((1−d)I + d·R)]`, Hermitian and unit trace.
fn propose(rho: &DMatrix<Complex64>, r: &DMatrix<Complex64>, dilution: f64) -> DMatrix<Complex64> {
    let d = rho.nrows();
    let step = DMatrix::<Complex64>::identity(d, d).scale(1.0 - dilution) + r.scale(dilution);
    let next = &step * rho * &step;
    let next = (&next + next.adjoint()).scale(0.5);
    let tr = next.trace().re;
    next.unscale(tr)
}

/// Runs the reconstruction with the parallel reduction.
pub fn reconstruct(
    data: &QuadratureDataset,
    config: &TomographyConfig,
) -> Result<(FockDensityMatrix, Diagnostics)> {
    reconstruct_with(data, config, Execution::Parallel)
}

pub fn reconstruct_with(
    data: &QuadratureDataset,
    config: &TomographyConfig,
    exec: Execution,
) -> Result<(FockDensityMatrix, Diagnostics)> {
    config.validate()?;
    if data.is_empty() {
        return invalid("cannot reconstruct from an empty dataset");
    }
    let cache = ProjectorCache::new(data, config.cutoff)?;
    let d = cache.dim();
    let mut rho = DMatrix::<Complex64>::identity(d, d).unscale(d as f64);
    let mut pass = full_pass(&cache, &to_flat(&rho), exec)?;
    let mut history = vec![pass.loglik];
    let mut diluted_steps = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let r = to_matrix(d, &pass.r);
        let mut dilution = config.dilution;
        let accepted = loop {
            let candidate = propose(&rho, &r, dilution);
            let next = full_pass(&cache, &to_flat(&candidate), exec)?;
            if next.loglik >= pass.loglik {
                break Some((candidate, next));
            }
            diluted_steps += 1;
            dilution *= 0.5;
            if dilution < MIN_DILUTION {
                break None;
            }
        };
        let Some((candidate, next)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        let gain = (next.loglik - pass.loglik) / pass.loglik.abs().max(f64::MIN_POSITIVE);
        rho = candidate;
        pass = next;
        history.push(pass.loglik);
        if gain < config.stop_tol {
            converged = true;
            break;
        }
    }
    let estimate = FockDensityMatrix::from_entries(data.n_modes(), config.cutoff, rho)?;
    let diagnostics = Diagnostics {
        iterations,
        loglik: pass.loglik,
        phase_deficient: phase_deficient(data),
        converged,
        loglik_history: history,
        diluted_steps,
    };
    Ok((estimate, diagnostics))
}

//! Least-squares extraction of `(ζ, η, θ₀, rate)` from variance traces.
//!
//! The LO phase of bin `k` is modelled as `θ₀ + rate·iₖ` with `iₖ` the bin's
//! center sample index. Single-mode traces follow
//! `(η/2)(cosh2ζ − cos2θ·sinh2ζ) + (1−η)/2`; two-mode sum and difference
//! traces follow the same form with `cos2θ` replaced by `±cos θ`, where `θ`
//! stands for `θ₁ + θ₂`.
//!
//! Minimization is Levenberg–Marquardt with analytic derivatives. `η` and `ζ`
//! are optimized through `η = logistic(u)` and `ζ = softplus(v)`, so the
//! bounds `η ∈ [0, 1]`, `ζ ≥ 0` hold throughout.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::VACUUM_VARIANCE;
use crate::homodyne::VarianceTrace;

const MIN_BINS: usize = 8;
const MAX_ITERATIONS: usize = 500;
/// Cosine between the residual vector and any Jacobian column at convergence.
const GRADIENT_TOL: f64 = 1e-6;
const DEGENERATE_ZETA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub zeta: f64,
    pub eta: f64,
    /// Phase at sample index 0, in `[0, π)` for single-mode fits and
    /// `[0, 2π)` for two-mode fits.
    pub theta0: f64,
    /// LO phase advance per sample, non-negative.
    pub rate: f64,
    pub rss: f64,
    pub converged: bool,
    /// Squeezing too weak for `η` to be identifiable.
    pub degenerate: bool,
}

/// Which closed form a bin follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Single,
    Sum,
    Difference,
}

impl Branch {
    /// Multiplier of the phase inside the cosine.
    fn harmonic(self) -> f64 {
        match self {
            Branch::Single => 2.0,
            Branch::Sum | Branch::Difference => 1.0,
        }
    }

    /// Sign in front of the `cos·sinh2ζ` term, negated.
    fn sign(self) -> f64 {
        match self {
            Branch::Single | Branch::Sum => 1.0,
            Branch::Difference => -1.0,
        }
    }
}

/// Model variance for one bin.
pub fn model_variance(
    branch: Branch,
    zeta: f64,
    eta: f64,
    theta0: f64,
    rate: f64,
    index: f64,
) -> f64 {
    let phase = branch.harmonic() * (theta0 + rate * index);
    let z2 = 2.0 * zeta;
    0.5 * eta * (z2.cosh() - branch.sign() * phase.cos() * z2.sinh()) + 0.5 * (1.0 - eta)
}

/// `−10·log₁₀(V / 0.5)`: positive below vacuum noise.
pub fn squeezing_db(variance: f64) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return invalid(format!("variance must be positive, got {variance}"));
    }
    Ok(-10.0 * (variance / VACUUM_VARIANCE).log10())
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

fn inverse_softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp_m1().ln()
    }
}

struct Outcome {
    params: [f64; 4],
    converged: bool,
}

/// Generic 4-parameter Levenberg–Marquardt. `eval` fills residuals and
/// Jacobian rows for the given parameters. A residual norm at or below
/// `floor` counts as an exact fit.
fn levenberg_marquardt<F>(start: [f64; 4], n: usize, floor: f64, mut eval: F) -> Outcome
where
    F: FnMut(&[f64; 4], &mut [f64], &mut [[f64; 4]]),
{
    let mut p = start;
    let mut r = vec![0.0; n];
    let mut jac = vec![[0.0; 4]; n];
    eval(&p, &mut r, &mut jac);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut trial_r = vec![0.0; n];
    let mut trial_j = vec![[0.0; 4]; n];

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut g = Vector4::<f64>::zeros();
        for (row, res) in jac.iter().zip(&r) {
            for a in 0..4 {
                g[a] += row[a] * res;
                for b in 0..4 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        let col_norms: Vec<f64> = (0..4).map(|a| jtj[(a, a)].sqrt()).collect();
        let res_norm = cost.sqrt();
        let gradient_small = res_norm <= floor
            || (0..4).all(|a| {
                col_norms[a] == 0.0 || g[a].abs() <= GRADIENT_TOL * col_norms[a] * res_norm
            });
        if gradient_small {
            return Outcome {
                params: p,
                converged: true,
            };
        }

        let mut improved = false;
        while lambda < 1e16 {
            let mut lhs = jtj;
            for a in 0..4 {
                lhs[(a, a)] += lambda * jtj[(a, a)].max(1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ];
            eval(&trial, &mut trial_r, &mut trial_j);
            let trial_cost: f64 = trial_r.iter().map(|v| v * v).sum();
            if trial_cost.is_finite() && trial_cost <= cost {
                let small_step =
                    step.norm() <= 1e-14 * (1.0 + p.iter().map(|v| v * v).sum::<f64>().sqrt());
                let flat = cost - trial_cost <= 1e-15 * cost;
                p = trial;
                cost = trial_cost;
                std::mem::swap(&mut r, &mut trial_r);
                std::mem::swap(&mut jac, &mut trial_j);
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                if small_step && flat {
                    return Outcome {
                        params: p,
                        converged: gradient_converged(&r, &jac, cost, floor),
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Outcome {
                params: p,
                converged: gradient_converged(&r, &jac, cost, floor),
            };
        }
    }
    Outcome {
        params: p,
        converged: gradient_converged(&r, &jac, cost, floor),
    }
}

fn gradient_converged(r: &[f64], jac: &[[f64; 4]], cost: f64, floor: f64) -> bool {
    let res_norm = cost.sqrt();
    if res_norm <= floor {
        return true;
    }
    (0..4).all(|a| {
        let g: f64 = jac.iter().zip(r).map(|(row, res)| row[a] * res).sum();
        let norm: f64 = jac.iter().map(|row| row[a] * row[a]).sum::<f64>().sqrt();
        norm == 0.0 || g.abs() <= GRADIENT_TOL * 10.0 * norm * res_norm
    })
}

/// Index normalization `t = (i − center)/half_span`, so `t ∈ [−1, 1]`.
#[derive(Clone, Copy)]
struct Axis {
    center: f64,
    half_span: f64,
}

impl Axis {
    fn new(index: &[f64]) -> Self {
        let lo = index.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = index.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let half_span = 0.5 * (hi - lo);
        Self {
            center: 0.5 * (hi + lo),
            half_span: if half_span > 0.0 { half_span } else { 1.0 },
        }
    }

    fn t(&self, i: f64) -> f64 {
        (i - self.center) / self.half_span
    }
}

/// Least-squares harmonic `y ≈ offset + c·cos Ωt + s·sin Ωt` at fixed `Ω`.
#[derive(Clone, Copy)]
struct Harmonic {
    omega: f64,
    offset: f64,
    c: f64,
    s: f64,
    rss: f64,
}

fn harmonic_at(t: &[f64], y: &[f64], omega: f64) -> Harmonic {
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&tk, &yk) in t.iter().zip(y) {
        let (sin, cos) = (omega * tk).sin_cos();
        let row = Vector3::new(1.0, cos, sin);
        normal += row * row.transpose();
        rhs += row * yk;
    }
    let coef = normal
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| Vector3::new(y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0));
    let rss = t
        .iter()
        .zip(y)
        .map(|(&tk, &yk)| {
            let (sin, cos) = (omega * tk).sin_cos();
            (coef[0] + coef[1] * cos + coef[2] * sin - yk).powi(2)
        })
        .sum();
    Harmonic {
        omega,
        offset: coef[0],
        c: coef[1],
        s: coef[2],
        rss,
    }
}

/// Best single harmonic over `Ω ≥ omega_min`: a grid scan of the residual
/// followed by golden-section refinement around the best grid point.
fn harmonic_scan(t: &[f64], y: &[f64], omega_min: f64) -> Harmonic {
    let k = t.len().max(2);
    let omega_max = PI * (k - 1) as f64 / 2.0;
    let step = PI / 16.0;
    let mut best = harmonic_at(t, y, omega_min);
    let mut omega = omega_min + step;
    while omega <= omega_max {
        let h = harmonic_at(t, y, omega);
        if h.rss < best.rss {
            best = h;
        }
        omega += step;
    }
    let (mut a, mut b) = ((best.omega - step).max(0.5 * omega_min), best.omega + step);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - golden * (b - a);
        let d = a + golden * (b - a);
        if harmonic_at(t, y, c).rss < harmonic_at(t, y, d).rss {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = harmonic_at(t, y, 0.5 * (a + b));
    if refined.rss <= best.rss {
        refined
    } else {
        best
    }
}

/// `(ζ, η)` from the offset `A` and amplitude `B` of `A − B·cos(·)`.
fn initial_zeta_eta(offset: f64, amplitude: f64) -> (f64, f64) {
    let excess = 2.0 * offset - 1.0;
    let spread = 2.0 * amplitude;
    if spread <= 1e-12 {
        return (0.1 * DEGENERATE_ZETA, 0.5);
    }
    let ratio = (excess / spread).clamp(1e-3, 0.999);
    let zeta = ratio.atanh();
    // Away from the bounds, where the logistic map would flatten the gradient.
    let eta = (spread / (2.0 * zeta).sinh()).clamp(0.02, 0.98);
    (zeta, eta)
}

struct Bin {
    branch: Branch,
    t: f64,
    value: f64,
}

fn fit_bins(
    bins: &[Bin],
    axis: Axis,
    omega: f64,
    phi0: f64,
    offset: f64,
    amplitude: f64,
) -> FitResult {
    let harmonic = bins[0].branch.harmonic();
    let (zeta0, eta0) = initial_zeta_eta(offset, amplitude);
    // harmonic·(θ₀' + r'·t) = Ω·t + φ₀
    let start = [
        logit(eta0),
        inverse_softplus(zeta0),
        phi0 / harmonic,
        omega / harmonic,
    ];
    let floor = 1e-13 * bins.iter().map(|b| b.value * b.value).sum::<f64>().sqrt();
    let outcome = levenberg_marquardt(start, bins.len(), floor, |p, r, jac| {
        let eta = logistic(p[0]);
        let zeta = softplus(p[1]);
        let deta = eta * (1.0 - eta);
        let dzeta = logistic(p[1]);
        let (ch, sh) = ((2.0 * zeta).cosh(), (2.0 * zeta).sinh());
        for (k, b) in bins.iter().enumerate() {
            let m = b.branch.harmonic();
            let s = b.branch.sign();
            let phase = m * (p[2] + p[3] * b.t);
            let (sin, cos) = phase.sin_cos();
            let model = 0.5 * eta * (ch - s * cos * sh) + 0.5 * (1.0 - eta);
            r[k] = model - b.value;
            let dphase = 0.5 * eta * s * sin * sh * m;
            jac[k] = [
                0.5 * (ch - s * cos * sh - 1.0) * deta,
                eta * (sh - s * cos * ch) * dzeta,
                dphase,
                dphase * b.t,
            ];
        }
    });
    let p = outcome.params;
    let eta = logistic(p[0]);
    let zeta = softplus(p[1]);
    let mut rate = p[3] / axis.half_span;
    let mut theta0 = p[2] - rate * axis.center;
    if rate < 0.0 {
        rate = -rate;
        theta0 = -theta0;
    }
    let period = TAU / harmonic;
    theta0 = theta0.rem_euclid(period);
    let degenerate = zeta < DEGENERATE_ZETA;
    let rss = bins
        .iter()
        .map(|b| {
            let i = b.t * axis.half_span + axis.center;
            (model_variance(b.branch, zeta, eta, theta0, rate, i) - b.value).powi(2)
        })
        .sum();
    FitResult {
        zeta,
        eta,
        theta0,
        rate,
        rss,
        converged: outcome.converged && !degenerate,
        degenerate,
    }
}

fn check_bins(trace: &VarianceTrace) -> Result<()> {
    if trace.len() < MIN_BINS {
        return Err(Error::IllPosedFit(format!(
            "need at least {MIN_BINS} bins, got {}",
            trace.len()
        )));
    }
    Ok(())
}

/// Fits the single-mode model to a trace whose LO phase sweeps at least half
/// a turn (one full period of `2θ`).
pub fn fit_single(trace: &VarianceTrace) -> Result<FitResult> {
    check_bins(trace)?;
    let extent = (0..trace.n_modes())
        .map(|m| trace.phase_extent(|b| b.theta_center[m]))
        .fold(0.0, f64::max);
    if extent < PI * (1.0 - 1e-9) {
        return Err(Error::IllPosedFit(format!(
            "LO phase covers {extent:.3} rad; a single-mode fit needs at least π"
        )));
    }
    let index = trace.center_indices();
    let axis = Axis::new(&index);
    let values = trace.variances();
    let t: Vec<f64> = index.iter().map(|&i| axis.t(i)).collect();
    // A full turn of 2θ over t ∈ [−1, 1] is Ω = π.
    let h = harmonic_scan(&t, &values, 0.5 * PI);
    // V − A = −B·cos(Ωt + φ₀) = −B·cos φ₀·cos Ωt + B·sin φ₀·sin Ωt
    let (offset, amplitude, phi0, omega) = (h.offset, h.c.hypot(h.s), h.s.atan2(-h.c), h.omega);
    let bins: Vec<Bin> = t
        .iter()
        .zip(&values)
        .map(|(&t, &value)| Bin {
            branch: Branch::Single,
            t,
            value,
        })
        .collect();
    Ok(fit_bins(&bins, axis, omega, phi0, offset, amplitude))
}

/// Joint fit of sum and difference traces recorded over the same bins.
pub fn fit_epr(trace_sum: &VarianceTrace, trace_diff: &VarianceTrace) -> Result<FitResult> {
    if trace_sum.len() != trace_diff.len()
        || trace_sum
            .bins()
            .iter()
            .zip(trace_diff.bins())
            .any(|(a, b)| a.center_index != b.center_index)
    {
        return invalid("sum and difference traces must share the same bins");
    }
    check_bins(trace_sum)?;
    let extent = trace_sum.phase_extent(|b| b.theta_center[0] + b.theta_center[1]);
    if extent < TAU * (1.0 - 1e-9) {
        return Err(Error::IllPosedFit(format!(
            "phase sum covers {extent:.3} rad; a two-mode fit needs at least 2π"
        )));
    }
    let index = trace_sum.center_indices();
    let axis = Axis::new(&index);
    let sum = trace_sum.variances();
    let diff = trace_diff.variances();
    let k = sum.len() as f64;
    let offset = (sum.iter().sum::<f64>() + diff.iter().sum::<f64>()) / (2.0 * k);
    let t: Vec<f64> = index.iter().map(|&i| axis.t(i)).collect();
    // (V₋ − V₊)/2 = B·cos(Ωt + φ₀)
    let half_gap: Vec<f64> = diff.iter().zip(&sum).map(|(d, s)| 0.5 * (d - s)).collect();
    let h = harmonic_scan(&t, &half_gap, 0.5 * PI);
    let (amplitude, phi0, omega) = (h.c.hypot(h.s), (-h.s).atan2(h.c), h.omega);
    let bins: Vec<Bin> = t
        .iter()
        .zip(&sum)
        .map(|(&t, &value)| Bin {
            branch: Branch::Sum,
            t,
            value,
        })
        .chain(t.iter().zip(&diff).map(|(&t, &value)| Bin {
            branch: Branch::Difference,
            t,
            value,
        }))
        .collect();
    Ok(fit_bins(&bins, axis, omega, phi0, offset, amplitude))
}

/// `y ≈ offset + amplitude·cos(omega·x + phase)` with `amplitude ≥ 0`,
/// `omega ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub rss: f64,
}

/// Free sinusoid fit; `x` must span at least one period of the signal.
pub fn fit_sinusoid(x: &[f64], y: &[f64]) -> Result<SinusoidFit> {
    if x.len() != y.len() {
        return invalid("x and y lengths differ");
    }
    if x.len() < MIN_BINS {
        return Err(Error::IllPosedFit(format!(
            "need at least {MIN_BINS} points, got {}",
            x.len()
        )));
    }
    let axis = Axis::new(x);
    let t: Vec<f64> = x.iter().map(|&v| axis.t(v)).collect();
    let h = harmonic_scan(&t, y, 0.5 * PI);
    let start = [h.offset, h.c.hypot(h.s), h.omega, (-h.s).atan2(h.c)];
    let floor = 1e-13 * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let outcome = levenberg_marquardt(start, y.len(), floor, |p, r, jac| {
        for (k, (&tk, &yk)) in t.iter().zip(y).enumerate() {
            let (sin, cos) = (p[2] * tk + p[3]).sin_cos();
            r[k] = p[0] + p[1] * cos - yk;
            jac[k] = [1.0, cos, -p[1] * sin * tk, -p[1] * sin];
        }
    });
    let [c, mut a, w, mut phi] = outcome.params;
    if a < 0.0 {
        a = -a;
        phi += PI;
    }
    let mut omega = w / axis.half_span;
    phi -= omega * axis.center;
    if omega < 0.0 {
        omega = -omega;
        phi = -phi;
    }
    let phase = phi.rem_euclid(TAU);
    let rss = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (c + a * (omega * xi + phase).cos() - yi).powi(2))
        .sum();
    Ok(SinusoidFit {
        offset: c,
        amplitude: a,
        omega,
        phase,
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::VarianceBin;

    fn synthetic(
        branch: Branch,
        zeta: f64,
        eta: f64,
        theta0: f64,
        rate: f64,
        k: usize,
        window: f64,
    ) -> VarianceTrace {
        let bins = (0..k)
            .map(|b| {
                let i = (b as f64 + 0.5) * window - 0.5;
                let theta = theta0 + rate * i;
                VarianceBin {
                    center_index: i,
                    theta_center: [theta, 0.0],
                    variance: model_variance(branch, zeta, eta, theta0, rate, i),
                    count: window as usize,
                }
            })
            .collect();
        VarianceTrace::new(if branch == Branch::Single { 1 } else { 2 }, bins).unwrap()
    }

    #[test]
    fn db_conversion() {
        assert_eq!(squeezing_db(0.5).unwrap(), 0.0);
        assert!((squeezing_db(0.25).unwrap() - 3.0103).abs() < 1e-4);
        assert!((squeezing_db(0.36).unwrap() - 1.4267).abs() < 1e-4);
        assert!(squeezing_db(0.0).is_err());
        assert!(squeezing_db(-1.0).is_err());
    }

    #[test]
    fn noiseless_single_round_trip() {
        let rate = 3.0 * PI / (60.0 * 2000.0);
        let trace = synthetic(Branch::Single, 0.44, 0.52, 0.3, rate, 60, 2000.0);
        let fit = fit_single(&trace).unwrap();
        assert!((fit.zeta - 0.44).abs() < 1e-6, "{fit:?}");
        assert!((fit.eta - 0.52).abs() < 1e-6, "{fit:?}");
        assert!((fit.theta0 - 0.3).abs() < 1e-6, "{fit:?}");
        assert!((fit.rate - rate).abs() < 1e-9 * rate.max(1.0), "{fit:?}");
        assert!(fit.converged);
        assert!(!fit.degenerate);
    }

    #[test]
    fn noiseless_epr_round_trip_and_swap() {
        let rate = 4.0 * PI / (50.0 * 1000.0);
        let sum = synthetic(Branch::Sum, 0.44, 0.5, 1.0, rate, 50, 1000.0);
        let diff = synthetic(Branch::Difference, 0.44, 0.5, 1.0, rate, 50, 1000.0);
        let fit = fit_epr(&sum, &diff).unwrap();
        assert!((fit.zeta - 0.44).abs() < 1e-6, "{fit:?}");
        assert!((fit.eta - 0.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.theta0 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.converged);

        let swapped = fit_epr(&diff, &sum).unwrap();
        assert!((swapped.zeta - 0.44).abs() < 1e-6);
        assert!((swapped.eta - 0.5).abs() < 1e-6);
        let shift = (swapped.theta0 - fit.theta0).rem_euclid(TAU);
        assert!((shift - PI).abs() < 1e-6, "{shift}");
    }

    #[test]
    fn flat_trace_is_degenerate() {
        let rate = 2.0 * PI / (40.0 * 100.0);
        let trace = synthetic(Branch::Single, 0.0, 0.7, 0.0, rate, 40, 100.0);
        let fit = fit_single(&trace).unwrap();
        assert!(fit.degenerate);
        assert!(!fit.converged);
        assert!(fit.zeta < 1e-3);

        let sum = synthetic(Branch::Sum, 0.0, 0.7, 0.0, rate, 40, 100.0);
        let diff = synthetic(Branch::Difference, 0.0, 0.7, 0.0, rate, 40, 100.0);
        let fit = fit_epr(&sum, &diff).unwrap();
        assert!(fit.degenerate && !fit.converged);
    }

    #[test]
    fn coverage_and_binning_errors() {
        let short = synthetic(Branch::Single, 0.4, 0.5, 0.0, 1e-5, 20, 100.0);
        assert!(matches!(fit_single(&short), Err(Error::IllPosedFit(_))));
        let few = synthetic(Branch::Single, 0.4, 0.5, 0.0, 1.0, 5, 100.0);
        assert!(matches!(fit_single(&few), Err(Error::IllPosedFit(_))));
        let a = synthetic(Branch::Sum, 0.4, 0.5, 0.0, 0.01, 20, 100.0);
        let b = synthetic(Branch::Difference, 0.4, 0.5, 0.0, 0.01, 21, 100.0);
        assert!(matches!(fit_epr(&a, &b), Err(Error::InvalidArgument(_))));
        let c = synthetic(Branch::Difference, 0.4, 0.5, 0.0, 0.01, 20, 101.0);
        assert!(matches!(fit_epr(&a, &c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rss_matches_reported_parameters() {
        let rate = 3.0 * PI / 30_000.0;
        let mut trace = synthetic(Branch::Single, 0.6, 0.4, 0.2, rate, 30, 1000.0);
        let mut bins = trace.bins().to_vec();
        for (k, b) in bins.iter_mut().enumerate() {
            b.variance += 0.002 * ((k * 7919) % 13) as f64 / 13.0 - 0.001;
        }
        trace = VarianceTrace::new(1, bins).unwrap();
        let fit = fit_single(&trace).unwrap();
        let rss: f64 = trace
            .bins()
            .iter()
            .map(|b| {
                (model_variance(
                    Branch::Single,
                    fit.zeta,
                    fit.eta,
                    fit.theta0,
                    fit.rate,
                    b.center_index,
                ) - b.variance)
                    .powi(2)
            })
            .sum();
        assert!((rss - fit.rss).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn sinusoid_fit_recovers_frequency() {
        let x: Vec<f64> = (0..80).map(|k| k as f64 * 250.0 + 124.5).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| 0.6 - 0.25 * (3.1e-4 * v + 0.7).cos())
            .collect();
        let f = fit_sinusoid(&x, &y).unwrap();
        assert!((f.omega - 3.1e-4).abs() < 1e-12, "{f:?}");
        assert!((f.amplitude - 0.25).abs() < 1e-9);
        assert!((f.offset - 0.6).abs() < 1e-9);
        assert!(
            ((f.phase - (0.7 + PI)).rem_euclid(TAU))
                .min(TAU - (f.phase - (0.7 + PI)).rem_euclid(TAU))
                < 1e-8
        );
    }
}

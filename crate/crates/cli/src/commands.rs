use std::f64::consts::{PI, TAU};
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use eprsim_core::fock::FockDensityMatrix;
use eprsim_core::gaussian::squeezed_variance;
use eprsim_core::homodyne::{read_dataset_csv, read_trace_csv, write_dataset_csv, write_trace_csv};
use eprsim_core::tomography::{reconstruct_with, Diagnostics, Execution, TomographyConfig};
use eprsim_core::{
    binned_variance, epr_pipeline, fidelity, fit_epr, fit_single, fit_sinusoid, gaussian_to_fock,
    mean_photon, sample, squeezing_db, Error, FitResult, GaussianState, LossChannel, PhaseSchedule,
    PipelineConfig, QuadratureDataset, SqueezeParams, SweepConfig, TraceTarget, VarianceTrace,
};
use serde::Serialize;

use crate::manifest::{Recipe, RunManifest};
use crate::{EprSweep, Fit, SingleSweep, Tomography};

const MIN_BINS: usize = 8;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) => 2,
                Error::DataFormat { .. } | Error::Json(_) => 3,
                Error::IllConditionedDatum { .. }
                | Error::IllPosedFit(_)
                | Error::UnsupportedState(_)
                | Error::Internal(_) => 4,
                Error::Io(_) => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// A file to be written: name relative to the output directory and bytes.
struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

fn csv_artifact(
    name: String,
    write: impl FnOnce(&mut Vec<u8>) -> eprsim_core::Result<()>,
) -> Result<Artifact, CliError> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(Artifact { name, bytes })
}

fn json_artifact(name: String, value: &impl Serialize) -> Result<Artifact, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    Ok(Artifact { name, bytes })
}

/// Runs a recipe to completion in memory, then writes its artifacts and
/// manifest. Nothing touches the disk unless every step succeeded.
pub fn execute(recipe: &Recipe, out_dir: &Path) -> Result<(), CliError> {
    let stem = recipe.stem();
    let artifacts = match recipe {
        Recipe::SingleSweep(p) => single_sweep(p, stem)?,
        Recipe::EprSweep(p) => epr_sweep(p, stem)?,
        Recipe::Tomography(p) => tomography(p, stem)?,
        Recipe::Fit(p) => fit(p, stem)?,
    };
    let manifest = RunManifest::new(
        recipe.clone(),
        artifacts.iter().map(|a| a.name.clone()).collect(),
    );
    let manifest = json_artifact(RunManifest::file_name(recipe), &manifest)?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for a in artifacts.iter().chain(std::iter::once(&manifest)) {
        let path = out_dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn check_sampling(samples: usize, window: usize) -> Result<usize, CliError> {
    if window < 2 {
        return usage(format!("--window must be at least 2, got {window}"));
    }
    let bins = samples / window;
    if bins < MIN_BINS {
        return usage(format!(
            "{samples} samples at window {window} give {bins} bins; at least {MIN_BINS} are needed"
        ));
    }
    Ok(bins)
}

/// LO phase covered by the bin centers, extrapolated by half a bin at each
/// end (the quantity the fits check).
fn binned_extent(sweep: f64, samples: usize, window: usize, bins: usize) -> f64 {
    sweep.abs() * (bins * window) as f64 / samples as f64
}

fn check_finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        usage(format!("--{name} must be finite"))
    }
}

#[derive(Serialize)]
struct SingleSummary {
    fit: FitResult,
    /// Minimum and maximum of the fitted model curve.
    min_variance: f64,
    max_variance: f64,
    min_squeezing_db: f64,
}

impl SingleSummary {
    fn new(fit: FitResult) -> Result<Self, CliError> {
        let min_variance = squeezed_variance(fit.zeta, fit.eta, 0.0);
        Ok(Self {
            fit,
            min_variance,
            max_variance: squeezed_variance(fit.zeta, fit.eta, PI / 2.0),
            min_squeezing_db: squeezing_db(min_variance)?,
        })
    }
}

fn single_sweep(p: &SingleSweep, stem: &str) -> Result<Vec<Artifact>, CliError> {
    for (name, v) in [("zeta", p.zeta), ("theta0", p.theta0), ("sweep", p.sweep)] {
        check_finite(name, v)?;
    }
    if p.zeta < 0.0 {
        return usage("--zeta must be non-negative");
    }
    let channel = LossChannel::new(p.eta)?;
    let bins = check_sampling(p.samples, p.window)?;
    if binned_extent(p.sweep, p.samples, p.window, bins) < PI {
        return usage("--sweep must cover at least π of LO phase for the fit");
    }

    let state = GaussianState::vacuum(1)?
        .squeeze(0, SqueezeParams::new(p.zeta, 0.0))?
        .loss(0, channel)?;
    let data = sample(
        &state,
        &SweepConfig {
            mode_phases: vec![PhaseSchedule::Linear {
                theta0: p.theta0,
                rate: p.sweep / p.samples as f64,
            }],
            n_samples: p.samples,
            seed: p.seed,
        },
    )?;
    let trace = binned_variance(&data, p.window, TraceTarget::Mode1)?;
    let summary = SingleSummary::new(fit_single(&trace)?)?;

    let mut out = vec![
        csv_artifact(format!("{stem}_trace.csv"), |w| write_trace_csv(&trace, w))?,
        json_artifact(format!("{stem}_fit.json"), &summary)?,
    ];
    if p.write_dataset {
        out.push(dataset_artifact(stem, &data)?);
    }
    Ok(out)
}

fn dataset_artifact(stem: &str, data: &QuadratureDataset) -> Result<Artifact, CliError> {
    csv_artifact(format!("{stem}_dataset.csv"), |w| {
        write_dataset_csv(data, w)
    })
}

#[derive(Serialize)]
struct EprSummary {
    fit: FitResult,
    /// Minimum of the fitted difference-quadrature curve.
    difference_min: f64,
    difference_min_db: f64,
    /// Smallest binned difference variance (biased low by estimator noise).
    difference_min_sampled: Option<f64>,
}

impl EprSummary {
    fn new(fit: FitResult, diff: &VarianceTrace) -> Result<Self, CliError> {
        // The difference minimum has the same closed form as the squeezed
        // single-mode minimum.
        let difference_min = squeezed_variance(fit.zeta, fit.eta, 0.0);
        Ok(Self {
            fit,
            difference_min,
            difference_min_db: squeezing_db(difference_min)?,
            difference_min_sampled: diff.variances().into_iter().reduce(f64::min),
        })
    }
}

#[derive(Serialize)]
struct ModeSummary {
    mean_variance: f64,
    /// Peak-to-peak of a free sinusoid fitted to the trace.
    peak_to_peak: f64,
}

#[derive(Serialize)]
struct EprReport {
    #[serde(flatten)]
    two_mode: EprSummary,
    modes: [ModeSummary; 2],
}

fn mode_summary(trace: &VarianceTrace) -> Result<ModeSummary, CliError> {
    let v = trace.variances();
    let sinusoid = fit_sinusoid(&trace.center_indices(), &v)?;
    Ok(ModeSummary {
        mean_variance: v.iter().sum::<f64>() / v.len() as f64,
        peak_to_peak: 2.0 * sinusoid.amplitude,
    })
}

fn epr_sweep(p: &EprSweep, stem: &str) -> Result<Vec<Artifact>, CliError> {
    for (name, v) in [
        ("zeta", p.zeta),
        ("relative-phase", p.relative_phase),
        ("sweep", p.sweep),
        ("sweep2", p.sweep2),
    ] {
        check_finite(name, v)?;
    }
    if p.zeta < 0.0 {
        return usage("--zeta must be non-negative");
    }
    LossChannel::new(p.eta)?;
    let bins = check_sampling(p.samples, p.window)?;
    if binned_extent(p.sweep + p.sweep2, p.samples, p.window, bins) < TAU {
        return usage(
            "--sweep plus --sweep2 must cover at least 2π of summed LO phase for the fit",
        );
    }

    let state = epr_pipeline(&PipelineConfig {
        zeta: p.zeta,
        relative_phase: p.relative_phase,
        eta: p.eta,
        mismatch: p.mismatch,
    })?;
    let n = p.samples as f64;
    let data = sample(
        &state,
        &SweepConfig {
            mode_phases: vec![
                PhaseSchedule::Linear {
                    theta0: 0.0,
                    rate: p.sweep / n,
                },
                PhaseSchedule::Linear {
                    theta0: 0.0,
                    rate: p.sweep2 / n,
                },
            ],
            n_samples: p.samples,
            seed: p.seed,
        },
    )?;
    let targets = [
        ("mode1", TraceTarget::Mode1),
        ("mode2", TraceTarget::Mode2),
        ("sum", TraceTarget::Sum),
        ("difference", TraceTarget::Difference),
    ];
    let traces = targets
        .iter()
        .map(|&(_, t)| binned_variance(&data, p.window, t))
        .collect::<eprsim_core::Result<Vec<_>>>()?;
    let fit = fit_epr(&traces[2], &traces[3])?;
    let report = EprReport {
        two_mode: EprSummary::new(fit, &traces[3])?,
        modes: [mode_summary(&traces[0])?, mode_summary(&traces[1])?],
    };

    let mut out = Vec::new();
    for ((name, _), trace) in targets.iter().zip(&traces) {
        out.push(csv_artifact(format!("{stem}_{name}.csv"), |w| {
            write_trace_csv(trace, w)
        })?);
    }
    out.push(json_artifact(format!("{stem}_fit.json"), &report)?);
    if p.write_dataset {
        out.push(dataset_artifact(stem, &data)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct Reference {
    zeta: f64,
    eta: f64,
    fidelity: f64,
}

#[derive(Serialize)]
struct TomographyReport {
    diagnostics: Diagnostics,
    converged: bool,
    mean_photon: Vec<f64>,
    vacuum_population: f64,
    reference: Option<Reference>,
}

fn reference_state(
    n_modes: usize,
    zeta: f64,
    eta: f64,
    cutoff: usize,
) -> Result<FockDensityMatrix, CliError> {
    let state = if n_modes == 1 {
        GaussianState::vacuum(1)?
            .squeeze(0, SqueezeParams::new(zeta, 0.0))?
            .loss(0, LossChannel::new(eta)?)?
    } else {
        epr_pipeline(&PipelineConfig::ideal(zeta, eta))?
    };
    Ok(gaussian_to_fock(&state, cutoff)?.0)
}

fn tomography(p: &Tomography, stem: &str) -> Result<Vec<Artifact>, CliError> {
    let config = TomographyConfig {
        cutoff: p.cutoff,
        max_iterations: p.max_iterations,
        stop_tol: p.stop_tol,
        ..TomographyConfig::default()
    };
    if let (Some(z), Some(e)) = (p.reference_zeta, p.reference_eta) {
        if !(z >= 0.0 && z.is_finite()) {
            return usage("--reference-zeta must be non-negative");
        }
        LossChannel::new(e)?;
    }
    let file = File::open(&p.input).map_err(|e| CliError::io(&p.input, e))?;
    let data = read_dataset_csv(BufReader::new(file))?;
    let exec = if p.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let (rho, diagnostics) = reconstruct_with(&data, &config, exec)?;

    let reference = match (p.reference_zeta, p.reference_eta) {
        (Some(zeta), Some(eta)) => {
            let sigma = reference_state(data.n_modes(), zeta, eta, p.cutoff)?;
            Some(Reference {
                zeta,
                eta,
                fidelity: fidelity(&rho, &sigma)?,
            })
        }
        _ => None,
    };
    let report = TomographyReport {
        converged: diagnostics.converged,
        mean_photon: (0..data.n_modes())
            .map(|m| mean_photon(&rho, m))
            .collect::<eprsim_core::Result<_>>()?,
        vacuum_population: rho.population(&vec![0; data.n_modes()]),
        diagnostics,
        reference,
    };
    Ok(vec![
        json_artifact(format!("{stem}_rho.json"), &rho.to_json())?,
        json_artifact(format!("{stem}_report.json"), &report)?,
    ])
}

fn read_trace(path: &Path) -> Result<VarianceTrace, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_trace_csv(BufReader::new(file))?)
}

fn fit(p: &Fit, stem: &str) -> Result<Vec<Artifact>, CliError> {
    let artifact = match (&p.single, &p.epr) {
        (Some(path), None) => {
            let summary = SingleSummary::new(fit_single(&read_trace(path)?)?)?;
            json_artifact(format!("{stem}.json"), &summary)?
        }
        (None, Some(paths)) if paths.len() == 2 => {
            let sum = read_trace(&paths[0])?;
            let diff = read_trace(&paths[1])?;
            let summary = EprSummary::new(fit_epr(&sum, &diff)?, &diff)?;
            json_artifact(format!("{stem}.json"), &summary)?
        }
        _ => return usage("give exactly one of --single TRACE or --epr SUM DIFFERENCE"),
    };
    Ok(vec![artifact])
}

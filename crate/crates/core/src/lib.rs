//! Simulation toolkit for EPR-state synthesis from two single-mode squeezers.
//!
//! The forward model runs squeeze → phase → interfere → lose in the Gaussian
//! covariance picture ([`gaussian`]), maps states into a truncated Fock basis
//! ([`fock`]), samples homodyne data ([`homodyne`]), reconstructs density
//! matrices by iterative maximum likelihood ([`tomography`]) and fits
//! variance traces ([`fitting`]). [`optics`] holds the beam-geometry and
//! walk-off arithmetic.

pub mod error;
pub mod fitting;
pub mod fock;
pub mod gaussian;
pub mod homodyne;
mod linalg;
pub mod optics;
pub mod tomography;

pub use error::{Error, Result};
pub use fitting::{fit_epr, fit_single, fit_sinusoid, squeezing_db, FitResult, SinusoidFit};
pub use fock::{
    fidelity, gaussian_to_fock, loss_fock, mean_photon, squeezed_vacuum_fock, tmsv_fock,
    FockDensityMatrix, TruncationReport,
};
pub use gaussian::{
    epr_pipeline, Combination, GaussianState, LossChannel, PipelineConfig, SqueezeParams,
    VACUUM_VARIANCE,
};
pub use homodyne::{
    binned_variance, sample, PhaseSchedule, QuadratureDataset, QuadratureRecord, SweepConfig,
    TraceTarget, VarianceBin, VarianceTrace,
};
pub use optics::{
    beam_radius, compensation_length, rayleigh_range, walkoff_path, BeamParams, DesignRow,
    WalkoffParams,
};
pub use tomography::{reconstruct, Diagnostics, Execution, TomographyConfig};

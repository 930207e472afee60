//! Synthetic homodyne data under swept local-oscillator phases, and binned
//! variance traces.
//!
//! Samples come from ChaCha20 (`rand_chacha::ChaCha20Rng`, seeded with
//! `seed_from_u64`). Each record consumes two `u64` draws, turned into a pair
//! of standard normals by the Box–Muller transform, and then correlated with
//! the Cholesky factor of the 2×2 covariance of the rotated quadratures.
//! The stream is therefore reproducible bit for bit on every platform.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::io::{Read, Write};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::GaussianState;

/// Default number of samples per variance bin.
pub const DEFAULT_WINDOW: usize = 2000;

/// Local-oscillator phase of one mode as a function of the sample index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhaseSchedule {
    Fixed { theta: f64 },
    Linear { theta0: f64, rate: f64 },
}

impl PhaseSchedule {
    pub fn at(&self, index: usize) -> f64 {
        match *self {
            PhaseSchedule::Fixed { theta } => theta,
            PhaseSchedule::Linear { theta0, rate } => theta0 + rate * index as f64,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            PhaseSchedule::Fixed { theta } => theta.is_finite(),
            PhaseSchedule::Linear { theta0, rate } => theta0.is_finite() && rate.is_finite(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mode_phases: Vec<PhaseSchedule>,
    pub n_samples: usize,
    pub seed: u64,
}

/// One homodyne shot. For single-mode data the second slots are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureRecord {
    pub index: usize,
    pub theta: [f64; 2],
    pub x: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureDataset {
    n_modes: usize,
    records: Vec<QuadratureRecord>,
}

impl QuadratureDataset {
    pub fn new(n_modes: usize, records: Vec<QuadratureRecord>) -> Result<Self> {
        if !(1..=2).contains(&n_modes) {
            return invalid(format!("datasets hold 1 or 2 modes, got {n_modes}"));
        }
        if records
            .iter()
            .any(|r| !(r.x.iter().chain(&r.theta).all(|v| v.is_finite())))
        {
            return invalid("dataset contains non-finite values");
        }
        Ok(Self { n_modes, records })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn records(&self) -> &[QuadratureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

struct NormalPairs(ChaCha20Rng);

impl NormalPairs {
    fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Box–Muller on two 53-bit uniforms; `u1` lies in (0, 1].
    fn next_pair(&mut self) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.0.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.0.next_u64() >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

/// Draws `config.n_samples` homodyne records from `state`.
pub fn sample(state: &GaussianState, config: &SweepConfig) -> Result<QuadratureDataset> {
    let n_modes = state.n_modes();
    if config.mode_phases.len() != n_modes {
        return invalid(format!(
            "sweep configures {} modes but the state has {n_modes}",
            config.mode_phases.len()
        ));
    }
    if n_modes > 2 {
        return invalid("homodyne sampling supports 1 or 2 modes");
    }
    if config.n_samples == 0 {
        return invalid("n_samples must be at least 1");
    }
    if !config.mode_phases.iter().all(PhaseSchedule::is_finite) {
        return invalid("phase schedule must be finite");
    }
    let mut rng = NormalPairs::new(config.seed);
    let mut records = Vec::with_capacity(config.n_samples);
    for index in 0..config.n_samples {
        let (z1, z2) = rng.next_pair();
        let t1 = config.mode_phases[0].at(index);
        let l11 = state.quad_variance(0, t1)?.max(0.0).sqrt();
        let rec = if n_modes == 1 {
            QuadratureRecord {
                index,
                theta: [t1, 0.0],
                x: [l11 * z1, 0.0],
            }
        } else {
            let t2 = config.mode_phases[1].at(index);
            let v2 = state.quad_variance(1, t2)?;
            let c12 = state.quad_covariance(0, t1, 1, t2)?;
            let l21 = if l11 > 0.0 { c12 / l11 } else { 0.0 };
            let l22 = (v2 - l21 * l21).max(0.0).sqrt();
            QuadratureRecord {
                index,
                theta: [t1, t2],
                x: [l11 * z1, l21 * z1 + l22 * z2],
            }
        };
        records.push(rec);
    }
    QuadratureDataset::new(n_modes, records)
}

/// Quantity whose variance a trace follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceTarget {
    Mode1,
    Mode2,
    Sum,
    Difference,
}

impl TraceTarget {
    fn value(self, r: &QuadratureRecord) -> f64 {
        match self {
            TraceTarget::Mode1 => r.x[0],
            TraceTarget::Mode2 => r.x[1],
            TraceTarget::Sum => (r.x[0] + r.x[1]) * FRAC_1_SQRT_2,
            TraceTarget::Difference => (r.x[0] - r.x[1]) * FRAC_1_SQRT_2,
        }
    }

    fn needs_two_modes(self) -> bool {
        !matches!(self, TraceTarget::Mode1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceBin {
    pub center_index: f64,
    /// Mean LO phase of each mode within the bin.
    pub theta_center: [f64; 2],
    pub variance: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceTrace {
    n_modes: usize,
    bins: Vec<VarianceBin>,
}

impl VarianceTrace {
    pub fn new(n_modes: usize, bins: Vec<VarianceBin>) -> Result<Self> {
        if !(1..=2).contains(&n_modes) {
            return invalid(format!(
                "traces carry phases of 1 or 2 modes, got {n_modes}"
            ));
        }
        if bins
            .iter()
            .any(|b| !(b.variance >= 0.0 && b.variance.is_finite()))
        {
            return invalid("trace variances must be finite and non-negative");
        }
        Ok(Self { n_modes, bins })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn bins(&self) -> &[VarianceBin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.variance).collect()
    }

    pub fn center_indices(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.center_index).collect()
    }

    /// Phase range covered by the bins, extrapolated by half a bin at each
    /// end, for a phase built from the bin centers by `phase`.
    pub fn phase_extent(&self, phase: impl Fn(&VarianceBin) -> f64) -> f64 {
        let k = self.bins.len();
        if k < 2 {
            return 0.0;
        }
        let (lo, hi) = self
            .bins
            .iter()
            .map(&phase)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        (hi - lo) * k as f64 / (k - 1) as f64
    }
}

/// Splits the records into consecutive windows and returns the unbiased
/// sample variance of `target` in each. A trailing partial window is dropped.
pub fn binned_variance(
    data: &QuadratureDataset,
    window: usize,
    target: TraceTarget,
) -> Result<VarianceTrace> {
    if window < 2 {
        return invalid(format!("window must be at least 2, got {window}"));
    }
    if target.needs_two_modes() && data.n_modes() < 2 {
        return invalid(format!("{target:?} needs a two-mode dataset"));
    }
    let bins = data
        .records()
        .chunks_exact(window)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let mean = chunk.iter().map(|r| target.value(r)).sum::<f64>() / n;
            let ss: f64 = chunk.iter().map(|r| (target.value(r) - mean).powi(2)).sum();
            let center_index = chunk.iter().map(|r| r.index as f64).sum::<f64>() / n;
            let mut theta_center = [0.0; 2];
            for (m, tc) in theta_center.iter_mut().enumerate().take(data.n_modes()) {
                *tc = chunk.iter().map(|r| r.theta[m]).sum::<f64>() / n;
            }
            VarianceBin {
                center_index,
                theta_center,
                variance: ss / (n - 1.0),
                count: chunk.len(),
            }
        })
        .collect();
    VarianceTrace::new(data.n_modes(), bins)
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::DataFormat {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let raw = rec.get(i).ok_or_else(|| Error::DataFormat {
        line,
        message: format!("missing column {name}"),
    })?;
    raw.trim().parse().map_err(|_| Error::DataFormat {
        line,
        message: format!("cannot parse {name} value {raw:?}"),
    })
}

fn check_header(found: &csv::StringRecord, options: &[&[&str]]) -> Result<usize> {
    let cols: Vec<&str> = found.iter().map(str::trim).collect();
    options
        .iter()
        .position(|o| *o == cols.as_slice())
        .ok_or_else(|| Error::DataFormat {
            line: 1,
            message: format!("unexpected header {cols:?}"),
        })
}

const DATASET_HEADER_1: &[&str] = &["index", "theta1", "x1"];
const DATASET_HEADER_2: &[&str] = &["index", "theta1", "x1", "theta2", "x2"];

/// Writes `index,theta1,x1[,theta2,x2]` with LF line endings.
pub fn write_dataset_csv<W: Write>(data: &QuadratureDataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let header = if data.n_modes() == 1 {
        DATASET_HEADER_1
    } else {
        DATASET_HEADER_2
    };
    w.write_record(header).map_err(csv_err)?;
    for r in data.records() {
        let mut row = vec![r.index.to_string(), fmt_f64(r.theta[0]), fmt_f64(r.x[0])];
        if data.n_modes() == 2 {
            row.push(fmt_f64(r.theta[1]));
            row.push(fmt_f64(r.x[1]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<QuadratureDataset> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let n_modes = check_header(&header, &[DATASET_HEADER_1, DATASET_HEADER_2])? + 1;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let mut rec = QuadratureRecord {
            index: parse_field(&row, 0, "index")?,
            theta: [parse_field(&row, 1, "theta1")?, 0.0],
            x: [parse_field(&row, 2, "x1")?, 0.0],
        };
        if n_modes == 2 {
            rec.theta[1] = parse_field(&row, 3, "theta2")?;
            rec.x[1] = parse_field(&row, 4, "x2")?;
        }
        if !(rec.x.iter().chain(&rec.theta).all(|v| v.is_finite())) {
            return Err(Error::DataFormat {
                line: row.position().map(|p| p.line()).unwrap_or(0),
                message: "non-finite value".into(),
            });
        }
        records.push(rec);
    }
    QuadratureDataset::new(n_modes, records)
}

const TRACE_HEADER_1: &[&str] = &["bin_center_index", "theta1_center", "variance", "count"];
const TRACE_HEADER_2: &[&str] = &[
    "bin_center_index",
    "theta1_center",
    "theta2_center",
    "variance",
    "count",
];

/// Writes `bin_center_index,theta1_center[,theta2_center],variance,count`.
pub fn write_trace_csv<W: Write>(trace: &VarianceTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let header = if trace.n_modes() == 1 {
        TRACE_HEADER_1
    } else {
        TRACE_HEADER_2
    };
    w.write_record(header).map_err(csv_err)?;
    for b in trace.bins() {
        let mut row = vec![fmt_f64(b.center_index), fmt_f64(b.theta_center[0])];
        if trace.n_modes() == 2 {
            row.push(fmt_f64(b.theta_center[1]));
        }
        row.push(fmt_f64(b.variance));
        row.push(b.count.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<VarianceTrace> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let n_modes = check_header(&header, &[TRACE_HEADER_1, TRACE_HEADER_2])? + 1;
    let mut bins = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let mut theta_center = [parse_field(&row, 1, "theta1_center")?, 0.0];
        let mut col = 2;
        if n_modes == 2 {
            theta_center[1] = parse_field(&row, 2, "theta2_center")?;
            col = 3;
        }
        let variance: f64 = parse_field(&row, col, "variance")?;
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::DataFormat {
                line: row.position().map(|p| p.line()).unwrap_or(0),
                message: format!("variance {variance} must be finite and non-negative"),
            });
        }
        bins.push(VarianceBin {
            center_index: parse_field(&row, 0, "bin_center_index")?,
            theta_center,
            variance,
            count: parse_field(&row, col + 1, "count")?,
        });
    }
    VarianceTrace::new(n_modes, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{epr_pipeline, LossChannel, PipelineConfig, SqueezeParams};
    use std::f64::consts::PI;

    fn fixed(theta: f64) -> PhaseSchedule {
        PhaseSchedule::Fixed { theta }
    }

    fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = xs.clone().count() as f64;
        let mean = xs.clone().sum::<f64>() / n;
        xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn vacuum_variance_from_samples() {
        let vac = GaussianState::vacuum(1).unwrap();
        let cfg = SweepConfig {
            mode_phases: vec![fixed(0.3)],
            n_samples: 1_000_000,
            seed: 7,
        };
        let data = sample(&vac, &cfg).unwrap();
        let v = sample_variance(data.records().iter().map(|r| r.x[0]));
        assert!((v - 0.5).abs() < 0.002, "{v}");
    }

    #[test]
    fn squeezed_lossy_variance_from_samples() {
        let st = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, SqueezeParams::new(0.44, 0.0))
            .unwrap()
            .loss(0, LossChannel::new(0.52).unwrap())
            .unwrap();
        let cfg = SweepConfig {
            mode_phases: vec![fixed(0.0)],
            n_samples: 1_000_000,
            seed: 11,
        };
        let data = sample(&st, &cfg).unwrap();
        let v = sample_variance(data.records().iter().map(|r| r.x[0]));
        assert!((v - 0.34784).abs() < 0.003, "{v}");
    }

    #[test]
    fn same_seed_same_data() {
        let st = epr_pipeline(&PipelineConfig::ideal(0.44, 0.5)).unwrap();
        let cfg = SweepConfig {
            mode_phases: vec![
                PhaseSchedule::Linear {
                    theta0: 0.1,
                    rate: 1e-3,
                },
                fixed(0.0),
            ],
            n_samples: 5000,
            seed: 99,
        };
        let a = sample(&st, &cfg).unwrap();
        let b = sample(&st, &cfg).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_dataset_csv(&a, &mut buf_a).unwrap();
        write_dataset_csv(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let c = sample(&st, &SweepConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_errors() {
        let st = GaussianState::vacuum(2).unwrap();
        let cfg = SweepConfig {
            mode_phases: vec![fixed(0.0)],
            n_samples: 10,
            seed: 0,
        };
        assert!(sample(&st, &cfg).is_err());
        let cfg = SweepConfig {
            mode_phases: vec![fixed(0.0), fixed(0.0)],
            n_samples: 0,
            seed: 0,
        };
        assert!(sample(&st, &cfg).is_err());
    }

    #[test]
    fn binning_drops_remainder_and_rejects_small_window() {
        let st = GaussianState::vacuum(1).unwrap();
        let cfg = SweepConfig {
            mode_phases: vec![PhaseSchedule::Linear {
                theta0: 0.0,
                rate: 0.01,
            }],
            n_samples: 1050,
            seed: 3,
        };
        let data = sample(&st, &cfg).unwrap();
        let trace = binned_variance(&data, 100, TraceTarget::Mode1).unwrap();
        assert_eq!(trace.len(), 10);
        assert_eq!(trace.bins().iter().map(|b| b.count).sum::<usize>(), 1000);
        assert_eq!(trace.bins()[0].center_index, 49.5);
        assert!((trace.bins()[0].theta_center[0] - 0.495).abs() < 1e-12);
        assert!(binned_variance(&data, 1, TraceTarget::Mode1).is_err());
        assert!(binned_variance(&data, 10, TraceTarget::Sum).is_err());
    }

    #[test]
    fn constant_variance_bins_within_five_sigma() {
        let st = GaussianState::vacuum(2).unwrap();
        let window = 4000;
        let cfg = SweepConfig {
            mode_phases: vec![fixed(0.0), fixed(0.0)],
            n_samples: 40 * window,
            seed: 5,
        };
        let data = sample(&st, &cfg).unwrap();
        let sigma = 0.5 * (2.0 / (window as f64 - 1.0)).sqrt();
        for target in [
            TraceTarget::Mode1,
            TraceTarget::Mode2,
            TraceTarget::Sum,
            TraceTarget::Difference,
        ] {
            let trace = binned_variance(&data, window, target).unwrap();
            for b in trace.bins() {
                assert!(
                    (b.variance - 0.5).abs() < 5.0 * sigma,
                    "{target:?} {}",
                    b.variance
                );
            }
        }
    }

    #[test]
    fn epr_difference_trace_minimum() {
        let st = epr_pipeline(&PipelineConfig::ideal(0.44, 0.5)).unwrap();
        let window = 20_000;
        let n_bins = 40;
        let cfg = SweepConfig {
            mode_phases: vec![
                PhaseSchedule::Linear {
                    theta0: 0.0,
                    rate: 2.0 * PI / (n_bins * window) as f64,
                },
                fixed(0.0),
            ],
            n_samples: n_bins * window,
            seed: 21,
        };
        let data = sample(&st, &cfg).unwrap();
        let diff = binned_variance(&data, window, TraceTarget::Difference).unwrap();
        let sum = binned_variance(&data, window, TraceTarget::Sum).unwrap();
        let (imin, vmin) =
            diff.variances()
                .into_iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |a, (i, v)| if v < a.1 { (i, v) } else { a },
                );
        assert!((vmin - 0.354).abs() < 0.01, "{vmin}");
        // Difference is minimal near θ₁ + θ₂ = π, the sum there is maximal.
        assert!((diff.bins()[imin].theta_center[0] - PI).abs() < 0.5);
        let smax =
            sum.variances()
                .into_iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |a, (i, v)| if v > a.1 { (i, v) } else { a },
                );
        assert!((smax.0 as i64 - imin as i64).abs() <= 3);
        let (smin_i, _) =
            sum.variances()
                .into_iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |a, (i, v)| if v < a.1 { (i, v) } else { a },
                );
        assert!(
            sum.bins()[smin_i].theta_center[0] < 0.5
                || sum.bins()[smin_i].theta_center[0] > 2.0 * PI - 0.5
        );
    }

    #[test]
    fn dataset_csv_round_trip() {
        let st = epr_pipeline(&PipelineConfig::ideal(0.3, 0.7)).unwrap();
        let cfg = SweepConfig {
            mode_phases: vec![
                PhaseSchedule::Linear {
                    theta0: 0.0,
                    rate: 0.37,
                },
                PhaseSchedule::Linear {
                    theta0: 1.0,
                    rate: -0.11,
                },
            ],
            n_samples: 200,
            seed: 1,
        };
        let data = sample(&st, &cfg).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,theta1,x1,theta2,x2\n"));
        assert!(!text.contains('\r'));
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);

        let trace = binned_variance(&data, 20, TraceTarget::Sum).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        assert!(buf.starts_with(b"bin_center_index,theta1_center,theta2_center,variance,count\n"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let text = "index,theta1,x1\n0,0.0,0.1\n1,0.0,abc\n";
        match read_dataset_csv(text.as_bytes()) {
            Err(Error::DataFormat { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "idx,theta1,x1\n";
        assert!(matches!(
            read_dataset_csv(text.as_bytes()),
            Err(Error::DataFormat { line: 1, .. })
        ));
    }
}

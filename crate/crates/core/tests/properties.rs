use std::f64::consts::{PI, TAU};

use eprsim_core::fitting::{model_variance, Branch};
use eprsim_core::gaussian::{
    beamsplitter_matrix, epr_variance, phase_matrix, squeeze_matrix, squeezed_variance,
    symplectic_form, thermal_variance,
};
use eprsim_core::homodyne::{read_dataset_csv, write_dataset_csv};
use eprsim_core::optics::{beam_radius, rayleigh_range, BeamParams};
use eprsim_core::{
    epr_pipeline, fit_epr, fit_single, gaussian_to_fock, loss_fock, squeezed_vacuum_fock,
    squeezing_db, tmsv_fock, Combination, GaussianState, LossChannel, PipelineConfig,
    QuadratureDataset, QuadratureRecord, SqueezeParams, VarianceBin, VarianceTrace,
};
use proptest::prelude::*;

fn max_abs(m: nalgebra::DMatrix<f64>) -> f64 {
    m.abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn elementary_operations_are_symplectic(zeta in 0.0..2.0f64, angle in 0.0..TAU, phi in -10.0..10.0f64) {
        let omega = symplectic_form(2);
        for s in [
            squeeze_matrix(2, 1, SqueezeParams::new(zeta, angle)),
            phase_matrix(2, 0, phi),
            beamsplitter_matrix(2, 0, 1),
        ] {
            prop_assert!(max_abs(&s * &omega * s.transpose() - &omega) < 1e-12);
        }
    }

    #[test]
    fn pipeline_follows_closed_forms(zeta in 0.0..1.2f64, eta in 0.0..=1.0f64, t1 in -7.0..7.0f64, t2 in -7.0..7.0f64) {
        let state = epr_pipeline(&PipelineConfig::ideal(zeta, eta)).unwrap();
        for c in [Combination::Sum, Combination::Difference] {
            let v = state.joint_quad_variance(t1, t2, c).unwrap();
            prop_assert!((v - epr_variance(zeta, eta, t1 + t2, c)).abs() < 1e-11);
        }
    }

    #[test]
    fn sum_and_difference_are_complementary(zeta in 0.0..1.5f64, eta in 0.0..=1.0f64, t in -7.0..7.0f64) {
        let total = epr_variance(zeta, eta, t, Combination::Sum) + epr_variance(zeta, eta, t, Combination::Difference);
        prop_assert!((total - (eta * (2.0 * zeta).cosh() + 1.0 - eta)).abs() < 1e-12);
    }

    #[test]
    fn two_mode_traces_have_twice_the_period(zeta in 0.05..1.5f64, eta in 0.05..=1.0f64, t in -7.0..7.0f64) {
        prop_assert!((squeezed_variance(zeta, eta, t + PI) - squeezed_variance(zeta, eta, t)).abs() < 1e-12);
        let d = epr_variance(zeta, eta, t, Combination::Difference);
        prop_assert!((epr_variance(zeta, eta, t + TAU, Combination::Difference) - d).abs() < 1e-12);
        // A half turn that leaves the single-mode trace unchanged swaps sum and difference.
        prop_assert!((epr_variance(zeta, eta, t + PI, Combination::Sum) - d).abs() < 1e-12);
    }

    #[test]
    fn reduced_modes_are_thermal(zeta in 0.0..1.5f64, eta in 0.0..=1.0f64, t in -7.0..7.0f64) {
        let state = epr_pipeline(&PipelineConfig::ideal(zeta, eta)).unwrap();
        let expected = thermal_variance(zeta, eta);
        for mode in 0..2 {
            prop_assert!((state.quad_variance(mode, t).unwrap() - expected).abs() < 1e-11);
        }
    }

    #[test]
    fn mismatch_breaks_phase_independence(zeta in 0.2..1.0f64, m in 0.05..0.9f64) {
        let state = epr_pipeline(&PipelineConfig { mismatch: m, ..PipelineConfig::ideal(zeta, 0.8) }).unwrap();
        let vs: Vec<f64> = (0..64).map(|k| state.quad_variance(0, PI * k as f64 / 64.0).unwrap()).collect();
        let spread = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(spread > 1e-4);
        prop_assert!(state.is_physical());
    }

    #[test]
    fn gaussian_losses_compose(zeta in 0.0..1.5f64, e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64) {
        let s = GaussianState::vacuum(1).unwrap().squeeze(0, SqueezeParams::new(zeta, 0.3)).unwrap();
        let twice = s.loss(0, LossChannel::new(e1).unwrap()).unwrap().loss(0, LossChannel::new(e2).unwrap()).unwrap();
        let once = s.loss(0, LossChannel::new(e1 * e2).unwrap()).unwrap();
        prop_assert!(max_abs(twice.cov() - once.cov()) < 1e-12);
    }

    #[test]
    fn random_operation_sequences_stay_physical(ops in prop::collection::vec((0u8..4, 0usize..2, 0.0..1.0f64, 0.0..TAU), 1..16)) {
        let mut state = GaussianState::vacuum(2).unwrap();
        for (kind, mode, a, b) in ops {
            state = match kind {
                0 => state.squeeze(mode, SqueezeParams::new(1.5 * a, b)).unwrap(),
                1 => state.phase_shift(mode, b).unwrap(),
                2 => state.beamsplit(mode, 1 - mode).unwrap(),
                _ => state.loss(mode, LossChannel::new(a).unwrap()).unwrap(),
            };
            prop_assert!(state.physicality_margin() >= -1e-10);
        }
    }

    #[test]
    fn gaussian_and_fock_phase_rotations_agree(zeta in 0.05..0.6f64, eta in 0.2..=1.0f64, phi in -4.0..4.0f64) {
        let base = epr_pipeline(&PipelineConfig::ideal(zeta, eta)).unwrap();
        let (rho, _) = gaussian_to_fock(&base, 6).unwrap();
        let (rotated, _) = gaussian_to_fock(&base.phase_shift(1, phi).unwrap(), 6).unwrap();
        let via_fock = rho.phase_rotate(1, phi).unwrap();
        let diff = (rotated.entries() - via_fock.entries()).map(|z| z.norm()).max();
        prop_assert!(diff < 1e-9, "{}", diff);
    }

    #[test]
    fn fock_losses_compose_and_stay_positive(zeta in 0.0..0.8f64, e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64) {
        let rho = tmsv_fock(zeta, 6).unwrap();
        let twice = loss_fock(&loss_fock(&rho, 0, e1).unwrap(), 0, e2).unwrap();
        let once = loss_fock(&rho, 0, e1 * e2).unwrap();
        prop_assert!((twice.entries() - once.entries()).map(|z| z.norm()).max() < 1e-12);
        prop_assert!((twice.trace() - rho.trace()).abs() < 1e-12);
        prop_assert!(twice.min_eigenvalue() >= -1e-10);
        prop_assert!(twice.hermiticity_error() < 1e-14);
    }

    #[test]
    fn purity_tracks_loss(zeta in 0.1..0.8f64, eta in 0.05..0.95f64) {
        let pure = squeezed_vacuum_fock(zeta, 30).unwrap();
        prop_assert!((pure.purity() / (pure.trace() * pure.trace()) - 1.0).abs() < 1e-10);
        let mixed = loss_fock(&pure, 0, eta).unwrap();
        prop_assert!(mixed.purity() < pure.purity());
    }

    #[test]
    fn beam_radius_depends_only_on_reduced_distance(w0 in 1e-6..1e-3f64, lambda in 2e-7..2e-6f64, u in -5.0..5.0f64) {
        let beam = BeamParams::new(w0, lambda).unwrap();
        let z = u * rayleigh_range(&beam);
        let ratio = beam_radius(z, &beam) / w0;
        prop_assert!((ratio - (1.0 + u * u).sqrt()).abs() < 1e-12);
        prop_assert!(ratio >= 1.0);
    }

    #[test]
    fn db_is_monotone(a in 1e-3..10.0f64, b in 1e-3..10.0f64) {
        prop_assume!(a < b);
        prop_assert!(squeezing_db(a).unwrap() > squeezing_db(b).unwrap());
    }

    #[test]
    fn dataset_csv_round_trips_bit_exactly(values in prop::collection::vec((any::<f64>(), any::<f64>(), -1e3..1e3f64, -1e3..1e3f64), 1..40)) {
        let records: Vec<QuadratureRecord> = values
            .iter()
            .enumerate()
            .filter(|(_, (a, b, _, _))| a.is_finite() && b.is_finite())
            .map(|(index, &(a, b, t1, t2))| QuadratureRecord { index, theta: [t1, t2], x: [a, b] })
            .collect();
        prop_assume!(!records.is_empty());
        let data = QuadratureDataset::new(2, records).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n_modes(), 2);
        for (a, b) in back.records().iter().zip(data.records()) {
            prop_assert_eq!(a.x[0].to_bits(), b.x[0].to_bits());
            prop_assert_eq!(a.x[1].to_bits(), b.x[1].to_bits());
            prop_assert_eq!(a.theta[0].to_bits(), b.theta[0].to_bits());
        }
    }
}

fn noiseless_trace(
    branch: Branch,
    p: (f64, f64, f64, f64),
    bins: usize,
    window: f64,
) -> VarianceTrace {
    let (zeta, eta, theta0, rate) = p;
    let bins = (0..bins)
        .map(|b| {
            let i = (b as f64 + 0.5) * window - 0.5;
            VarianceBin {
                center_index: i,
                theta_center: [theta0 + rate * i, 0.0],
                variance: model_variance(branch, zeta, eta, theta0, rate, i),
                count: window as usize,
            }
        })
        .collect();
    VarianceTrace::new(2, bins).unwrap()
}

fn phase_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn single_fit_round_trip(zeta in 0.1..1.0f64, eta in 0.2..=1.0f64, theta0 in 0.0..PI, turns in 1.1..4.0f64, bins in 20usize..120) {
        let window = 1000.0;
        let rate = turns * PI / (bins as f64 * window);
        let trace = noiseless_trace(Branch::Single, (zeta, eta, theta0, rate), bins, window);
        let fit = fit_single(&trace).unwrap();
        prop_assert!(fit.converged, "{:?}", fit);
        prop_assert!((fit.zeta - zeta).abs() < 1e-6, "{:?}", fit);
        prop_assert!((fit.eta - eta).abs() < 1e-6, "{:?}", fit);
        prop_assert!(phase_distance(fit.theta0, theta0, PI) < 1e-6, "{:?}", fit);
        prop_assert!((fit.rate - rate).abs() < 1e-6 * rate, "{:?}", fit);
    }

    #[test]
    fn epr_fit_round_trip(zeta in 0.1..1.0f64, eta in 0.2..=1.0f64, theta0 in 0.0..TAU, turns in 1.1..4.0f64, bins in 20usize..120) {
        let window = 500.0;
        let rate = turns * TAU / (bins as f64 * window);
        let p = (zeta, eta, theta0, rate);
        let sum = noiseless_trace(Branch::Sum, p, bins, window);
        let diff = noiseless_trace(Branch::Difference, p, bins, window);
        let fit = fit_epr(&sum, &diff).unwrap();
        prop_assert!(fit.converged, "{:?}", fit);
        prop_assert!((fit.zeta - zeta).abs() < 1e-6, "{:?}", fit);
        prop_assert!((fit.eta - eta).abs() < 1e-6, "{:?}", fit);
        prop_assert!(phase_distance(fit.theta0, theta0, TAU) < 1e-6, "{:?}", fit);
        prop_assert!((fit.rate - rate).abs() < 1e-6 * rate, "{:?}", fit);
    }
}

mod common;

use ghz_core::circuit::{ghz4_state, NoiseParams};
use ghz_core::qmath::{fidelity_with_pure, DensityMatrix, Ket, PauliString};
use ghz_core::resample::ResampleConfig;
use ghz_core::sampler::{sample_experiment, SamplerConfig};
use ghz_core::tomography::{
    enumerate_settings, fidelity_with_uncertainty, linear_inversion, physical_projection,
    reconstruct, TomographySet,
};
use num_complex::Complex64;

fn sampled_set(rho: &DensityMatrix, shots: u64, seed: u64) -> Vec<ghz_core::CountRecord> {
    let cfg = SamplerConfig {
        shots_per_setting: shots,
        accidental_fraction: 0.0,
        seed,
    };
    sample_experiment(rho, &enumerate_settings(rho.num_qubits()).unwrap(), &cfg).unwrap()
}

#[test]
fn exact_records_round_trip_over_state_grid() {
    for (k, rho) in common::state_grid().iter().enumerate() {
        let back = reconstruct(&TomographySet::exact(rho).unwrap()).unwrap();
        let err = back.frobenius_distance(rho);
        assert!(
            err <= 1e-8,
            "state {k} ({} qubits): {err:e}",
            rho.num_qubits()
        );
    }
}

#[test]
fn projection_is_idempotent_and_non_expansive() {
    let grid = common::state_grid();
    let shots = 200;
    for (k, rho) in grid
        .iter()
        .enumerate()
        .filter(|(_, r)| r.num_qubits() >= 2)
        .take(12)
    {
        let records = sampled_set(rho, shots, k as u64);
        let lin = linear_inversion(&TomographySet::from_records(&records).unwrap()).unwrap();
        let once = physical_projection(&lin).unwrap();
        let twice = physical_projection(once.as_matrix()).unwrap();
        assert!(
            twice.frobenius_distance(&once) <= 1e-10,
            "state {k} not idempotent"
        );
        for fixed in grid.iter().filter(|r| r.dim() == rho.dim()) {
            let before = lin.frobenius_distance(fixed.as_matrix());
            let after = once.frobenius_distance(fixed);
            assert!(after <= before + 1e-12, "state {k}: {after} > {before}");
        }
    }
}

#[test]
fn finite_counts_can_break_positivity() {
    let rho = DensityMatrix::from_pure(&Ket::ghz(4, 0.0)).unwrap();
    let lin =
        linear_inversion(&TomographySet::from_records(&sampled_set(&rho, 50, 8)).unwrap()).unwrap();
    assert!((lin.trace() - Complex64::from(1.0)).norm() <= 1e-10);
    assert!(lin.hermitian_deviation() <= 1e-15);
    assert!(lin.eigenvalues_hermitian()[0] < 0.0);
    let rho = physical_projection(&lin).unwrap();
    assert!(rho.min_eigenvalue() >= -1e-9);
}

#[test]
fn identity_expectation_is_one_for_sampled_sets() {
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    for seed in 0..3 {
        let set = TomographySet::from_records(&sampled_set(&rho, 30, seed)).unwrap();
        assert_eq!(
            set.observations()
                .expectation(&PauliString::identity(4))
                .unwrap(),
            1.0
        );
    }
}

#[test]
fn pure_ghz_from_1e5_shots() {
    let psi = Ket::ghz(4, 0.0);
    let rho = DensityMatrix::from_pure(&psi).unwrap();
    let lin =
        linear_inversion(&TomographySet::from_records(&sampled_set(&rho, 100_000, 77)).unwrap())
            .unwrap();
    let f = fidelity_with_pure(&physical_projection(&lin).unwrap(), &psi).unwrap();
    assert!(f >= 0.99, "fidelity {f}");
}

#[test]
fn fidelity_improves_with_shots() {
    let psi = Ket::ghz(4, 0.0);
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let truth = fidelity_with_pure(&rho, &psi).unwrap();
    let cfg = ResampleConfig::new(200, 4);
    let mut previous_err = f64::INFINITY;
    let mut previous_sigma = f64::INFINITY;
    for shots in [1_000u64, 10_000, 100_000] {
        let records = sampled_set(&rho, shots, shots);
        let f = fidelity_with_uncertainty(&records, &psi, &cfg).unwrap();
        let err = (f.value - truth).abs();
        assert!(f.sigma < previous_sigma, "sigma not decreasing at {shots}");
        // Expected error shrinks; allow 5σ of the previous level.
        assert!(
            err <= previous_err.max(5.0 * previous_sigma),
            "error grew at {shots}"
        );
        previous_err = err;
        previous_sigma = f.sigma;
    }
}

#[test]
fn resample_count_is_validated() {
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let records = sampled_set(&rho, 100, 1);
    assert!(
        fidelity_with_uncertainty(&records, &Ket::ghz(4, 0.0), &ResampleConfig::new(10, 0))
            .is_err()
    );
}

#[test]
fn calibrated_state_statistics() {
    let psi = Ket::ghz(4, 0.0);
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let cfg = ResampleConfig::new(200, 9);
    let big = fidelity_with_uncertainty(&sampled_set(&rho, 1_000_000, 21), &psi, &cfg).unwrap();
    assert!((big.value - 0.729).abs() <= 0.005, "fidelity {}", big.value);
    let mid = fidelity_with_uncertainty(&sampled_set(&rho, 10_000, 22), &psi, &cfg).unwrap();
    let ratio = mid.sigma / big.sigma;
    assert!((8.0..=12.0).contains(&ratio), "sigma ratio {ratio}");
    let lab = fidelity_with_uncertainty(&sampled_set(&rho, 470, 23), &psi, &cfg).unwrap();
    assert!(
        (0.003..=0.012).contains(&lab.sigma),
        "sigma at 470 shots {}",
        lab.sigma
    );
}

#[test]
fn three_photon_conditioning_matches_direct_projection() {
    use ghz_core::qmath::project_qubit;
    use ghz_core::sampler::{sample_record, Basis};
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: 400_000,
        accidental_fraction: 0.0,
        seed: 31,
    };
    for photon in 0..4 {
        let records: Vec<_> = enumerate_settings(3)
            .unwrap()
            .iter()
            .map(|s| {
                sample_record(&rho, &s.with_inserted(photon, Basis::X), &cfg)
                    .unwrap()
                    .condition_on(photon, 0)
                    .unwrap()
            })
            .collect();
        let measured = reconstruct(&TomographySet::from_records(&records).unwrap()).unwrap();
        let (direct, _) = project_qubit(&rho, photon, &Ket::plus()).unwrap();
        let err = measured.frobenius_distance(&direct);
        assert!(err < 0.02, "photon {photon}: distance {err}");
    }
}

use ghz_core::circuit::{ghz4_state, NoiseParams};
use ghz_core::exec::Execution;
use ghz_core::qmath::{expectation, DensityMatrix};
use ghz_core::sampler::{
    outcome_probabilities, sample_experiment_with, sample_record, SamplerConfig,
};
use ghz_core::tomography::{enumerate_settings, Observations};

const SHOTS: u64 = 1_000_000;

fn within_five_sigma(freq: f64, prob: f64, shots: u64) -> bool {
    (freq - prob).abs() <= 5.0 * (prob * (1.0 - prob) / shots as f64).sqrt() + 1e-6
}

#[test]
fn frequencies_converge_to_born_rule() {
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: SHOTS,
        accidental_fraction: 0.0,
        seed: 99,
    };
    for s in ["XXXX", "ZZZZ", "XYZY", "YYXZ"] {
        let setting = s.parse().unwrap();
        let probs = outcome_probabilities(&rho, &setting).unwrap();
        let record = sample_record(&rho, &setting, &cfg).unwrap();
        assert_eq!(record.total(), SHOTS);
        for (p, freq) in probs.iter().zip(record.frequencies()) {
            assert!(within_five_sigma(freq, *p, SHOTS), "{s}: {freq} vs {p}");
        }
    }
}

#[test]
fn sampled_expectations_converge() {
    let rho = ghz4_state(&NoiseParams::with_state(0.9, 0.8, 0.6)).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: SHOTS,
        accidental_fraction: 0.0,
        seed: 5,
    };
    let settings = enumerate_settings(4).unwrap();
    let subset: Vec<_> = settings.iter().step_by(7).cloned().collect();
    let records = sample_experiment_with(Execution::default(), &rho, &subset, &cfg).unwrap();
    let obs = Observations::from_records(&records).unwrap();
    for s in &subset {
        let p = s.as_pauli();
        let est = obs.expectation(&p).unwrap();
        let exact = expectation(&rho, &p).unwrap();
        assert!(
            (est - exact).abs() <= 5.0 / (SHOTS as f64).sqrt(),
            "{s}: {est} vs {exact}"
        );
    }
}

#[test]
fn full_accidentals_are_uniform() {
    let rho = ghz4_state(&NoiseParams::ideal(0.0)).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: SHOTS,
        accidental_fraction: 1.0,
        seed: 1234,
    };
    let record = sample_record(&rho, &"ZZZZ".parse().unwrap(), &cfg).unwrap();
    for freq in record.frequencies() {
        assert!(within_five_sigma(freq, 1.0 / 16.0, SHOTS), "{freq}");
    }
}

#[test]
fn zero_probability_outcomes_never_drawn() {
    let rho = DensityMatrix::from_pure(&ghz_core::Ket::ghz(4, 0.0)).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: SHOTS,
        accidental_fraction: 0.0,
        seed: 3,
    };
    let record = sample_record(&rho, &"XXXX".parse().unwrap(), &cfg).unwrap();
    for (b, &c) in record.counts.iter().enumerate() {
        if (b as u32).count_ones() % 2 == 1 {
            assert_eq!(c, 0, "odd-parity outcome {b:04b} drawn");
        }
    }
}

#[test]
fn sampling_is_deterministic_across_schedules() {
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: 5_000,
        accidental_fraction: 0.05,
        seed: 42,
    };
    let settings = enumerate_settings(4).unwrap();
    let seq = sample_experiment_with(Execution::Sequential, &rho, &settings, &cfg).unwrap();
    let par = sample_experiment_with(Execution::Parallel, &rho, &settings, &cfg).unwrap();
    let again = sample_experiment_with(Execution::Parallel, &rho, &settings, &cfg).unwrap();
    assert_eq!(seq, par);
    assert_eq!(par, again);
    let other_seed = SamplerConfig { seed: 43, ..cfg };
    assert_ne!(
        seq,
        sample_experiment_with(Execution::Sequential, &rho, &settings, &other_seed).unwrap()
    );
}

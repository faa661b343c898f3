//! Poisson Monte Carlo uncertainties.
//!
//! Each resample redraws every count from a Poisson law whose mean is the
//! observed count, re-evaluates the statistic, and the spread over resamples
//! is the reported one-sigma error. Zero counts always resample to zero.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sampler::CountRecord;
use crate::tomography::Observations;

/// Smallest resample count accepted for an error bar.
pub const MIN_RESAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertainValue {
    pub value: f64,
    pub sigma: f64,
    pub resamples: usize,
}

impl UncertainValue {
    pub fn exact(value: f64) -> Self {
        UncertainValue {
            value,
            sigma: 0.0,
            resamples: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResampleConfig {
    pub resamples: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl ResampleConfig {
    pub fn new(resamples: usize, seed: u64) -> Self {
        ResampleConfig {
            resamples,
            seed,
            exec: Execution::default(),
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resamples < MIN_RESAMPLES {
            return Err(Error::OutOfRange {
                name: "resamples",
                value: self.resamples as f64,
                range: "at least 100",
            });
        }
        Ok(())
    }
}

/// Poisson redraw of every bin of `record`.
pub fn poisson_resample(record: &CountRecord, rng: &mut ChaCha20Rng) -> CountRecord {
    let counts: Vec<u64> = record
        .counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0
            } else {
                // Poisson::new only fails for non-positive or non-finite means.
                Poisson::new(c as f64).expect("positive mean").sample(rng) as u64
            }
        })
        .collect();
    let shots = counts.iter().sum();
    CountRecord {
        setting: record.setting.clone(),
        counts,
        shots,
    }
}

/// Resample `index` of `records`, drawn from its own substream.
pub fn resampled_records(records: &[CountRecord], seed: u64, index: usize) -> Vec<CountRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    records
        .iter()
        .map(|r| poisson_resample(r, &mut rng))
        .collect()
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Evaluates a vector-valued statistic on the observed records and on
/// `cfg.resamples` Poisson resamples; one [`UncertainValue`] per component.
pub fn resample_many<F>(
    records: &[CountRecord],
    cfg: &ResampleConfig,
    statistic: F,
) -> Result<Vec<UncertainValue>>
where
    F: Fn(&Observations) -> Result<Vec<f64>> + Sync + Send,
{
    cfg.validate()?;
    let observed = statistic(&Observations::from_records(records)?)?;
    let draws: Vec<Vec<f64>> = cfg
        .exec
        .map_range(cfg.resamples, |k| {
            let resampled = resampled_records(records, cfg.seed, k);
            statistic(&Observations::from_records(&resampled)?)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(observed
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let column: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            UncertainValue {
                value,
                sigma: sample_std(&column),
                resamples: cfg.resamples,
            }
        })
        .collect())
}

/// Scalar form of [`resample_many`].
pub fn resample_scalar<F>(
    records: &[CountRecord],
    cfg: &ResampleConfig,
    statistic: F,
) -> Result<UncertainValue>
where
    F: Fn(&Observations) -> Result<f64> + Sync + Send,
{
    resample_many(records, cfg, |obs| statistic(obs).map(|v| vec![v])).map(|mut v| v.remove(0))
}

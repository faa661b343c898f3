//! Seeded finite-statistics measurement records.
//!
//! A shot is one post-selected n-fold coincidence. Each record is drawn from
//! its own ChaCha substream keyed by `(seed, setting)`, so a record does not
//! depend on which other settings are sampled, in what order, or on how many
//! threads run the sampling.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::exec::Execution;
use crate::qmath::{kron_all, ComplexMatrix, DensityMatrix, Pauli, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn pauli(self) -> Pauli {
        match self {
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
            Basis::Z => Pauli::Z,
        }
    }

    fn rank(self) -> u64 {
        self as u64
    }

    /// Rows are `⟨e₀|`, `⟨e₁|` with `e₀` the +1 eigenvector.
    fn analyzer(self) -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = (Complex64::from(h), Complex64::new(0.0, h));
        let rows = match self {
            Basis::X => [[a, a], [a, -a]],
            Basis::Y => [[a, -b], [a, b]],
            Basis::Z => [
                [Complex64::from(1.0), Complex64::from(0.0)],
                [Complex64::from(0.0), Complex64::from(1.0)],
            ],
        };
        ComplexMatrix::from_fn(2, |i, j| rows[i][j])
    }
}

/// A product measurement: one basis per photon.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MeasurementSetting(Vec<Basis>);

impl MeasurementSetting {
    pub fn new(bases: Vec<Basis>) -> Self {
        MeasurementSetting(bases)
    }

    pub fn bases(&self) -> &[Basis] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_pauli(&self) -> PauliString {
        PauliString::new(self.0.iter().map(|b| b.pauli()).collect())
    }

    /// Base-3 rank in `X < Y < Z` lexicographic order.
    pub fn rank(&self) -> u64 {
        self.0.iter().fold(0, |acc, b| acc * 3 + b.rank())
    }

    /// RNG stream identifier, unique over all settings of every length.
    pub fn stream_id(&self) -> u64 {
        ((self.0.len() as u64) << 48) | self.rank()
    }

    pub fn is_xy_only(&self) -> bool {
        self.0.iter().all(|&b| b != Basis::Z)
    }

    /// Drops photon `qubit` from the setting.
    pub fn without(&self, qubit: usize) -> MeasurementSetting {
        let mut bases = self.0.clone();
        bases.remove(qubit);
        MeasurementSetting(bases)
    }

    /// Inserts `basis` for photon `qubit`.
    pub fn with_inserted(&self, qubit: usize, basis: Basis) -> MeasurementSetting {
        let mut bases = self.0.clone();
        bases.insert(qubit, basis);
        MeasurementSetting(bases)
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{}", b.pauli().symbol())?;
        }
        Ok(())
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parse {
                input: s.into(),
                reason: "empty setting".into(),
            });
        }
        s.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'X' => Ok(Basis::X),
                'Y' => Ok(Basis::Y),
                'Z' => Ok(Basis::Z),
                _ => Err(Error::Parse {
                    input: s.into(),
                    reason: format!("`{c}` is not one of X, Y, Z"),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(MeasurementSetting)
    }
}

impl TryFrom<String> for MeasurementSetting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MeasurementSetting> for String {
    fn from(s: MeasurementSetting) -> String {
        s.to_string()
    }
}

/// Outcome histogram of one setting.
///
/// `counts[b]` is indexed by the outcome bitstring with photon A most
/// significant; bit 0 is the +1 eigenvalue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl CountRecord {
    pub fn new(setting: MeasurementSetting, counts: Vec<u64>) -> Result<Self> {
        let shots = counts.iter().sum();
        let record = CountRecord {
            setting,
            counts,
            shots,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.setting.len();
        if self.counts.len() != 1 << n {
            return Err(Error::InvalidRecords(format!(
                "setting {} needs {} bins, found {}",
                self.setting,
                1 << n,
                self.counts.len()
            )));
        }
        let total: u64 = self.counts.iter().sum();
        if total > self.shots {
            return Err(Error::InvalidRecords(format!(
                "setting {}: {} counts exceed {} shots",
                self.setting, total, self.shots
            )));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.setting.len()
    }

    /// Number of detected events.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Relative frequencies over detected events; uniform when empty.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            let k = self.counts.len();
            return vec![1.0 / k as f64; k];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }

    /// Keeps events where `qubit` gave outcome `bit` and drops that photon.
    pub fn condition_on(&self, qubit: usize, bit: usize) -> Result<CountRecord> {
        let n = self.num_qubits();
        if n < 2 || qubit >= n || bit > 1 {
            return Err(Error::InvalidQubits(format!(
                "cannot condition {n}-photon record on photon {qubit} = {bit}"
            )));
        }
        let shift = n - 1 - qubit;
        let mut counts = vec![0u64; 1 << (n - 1)];
        for (idx, &c) in self.counts.iter().enumerate() {
            if (idx >> shift) & 1 == bit {
                let high = (idx >> (shift + 1)) << shift;
                let low = idx & ((1 << shift) - 1);
                counts[high | low] += c;
            }
        }
        CountRecord::new(self.setting.without(qubit), counts)
    }
}

/// Three-photon records heralded by `qubit` found in `|+⟩`: every record
/// measuring X on `qubit`, conditioned on outcome 0 there.
pub fn herald_records(records: &[CountRecord], qubit: usize) -> Result<Vec<CountRecord>> {
    records
        .iter()
        .filter(|r| r.setting.bases().get(qubit) == Some(&Basis::X))
        .map(|r| r.condition_on(qubit, 0))
        .collect()
}

/// One experiment's records; the interchange document between simulation
/// and analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRecords {
    pub n: usize,
    pub records: Vec<CountRecord>,
}

impl ExperimentRecords {
    pub fn new(n: usize, records: Vec<CountRecord>) -> Result<Self> {
        let doc = ExperimentRecords { n, records };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.num_qubits() != self.n {
                return Err(Error::InvalidRecords(format!(
                    "record {} in a {}-photon document",
                    r.setting, self.n
                )));
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ExperimentRecords = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub shots_per_setting: u64,
    /// Weight of a uniform background mixed into every outcome distribution.
    pub accidental_fraction: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            shots_per_setting: 470,
            accidental_fraction: 0.0,
            seed: 20_240_229,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit("accidental_fraction", self.accidental_fraction)
    }
}

/// Born-rule distribution of outcome bitstrings for `setting`.
pub fn outcome_probabilities(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
) -> Result<Vec<f64>> {
    let dim = 1usize << setting.len();
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: dim,
        });
    }
    // p(b) = ⟨e_b|ρ|e_b⟩ = (U ρ U†)_bb with rows of U the analyzer bras.
    let factors: Vec<ComplexMatrix> = setting.bases().iter().map(|b| b.analyzer()).collect();
    let u = kron_all(&factors);
    let m = rho.as_matrix();
    let probs: Vec<f64> = (0..dim)
        .map(|b| {
            let bra = u.row(b);
            let mut acc = Complex64::from(0.0);
            for (i, bi) in bra.iter().enumerate() {
                if *bi == Complex64::from(0.0) {
                    continue;
                }
                let row = m.row(i);
                let inner: Complex64 = bra.iter().zip(row).map(|(bj, r)| r * bj.conj()).sum();
                acc += bi * inner;
            }
            acc.re.max(0.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    debug_assert!((total - 1.0).abs() < 1e-10, "probabilities sum to {total}");
    Ok(probs.into_iter().map(|p| p / total).collect())
}

/// Per-setting generator for `(seed, setting)`.
pub fn setting_rng(seed: u64, setting: &MeasurementSetting) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(setting.stream_id());
    rng
}

/// Derives an independent seed for a named sub-experiment.
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `shots` outcomes by inverse-CDF lookup.
pub fn sample_multinomial<R: Rng>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = probs.iter().rposition(|&p| p > 0.0);
    let mut counts = vec![0u64; probs.len()];
    let Some(last_positive) = last_positive else {
        return counts;
    };
    for _ in 0..shots {
        let u: f64 = rng.random();
        let k = cdf.partition_point(|&c| c <= u).min(last_positive);
        counts[k] += 1;
    }
    counts
}

/// Samples one record of `cfg.shots_per_setting` shots.
pub fn sample_record(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
    cfg: &SamplerConfig,
) -> Result<CountRecord> {
    cfg.validate()?;
    let probs = outcome_probabilities(rho, setting)?;
    let a = cfg.accidental_fraction;
    let uniform = 1.0 / probs.len() as f64;
    let mixed: Vec<f64> = probs.iter().map(|&p| (1.0 - a) * p + a * uniform).collect();
    let mut rng = setting_rng(cfg.seed, setting);
    let counts = sample_multinomial(&mixed, cfg.shots_per_setting, &mut rng);
    Ok(CountRecord {
        setting: setting.clone(),
        counts,
        shots: cfg.shots_per_setting,
    })
}

pub fn sample_experiment(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    cfg: &SamplerConfig,
) -> Result<Vec<CountRecord>> {
    sample_experiment_with(Execution::default(), rho, settings, cfg)
}

/// [`sample_experiment`] with an explicit execution strategy.
pub fn sample_experiment_with(
    exec: Execution,
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    cfg: &SamplerConfig,
) -> Result<Vec<CountRecord>> {
    cfg.validate()?;
    exec.map(settings, |s| sample_record(rho, s, cfg))
        .into_iter()
        .collect()
}

/// Rate bookkeeping for planning acquisition time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePlan {
    pub pair_rate_hz: f64,
    pub repetition_hz: f64,
    pub fourfold_rate_per_hour: f64,
}

impl RatePlan {
    pub fn new(pair_rate_hz: f64, repetition_hz: f64, fourfold_rate_per_hour: f64) -> Result<Self> {
        for (name, v) in [
            ("pair_rate_hz", pair_rate_hz),
            ("repetition_hz", repetition_hz),
            ("fourfold_rate_per_hour", fourfold_rate_per_hour),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "(0, ∞)",
                });
            }
        }
        Ok(RatePlan {
            pair_rate_hz,
            repetition_hz,
            fourfold_rate_per_hour,
        })
    }

    /// Mean pairs per pump pulse of one source.
    pub fn pairs_per_pulse(&self) -> f64 {
        self.pair_rate_hz / self.repetition_hz
    }

    /// Expected four-fold events over `hours` of acquisition.
    pub fn expected_shots(&self, hours: f64) -> f64 {
        self.fourfold_rate_per_hour * hours.max(0.0)
    }

    /// Hours needed for `shots_per_setting` events in each of `settings`.
    pub fn hours_for(&self, settings: usize, shots_per_setting: u64) -> f64 {
        settings as f64 * shots_per_setting as f64 / self.fourfold_rate_per_hour
    }
}

pub fn rate_report(
    pair_rate_hz: f64,
    repetition_hz: f64,
    fourfold_rate_per_hour: f64,
) -> Result<RatePlan> {
    RatePlan::new(pair_rate_hz, repetition_hz, fourfold_rate_per_hour)
}

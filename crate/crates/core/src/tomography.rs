//! State reconstruction from product-basis measurements.
//!
//! Reconstruction is linear inversion over all `4ⁿ` Pauli expectations
//! followed by projection onto the nearest density matrix in Frobenius norm.
//! An expectation with identity factors is read from the setting that
//! measures X on those photons.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{fidelity_with_pure, ComplexMatrix, DensityMatrix, Ket, Pauli, PauliString};
use crate::resample::{resample_many, resample_scalar, ResampleConfig, UncertainValue};
use crate::sampler::{outcome_probabilities, Basis, CountRecord, MeasurementSetting};

/// Largest `|H − H†|` entry accepted by [`physical_projection`].
pub const HERMITIAN_INPUT_TOL: f64 = 1e-9;

/// Outcome frequencies indexed by setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    n: usize,
    freqs: BTreeMap<MeasurementSetting, Vec<f64>>,
}

impl Observations {
    pub fn from_records(records: &[CountRecord]) -> Result<Self> {
        let n = records
            .first()
            .map(|r| r.num_qubits())
            .ok_or_else(|| Error::InvalidRecords("no records".into()))?;
        let mut freqs = BTreeMap::new();
        for r in records {
            r.validate()?;
            if r.num_qubits() != n {
                return Err(Error::InvalidRecords(format!(
                    "{}-photon record {} among {n}-photon records",
                    r.num_qubits(),
                    r.setting
                )));
            }
            if freqs.insert(r.setting.clone(), r.frequencies()).is_some() {
                return Err(Error::DuplicateSetting(r.setting.to_string()));
            }
        }
        Ok(Observations { n, freqs })
    }

    /// Infinite-statistics observations: exact Born-rule probabilities.
    pub fn exact(rho: &DensityMatrix, settings: &[MeasurementSetting]) -> Result<Self> {
        let n = rho.num_qubits();
        let mut freqs = BTreeMap::new();
        for s in settings {
            if freqs
                .insert(s.clone(), outcome_probabilities(rho, s)?)
                .is_some()
            {
                return Err(Error::DuplicateSetting(s.to_string()));
            }
        }
        Ok(Observations { n, freqs })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn settings(&self) -> impl Iterator<Item = &MeasurementSetting> {
        self.freqs.keys()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn frequencies(&self, setting: &MeasurementSetting) -> Result<&[f64]> {
        self.freqs
            .get(setting)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingSetting(setting.to_string()))
    }

    /// `Σ_b (−1)^{|b ∧ mask|} f(b)`: the correlator of the photons in `mask`.
    pub fn correlator(&self, setting: &MeasurementSetting, mask: usize) -> Result<f64> {
        let f = self.frequencies(setting)?;
        Ok(f.iter()
            .enumerate()
            .map(|(b, &p)| {
                if (b & mask).count_ones().is_multiple_of(2) {
                    p
                } else {
                    -p
                }
            })
            .sum())
    }

    /// Estimated `⟨s⟩`, using the setting with X on every identity factor.
    pub fn expectation(&self, s: &PauliString) -> Result<f64> {
        if s.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: s.len(),
            });
        }
        if s.is_identity() {
            return Ok(1.0);
        }
        let (setting, mask) = compatible_setting(s);
        self.correlator(&setting, mask)
    }
}

/// Canonical setting for `s` (I → X) and the bit mask of its non-I factors.
pub fn compatible_setting(s: &PauliString) -> (MeasurementSetting, usize) {
    let n = s.len();
    let mut mask = 0;
    let bases = s
        .symbols()
        .iter()
        .enumerate()
        .map(|(q, p)| match p {
            Pauli::I => Basis::X,
            other => {
                mask |= 1 << (n - 1 - q);
                match other {
                    Pauli::X => Basis::X,
                    Pauli::Y => Basis::Y,
                    _ => Basis::Z,
                }
            }
        })
        .collect();
    (MeasurementSetting::new(bases), mask)
}

/// The `3ⁿ` settings in `X < Y < Z` lexicographic order.
pub fn enumerate_settings(n: usize) -> Result<Vec<MeasurementSetting>> {
    if !(1..=4).contains(&n) {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "1..=4",
        });
    }
    Ok((0..3usize.pow(n as u32))
        .map(|mut k| {
            let mut bases = vec![Basis::X; n];
            for q in (0..n).rev() {
                bases[q] = Basis::ALL[k % 3];
                k /= 3;
            }
            MeasurementSetting::new(bases)
        })
        .collect())
}

/// Observations covering every setting of `{X,Y,Z}ⁿ` exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographySet(Observations);

impl TomographySet {
    pub fn new(obs: Observations) -> Result<Self> {
        let expected = enumerate_settings(obs.num_qubits())?;
        if obs.len() != expected.len() {
            return Err(Error::InvalidRecords(format!(
                "{} settings for {}-photon tomography, expected {}",
                obs.len(),
                obs.num_qubits(),
                expected.len()
            )));
        }
        if let Some(missing) = expected.iter().find(|s| obs.frequencies(s).is_err()) {
            return Err(Error::MissingSetting(missing.to_string()));
        }
        Ok(TomographySet(obs))
    }

    pub fn from_records(records: &[CountRecord]) -> Result<Self> {
        if let Some(empty) = records.iter().find(|r| r.total() == 0) {
            return Err(Error::InvalidRecords(format!(
                "setting {} has no events",
                empty.setting
            )));
        }
        Self::new(Observations::from_records(records)?)
    }

    pub fn exact(rho: &DensityMatrix) -> Result<Self> {
        let settings = enumerate_settings(rho.num_qubits())?;
        Self::new(Observations::exact(rho, &settings)?)
    }

    pub fn observations(&self) -> &Observations {
        &self.0
    }

    pub fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }
}

pub fn pauli_expectation_from_counts(set: &TomographySet, s: &PauliString) -> Result<f64> {
    set.0.expectation(s)
}

/// `ρ = 2⁻ⁿ Σ_s ⟨s⟩ P_s`; Hermitian with unit trace, possibly not PSD.
pub fn linear_inversion(set: &TomographySet) -> Result<ComplexMatrix> {
    let n = set.num_qubits();
    let dim = 1usize << n;
    let norm = 1.0 / dim as f64;
    let mut m = ComplexMatrix::zeros(dim);
    for s in PauliString::all(n) {
        let e = set.0.expectation(&s)?;
        if e == 0.0 {
            continue;
        }
        for row in 0..dim {
            let (col, v) = s.row_entry(row);
            m[(row, col)] += v * (e * norm);
        }
    }
    Ok(m.hermitian_part())
}

/// Euclidean projection of `values` onto the probability simplex.
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Nearest density matrix to the Hermitian `h` in Frobenius norm.
pub fn physical_projection(h: &ComplexMatrix) -> Result<DensityMatrix> {
    let asym = h.hermitian_deviation();
    if asym > HERMITIAN_INPUT_TOL {
        return Err(Error::InvalidState(format!(
            "projection input is not Hermitian (max |H − H†| = {asym:e})"
        )));
    }
    let (values, vectors) = h.eigh();
    let projected = project_to_simplex(&values);
    let dim = h.dim();
    let rebuilt = ComplexMatrix::from_fn(dim, |i, j| {
        (0..dim)
            .filter(|&k| projected[k] > 0.0)
            .map(|k| vectors[(i, k)] * vectors[(j, k)].conj() * projected[k])
            .sum::<Complex64>()
    });
    DensityMatrix::new(rebuilt.hermitian_part())
}

pub fn reconstruct(set: &TomographySet) -> Result<DensityMatrix> {
    physical_projection(&linear_inversion(set)?)
}

/// Ideal `n`-photon GHZ target with phase `phase`.
pub fn ghz_target(n: usize, phase: f64) -> Ket {
    Ket::ghz(n, phase)
}

/// Reconstruction fidelity with `target`, with a Poisson Monte Carlo sigma.
pub fn fidelity_with_uncertainty(
    records: &[CountRecord],
    target: &Ket,
    cfg: &ResampleConfig,
) -> Result<UncertainValue> {
    TomographySet::from_records(records)?;
    resample_scalar(records, cfg, |obs| {
        let rho = reconstruct(&TomographySet::new(obs.clone())?)?;
        fidelity_with_pure(&rho, target)
    })
}

fn expectation_in(m: &ComplexMatrix, psi: &Ket) -> Result<f64> {
    if m.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: psi.dim(),
        });
    }
    let m_psi = m.mul_vec(psi.amplitudes());
    Ok(psi
        .amplitudes()
        .iter()
        .zip(&m_psi)
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        .re)
}

/// `⟨ψ|ρ_lin|ψ⟩` of the unprojected estimate: unbiased, but can leave [0, 1].
pub fn linear_fidelity(set: &TomographySet, target: &Ket) -> Result<f64> {
    expectation_in(&linear_inversion(set)?, target)
}

/// Projected and linear-inversion fidelities with `target`, in that order,
/// sharing one set of Poisson resamples.
pub fn fidelities_with_uncertainty(
    records: &[CountRecord],
    target: &Ket,
    cfg: &ResampleConfig,
) -> Result<[UncertainValue; 2]> {
    TomographySet::from_records(records)?;
    let v = resample_many(records, cfg, |obs| {
        let lin = linear_inversion(&TomographySet::new(obs.clone())?)?;
        let projected = fidelity_with_pure(&physical_projection(&lin)?, target)?;
        Ok(vec![projected, expectation_in(&lin, target)?])
    })?;
    Ok([v[0], v[1]])
}

/// Serialized reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub n: usize,
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
    pub fidelity: UncertainValue,
    /// Fidelity of the estimate before positivity projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_fidelity: Option<UncertainValue>,
}

impl ReconstructionReport {
    pub fn new(rho: &DensityMatrix, fidelity: UncertainValue) -> Self {
        let dim = rho.dim();
        let part = |f: fn(Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..dim)
                .map(|i| (0..dim).map(|j| f(rho[(i, j)])).collect())
                .collect()
        };
        ReconstructionReport {
            n: rho.num_qubits(),
            rho_re: part(|z| z.re),
            rho_im: part(|z| z.im),
            fidelity,
            linear_fidelity: None,
        }
    }

    pub fn with_linear_fidelity(mut self, f: UncertainValue) -> Self {
        self.linear_fidelity = Some(f);
        self
    }

    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let dim = 1usize << self.n;
        if self.rho_re.len() != dim || self.rho_im.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.rho_re.len(),
            });
        }
        let rows: Vec<Vec<Complex64>> = self
            .rho_re
            .iter()
            .zip(&self.rho_im)
            .map(|(re, im)| {
                re.iter()
                    .zip(im)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect()
            })
            .collect();
        DensityMatrix::new(ComplexMatrix::from_rows(&rows)?)
    }
}

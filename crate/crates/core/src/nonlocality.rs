//! Nonlocality certificates for GHZ data: all-versus-nothing (AVN) error
//! rates, Mermin values, the two-setting GHZ entanglement witness, and the
//! inversion of the `(p, c)` noise model against measured numbers.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::DensityMatrix;
use crate::resample::{resample_many, resample_scalar, ResampleConfig, UncertainValue};
use crate::sampler::{Basis, CountRecord, MeasurementSetting};
use crate::tomography::Observations;

/// Error rate below which the AVN contradiction holds, for three and four photons.
pub const AVN_BOUND: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvnSettingSpec {
    pub setting: MeasurementSetting,
    pub predicted_sign: i8,
}

fn specs(table: &[(&str, i8)]) -> Vec<AvnSettingSpec> {
    table
        .iter()
        .map(|&(s, sign)| AvnSettingSpec {
            setting: s.parse().expect("static setting"),
            predicted_sign: sign,
        })
        .collect()
}

/// The eight perfect correlations of the four-photon GHZ state.
pub fn avn4_specs() -> Vec<AvnSettingSpec> {
    specs(&[
        ("XXXX", 1),
        ("YYYY", 1),
        ("XXYY", -1),
        ("XYXY", -1),
        ("XYYX", -1),
        ("YXXY", -1),
        ("YXYX", -1),
        ("YYXX", -1),
    ])
}

/// The four perfect correlations of the three-photon GHZ state.
pub fn avn3_specs() -> Vec<AvnSettingSpec> {
    specs(&[("XXX", 1), ("XYY", -1), ("YXY", -1), ("YYX", -1)])
}

pub fn avn_specs(n: usize) -> Result<Vec<AvnSettingSpec>> {
    match n {
        3 => Ok(avn3_specs()),
        4 => Ok(avn4_specs()),
        _ => Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "{3, 4}",
        }),
    }
}

fn require_xy(setting: &MeasurementSetting) -> Result<()> {
    if setting.is_xy_only() {
        Ok(())
    } else {
        Err(Error::InvalidSetting {
            setting: setting.to_string(),
            reason: "AVN and Mermin settings use only X and Y".into(),
        })
    }
}

/// Probability mass of outcomes whose eigenvalue product differs from
/// `predicted_sign`.
pub fn epsilon_from_frequencies(freqs: &[f64], predicted_sign: i8) -> f64 {
    let wrong_parity = if predicted_sign > 0 { 1 } else { 0 };
    freqs
        .iter()
        .enumerate()
        .filter(|(b, _)| b.count_ones() % 2 == wrong_parity)
        .map(|(_, &p)| p)
        .sum()
}

pub fn avn_epsilon(record: &CountRecord, predicted_sign: i8) -> Result<f64> {
    require_xy(&record.setting)?;
    Ok(epsilon_from_frequencies(
        &record.frequencies(),
        predicted_sign,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvnSettingResult {
    pub setting: MeasurementSetting,
    pub predicted_sign: i8,
    pub epsilon: UncertainValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvnResult {
    pub per_setting: Vec<AvnSettingResult>,
    pub epsilon_mean: UncertainValue,
    pub epsilon_max: UncertainValue,
    pub bound: f64,
    pub violates_local_realism: bool,
}

/// Picks exactly one record per wanted setting out of `records`.
fn select<'a>(
    records: &'a [CountRecord],
    wanted: &[MeasurementSetting],
) -> Result<Vec<CountRecord>> {
    wanted
        .iter()
        .map(|s| {
            let mut hits = records.iter().filter(|r| &r.setting == s);
            let first: &'a CountRecord = hits
                .next()
                .ok_or_else(|| Error::MissingSetting(s.to_string()))?;
            if hits.next().is_some() {
                return Err(Error::DuplicateSetting(s.to_string()));
            }
            Ok(first.clone())
        })
        .collect()
}

fn avn_statistics(obs: &Observations, specs: &[AvnSettingSpec]) -> Result<Vec<f64>> {
    let mut eps = specs
        .iter()
        .map(|s| {
            Ok(epsilon_from_frequencies(
                obs.frequencies(&s.setting)?,
                s.predicted_sign,
            ))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = eps.iter().sum::<f64>() / eps.len() as f64;
    let max = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    eps.push(mean);
    eps.push(max);
    Ok(eps)
}

/// AVN test over the GHZ correlations of the photon count found in
/// `records`; extra records are ignored.
pub fn avn_suite(records: &[CountRecord], cfg: &ResampleConfig) -> Result<AvnResult> {
    let n = records
        .first()
        .map(|r| r.num_qubits())
        .ok_or_else(|| Error::InvalidRecords("no records".into()))?;
    let specs = avn_specs(n)?;
    let wanted: Vec<MeasurementSetting> = specs.iter().map(|s| s.setting.clone()).collect();
    let chosen = select(records, &wanted)?;
    let mut values = resample_many(&chosen, cfg, |obs| avn_statistics(obs, &specs))?;
    let epsilon_max = values.pop().expect("max");
    let epsilon_mean = values.pop().expect("mean");
    let per_setting = specs
        .into_iter()
        .zip(values)
        .map(|(s, epsilon)| AvnSettingResult {
            setting: s.setting,
            predicted_sign: s.predicted_sign,
            epsilon,
        })
        .collect();
    Ok(AvnResult {
        per_setting,
        epsilon_mean,
        epsilon_max,
        bound: AVN_BOUND,
        violates_local_realism: epsilon_max.value < AVN_BOUND,
    })
}

/// Exact AVN error rates of a state, in [`avn_specs`] order.
pub fn avn_exact(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let specs = avn_specs(rho.num_qubits())?;
    let settings: Vec<MeasurementSetting> = specs.iter().map(|s| s.setting.clone()).collect();
    let obs = Observations::exact(rho, &settings)?;
    specs
        .iter()
        .map(|s| {
            Ok(epsilon_from_frequencies(
                obs.frequencies(&s.setting)?,
                s.predicted_sign,
            ))
        })
        .collect()
}

/// Signed terms of the Mermin polynomial over `{X, Y}ⁿ`.
///
/// The sign depends only on the number of Y factors: for four photons
/// `+, −, −, +, +` for 0..=4 Y's; for three photons `XXX` enters with `+`
/// and the two-Y terms with `−`.
pub fn mermin_terms(n: usize) -> Result<Vec<(MeasurementSetting, f64)>> {
    let sign_for: fn(usize) -> f64 = match n {
        3 => |k| match k {
            0 => 1.0,
            2 => -1.0,
            _ => 0.0,
        },
        4 => |k| match k {
            0 | 3 | 4 => 1.0,
            _ => -1.0,
        },
        _ => {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                range: "{3, 4}",
            })
        }
    };
    Ok((0..1usize << n)
        .filter_map(|mask| {
            let sign = sign_for(mask.count_ones() as usize);
            (sign != 0.0).then(|| {
                let bases = (0..n)
                    .map(|q| {
                        if mask >> (n - 1 - q) & 1 == 1 {
                            Basis::Y
                        } else {
                            Basis::X
                        }
                    })
                    .collect();
                (MeasurementSetting::new(bases), sign)
            })
        })
        .collect())
}

/// Signed Mermin sum for correlators supplied by `correlator`.
pub fn mermin_sum(
    n: usize,
    mut correlator: impl FnMut(&MeasurementSetting) -> Result<f64>,
) -> Result<f64> {
    mermin_terms(n)?
        .iter()
        .map(|(s, sign)| Ok(sign * correlator(s)?))
        .sum()
}

pub fn mermin_classical_bound(n: usize) -> f64 {
    (1u64 << (n / 2)) as f64
}

/// `2^{n−1}` for odd `n`, `2^{n−1}·√2` for even `n`.
pub fn mermin_quantum_max(n: usize) -> f64 {
    let base = (1u64 << (n - 1)) as f64;
    if n.is_multiple_of(2) {
        base * SQRT_2
    } else {
        base
    }
}

/// Largest `|M|` over deterministic local assignments of ±1 to every
/// `(photon, basis)` pair.
pub fn local_realistic_max(n: usize) -> Result<f64> {
    let terms = mermin_terms(n)?;
    let mut best = 0.0f64;
    for assignment in 0..1usize << (2 * n) {
        let value = |q: usize, b: Basis| -> f64 {
            let bit = 2 * q + usize::from(b == Basis::Y);
            if assignment >> bit & 1 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let m: f64 = terms
            .iter()
            .map(|(s, sign)| {
                sign * s
                    .bases()
                    .iter()
                    .enumerate()
                    .map(|(q, &b)| value(q, b))
                    .product::<f64>()
            })
            .sum();
        best = best.max(m.abs());
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MerminResult {
    pub n: usize,
    pub value: UncertainValue,
    pub classical_bound: f64,
    pub quantum_max: f64,
    /// `(value − classical_bound)/sigma`; absent when sigma is zero.
    pub standard_deviations_of_violation: Option<f64>,
    /// GHZ phase the records were prepared with, when known.
    pub state_phase: Option<f64>,
}

impl MerminResult {
    fn new(n: usize, value: UncertainValue, state_phase: Option<f64>) -> Self {
        let classical_bound = mermin_classical_bound(n);
        MerminResult {
            n,
            value,
            classical_bound,
            quantum_max: mermin_quantum_max(n),
            standard_deviations_of_violation: (value.sigma > 0.0)
                .then(|| (value.value - classical_bound) / value.sigma),
            state_phase,
        }
    }

    pub fn violates_local_realism(&self) -> bool {
        self.value.value > self.classical_bound
    }
}

fn mermin_from_records(
    n: usize,
    records: &[CountRecord],
    cfg: &ResampleConfig,
    state_phase: Option<f64>,
) -> Result<MerminResult> {
    let wanted: Vec<MeasurementSetting> = mermin_terms(n)?.into_iter().map(|(s, _)| s).collect();
    if let Some(r) = records.iter().find(|r| r.num_qubits() != n) {
        return Err(Error::InvalidRecords(format!(
            "{}-photon record {} for a {n}-photon Mermin test",
            r.num_qubits(),
            r.setting
        )));
    }
    for s in &wanted {
        require_xy(s)?;
    }
    let chosen = select(records, &wanted)?;
    let full = (1usize << n) - 1;
    let value = resample_scalar(&chosen, cfg, |obs| {
        mermin_sum(n, |s| obs.correlator(s, full)).map(f64::abs)
    })?;
    Ok(MerminResult::new(n, value, state_phase))
}

/// `M₄` from the sixteen `{X, Y}⁴` records.
pub fn mermin_m4(
    records: &[CountRecord],
    cfg: &ResampleConfig,
    state_phase: Option<f64>,
) -> Result<MerminResult> {
    mermin_from_records(4, records, cfg, state_phase)
}

/// `M₃` from the records of XXX, XYY, YXY and YYX.
pub fn mermin_m3(
    records: &[CountRecord],
    cfg: &ResampleConfig,
    state_phase: Option<f64>,
) -> Result<MerminResult> {
    mermin_from_records(3, records, cfg, state_phase)
}

/// Exact `|M|` of a three- or four-photon state.
pub fn mermin_exact(rho: &DensityMatrix) -> Result<f64> {
    let n = rho.num_qubits();
    let full = (1usize << n) - 1;
    let settings: Vec<MeasurementSetting> = mermin_terms(n)?.into_iter().map(|(s, _)| s).collect();
    let obs = Observations::exact(rho, &settings)?;
    mermin_sum(n, |s| obs.correlator(s, full)).map(f64::abs)
}

/// Fraction of Z-basis outcomes in the joint +1 eigenspace of every
/// neighboring `σz σz` pair.
fn z_parity_fraction(freqs: &[f64], n: usize) -> f64 {
    freqs
        .iter()
        .enumerate()
        .filter(|&(b, _)| (1..n).all(|i| (b >> (n - i)) & 1 == (b >> (n - 1 - i)) & 1))
        .map(|(_, &p)| p)
        .sum()
}

/// `⟨W⟩ = 3 − 2[(⟨XXXX⟩ + 1)/2 + q]` from the XXXX and ZZZZ frequencies.
pub fn witness_value(obs: &Observations) -> Result<f64> {
    if obs.num_qubits() != 4 {
        return Err(Error::InvalidRecords(format!(
            "witness needs four-photon data, found {} photons",
            obs.num_qubits()
        )));
    }
    let xxxx = obs.correlator(&"XXXX".parse()?, 0b1111)?;
    let q = z_parity_fraction(obs.frequencies(&"ZZZZ".parse()?)?, 4);
    Ok(3.0 - 2.0 * ((xxxx + 1.0) / 2.0 + q))
}

pub fn witness_ghz4(records: &[CountRecord], cfg: &ResampleConfig) -> Result<UncertainValue> {
    let chosen = select(records, &["XXXX".parse()?, "ZZZZ".parse()?])?;
    resample_scalar(&chosen, cfg, witness_value)
}

pub fn witness_exact(rho: &DensityMatrix) -> Result<f64> {
    witness_value(&Observations::exact(
        rho,
        &["XXXX".parse()?, "ZZZZ".parse()?],
    )?)
}

/// Closed-form witness of the `(p, c)` model.
pub fn witness_model(p: f64, c: f64) -> f64 {
    3.0 - 2.0 * ((p * c + 1.0) / 2.0 + p + (1.0 - p) / 8.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub fidelity4: f64,
    pub epsilon_mean: f64,
    pub mermin4: f64,
    pub fidelity3: f64,
    pub mermin3: f64,
    pub epsilon3: f64,
    pub witness: f64,
}

impl Predictions {
    pub fn for_model(p: f64, c: f64) -> Self {
        let pc = p * c;
        Predictions {
            fidelity4: crate::circuit::ghz_model_fidelity(4, p, c),
            epsilon_mean: (1.0 - pc) / 2.0,
            mermin4: pc * mermin_quantum_max(4),
            fidelity3: crate::circuit::ghz_model_fidelity(3, p, c),
            mermin3: pc * mermin_quantum_max(3),
            epsilon3: (1.0 - pc) / 2.0,
            witness: witness_model(p, c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p_white: f64,
    pub coherence: f64,
    pub predictions: Predictions,
}

/// Solves `p·c = 1 − 2ε̄` and `p(1 + c)/2 + (1 − p)/16 = F` for `(p, c)`.
pub fn calibrate(fidelity: f64, epsilon_mean: f64) -> Result<Calibration> {
    for (name, v) in [("fidelity", fidelity), ("epsilon_mean", epsilon_mean)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange {
                name,
                value: v,
                range: "[0, 1]",
            });
        }
    }
    let pc = 1.0 - 2.0 * epsilon_mean;
    // F = p/2 + pc/2 + (1 − p)/16  ⇒  p = (F − pc/2 − 1/16) / (7/16)
    let p = (fidelity - pc / 2.0 - 1.0 / 16.0) / (7.0 / 16.0);
    let tol = 1e-12;
    let fail = Error::NoCalibration {
        fidelity,
        epsilon: epsilon_mean,
    };
    if !(p > 0.0 && p <= 1.0 + tol) || pc < -tol {
        return Err(fail);
    }
    let p = p.min(1.0);
    let c = pc.max(0.0) / p;
    if c > 1.0 + tol {
        return Err(fail);
    }
    let c = c.min(1.0);
    Ok(Calibration {
        p_white: p,
        coherence: c,
        predictions: Predictions::for_model(p, c),
    })
}

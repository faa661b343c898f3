//! The full state → sample → analyze pipeline and its artifacts.

use std::path::{Path, PathBuf};

use ghz_core::circuit::{fidelity_from_visibility, ghz4_state, NoiseParams};
use ghz_core::nonlocality::{
    avn_suite, calibrate, mermin_m3, mermin_m4, mermin_terms, witness_ghz4, witness_model,
    AvnResult, Calibration, MerminResult,
};
use ghz_core::sampler::{derive_seed, herald_records, sample_experiment};
use ghz_core::tomography::{
    enumerate_settings, fidelities_with_uncertainty, fidelity_with_uncertainty, ghz_target,
    reconstruct, ReconstructionReport, TomographySet,
};
use ghz_core::{CountRecord, ExperimentRecords, ResampleConfig, SamplerConfig, UncertainValue};
use serde::{Deserialize, Serialize};

use crate::config::{Analysis, CalibrationInput, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::fringe::{fringe_scan, visibility_sigma, with_counting_noise, FringeKind, FringeParams};

pub const SCHEMA: &str = "ghz-report/1";
pub const PHOTONS: [char; 4] = ['A', 'B', 'C', 'D'];

// Seed domains of the sub-experiments derived from the master seed.
pub const TOMO_RECORDS: u64 = 1;
pub const MERMIN_RECORDS: u64 = 2;
pub const FRINGE_COUNTS: u64 = 3;
pub const TOMO_RESAMPLE: u64 = 10;
pub const AVN_RESAMPLE: u64 = 11;
pub const MERMIN_RESAMPLE: u64 = 12;
pub const WITNESS_RESAMPLE: u64 = 13;
pub const FRINGE_RESAMPLE: u64 = 14;
pub const HERALD_RESAMPLE: u64 = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessBlock {
    pub value: UncertainValue,
    /// Closed-form value of the configured noise model.
    pub model: f64,
    pub entangled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeBlock {
    pub kind: FringeKind,
    /// Source index for path-correlation fringes.
    pub source: Option<usize>,
    pub model_visibility: f64,
    pub fitted_visibility: UncertainValue,
    /// Werner-state fidelity implied by the fitted visibility.
    pub werner_fidelity: Option<f64>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    pub input: CalibrationInput,
    pub result: Calibration,
    /// Same calibration fed with this run's measured `F` and `ε̄`.
    pub from_run: Option<Calibration>,
}

/// One row per heralding photon of the three-photon experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreePhotonRow {
    pub projected_photon: char,
    pub fidelity: Option<UncertainValue>,
    pub epsilon_max: Option<UncertainValue>,
    pub mermin3: Option<UncertainValue>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tomography: Option<ReconstructionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avn: Option<AvnResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mermin: Option<MerminResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub three_photon: Option<Vec<ThreePhotonRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fringes: Option<Vec<FringeBlock>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hom: Option<FringeBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub results: Results,
}

impl ExperimentReport {
    pub fn to_json(&self) -> CliResult<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(ghz_core::Error::from)?;
        text.push('\n');
        Ok(text)
    }

    /// Every local-realism or entanglement check carried by the report, as
    /// `(label, passed)`.
    pub fn bound_checks(&self) -> Vec<(String, bool)> {
        let r = &self.results;
        let mut checks = Vec::new();
        if let Some(avn) = &r.avn {
            checks.push(("AVN epsilon_max < 1/4".into(), avn.violates_local_realism));
        }
        if let Some(m) = &r.mermin {
            checks.push((
                format!("M{} > {}", m.n, m.classical_bound),
                m.violates_local_realism(),
            ));
        }
        if let Some(w) = &r.witness {
            checks.push(("witness < 0".into(), w.entangled));
        }
        for row in r.three_photon.iter().flatten() {
            if let Some(e) = row.epsilon_max {
                checks.push((
                    format!("photon {} AVN epsilon_max < 1/4", row.projected_photon),
                    e.value < ghz_core::nonlocality::AVN_BOUND,
                ));
            }
            if let Some(m) = row.mermin3 {
                checks.push((
                    format!("photon {} M3 > 2", row.projected_photon),
                    m.value > 2.0,
                ));
            }
        }
        checks
    }

    /// Fails with a bound error naming every check that did not pass.
    pub fn require_violation(&self) -> CliResult<()> {
        let failed: Vec<String> = self
            .bound_checks()
            .into_iter()
            .filter(|(_, ok)| !ok)
            .map(|(label, _)| label)
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Bound(failed.join("; ")))
        }
    }
}

/// A file to be written into the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<Artifact>,
}

fn resample_cfg(cfg: &ExperimentConfig, domain: u64) -> ResampleConfig {
    ResampleConfig::new(cfg.resamples, derive_seed(cfg.sampler.seed, domain))
}

fn sampled(
    rho: &ghz_core::DensityMatrix,
    settings: &[ghz_core::MeasurementSetting],
    cfg: &ExperimentConfig,
    domain: u64,
) -> CliResult<Vec<CountRecord>> {
    let sampler = SamplerConfig {
        seed: derive_seed(cfg.sampler.seed, domain),
        ..cfg.sampler.clone()
    };
    Ok(sample_experiment(rho, settings, &sampler)?)
}

fn records_artifact(name: &str, n: usize, records: Vec<CountRecord>) -> CliResult<Artifact> {
    let mut contents = ExperimentRecords::new(n, records)?.to_json()?;
    contents.push('\n');
    Ok(Artifact {
        name: name.into(),
        contents,
    })
}

fn fringe_block(
    cfg: &ExperimentConfig,
    kind: FringeKind,
    params: FringeParams,
    source: Option<usize>,
    file: String,
    artifacts: &mut Vec<Artifact>,
) -> CliResult<FringeBlock> {
    let offset = source.map_or(2, |s| s as u64);
    let clean = fringe_scan(kind, &params, cfg.fringe_steps)?;
    let trials = cfg.sampler.shots_per_setting;
    let noisy = with_counting_noise(
        &clean,
        trials,
        derive_seed(derive_seed(cfg.sampler.seed, FRINGE_COUNTS), offset),
    )?;
    let sigma = visibility_sigma(
        &noisy,
        trials,
        cfg.resamples,
        derive_seed(derive_seed(cfg.sampler.seed, FRINGE_RESAMPLE), offset),
    )?;
    let fitted = UncertainValue {
        value: noisy.fitted_visibility,
        sigma,
        resamples: cfg.resamples,
    };
    let werner_fidelity = match kind {
        FringeKind::PathCorrelation => {
            Some(fidelity_from_visibility(fitted.value.clamp(0.0, 1.0))?)
        }
        FringeKind::Hhom => None,
    };
    artifacts.push(Artifact {
        name: file.clone(),
        contents: noisy.to_csv()?,
    });
    Ok(FringeBlock {
        kind,
        source,
        model_visibility: noisy.model_visibility,
        fitted_visibility: fitted,
        werner_fidelity,
        file,
    })
}

fn three_photon_rows(
    cfg: &ExperimentConfig,
    raw: &[CountRecord],
) -> CliResult<Vec<ThreePhotonRow>> {
    let target = ghz_target(3, cfg.noise.phase);
    PHOTONS
        .iter()
        .enumerate()
        .map(|(q, &label)| {
            let heralded = herald_records(raw, q)?;
            let rcfg = |k: u64| resample_cfg(cfg, HERALD_RESAMPLE + 4 * q as u64 + k);
            Ok(ThreePhotonRow {
                projected_photon: label,
                fidelity: cfg
                    .wants(Analysis::Tomo)
                    .then(|| fidelity_with_uncertainty(&heralded, &target, &rcfg(0)))
                    .transpose()?,
                epsilon_max: cfg
                    .wants(Analysis::Avn)
                    .then(|| avn_suite(&heralded, &rcfg(1)).map(|a| a.epsilon_max))
                    .transpose()?,
                mermin3: cfg
                    .wants(Analysis::Mermin)
                    .then(|| mermin_m3(&heralded, &rcfg(2), Some(cfg.noise.phase)).map(|m| m.value))
                    .transpose()?,
            })
        })
        .collect()
}

/// Runs every requested analysis; nothing is written.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut results = Results::default();
    let mut artifacts = Vec::new();

    let needs_tomo_records = cfg.wants(Analysis::Tomo)
        || cfg.wants(Analysis::Avn)
        || cfg.wants(Analysis::Witness)
        || (cfg.n == 3 && cfg.wants(Analysis::Mermin));
    let raw = if needs_tomo_records {
        let rho = ghz4_state(&cfg.noise)?;
        let records = sampled(&rho, &enumerate_settings(4)?, cfg, TOMO_RECORDS)?;
        artifacts.push(records_artifact("records.json", 4, records.clone())?);
        records
    } else {
        Vec::new()
    };

    if cfg.n == 4 {
        if cfg.wants(Analysis::Tomo) {
            let target = ghz_target(4, cfg.noise.phase);
            let [fidelity, linear] =
                fidelities_with_uncertainty(&raw, &target, &resample_cfg(cfg, TOMO_RESAMPLE))?;
            let rho = reconstruct(&TomographySet::from_records(&raw)?)?;
            results.tomography =
                Some(ReconstructionReport::new(&rho, fidelity).with_linear_fidelity(linear));
        }
        if cfg.wants(Analysis::Avn) {
            results.avn = Some(avn_suite(&raw, &resample_cfg(cfg, AVN_RESAMPLE))?);
        }
        if cfg.wants(Analysis::Mermin) {
            let noise = NoiseParams {
                phase: cfg.mermin_phase,
                ..cfg.noise.clone()
            };
            let rho = ghz4_state(&noise)?;
            let settings: Vec<_> = mermin_terms(4)?.into_iter().map(|(s, _)| s).collect();
            let records = sampled(&rho, &settings, cfg, MERMIN_RECORDS)?;
            results.mermin = Some(mermin_m4(
                &records,
                &resample_cfg(cfg, MERMIN_RESAMPLE),
                Some(cfg.mermin_phase),
            )?);
            artifacts.push(records_artifact("mermin_records.json", 4, records)?);
        }
        if cfg.wants(Analysis::Witness) {
            let value = witness_ghz4(&raw, &resample_cfg(cfg, WITNESS_RESAMPLE))?;
            results.witness = Some(WitnessBlock {
                value,
                model: witness_model(cfg.noise.p_white, cfg.noise.coherence),
                entangled: value.value < 0.0,
            });
        }
    } else if cfg.wants(Analysis::Tomo) || cfg.wants(Analysis::Avn) || cfg.wants(Analysis::Mermin) {
        results.three_photon = Some(three_photon_rows(cfg, &raw)?);
    }

    if cfg.wants(Analysis::Fringes) {
        let blocks = cfg
            .noise
            .source_visibility
            .iter()
            .enumerate()
            .map(|(s, &v)| {
                let params = FringeParams {
                    visibility: v,
                    overlap: cfg.noise.overlap,
                    purity: cfg.noise.purity,
                };
                fringe_block(
                    cfg,
                    FringeKind::PathCorrelation,
                    params,
                    Some(s),
                    format!("fringe_source{}.csv", s + 1),
                    &mut artifacts,
                )
            })
            .collect::<CliResult<Vec<_>>>()?;
        results.fringes = Some(blocks);
    }
    if cfg.wants(Analysis::Hom) {
        let params = FringeParams {
            visibility: 1.0,
            overlap: cfg.noise.overlap,
            purity: cfg.noise.purity,
        };
        results.hom = Some(fringe_block(
            cfg,
            FringeKind::Hhom,
            params,
            None,
            "hhom.csv".into(),
            &mut artifacts,
        )?);
    }
    if cfg.wants(Analysis::Calibrate) {
        let from_run = match (&results.tomography, &results.avn) {
            (Some(t), Some(a)) => calibrate(t.fidelity.value, a.epsilon_mean.value).ok(),
            _ => None,
        };
        results.calibration = Some(CalibrationBlock {
            input: cfg.calibration.clone(),
            result: calibrate(cfg.calibration.fidelity, cfg.calibration.epsilon_mean)?,
            from_run,
        });
    }

    let report = ExperimentReport {
        schema: SCHEMA.into(),
        seed: cfg.sampler.seed,
        config: cfg.clone(),
        results,
    };
    artifacts.push(Artifact {
        name: "report.json".into(),
        contents: report.to_json()?,
    });
    Ok(RunOutput { report, artifacts })
}

/// Writes each artifact through a temporary file in `dir` and renames it
/// into place, so readers never observe a partial file.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            let io = |e: std::io::Error| CliError::Io {
                path: path.clone(),
                source: e,
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            std::io::Write::write_all(&mut tmp, a.contents.as_bytes()).map_err(io)?;
            tmp.persist(&path).map_err(|e| io(e.error))?;
            Ok(path)
        })
        .collect()
}

/// Timestamp sidecar, kept out of the report so the report stays
/// reproducible.
pub fn sidecar() -> Artifact {
    let millis = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let doc = serde_json::json!({
        "report": "report.json",
        "generated_unix_ms": millis,
        "version": env!("CARGO_PKG_VERSION"),
    });
    Artifact {
        name: "report.meta.json".into(),
        contents: format!("{doc:#}\n"),
    }
}

/// [`run`] followed by writing all artifacts and the sidecar into
/// `cfg.output_dir`.
pub fn run_and_write(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let mut out = run(cfg)?;
    out.artifacts.push(sidecar());
    write_artifacts(&cfg.output_dir, &out.artifacts)?;
    Ok(out)
}

//! Experiment configuration document.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ghz_core::circuit::{NoiseParams, MERMIN4_OPTIMAL_PHASE};
use ghz_core::resample::MIN_RESAMPLES;
use ghz_core::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Tomo,
    Avn,
    Mermin,
    Witness,
    Fringes,
    Hom,
    Calibrate,
}

impl Analysis {
    pub const ALL: [Analysis; 7] = [
        Analysis::Tomo,
        Analysis::Avn,
        Analysis::Mermin,
        Analysis::Witness,
        Analysis::Fringes,
        Analysis::Hom,
        Analysis::Calibrate,
    ];
}

/// Measured inputs for the `(p, c)` calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationInput {
    pub fidelity: f64,
    pub epsilon_mean: f64,
}

impl Default for CalibrationInput {
    fn default() -> Self {
        CalibrationInput {
            fidelity: 0.729,
            epsilon_mean: 0.191,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub noise: NoiseParams,
    pub sampler: SamplerConfig,
    pub analyses: BTreeSet<Analysis>,
    pub output_dir: PathBuf,
    pub resamples: usize,
    /// GHZ phase prepared for the four-photon Mermin run.
    pub mermin_phase: f64,
    pub calibration: CalibrationInput,
    /// Points per interference fringe.
    pub fringe_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 4,
            noise: NoiseParams::default(),
            sampler: SamplerConfig::default(),
            analyses: Analysis::ALL.into_iter().collect(),
            output_dir: PathBuf::from("ghz-out"),
            resamples: 1000,
            mermin_phase: MERMIN4_OPTIMAL_PHASE,
            calibration: CalibrationInput::default(),
            fringe_steps: 100,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON document; unknown or mistyped fields are reported with
    /// their full path.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
                path: e.path().to_string(),
                reason: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |path: &str, reason: String| {
            Err(CliError::Config {
                path: path.to_string(),
                reason,
            })
        };
        if !(3..=4).contains(&self.n) {
            return bad("n", format!("must be 3 or 4, found {}", self.n));
        }
        if self.analyses.is_empty() {
            return bad("analyses", "at least one analysis is required".into());
        }
        if self.n == 3 && self.analyses.contains(&Analysis::Witness) {
            return bad(
                "analyses",
                "the witness needs four-photon data (n = 4)".into(),
            );
        }
        if self.resamples < MIN_RESAMPLES {
            return bad(
                "resamples",
                format!("must be at least {MIN_RESAMPLES}, found {}", self.resamples),
            );
        }
        if self.fringe_steps < 2 {
            return bad(
                "fringe_steps",
                format!("must be at least 2, found {}", self.fringe_steps),
            );
        }
        if !self.mermin_phase.is_finite() {
            return bad("mermin_phase", "must be finite".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir", "must not be empty".into());
        }
        self.noise
            .validate()
            .or_else(|e| bad("noise", e.to_string()))?;
        self.sampler
            .validate()
            .or_else(|e| bad("sampler", e.to_string()))?;
        // Only the range is checked here; solvability is the analysis' job.
        for (field, v) in [
            ("calibration.fidelity", self.calibration.fidelity),
            ("calibration.epsilon_mean", self.calibration.epsilon_mean),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, format!("must lie in [0, 1], found {v}"));
            }
        }
        Ok(())
    }

    pub fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }
}

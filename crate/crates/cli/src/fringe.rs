//! Two-photon interference scans and their visibility fits.

use std::f64::consts::PI;
use std::str::FromStr;

use ghz_core::circuit::{hhom_fringe, path_correlation_fringe};
use ghz_core::resample::MIN_RESAMPLES;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FringeKind {
    /// Idler fixed in `|+⟩`, signal analyzer phase φ swept over a period.
    PathCorrelation,
    /// Heralded HOM coincidence versus MZI transmittance `t ∈ [0, 1]`.
    Hhom,
}

impl FringeKind {
    pub fn axis(self) -> &'static str {
        match self {
            FringeKind::PathCorrelation => "phi",
            FringeKind::Hhom => "t",
        }
    }
}

impl FromStr for FringeKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "path_correlation" | "path" => Ok(FringeKind::PathCorrelation),
            "hhom" | "hom" => Ok(FringeKind::Hhom),
            other => Err(CliError::Usage(format!(
                "unknown fringe kind `{other}` (expected path_correlation or hhom)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeParams {
    pub visibility: f64,
    pub overlap: f64,
    pub purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub x: f64,
    pub coincidence: f64,
    /// Simulated counts when the scan carries counting noise.
    pub counts: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub kind: FringeKind,
    pub points: Vec<FringePoint>,
    pub fitted_visibility: f64,
    /// Visibility implied by the input parameters.
    pub model_visibility: f64,
}

fn axis_values(kind: FringeKind, steps: usize) -> Vec<f64> {
    match kind {
        // One full period, endpoint excluded so every phase is weighted once.
        FringeKind::PathCorrelation => (0..steps)
            .map(|k| 2.0 * PI * k as f64 / steps as f64)
            .collect(),
        FringeKind::Hhom => (0..steps).map(|k| k as f64 / (steps - 1) as f64).collect(),
    }
}

fn least_squares(design: DMatrix<f64>, y: &[f64]) -> CliResult<DVector<f64>> {
    design
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-14)
        .map_err(|e| CliError::Usage(format!("fringe fit failed: {e}")))
}

/// Fits `a + b·cos φ + d·sin φ`; `V = √(b² + d²)/a`.
pub fn fit_path_visibility(phis: &[f64], y: &[f64]) -> CliResult<f64> {
    if phis.len() < 3 {
        return Err(CliError::Usage(
            "a phase fringe fit needs at least 3 points".into(),
        ));
    }
    let design = DMatrix::from_fn(phis.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => phis[r].cos(),
        _ => phis[r].sin(),
    });
    let coef = least_squares(design, y)?;
    Ok(coef[1].hypot(coef[2]) / coef[0])
}

/// Fits a parabola in `t`; `V = 1 − 2·CC_min/CC(0)`, with `CC_min` at the
/// vertex and `CC(0)` the fully distinguishable (pass) level.
pub fn fit_hhom_visibility(ts: &[f64], y: &[f64]) -> CliResult<f64> {
    if ts.len() < 3 {
        return Err(CliError::Usage(
            "an HHOM fit needs at least 3 points".into(),
        ));
    }
    let design = DMatrix::from_fn(ts.len(), 3, |r, c| ts[r].powi(c as i32));
    let coef = least_squares(design, y)?;
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);
    if c2 <= 0.0 || c0 <= 0.0 {
        return Err(CliError::Usage("HHOM scan has no interior minimum".into()));
    }
    let cc_min = c0 - c1 * c1 / (4.0 * c2);
    Ok(1.0 - 2.0 * cc_min / c0)
}

fn fit(kind: FringeKind, xs: &[f64], ys: &[f64]) -> CliResult<f64> {
    match kind {
        FringeKind::PathCorrelation => fit_path_visibility(xs, ys),
        FringeKind::Hhom => fit_hhom_visibility(xs, ys),
    }
}

/// Noiseless scan of `steps` points with its fitted visibility.
pub fn fringe_scan(kind: FringeKind, params: &FringeParams, steps: usize) -> CliResult<FringeScan> {
    if steps < 2 {
        return Err(CliError::Usage(format!(
            "a fringe needs at least 2 steps, found {steps}"
        )));
    }
    let xs = axis_values(kind, steps);
    let ys = xs
        .iter()
        .map(|&x| match kind {
            FringeKind::PathCorrelation => path_correlation_fringe(params.visibility, x),
            FringeKind::Hhom => hhom_fringe(params.overlap, params.purity, x),
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let model_visibility = match kind {
        FringeKind::PathCorrelation => params.visibility,
        FringeKind::Hhom => params.overlap * params.overlap * params.purity,
    };
    let fitted_visibility = fit(kind, &xs, &ys)?;
    Ok(FringeScan {
        kind,
        points: xs
            .into_iter()
            .zip(ys)
            .map(|(x, coincidence)| FringePoint {
                x,
                coincidence,
                counts: None,
            })
            .collect(),
        fitted_visibility,
        model_visibility,
    })
}

/// Replaces each point by binomial counts out of `trials` heralded events
/// and refits on the observed frequencies.
pub fn with_counting_noise(scan: &FringeScan, trials: u64, seed: u64) -> CliResult<FringeScan> {
    if trials == 0 {
        return Err(CliError::Usage(
            "counting noise needs at least one trial per point".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let points: Vec<FringePoint> = scan
        .points
        .iter()
        .map(|p| {
            let prob = p.coincidence.clamp(0.0, 1.0);
            let counts = Binomial::new(trials, prob)
                .expect("probability in [0, 1]")
                .sample(&mut rng);
            FringePoint {
                x: p.x,
                coincidence: counts as f64 / trials as f64,
                counts: Some(counts),
            }
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.coincidence).collect();
    Ok(FringeScan {
        kind: scan.kind,
        fitted_visibility: fit(scan.kind, &xs, &ys)?,
        model_visibility: scan.model_visibility,
        points,
    })
}

/// Poisson Monte Carlo sigma of the fitted visibility of a noisy scan.
pub fn visibility_sigma(
    scan: &FringeScan,
    trials: u64,
    resamples: usize,
    seed: u64,
) -> CliResult<f64> {
    if resamples < MIN_RESAMPLES {
        return Err(CliError::Usage(format!(
            "at least {MIN_RESAMPLES} resamples are required"
        )));
    }
    let xs: Vec<f64> = scan.points.iter().map(|p| p.x).collect();
    let counts: Vec<u64> = scan
        .points
        .iter()
        .map(|p| {
            p.counts
                .ok_or_else(|| CliError::Usage("scan has no counts to resample".into()))
        })
        .collect::<CliResult<_>>()?;
    let fits = (0..resamples)
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let ys: Vec<f64> = counts
                .iter()
                .map(|&c| {
                    let drawn = if c == 0 {
                        0.0
                    } else {
                        Poisson::new(c as f64)
                            .expect("positive mean")
                            .sample(&mut rng)
                    };
                    drawn / trials as f64
                })
                .collect();
            fit(scan.kind, &xs, &ys)
        })
        .collect::<CliResult<Vec<f64>>>()?;
    let n = fits.len() as f64;
    let mean = fits.iter().sum::<f64>() / n;
    Ok((fits.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

impl FringeScan {
    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Usage(format!("csv: {e}"));
        w.write_record([self.kind.axis(), "coincidence", "counts"])
            .map_err(io)?;
        for p in &self.points {
            w.write_record([
                p.x.to_string(),
                p.coincidence.to_string(),
                p.counts.map(|c| c.to_string()).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(visibility: f64, overlap: f64, purity: f64) -> FringeParams {
        FringeParams {
            visibility,
            overlap,
            purity,
        }
    }

    #[test]
    fn noiseless_path_fit_is_exact() {
        for steps in [3, 7, 100] {
            let scan =
                fringe_scan(FringeKind::PathCorrelation, &params(0.935, 1.0, 1.0), steps).unwrap();
            assert!(
                (scan.fitted_visibility - 0.935).abs() <= 1e-6,
                "steps {steps}"
            );
        }
    }

    #[test]
    fn noiseless_hhom_fit_is_exact() {
        // σ²·Pur = 0.814 with Pur = 0.902.
        let overlap = (0.814f64 / 0.902).sqrt();
        let scan = fringe_scan(FringeKind::Hhom, &params(1.0, overlap, 0.902), 100).unwrap();
        assert!((scan.fitted_visibility - 0.814).abs() <= 1e-6);
    }

    #[test]
    fn perfect_hhom_dip_reaches_zero() {
        let scan = fringe_scan(FringeKind::Hhom, &params(1.0, 1.0, 1.0), 3).unwrap();
        assert_eq!(scan.points[1].x, 0.5);
        assert!(scan.points[1].coincidence.abs() <= 1e-15);
        assert!((scan.fitted_visibility - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn too_few_steps_and_bad_kind() {
        assert!(fringe_scan(FringeKind::Hhom, &params(1.0, 1.0, 1.0), 1).is_err());
        assert!("sideways".parse::<FringeKind>().is_err());
        assert_eq!("hhom".parse::<FringeKind>().unwrap(), FringeKind::Hhom);
    }

    #[test]
    fn noisy_fit_is_close_and_seeded() {
        let scan = fringe_scan(FringeKind::PathCorrelation, &params(0.935, 1.0, 1.0), 40).unwrap();
        let a = with_counting_noise(&scan, 20_000, 4).unwrap();
        let b = with_counting_noise(&scan, 20_000, 4).unwrap();
        assert_eq!(a, b);
        assert!((a.fitted_visibility - 0.935).abs() < 0.02);
        let sigma = visibility_sigma(&a, 20_000, 200, 1).unwrap();
        assert!(sigma > 0.0 && sigma < 0.01, "{sigma}");
        assert!(visibility_sigma(&scan, 1, 200, 1).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let scan = fringe_scan(FringeKind::Hhom, &params(1.0, 1.0, 1.0), 3).unwrap();
        let text = scan.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,coincidence,counts");
        assert_eq!(lines.len(), 4);
    }
}

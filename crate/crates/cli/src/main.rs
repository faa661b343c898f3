use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ghz_cli::config::ExperimentConfig;
use ghz_cli::error::{CliError, CliResult};
use ghz_cli::fringe::{fringe_scan, with_counting_noise, FringeKind, FringeParams};
use ghz_cli::pipeline::{self, Artifact, PHOTONS};
use ghz_core::circuit::{ghz_state, NoiseParams};
use ghz_core::nonlocality::{
    avn_suite, calibrate, mermin_m3, mermin_m4, mermin_terms, witness_ghz4, AVN_BOUND,
};
use ghz_core::qmath::fidelity_with_pure;
use ghz_core::sampler::{derive_seed, herald_records, sample_experiment};
use ghz_core::tomography::{
    enumerate_settings, fidelities_with_uncertainty, ghz_target, reconstruct, ReconstructionReport,
    TomographySet,
};
use ghz_core::{CountRecord, ExperimentRecords, ResampleConfig, UncertainValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SettingGroup {
    /// All 3ⁿ tomography settings.
    Tomo,
    /// The {X, Y}ⁿ Mermin settings, at the configured Mermin phase.
    Mermin,
}

/// Simulator and analysis pipelines for a four-photon GHZ chip.
#[derive(Debug, Parser)]
#[command(name = "ghz", version)]
struct Cli {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `sampler.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`. Without it, single
    /// commands print to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Shots per setting; overrides `sampler.shots_per_setting`.
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Poisson resamples for error bars; overrides `resamples`.
    #[arg(long, global = true)]
    resamples: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Exit with status 2 unless every local-realism bound is violated.
    #[arg(long, global = true)]
    require_violation: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the configured GHZ density matrix.
    State,
    /// Simulate count records.
    Sample {
        #[arg(long, value_enum, default_value_t = SettingGroup::Tomo)]
        settings: SettingGroup,
    },
    /// State tomography and fidelity from a records file.
    Tomo(RecordArgs),
    /// All-versus-nothing error rates from a records file.
    Avn(RecordArgs),
    /// Mermin value from a records file.
    Mermin(RecordArgs),
    /// Entanglement witness from a records file with XXXX and ZZZZ.
    Witness {
        #[arg(long)]
        records: PathBuf,
    },
    /// Interference fringe scan as plot data.
    Fringe {
        #[arg(long, default_value = "path_correlation")]
        kind: String,
        #[arg(long, default_value_t = 0.935)]
        visibility: f64,
        #[arg(long, default_value_t = 0.95)]
        overlap: f64,
        #[arg(long, default_value_t = 0.902)]
        purity: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Heralded events per point; adds binomial counting noise.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Fit the (p, c) noise model to a measured fidelity and mean AVN error.
    Calibrate {
        #[arg(long)]
        fidelity: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Full pipeline: sample, analyze, write records and report.
    Run,
}

#[derive(Debug, clap::Args)]
struct RecordArgs {
    #[arg(long)]
    records: PathBuf,
    /// Analyze the three-photon state heralded by this photon in |+⟩.
    #[arg(long)]
    herald: Option<char>,
    /// GHZ phase of the target state.
    #[arg(long)]
    phase: Option<f64>,
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(shots) = cli.shots {
        cfg.sampler.shots_per_setting = shots;
    }
    if let Some(r) = cli.resamples {
        cfg.resamples = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_records(path: &Path) -> CliResult<Vec<CountRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(ExperimentRecords::from_json(&text)?.records)
}

fn heralded(records: Vec<CountRecord>, herald: Option<char>) -> CliResult<Vec<CountRecord>> {
    let Some(label) = herald else {
        return Ok(records);
    };
    let q = PHOTONS
        .iter()
        .position(|&p| p == label.to_ascii_uppercase())
        .ok_or_else(|| CliError::Usage(format!("unknown photon `{label}` (expected A to D)")))?;
    Ok(herald_records(&records, q)?)
}

fn json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(ghz_core::Error::from)?;
    text.push('\n');
    Ok(text)
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Usage(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn only_json(cli: &Cli, command: &str) -> CliResult<()> {
    if cli.format == Format::Csv {
        return Err(CliError::Usage(format!(
            "`{command}` only supports --format json"
        )));
    }
    Ok(())
}

/// Prints `contents`, or writes it as `name` under `--out` when given.
fn emit(cli: &Cli, name: &str, contents: String) -> CliResult<()> {
    match &cli.out {
        Some(dir) => {
            let paths = pipeline::write_artifacts(
                dir,
                &[Artifact {
                    name: name.into(),
                    contents,
                }],
            )?;
            println!("wrote {}", paths[0].display());
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn resample_cfg(cfg: &ExperimentConfig, domain: u64) -> ResampleConfig {
    ResampleConfig::new(cfg.resamples, derive_seed(cfg.sampler.seed, domain))
}

fn uncertain_csv(label: &str, v: &UncertainValue) -> Vec<String> {
    vec![label.into(), v.value.to_string(), v.sigma.to_string()]
}

fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::State => {
            only_json(cli, "state")?;
            let rho = ghz_state(cfg.n, &cfg.noise)?;
            let fidelity = fidelity_with_pure(&rho, &ghz_target(cfg.n, cfg.noise.phase))?;
            let report = ReconstructionReport::new(&rho, UncertainValue::exact(fidelity));
            emit(cli, "state.json", json(&report)?)
        }
        Command::Sample { settings } => {
            only_json(cli, "sample")?;
            let (noise, list, name) = match settings {
                SettingGroup::Tomo => (
                    cfg.noise.clone(),
                    enumerate_settings(cfg.n)?,
                    "records.json",
                ),
                SettingGroup::Mermin => (
                    NoiseParams {
                        phase: if cfg.n == 4 {
                            cfg.mermin_phase
                        } else {
                            cfg.noise.phase
                        },
                        ..cfg.noise.clone()
                    },
                    mermin_terms(cfg.n)?.into_iter().map(|(s, _)| s).collect(),
                    "mermin_records.json",
                ),
            };
            let rho = ghz_state(cfg.n, &noise)?;
            let records = sample_experiment(&rho, &list, &cfg.sampler)?;
            let mut text = ExperimentRecords::new(cfg.n, records)?.to_json()?;
            text.push('\n');
            emit(cli, name, text)
        }
        Command::Tomo(args) => {
            only_json(cli, "tomo")?;
            let records = heralded(load_records(&args.records)?, args.herald)?;
            let n = records.first().map(CountRecord::num_qubits).unwrap_or(0);
            let target = ghz_target(n, args.phase.unwrap_or(cfg.noise.phase));
            let [fidelity, linear] = fidelities_with_uncertainty(
                &records,
                &target,
                &resample_cfg(&cfg, pipeline::TOMO_RESAMPLE),
            )?;
            let rho = reconstruct(&TomographySet::from_records(&records)?)?;
            let report = ReconstructionReport::new(&rho, fidelity).with_linear_fidelity(linear);
            emit(cli, "tomography.json", json(&report)?)
        }
        Command::Avn(args) => {
            let records = heralded(load_records(&args.records)?, args.herald)?;
            let result = avn_suite(&records, &resample_cfg(&cfg, pipeline::AVN_RESAMPLE))?;
            let text = match cli.format {
                Format::Json => json(&result)?,
                Format::Csv => csv_rows(
                    &["setting", "predicted_sign", "epsilon", "sigma"],
                    result.per_setting.iter().map(|s| {
                        vec![
                            s.setting.to_string(),
                            s.predicted_sign.to_string(),
                            s.epsilon.value.to_string(),
                            s.epsilon.sigma.to_string(),
                        ]
                    }),
                )?,
            };
            emit(
                cli,
                if cli.format == Format::Csv {
                    "avn.csv"
                } else {
                    "avn.json"
                },
                text,
            )?;
            if cli.require_violation && !result.violates_local_realism {
                return Err(CliError::Bound(format!(
                    "epsilon_max = {} is not below {AVN_BOUND}",
                    result.epsilon_max.value
                )));
            }
            Ok(())
        }
        Command::Mermin(args) => {
            only_json(cli, "mermin")?;
            let records = heralded(load_records(&args.records)?, args.herald)?;
            let rcfg = resample_cfg(&cfg, pipeline::MERMIN_RESAMPLE);
            let result = match records.first().map(CountRecord::num_qubits) {
                Some(3) => mermin_m3(&records, &rcfg, args.phase)?,
                _ => mermin_m4(&records, &rcfg, args.phase)?,
            };
            emit(cli, "mermin.json", json(&result)?)?;
            if cli.require_violation && !result.violates_local_realism() {
                return Err(CliError::Bound(format!(
                    "M{} = {} does not exceed {}",
                    result.n, result.value.value, result.classical_bound
                )));
            }
            Ok(())
        }
        Command::Witness { records } => {
            only_json(cli, "witness")?;
            let value = witness_ghz4(
                &load_records(records)?,
                &resample_cfg(&cfg, pipeline::WITNESS_RESAMPLE),
            )?;
            emit(cli, "witness.json", json(&value)?)?;
            if cli.require_violation && value.value >= 0.0 {
                return Err(CliError::Bound(format!(
                    "witness {} is not negative",
                    value.value
                )));
            }
            Ok(())
        }
        Command::Fringe {
            kind,
            visibility,
            overlap,
            purity,
            steps,
            trials,
        } => {
            let kind: FringeKind = kind.parse()?;
            let params = FringeParams {
                visibility: *visibility,
                overlap: *overlap,
                purity: *purity,
            };
            let mut scan = fringe_scan(kind, &params, *steps)?;
            if let Some(t) = trials {
                scan = with_counting_noise(
                    &scan,
                    *t,
                    derive_seed(cfg.sampler.seed, pipeline::FRINGE_COUNTS),
                )?;
            }
            match cli.format {
                Format::Csv => {
                    eprintln!("fitted visibility {}", scan.fitted_visibility);
                    emit(cli, "fringe.csv", scan.to_csv()?)
                }
                Format::Json => emit(cli, "fringe.json", json(&scan)?),
            }
        }
        Command::Calibrate { fidelity, epsilon } => {
            let f = fidelity.unwrap_or(cfg.calibration.fidelity);
            let e = epsilon.unwrap_or(cfg.calibration.epsilon_mean);
            let cal = calibrate(f, e)?;
            match cli.format {
                Format::Json => emit(cli, "calibration.json", json(&cal)?),
                Format::Csv => {
                    let p = &cal.predictions;
                    let rows = [
                        ("p_white", cal.p_white),
                        ("coherence", cal.coherence),
                        ("fidelity4", p.fidelity4),
                        ("epsilon_mean", p.epsilon_mean),
                        ("mermin4", p.mermin4),
                        ("fidelity3", p.fidelity3),
                        ("mermin3", p.mermin3),
                        ("epsilon3", p.epsilon3),
                        ("witness", p.witness),
                    ];
                    let text = csv_rows(
                        &["quantity", "value"],
                        rows.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]),
                    )?;
                    emit(cli, "calibration.csv", text)
                }
            }
        }
        Command::Run => {
            let out = pipeline::run_and_write(&cfg)?;
            match cli.format {
                Format::Json => {
                    for a in &out.artifacts {
                        println!("wrote {}", cfg.output_dir.join(&a.name).display());
                    }
                }
                Format::Csv => {
                    let mut rows = Vec::new();
                    let r = &out.report.results;
                    if let Some(t) = &r.tomography {
                        rows.push(uncertain_csv("fidelity", &t.fidelity));
                    }
                    if let Some(a) = &r.avn {
                        rows.push(uncertain_csv("epsilon_mean", &a.epsilon_mean));
                        rows.push(uncertain_csv("epsilon_max", &a.epsilon_max));
                    }
                    if let Some(m) = &r.mermin {
                        rows.push(uncertain_csv("mermin4", &m.value));
                    }
                    if let Some(w) = &r.witness {
                        rows.push(uncertain_csv("witness", &w.value));
                    }
                    for row in r.three_photon.iter().flatten() {
                        let p = row.projected_photon;
                        for (what, v) in [
                            ("fidelity3", row.fidelity),
                            ("epsilon_max3", row.epsilon_max),
                            ("mermin3", row.mermin3),
                        ] {
                            if let Some(v) = v {
                                rows.push(uncertain_csv(&format!("{what}_{p}"), &v));
                            }
                        }
                    }
                    print!("{}", csv_rows(&["quantity", "value", "sigma"], rows)?);
                }
            }
            if cli.require_violation {
                out.report.require_violation()?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

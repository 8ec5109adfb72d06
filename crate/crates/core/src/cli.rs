//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{parse_config, ConfigError, ExperimentConfig, ScanAxis, DEFAULT_CONFIG_TEXT};
use crate::counting::{accidental_rate, double_pair_probability};
use crate::fock::{compare, FockError, OracleComparison};
use crate::io::{fit_to_json, parse_csv, scan_to_csv, FormatError};
use crate::operator::{DelaySetting, MAX_GAIN};
use crate::scan::{fit_fringe, predict_scan, run_scan, Channel, FitError, ScanError};
use crate::spectral::{coherence_length, envelope};

/// Pump coherence length quoted with the original measurement, m.
pub const QUOTED_PUMP_COHERENCE_LENGTH: f64 = 1.4e-3;
/// Double-pair probability per window above which the low-gain picture fails.
pub const DOUBLE_PAIR_LIMIT: f64 = 1e-2;
/// Delay points per pump-phase period checked by `oracle-check`.
const ORACLE_POINTS: usize = 16;

#[derive(Debug, Parser)]
#[command(name = "phasemem", version, about = "Two-crystal induced-coherence interferometer: predict, simulate and fit delay scans")]
pub struct Cli {
    /// Scenario config; the built-in default is used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the detector seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the scan axis from the config.
    #[arg(long, global = true)]
    pub axis: Option<ScanAxis>,
    /// Suppress warnings and progress on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noiseless CSV of the envelope-modulated rates.
    Predict,
    /// CSV with Poisson-sampled counts.
    Simulate,
    /// Fit a scan CSV and write the JSON summary.
    Fit {
        /// Scan CSV written by `predict` or `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// Detector signal to fit: a, b or coinc.
        #[arg(long, default_value = "a")]
        channel: Channel,
    },
    /// Compare the operator engine against the Fock-space oracle.
    OracleCheck,
    /// Human-readable summary of the scenario.
    Report,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("scan: {0}")]
    Scan(#[from] ScanError),
    #[error("fit: {0}")]
    Fit(FitError),
    #[error("oracle: {0}")]
    Oracle(#[from] FockError),
    #[error("oracle mismatch: max relative deviation {max:.3e} exceeds {tolerance:.3e}")]
    OracleMismatch { max: f64, tolerance: f64 },
}

impl CliError {
    /// Exit status per error category; 2 is left to argument parsing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Format { .. } => 5,
            CliError::Scan(_) => 6,
            CliError::Fit(_) => 7,
            CliError::Oracle(_) | CliError::OracleMismatch { .. } => 8,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let text = match &cli.config {
        Some(path) => read(path)?,
        None => DEFAULT_CONFIG_TEXT.to_string(),
    };
    let mut config = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        config.detectors.seed = seed;
    }
    if let Some(axis) = cli.axis {
        config.scan.axis = axis;
    }
    Ok(config)
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn warn(cli: &Cli, message: &str) {
    if !cli.quiet {
        eprintln!("warning: {message}");
    }
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub gain_1: f64,
    pub gain_2: f64,
    pub tolerance: f64,
    pub max_relative_deviation: f64,
    pub pass: bool,
    pub points: Vec<OracleComparison>,
}

/// Engine and oracle over one pump-phase period, signal delay from the config.
pub fn oracle_check(config: &ExperimentConfig) -> Result<OracleReport, FockError> {
    let points = (0..ORACLE_POINTS)
        .map(|k| {
            let dx_p = config.pump.wavelength_m * k as f64 / ORACLE_POINTS as f64;
            compare(config, DelaySetting::new(dx_p, config.scan.other_delay_m))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let k = config.crystal1.gain.max(config.crystal2.gain);
    let tolerance = k * k;
    Ok(OracleReport {
        gain_1: config.crystal1.gain,
        gain_2: config.crystal2.gain,
        tolerance,
        max_relative_deviation: max,
        pass: max <= tolerance,
        points,
    })
}

/// Pair rate used for the double-pair estimate.
pub fn pair_rate(config: &ExperimentConfig) -> f64 {
    config.detectors.pair_rate_hz.unwrap_or(config.detectors.rate_b_hz)
}

/// Whether the scenario stays in the low-gain regime the model assumes.
pub fn low_gain_violations(config: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    let p2 = double_pair_probability(pair_rate(config), config.detectors.window_s);
    if p2 >= DOUBLE_PAIR_LIMIT {
        out.push(format!(
            "double-pair probability {p2:.3e} per window is not below {DOUBLE_PAIR_LIMIT:e}"
        ));
    }
    for (name, g) in [("crystal1", config.crystal1.gain), ("crystal2", config.crystal2.gain)] {
        if g >= MAX_GAIN {
            out.push(format!("{name} gain {g} is not below {MAX_GAIN}"));
        }
    }
    out
}

pub fn report(config: &ExperimentConfig) -> String {
    let mut s = String::new();
    let pump = config.pump_profile();
    let signal = &config.signal_filter;
    let eta = config.eta();
    let lc_pump = coherence_length(&pump);
    let lc_signal = coherence_length(signal);
    let window = config.detectors.window_s;
    let pairs = pair_rate(config);
    let p2 = double_pair_probability(pairs, window);

    let _ = writeln!(s, "scenario");
    let _ = writeln!(s, "  pump {:.1} nm, {:.1} GHz, {:.1} mW", config.pump.wavelength_m * 1e9, config.pump.bandwidth_hz * 1e-9, config.pump.power_mw);
    let _ = writeln!(s, "  signal {:.1} nm, idler {:.1} nm", config.signal_wavelength() * 1e9, config.idler_wavelength() * 1e9);
    let _ = writeln!(s, "  gains K1 = {:.3e}, K2 = {:.3e}, eta = {:.3}, splitter reflectance {:.3}", config.crystal1.gain, config.crystal2.gain, eta, config.reflectance);
    let _ = writeln!(s, "  scan axis {}, {:.1} nm to {:.1} nm in {:.1} nm steps, {} s dwell", config.scan.axis, config.scan.start_m * 1e9, config.scan.stop_m * 1e9, config.scan.step_m * 1e9, config.scan.dwell_s);

    let _ = writeln!(s, "coherence");
    match config.pump.coherence_length_override_m {
        Some(lc) => {
            let _ = writeln!(s, "  pump coherence length {:.3} mm (override; {:.1} GHz alone gives {:.3} mm)", lc * 1e3, config.pump.bandwidth_hz * 1e-9,
                coherence_length(&crate::spectral::SpectralProfile::from_frequency_fwhm(config.pump.wavelength_m, config.pump.bandwidth_hz).expect("validated pump")) * 1e3);
        }
        None => {
            let _ = writeln!(s, "  pump coherence length {:.3} mm (half-maximum delay of the {:.1} GHz envelope)", lc_pump * 1e3, config.pump.bandwidth_hz * 1e-9);
        }
    }
    let _ = writeln!(
        s,
        "  quoted pump coherence length {:.1} mm; differs from the computed value by a factor {:.2}, left unreconciled",
        QUOTED_PUMP_COHERENCE_LENGTH * 1e3,
        lc_pump / QUOTED_PUMP_COHERENCE_LENGTH
    );
    let _ = writeln!(s, "  pump envelope at 600 um: {:.4}", envelope(&pump, 600e-6));
    let _ = writeln!(s, "  signal coherence length {:.1} um", lc_signal * 1e6);
    for dx in [100e-6, 200e-6, 600e-6] {
        let _ = writeln!(s, "  signal envelope at {:.0} um: {:.3e}", dx * 1e6, envelope(signal, dx));
    }

    let _ = writeln!(s, "fringes");
    let _ = writeln!(s, "  signal-axis period {:.1} nm, pump-axis period {:.1} nm", config.signal_wavelength() * 1e9, config.pump.wavelength_m * 1e9);
    let _ = writeln!(s, "  singles visibility {:.4}, coincidence visibility {:.4}", eta, 2.0 * eta / (1.0 + eta * eta));

    let _ = writeln!(s, "counting");
    let _ = writeln!(s, "  accidental coincidences {:.4} /s ({:.0} /s x {:.0} /s x {:.1} ns)", accidental_rate(config.detectors.rate_a_hz, config.detectors.rate_b_hz, window), config.detectors.rate_a_hz, config.detectors.rate_b_hz, window * 1e9);
    let _ = writeln!(s, "  double-pair probability {:.3e} per {:.1} ns window at {:.3e} pairs/s", p2, window * 1e9, pairs);
    let violations = low_gain_violations(config);
    if violations.is_empty() {
        let _ = writeln!(s, "  low-gain condition: satisfied");
    } else {
        for v in violations {
            let _ = writeln!(s, "  low-gain condition VIOLATED: {v}");
        }
    }
    s
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Predict | Command::Simulate => {
            let grid = config.scan.grid();
            let axis = config.scan.axis;
            let record = if matches!(cli.command, Command::Predict) {
                predict_scan(&config, axis, &grid)?
            } else {
                run_scan(&config, axis, &grid)?
            };
            for w in &record.warnings {
                warn(cli, w);
            }
            emit(cli, &scan_to_csv(&record))
        }
        Command::Fit { input, channel } => {
            let text = read(input)?;
            let scan = parse_csv(&text).map_err(|source| CliError::Format {
                path: input.clone(),
                source,
            })?;
            let data = scan.fit_input(*channel, config.scan.dwell_s);
            match fit_fringe(&data) {
                Ok(fit) => {
                    if fit.envelope_lower_bound {
                        warn(cli, "envelope not resolved; envelope_fwhm_m is a lower bound");
                    }
                    emit(cli, &fit_to_json(&fit))
                }
                Err(FitError::NotConverged { best, diagnostic }) => {
                    emit(cli, &fit_to_json(&best))?;
                    Err(CliError::Fit(FitError::NotConverged { best, diagnostic }))
                }
                Err(e) => Err(CliError::Fit(e)),
            }
        }
        Command::OracleCheck => {
            let report = oracle_check(&config)?;
            let mut json = serde_json::to_string_pretty(&report).expect("plain struct serializes");
            json.push('\n');
            emit(cli, &json)?;
            if report.pass {
                Ok(())
            } else {
                Err(CliError::OracleMismatch {
                    max: report.max_relative_deviation,
                    tolerance: report.tolerance,
                })
            }
        }
        Command::Report => emit(cli, &report(&config)),
    }
}

/// Parses arguments, runs, and maps failures to their exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

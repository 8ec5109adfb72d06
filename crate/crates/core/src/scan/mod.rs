//! Delay scans and their analysis.

mod fit;
mod periodogram;

pub use fit::{fit_fringe, visibility_minmax, FitError, FitInput, FringeFit, Noise, MAX_ITERATIONS};
pub use periodogram::{estimate_period, NoFringe};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ExperimentConfig, ScanAxis};
use crate::counting::{sample_counts, Calibration, CountSample, CountingError, DetectedRates};
use crate::expectation::RatePrediction;
use crate::operator::DelaySetting;
use crate::spectral::{fringe_baseline, modulated_rates};

/// Fewer points per fringe period than this triggers a warning.
pub const MIN_POINTS_PER_PERIOD: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("scan grid is empty")]
    EmptyGrid,
    #[error("scan grid is not strictly increasing at index {0}")]
    NotMonotone(usize),
    #[error("scan grid contains a non-finite delay at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Counting(#[from] CountingError),
}

/// Which detector signal a fit looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    A,
    B,
    Coinc,
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(Channel::A),
            "b" => Ok(Channel::B),
            "coinc" => Ok(Channel::Coinc),
            other => Err(format!("unknown channel {other:?}, expected a, b or coinc")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub axis: ScanAxis,
    pub delays: Vec<f64>,
    /// Model rates (units of |K|^2) including the coherence envelopes.
    pub predicted: Vec<RatePrediction>,
    /// Calibrated detector rates, 1/s.
    pub rates: Vec<DetectedRates>,
    /// Sampled counts; absent for noiseless predictions.
    pub samples: Option<Vec<CountSample>>,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

impl ScanRecord {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Fit input for one channel as the detectors see it: counts when
    /// sampled, otherwise calibrated rates (coincidences include accidentals).
    pub fn fit_input(&self, channel: Channel) -> FitInput {
        let pick = |r: &DetectedRates| match channel {
            Channel::A => r.rate_a,
            Channel::B => r.rate_b,
            Channel::Coinc => r.measured_coinc(),
        };
        match &self.samples {
            Some(samples) => {
                let dwell = self.config.scan.dwell_s;
                let values = samples
                    .iter()
                    .map(|s| {
                        let n = match channel {
                            Channel::A => s.counts_a,
                            Channel::B => s.counts_b,
                            Channel::Coinc => s.coincidences,
                        };
                        n as f64 / dwell
                    })
                    .collect();
                FitInput::new(self.delays.clone(), values, Noise::Poisson { dwell })
            }
            None => FitInput::new(
                self.delays.clone(),
                self.rates.iter().map(pick).collect(),
                Noise::None,
            ),
        }
    }

    /// Noiseless model rates of one channel, in units of |K|^2.
    pub fn model_input(&self, channel: Channel) -> FitInput {
        let values = self
            .predicted
            .iter()
            .map(|p| match channel {
                Channel::A => p.p_a,
                Channel::B => p.p_b,
                Channel::Coinc => p.p_ab,
            })
            .collect();
        FitInput::new(self.delays.clone(), values, Noise::None)
    }
}

fn delay_setting(axis: ScanAxis, x: f64, other: f64) -> DelaySetting {
    match axis {
        ScanAxis::Signal => DelaySetting::new(other, x),
        ScanAxis::Pump => DelaySetting::new(x, other),
    }
}

fn check_grid(grid: &[f64]) -> Result<(), ScanError> {
    if grid.is_empty() {
        return Err(ScanError::EmptyGrid);
    }
    for (i, x) in grid.iter().enumerate() {
        if !x.is_finite() {
            return Err(ScanError::NonFinite(i));
        }
        if i > 0 && *x <= grid[i - 1] {
            return Err(ScanError::NotMonotone(i));
        }
    }
    Ok(())
}

fn grid_warnings(config: &ExperimentConfig, axis: ScanAxis, grid: &[f64]) -> Vec<String> {
    let period = config.fringe_wavelength(axis);
    let mut warnings = Vec::new();
    let coarsest = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if coarsest > period / MIN_POINTS_PER_PERIOD {
        warnings.push(format!(
            "grid step {coarsest:.3e} m gives fewer than {MIN_POINTS_PER_PERIOD} points per {period:.3e} m fringe"
        ));
    }
    if let (Some(first), Some(last)) = (grid.first(), grid.last()) {
        if last - first < 2.0 * period {
            warnings.push("scan covers fewer than two fringe periods".to_string());
        }
    }
    warnings
}

/// Noiseless scan: model rates and calibrated detector rates at each delay.
pub fn predict_scan(
    config: &ExperimentConfig,
    axis: ScanAxis,
    grid: &[f64],
) -> Result<ScanRecord, ScanError> {
    check_grid(grid)?;
    let calibration = Calibration::new(fringe_baseline(config), &config.counting());
    let other = config.scan.other_delay_m;
    let predicted: Vec<RatePrediction> = grid
        .par_iter()
        .map(|&x| modulated_rates(config, delay_setting(axis, x, other)))
        .collect();
    let rates = predicted.iter().map(|p| calibration.apply(p)).collect();
    Ok(ScanRecord {
        axis,
        delays: grid.to_vec(),
        predicted,
        rates,
        samples: None,
        config: config.clone(),
        warnings: grid_warnings(config, axis, grid),
    })
}

/// Scan with Poisson-sampled counts at every delay.
pub fn run_scan(
    config: &ExperimentConfig,
    axis: ScanAxis,
    grid: &[f64],
) -> Result<ScanRecord, ScanError> {
    let mut record = predict_scan(config, axis, grid)?;
    let counting = config.counting();
    let samples = record
        .rates
        .par_iter()
        .enumerate()
        .map(|(i, r)| sample_counts(r, &counting, i as u64).map(|p| p.counts))
        .collect::<Result<Vec<_>, _>>()?;
    record.samples = Some(samples);
    Ok(record)
}

/// Fringe amplitude of the D_A singles around each center delay, relative to
/// the local fringe mean.
///
/// Each center gets a noiseless window of four fringe periods around it; the
/// amplitude is the least-squares projection onto the carrier.
pub fn fringe_amplitude_profile(
    config: &ExperimentConfig,
    axis: ScanAxis,
    centers: &[f64],
) -> Vec<f64> {
    const PERIODS: usize = 4;
    const PER_PERIOD: usize = 32;
    let period = config.fringe_wavelength(axis);
    let other = config.scan.other_delay_m;
    centers
        .par_iter()
        .map(|&c| {
            let n = PERIODS * PER_PERIOD;
            let (mut mean, mut re, mut im) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let x = c + period * (k as f64 / PER_PERIOD as f64 - PERIODS as f64 / 2.0);
                let theta = 2.0 * std::f64::consts::PI * k as f64 / PER_PERIOD as f64;
                let y = modulated_rates(config, delay_setting(axis, x, other)).p_a;
                mean += y;
                re += y * theta.cos();
                im += y * theta.sin();
            }
            let n = n as f64;
            let mean = mean / n;
            if mean <= 0.0 {
                return 0.0;
            }
            2.0 * (re * re + im * im).sqrt() / n / mean
        })
        .collect()
}

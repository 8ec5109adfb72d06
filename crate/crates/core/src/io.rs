//! Scan CSV and fit JSON formats.
//!
//! CSV columns, in order: `delay_m, rate_a_hz, rate_b_hz, coinc_hz,
//! counts_a, counts_b, coinc_counts`. Floats are written in scientific
//! notation with nine significant digits; count columns are left empty for
//! noiseless predictions. `coinc_hz` includes the expected accidentals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counting::CountSample;
use crate::scan::{Channel, FitInput, FringeFit, Noise, ScanRecord};

pub const CSV_HEADER: &str = "delay_m,rate_a_hz,rate_b_hz,coinc_hz,counts_a,counts_b,coinc_counts";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("missing or wrong CSV header, expected `{CSV_HEADER}`")]
    Header,
    #[error("line {line}: expected 7 columns, got {got}")]
    Columns { line: usize, got: usize },
    #[error("line {line}: cannot parse {column} value `{value}`")]
    Value {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: count columns must be all filled or all empty")]
    MixedCounts { line: usize },
    #[error("CSV contains no data rows")]
    Empty,
}

fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn scan_to_csv(record: &ScanRecord) -> String {
    let mut out = String::with_capacity(96 * (record.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, (x, r)) in record.delays.iter().zip(&record.rates).enumerate() {
        let counts = match &record.samples {
            Some(s) => format!("{},{},{}", s[i].counts_a, s[i].counts_b, s[i].coincidences),
            None => ",,".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sci(*x),
            sci(r.rate_a),
            sci(r.rate_b),
            sci(r.measured_coinc()),
            counts
        );
    }
    out
}

/// Scan read back from CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvScan {
    pub delays: Vec<f64>,
    pub rate_a: Vec<f64>,
    pub rate_b: Vec<f64>,
    pub coinc: Vec<f64>,
    pub counts: Option<Vec<CountSample>>,
}

impl CsvScan {
    /// Counts over `dwell` with Poisson weights when present, rates otherwise.
    pub fn fit_input(&self, channel: Channel, dwell: f64) -> FitInput {
        match &self.counts {
            Some(counts) => {
                let values = counts
                    .iter()
                    .map(|c| {
                        let n = match channel {
                            Channel::A => c.counts_a,
                            Channel::B => c.counts_b,
                            Channel::Coinc => c.coincidences,
                        };
                        n as f64 / dwell
                    })
                    .collect();
                FitInput::new(self.delays.clone(), values, Noise::Poisson { dwell })
            }
            None => {
                let values = match channel {
                    Channel::A => &self.rate_a,
                    Channel::B => &self.rate_b,
                    Channel::Coinc => &self.coinc,
                };
                FitInput::new(self.delays.clone(), values.clone(), Noise::None)
            }
        }
    }
}

pub fn parse_csv(text: &str) -> Result<CsvScan, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(FormatError::Header),
    }
    let mut scan = CsvScan::default();
    let mut counts: Vec<CountSample> = Vec::new();
    let mut with_counts = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 7 {
            return Err(FormatError::Columns {
                line: line_no,
                got: cols.len(),
            });
        }
        let float = |i: usize, column: &'static str| {
            cols[i].parse::<f64>().map_err(|_| FormatError::Value {
                line: line_no,
                column,
                value: cols[i].to_string(),
            })
        };
        scan.delays.push(float(0, "delay_m")?);
        scan.rate_a.push(float(1, "rate_a_hz")?);
        scan.rate_b.push(float(2, "rate_b_hz")?);
        scan.coinc.push(float(3, "coinc_hz")?);

        let filled = cols[4..].iter().filter(|c| !c.is_empty()).count();
        let has = match filled {
            0 => false,
            3 => true,
            _ => return Err(FormatError::MixedCounts { line: line_no }),
        };
        if *with_counts.get_or_insert(has) != has {
            return Err(FormatError::MixedCounts { line: line_no });
        }
        if has {
            let count = |i: usize, column: &'static str| {
                cols[i].parse::<u64>().map_err(|_| FormatError::Value {
                    line: line_no,
                    column,
                    value: cols[i].to_string(),
                })
            };
            counts.push(CountSample {
                counts_a: count(4, "counts_a")?,
                counts_b: count(5, "counts_b")?,
                coincidences: count(6, "coinc_counts")?,
            });
        }
    }
    if scan.delays.is_empty() {
        return Err(FormatError::Empty);
    }
    if with_counts == Some(true) {
        scan.counts = Some(counts);
    }
    Ok(scan)
}

/// JSON form of a fringe fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub period_m: f64,
    pub period_sigma_m: f64,
    pub visibility: f64,
    pub visibility_sigma: f64,
    pub envelope_center_m: f64,
    pub envelope_fwhm_m: f64,
    pub phase_rad: f64,
    pub baseline_hz: f64,
    pub reduced_residual: f64,
    pub converged: bool,
}

impl From<&FringeFit> for FitSummary {
    fn from(f: &FringeFit) -> Self {
        Self {
            period_m: f.period,
            period_sigma_m: f.period_sigma,
            visibility: f.visibility,
            visibility_sigma: f.visibility_sigma,
            envelope_center_m: f.envelope_center,
            envelope_fwhm_m: f.envelope_fwhm,
            phase_rad: f.phase,
            baseline_hz: f.baseline,
            reduced_residual: f.reduced_residual,
            converged: f.converged,
        }
    }
}

pub fn fit_to_json(fit: &FringeFit) -> String {
    let mut s = serde_json::to_string_pretty(&FitSummary::from(fit)).expect("plain struct serializes");
    s.push('\n');
    s
}

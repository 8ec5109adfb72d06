//! Declarative description of the two-crystal setup and its text format.
//!
//! The format is line based:
//!
//! ```text
//! # comment
//! [pump]
//! wavelength_nm = 355
//! bandwidth_ghz = 45
//! ```
//!
//! Keys carry their unit as a suffix. Every section except `[scan]` is
//! optional and falls back to the defaults of [`ExperimentConfig::default`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::counting::CountingConfig;
use crate::operator::{BeamSplitterParams, CrystalParams, MAX_GAIN};
use crate::spectral::{Fwhm, SpectralProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: invalid value for {field}: {message}")]
    Value {
        line: usize,
        field: String,
        message: String,
    },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("{field} {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_owned(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    Signal,
    Pump,
}

impl FromStr for ScanAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signal" => Ok(ScanAxis::Signal),
            "pump" => Ok(ScanAxis::Pump),
            other => Err(format!("expected `signal` or `pump`, got `{other}`")),
        }
    }
}

impl fmt::Display for ScanAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanAxis::Signal => "signal",
            ScanAxis::Pump => "pump",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpConfig {
    pub wavelength_m: f64,
    pub bandwidth_hz: f64,
    /// Replaces the bandwidth-derived coherence length when set.
    pub coherence_length_override_m: Option<f64>,
    /// Recorded only.
    pub power_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalConfig {
    /// Modulus of the parametric gain; its phase comes from the pump delay.
    pub gain: f64,
}

impl CrystalConfig {
    pub fn params(&self) -> CrystalParams {
        CrystalParams {
            gain: Complex64::new(self.gain, 0.0),
        }
    }
}

/// Idler path from the first to the second crystal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdlerLink {
    pub transmission: f64,
    pub mode_overlap: f64,
}

impl IdlerLink {
    /// Effective amplitude factor on the induced-coherence path.
    pub fn eta(&self) -> f64 {
        self.transmission * self.mode_overlap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub rate_a_hz: f64,
    pub rate_b_hz: f64,
    /// True-coincidence rate at the fringe midpoint relative to `rate_a_hz`.
    pub coinc_efficiency: f64,
    pub window_s: f64,
    /// Generated-pair rate for the double-pair check; defaults to `rate_b_hz`.
    pub pair_rate_hz: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub axis: ScanAxis,
    pub start_m: f64,
    pub stop_m: f64,
    pub step_m: f64,
    pub dwell_s: f64,
    /// Delay held fixed on the axis that is not scanned.
    pub other_delay_m: f64,
}

impl ScanConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.stop_m - self.start_m) / self.step_m).round() as i64;
        (0..=n.max(0)).map(|i| self.start_m + i as f64 * self.step_m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pump: PumpConfig,
    pub crystal1: CrystalConfig,
    pub crystal2: CrystalConfig,
    /// Highest gain degree kept in the second-crystal signal field.
    pub truncation_degree: u32,
    pub idler_link: IdlerLink,
    /// Intensity reflectance of the signal splitter.
    pub reflectance: f64,
    pub signal_filter: SpectralProfile,
    pub idler_filter: SpectralProfile,
    pub detectors: DetectorConfig,
    pub scan: ScanConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pump: PumpConfig {
                wavelength_m: 355e-9,
                bandwidth_hz: 45e9,
                coherence_length_override_m: None,
                power_mw: 38.0,
            },
            crystal1: CrystalConfig { gain: 1e-3 },
            crystal2: CrystalConfig { gain: 1e-3 },
            truncation_degree: 1,
            idler_link: IdlerLink {
                transmission: 1.0,
                mode_overlap: 1.0,
            },
            reflectance: 0.5,
            signal_filter: SpectralProfile::from_wavelength_fwhm(808e-9, 2e-9)
                .expect("valid signal filter"),
            idler_filter: SpectralProfile::from_wavelength_fwhm(632e-9, 3e-9)
                .expect("valid idler filter"),
            detectors: DetectorConfig {
                rate_a_hz: 42_000.0,
                rate_b_hz: 110_000.0,
                coinc_efficiency: 0.1,
                window_s: 2e-9,
                pair_rate_hz: None,
                seed: 1,
            },
            scan: ScanConfig {
                axis: ScanAxis::Signal,
                start_m: -2e-6,
                stop_m: 2e-6,
                step_m: 10e-9,
                dwell_s: 0.5,
                other_delay_m: 0.0,
            },
        }
    }
}

impl ExperimentConfig {
    /// Pump spectrum; a coherence-length override rescales the bandwidth.
    pub fn pump_profile(&self) -> SpectralProfile {
        match self.pump.coherence_length_override_m {
            Some(lc) => SpectralProfile::with_coherence_length(self.pump.wavelength_m, lc),
            None => SpectralProfile::from_frequency_fwhm(self.pump.wavelength_m, self.pump.bandwidth_hz),
        }
        .expect("pump profile validated with the config")
    }

    pub fn signal_wavelength(&self) -> f64 {
        self.signal_filter.center_wavelength()
    }

    pub fn idler_wavelength(&self) -> f64 {
        self.idler_filter.center_wavelength()
    }

    pub fn eta(&self) -> f64 {
        self.idler_link.eta()
    }

    pub fn beam_splitter(&self) -> BeamSplitterParams {
        BeamSplitterParams::from_reflectance(self.reflectance).expect("reflectance validated with the config")
    }

    pub fn counting(&self) -> CountingConfig {
        CountingConfig {
            rate_a_cal: self.detectors.rate_a_hz,
            rate_b_cal: self.detectors.rate_b_hz,
            coinc_efficiency: self.detectors.coinc_efficiency,
            window: self.detectors.window_s,
            dwell: self.scan.dwell_s,
            seed: self.detectors.seed,
        }
    }

    /// Wavelength whose fringe period is expected along `axis`.
    pub fn fringe_wavelength(&self, axis: ScanAxis) -> f64 {
        match axis {
            ScanAxis::Signal => self.signal_wavelength(),
            ScanAxis::Pump => self.pump.wavelength_m,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("pump.wavelength_nm", self.pump.wavelength_m)?;
        positive("pump.bandwidth_ghz", self.pump.bandwidth_hz)?;
        if let Some(lc) = self.pump.coherence_length_override_m {
            positive("pump.coherence_length_mm", lc)?;
        }
        if !(self.pump.power_mw >= 0.0) {
            return Err(invalid("pump.power_mw", "must be non-negative"));
        }
        for (name, c) in [("crystal1.gain", self.crystal1), ("crystal2.gain", self.crystal2)] {
            if !(c.gain >= 0.0 && c.gain < MAX_GAIN) {
                return Err(invalid(name, format!("out of [0,{MAX_GAIN})")));
            }
        }
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(field, "out of [0,1]"))
            }
        };
        unit("idler_link.transmission", self.idler_link.transmission)?;
        unit("idler_link.mode_overlap", self.idler_link.mode_overlap)?;
        unit("idler_link.eta", self.eta())?;
        unit("beam_splitter.reflectance", self.reflectance)?;
        unit("detectors.coinc_efficiency", self.detectors.coinc_efficiency)?;
        positive("detectors.rate_a_hz", self.detectors.rate_a_hz)?;
        positive("detectors.rate_b_hz", self.detectors.rate_b_hz)?;
        positive("detectors.window_ns", self.detectors.window_s)?;
        if let Some(r) = self.detectors.pair_rate_hz {
            positive("detectors.pair_rate_hz", r)?;
        }
        positive("scan.step_nm", self.scan.step_m)?;
        positive("scan.dwell_s", self.scan.dwell_s)?;
        if !(self.scan.stop_m > self.scan.start_m) || !self.scan.start_m.is_finite() || !self.scan.stop_m.is_finite() {
            return Err(invalid("scan.stop_nm", "must exceed scan.start_nm"));
        }
        if !self.scan.other_delay_m.is_finite() {
            return Err(invalid("scan.other_delay_nm", "must be finite"));
        }
        if self.detectors.window_s >= self.scan.dwell_s {
            return Err(invalid("detectors.window_ns", "must be much shorter than scan.dwell_s"));
        }
        Ok(())
    }

    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line("[pump]".into());
        line(format!("wavelength_nm = {}", scaled(self.pump.wavelength_m, 1e9)));
        line(format!("bandwidth_ghz = {}", shrunk(self.pump.bandwidth_hz, 1e9)));
        if let Some(lc) = self.pump.coherence_length_override_m {
            line(format!("coherence_length_mm = {}", scaled(lc, 1e3)));
        }
        line(format!("power_mw = {}", self.pump.power_mw));
        line(String::new());
        line("[crystal1]".into());
        line(format!("gain = {}", self.crystal1.gain));
        line(String::new());
        line("[crystal2]".into());
        line(format!("gain = {}", self.crystal2.gain));
        line(format!("truncation_degree = {}", self.truncation_degree));
        line(String::new());
        line("[idler_link]".into());
        line(format!("transmission = {}", self.idler_link.transmission));
        line(format!("mode_overlap = {}", self.idler_link.mode_overlap));
        line(String::new());
        line("[beam_splitter]".into());
        line(format!("reflectance = {}", self.reflectance));
        for (name, p) in [("signal_filter", &self.signal_filter), ("idler_filter", &self.idler_filter)] {
            line(String::new());
            line(format!("[{name}]"));
            line(format!("wavelength_nm = {}", scaled(p.center_wavelength(), 1e9)));
            match p.fwhm() {
                Fwhm::Wavelength(w) => line(format!("fwhm_nm = {}", scaled(w, 1e9))),
                Fwhm::Frequency(hz) => line(format!("fwhm_ghz = {}", shrunk(hz, 1e9))),
            }
        }
        line(String::new());
        line("[detectors]".into());
        line(format!("rate_a_hz = {}", self.detectors.rate_a_hz));
        line(format!("rate_b_hz = {}", self.detectors.rate_b_hz));
        line(format!("coinc_efficiency = {}", self.detectors.coinc_efficiency));
        line(format!("window_ns = {}", scaled(self.detectors.window_s, 1e9)));
        if let Some(r) = self.detectors.pair_rate_hz {
            line(format!("pair_rate_hz = {r}"));
        }
        line(format!("seed = {}", self.detectors.seed));
        line(String::new());
        line("[scan]".into());
        line(format!("axis = {}", self.scan.axis));
        line(format!("start_nm = {}", scaled(self.scan.start_m, 1e9)));
        line(format!("stop_nm = {}", scaled(self.scan.stop_m, 1e9)));
        line(format!("step_nm = {}", scaled(self.scan.step_m, 1e9)));
        line(format!("dwell_s = {}", self.scan.dwell_s));
        line(format!("other_delay_nm = {}", scaled(self.scan.other_delay_m, 1e9)));
        out
    }
}

/// Decimal text for `value * factor` that parses back to `value` via `/ factor`.
fn scaled(value: f64, factor: f64) -> String {
    let direct = format!("{}", value * factor);
    if direct.parse::<f64>().map(|v| v / factor) == Ok(value) {
        return direct;
    }
    (1..=17)
        .map(|digits| format!("{:.*e}", digits, value * factor))
        .find(|s| s.parse::<f64>().map(|v| v / factor) == Ok(value))
        .unwrap_or(direct)
}

/// Decimal text for `value / factor` that parses back to `value` via `* factor`.
fn shrunk(value: f64, factor: f64) -> String {
    let direct = format!("{}", value / factor);
    if direct.parse::<f64>().map(|v| v * factor) == Ok(value) {
        return direct;
    }
    (1..=17)
        .map(|digits| format!("{:.*e}", digits, value / factor))
        .find(|s| s.parse::<f64>().map(|v| v * factor) == Ok(value))
        .unwrap_or(direct)
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("pump", &["wavelength_nm", "bandwidth_ghz", "coherence_length_mm", "power_mw"]),
    ("crystal1", &["gain"]),
    ("crystal2", &["gain", "truncation_degree"]),
    ("idler_link", &["eta", "transmission", "mode_overlap"]),
    ("beam_splitter", &["reflectance"]),
    ("signal_filter", &["wavelength_nm", "fwhm_nm", "fwhm_ghz"]),
    ("idler_filter", &["wavelength_nm", "fwhm_nm", "fwhm_ghz"]),
    ("detectors", &["rate_a_hz", "rate_b_hz", "coinc_efficiency", "window_ns", "pair_rate_hz", "seed"]),
    ("scan", &["axis", "start_nm", "stop_nm", "step_nm", "dwell_s", "other_delay_nm"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn read_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::UnknownSection {
                    line,
                    section: name.to_owned(),
                });
            }
            if sections.contains_key(name) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("section [{name}] appears twice"),
                });
            }
            sections.insert(name.to_owned(), BTreeMap::new());
            current = Some(name.to_owned());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let section = current.as_ref().ok_or_else(|| ConfigError::Syntax {
            line,
            message: "key outside of any section".into(),
        })?;
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        }
        let allowed = SECTIONS.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                section: section.clone(),
                key: key.to_owned(),
            });
        }
        let map = sections.get_mut(section).expect("section inserted");
        if map.contains_key(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                section: section.clone(),
                key: key.to_owned(),
            });
        }
        map.insert(
            key.to_owned(),
            Entry {
                value: value.to_owned(),
                line,
            },
        );
    }
    Ok(sections)
}

struct SectionReader<'a> {
    name: &'a str,
    entries: Option<&'a BTreeMap<String, Entry>>,
}

impl SectionReader<'_> {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(entry) = self.entries.and_then(|m| m.get(key)) else {
            return Ok(None);
        };
        entry.value.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
            line: entry.line,
            field: format!("{}.{}", self.name, key),
            message: e.to_string(),
        })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.is_some_and(|m| m.contains_key(key))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.and_then(|m| m.get(key)).map(|e| e.line).unwrap_or(0)
    }
}

fn profile_from(
    section: &SectionReader<'_>,
    default: &SpectralProfile,
) -> Result<SpectralProfile, ConfigError> {
    let center = section
        .get::<f64>("wavelength_nm")?
        .map(|nm| nm / 1e9)
        .unwrap_or(default.center_wavelength());
    let fwhm = match (section.get::<f64>("fwhm_nm")?, section.get::<f64>("fwhm_ghz")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Value {
                line: section.line_of("fwhm_ghz"),
                field: format!("{}.fwhm_ghz", section.name),
                message: "give either fwhm_nm or fwhm_ghz, not both".into(),
            })
        }
        (Some(nm), None) => Fwhm::Wavelength(nm / 1e9),
        (None, Some(ghz)) => Fwhm::Frequency(ghz * 1e9),
        (None, None) => default.fwhm(),
    };
    SpectralProfile::new(center, fwhm).map_err(|e| invalid(section.name, e.to_string()))
}

/// Parses and validates a config; absent keys take their default values.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = read_sections(text)?;
    match sections.get("scan") {
        Some(scan) if !scan.is_empty() => {}
        _ => return Err(ConfigError::MissingSection("scan".into())),
    }
    let reader = |name: &'static str| SectionReader {
        name,
        entries: sections.get(name),
    };
    let mut cfg = ExperimentConfig::default();

    let pump = reader("pump");
    if let Some(nm) = pump.get::<f64>("wavelength_nm")? {
        cfg.pump.wavelength_m = nm / 1e9;
    }
    if let Some(ghz) = pump.get::<f64>("bandwidth_ghz")? {
        cfg.pump.bandwidth_hz = ghz * 1e9;
    }
    if let Some(mm) = pump.get::<f64>("coherence_length_mm")? {
        cfg.pump.coherence_length_override_m = Some(mm / 1e3);
    }
    if let Some(mw) = pump.get::<f64>("power_mw")? {
        cfg.pump.power_mw = mw;
    }

    if let Some(g) = reader("crystal1").get::<f64>("gain")? {
        cfg.crystal1.gain = g;
    }
    let c2 = reader("crystal2");
    if let Some(g) = c2.get::<f64>("gain")? {
        cfg.crystal2.gain = g;
    }
    if let Some(d) = c2.get::<u32>("truncation_degree")? {
        cfg.truncation_degree = d;
    }

    let link = reader("idler_link");
    if link.has("eta") && (link.has("transmission") || link.has("mode_overlap")) {
        return Err(ConfigError::Value {
            line: link.line_of("eta"),
            field: "idler_link.eta".into(),
            message: "give either eta or transmission/mode_overlap, not both".into(),
        });
    }
    if let Some(eta) = link.get::<f64>("eta")? {
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid("idler_link.eta", "out of [0,1]"));
        }
        cfg.idler_link = IdlerLink {
            transmission: eta,
            mode_overlap: 1.0,
        };
    }
    if let Some(t) = link.get::<f64>("transmission")? {
        cfg.idler_link.transmission = t;
    }
    if let Some(mu) = link.get::<f64>("mode_overlap")? {
        cfg.idler_link.mode_overlap = mu;
    }

    if let Some(r) = reader("beam_splitter").get::<f64>("reflectance")? {
        cfg.reflectance = r;
    }

    cfg.signal_filter = profile_from(&reader("signal_filter"), &cfg.signal_filter)?;
    cfg.idler_filter = profile_from(&reader("idler_filter"), &cfg.idler_filter)?;

    let det = reader("detectors");
    if let Some(v) = det.get::<f64>("rate_a_hz")? {
        cfg.detectors.rate_a_hz = v;
    }
    if let Some(v) = det.get::<f64>("rate_b_hz")? {
        cfg.detectors.rate_b_hz = v;
    }
    if let Some(v) = det.get::<f64>("coinc_efficiency")? {
        cfg.detectors.coinc_efficiency = v;
    }
    if let Some(ns) = det.get::<f64>("window_ns")? {
        cfg.detectors.window_s = ns / 1e9;
    }
    if let Some(v) = det.get::<f64>("pair_rate_hz")? {
        cfg.detectors.pair_rate_hz = Some(v);
    }
    if let Some(v) = det.get::<u64>("seed")? {
        cfg.detectors.seed = v;
    }

    let scan = reader("scan");
    if let Some(axis) = scan.get::<ScanAxis>("axis")? {
        cfg.scan.axis = axis;
    }
    if let Some(nm) = scan.get::<f64>("start_nm")? {
        cfg.scan.start_m = nm / 1e9;
    }
    if let Some(nm) = scan.get::<f64>("stop_nm")? {
        cfg.scan.stop_m = nm / 1e9;
    }
    if let Some(nm) = scan.get::<f64>("step_nm")? {
        cfg.scan.step_m = nm / 1e9;
    }
    if let Some(s) = scan.get::<f64>("dwell_s")? {
        cfg.scan.dwell_s = s;
    }
    if let Some(nm) = scan.get::<f64>("other_delay_nm")? {
        cfg.scan.other_delay_m = nm / 1e9;
    }

    cfg.validate()?;
    Ok(cfg)
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_config(s)
    }
}

/// Shipped default scenario, identical to [`ExperimentConfig::default`].
pub const DEFAULT_CONFIG_TEXT: &str = include_str!("../../../configs/default.conf");

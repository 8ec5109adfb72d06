//! Heisenberg-picture channel operators.
//!
//! An optical channel is written as a linear combination of annihilation and
//! creation operators of free vacuum modes. Crystals, delays, splitters and
//! attenuators act on these expansions; vacuum expectation values are taken
//! later by [`crate::expectation`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Largest parametric gain modulus accepted by [`spdc`].
pub const MAX_GAIN: f64 = 0.1;

/// Tolerance on `|t|^2 + |r|^2 = 1`.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("gain modulus {0} outside the perturbative range |K| < {MAX_GAIN}")]
    GainOutOfRange(f64),
    #[error("wavelength must be positive, got {0}")]
    NonPositiveWavelength(f64),
    #[error("beam splitter is not unitary: |t|^2 + |r|^2 = {0}")]
    NonUnitarySplitter(f64),
    #[error("transmission {0} outside [0, 1]")]
    TransmissionOutOfRange(f64),
    #[error("ancilla mode `{0}` is already present in the expansion")]
    AncillaReused(String),
    #[error("mode `{0}` is not an ancilla mode")]
    NotAncilla(String),
    #[error("mode name `{0}` already registered")]
    DuplicateMode(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeRole {
    SignalVacuum,
    IdlerVacuum,
    AncillaVacuum,
}

/// A free vacuum mode. Equality and ordering within an expansion go by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeLabel {
    name: String,
    role: ModeRole,
    center_wavelength: f64,
}

impl ModeLabel {
    pub fn new(
        name: impl Into<String>,
        role: ModeRole,
        center_wavelength: f64,
    ) -> Result<Self, OperatorError> {
        if !(center_wavelength > 0.0) || !center_wavelength.is_finite() {
            return Err(OperatorError::NonPositiveWavelength(center_wavelength));
        }
        Ok(Self {
            name: name.into(),
            role,
            center_wavelength,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> ModeRole {
        self.role
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }
}

/// Hands out modes with unique names for one experiment.
#[derive(Debug, Default, Clone)]
pub struct ModeRegistry {
    modes: BTreeMap<String, ModeLabel>,
    next_ancilla: usize,
}

impl ModeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        role: ModeRole,
        center_wavelength: f64,
    ) -> Result<ModeLabel, OperatorError> {
        if self.modes.contains_key(name) {
            return Err(OperatorError::DuplicateMode(name.to_owned()));
        }
        let mode = ModeLabel::new(name, role, center_wavelength)?;
        self.modes.insert(name.to_owned(), mode.clone());
        Ok(mode)
    }

    /// Registers the next unused `anc_k` mode.
    pub fn fresh_ancilla(&mut self, center_wavelength: f64) -> Result<ModeLabel, OperatorError> {
        loop {
            let name = format!("anc_{}", self.next_ancilla);
            self.next_ancilla += 1;
            if !self.modes.contains_key(&name) {
                return self.register(&name, ModeRole::AncillaVacuum, center_wavelength);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&ModeLabel> {
        self.modes.get(name)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LadderKind {
    Annihilation,
    Creation,
}

impl LadderKind {
    pub fn flipped(self) -> Self {
        match self {
            LadderKind::Annihilation => LadderKind::Creation,
            LadderKind::Creation => LadderKind::Annihilation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderTerm {
    pub mode: ModeLabel,
    pub kind: LadderKind,
    pub coefficient: Complex64,
    /// Total power of parametric gain factors carried by this term.
    pub gain_degree: u32,
}

type TermKey = (String, LadderKind, u32);

/// Linear combination of ladder operators.
///
/// Terms are kept merged per `(mode, kind, gain_degree)`; exact zeros are
/// dropped. Keeping the gain degree in the key lets [`truncate`] remove
/// higher-order corrections after they have been combined with lower-order
/// terms on the same mode. [`OperatorExpansion::coefficient`] sums over
/// degrees and gives the physical amplitude of a `(mode, kind)` pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorExpansion {
    terms: BTreeMap<TermKey, LadderTerm>,
}

impl OperatorExpansion {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The bare annihilation operator of `mode`.
    pub fn annihilation(mode: &ModeLabel) -> Self {
        Self::from_terms([LadderTerm {
            mode: mode.clone(),
            kind: LadderKind::Annihilation,
            coefficient: Complex64::new(1.0, 0.0),
            gain_degree: 0,
        }])
    }

    pub fn creation(mode: &ModeLabel) -> Self {
        Self::annihilation(mode).dagger()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = LadderTerm>) -> Self {
        let mut out = Self::zero();
        for term in terms {
            out.push(term);
        }
        out
    }

    fn push(&mut self, term: LadderTerm) {
        let key = (term.mode.name.clone(), term.kind, term.gain_degree);
        let remove = match self.terms.get_mut(&key) {
            Some(existing) => {
                existing.coefficient += term.coefficient;
                existing.coefficient == Complex64::new(0.0, 0.0)
            }
            None => {
                if term.coefficient != Complex64::new(0.0, 0.0) {
                    self.terms.insert(key.clone(), term);
                }
                false
            }
        };
        if remove {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &LadderTerm> {
        self.terms.values()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms
            .values()
            .all(|t| t.coefficient.re.is_finite() && t.coefficient.im.is_finite())
    }

    /// Total amplitude of `kind` on the mode called `mode`, summed over gain degrees.
    pub fn coefficient(&self, mode: &str, kind: LadderKind) -> Complex64 {
        self.terms
            .values()
            .filter(|t| t.mode.name == mode && t.kind == kind)
            .map(|t| t.coefficient)
            .sum()
    }

    /// Amplitudes per mode name for one ladder kind, merged over gain degrees.
    pub fn amplitudes(&self, kind: LadderKind) -> BTreeMap<&str, Complex64> {
        let mut out: BTreeMap<&str, Complex64> = BTreeMap::new();
        for t in self.terms.values().filter(|t| t.kind == kind) {
            *out.entry(t.mode.name.as_str()).or_default() += t.coefficient;
        }
        out
    }

    pub fn contains_mode(&self, name: &str) -> bool {
        self.terms.values().any(|t| t.mode.name == name)
    }

    pub fn max_gain_degree(&self) -> u32 {
        self.terms.values().map(|t| t.gain_degree).max().unwrap_or(0)
    }

    /// Hermitian conjugate.
    pub fn dagger(&self) -> Self {
        Self::from_terms(self.terms.values().map(|t| LadderTerm {
            mode: t.mode.clone(),
            kind: t.kind.flipped(),
            coefficient: t.coefficient.conj(),
            gain_degree: t.gain_degree,
        }))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.scale_raising_degree(factor, 0)
    }

    fn scale_raising_degree(&self, factor: Complex64, extra_degree: u32) -> Self {
        Self::from_terms(self.terms.values().map(|t| LadderTerm {
            mode: t.mode.clone(),
            kind: t.kind,
            coefficient: t.coefficient * factor,
            gain_degree: t.gain_degree + extra_degree,
        }))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for t in other.terms.values() {
            out.push(t.clone());
        }
        out
    }

    /// `[x, x^dagger]`: sum of `|alpha|^2` over annihilation amplitudes minus
    /// sum of `|beta|^2` over creation amplitudes, per mode after merging degrees.
    pub fn commutator_norm(&self) -> f64 {
        let ann: f64 = self
            .amplitudes(LadderKind::Annihilation)
            .values()
            .map(|c| c.norm_sqr())
            .sum();
        let cre: f64 = self
            .amplitudes(LadderKind::Creation)
            .values()
            .map(|c| c.norm_sqr())
            .sum();
        ann - cre
    }
}

impl fmt::Display for OperatorExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.values().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let dag = match t.kind {
                LadderKind::Annihilation => "",
                LadderKind::Creation => "^dag",
            };
            write!(
                f,
                "({:.6e}{:+.6e}i) a{}_{}",
                t.coefficient.re, t.coefficient.im, dag, t.mode.name
            )?;
        }
        Ok(())
    }
}

/// Classical gain of one crystal, `K = gamma * A_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalParams {
    pub gain: Complex64,
}

impl CrystalParams {
    pub fn new(gain: Complex64) -> Result<Self, OperatorError> {
        check_gain(gain)?;
        Ok(Self { gain })
    }

    /// Gain from conversion efficiency and classical pump amplitude.
    pub fn from_pump(conversion_efficiency: f64, pump_amplitude: Complex64) -> Result<Self, OperatorError> {
        Self::new(pump_amplitude * conversion_efficiency)
    }
}

fn check_gain(gain: Complex64) -> Result<(), OperatorError> {
    let modulus = gain.norm();
    if !modulus.is_finite() {
        return Err(OperatorError::NonFinite("gain"));
    }
    if modulus >= MAX_GAIN {
        return Err(OperatorError::GainOutOfRange(modulus));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterParams {
    t: Complex64,
    r: Complex64,
}

impl BeamSplitterParams {
    pub fn new(t: Complex64, r: Complex64) -> Result<Self, OperatorError> {
        let total = t.norm_sqr() + r.norm_sqr();
        if !total.is_finite() {
            return Err(OperatorError::NonFinite("beam splitter"));
        }
        if (total - 1.0).abs() > UNITARITY_TOL {
            return Err(OperatorError::NonUnitarySplitter(total));
        }
        Ok(Self { t, r })
    }

    /// Real splitter with intensity reflectance `reflectance`.
    pub fn from_reflectance(reflectance: f64) -> Result<Self, OperatorError> {
        if !(0.0..=1.0).contains(&reflectance) {
            return Err(OperatorError::NonUnitarySplitter(f64::NAN));
        }
        Self::new(
            Complex64::new((1.0 - reflectance).sqrt(), 0.0),
            Complex64::new(reflectance.sqrt(), 0.0),
        )
    }

    pub fn balanced() -> Self {
        Self::from_reflectance(0.5).expect("50:50 splitter is unitary")
    }

    pub fn t(&self) -> Complex64 {
        self.t
    }

    pub fn r(&self) -> Complex64 {
        self.r
    }
}

/// Path differences of the pump and signal arms, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelaySetting {
    pub delta_x_p: f64,
    pub delta_x_s: f64,
}

impl DelaySetting {
    pub fn new(delta_x_p: f64, delta_x_s: f64) -> Self {
        Self { delta_x_p, delta_x_s }
    }

    pub fn pump_phase(&self, pump_wavelength: f64) -> f64 {
        2.0 * PI * self.delta_x_p / pump_wavelength
    }

    pub fn signal_phase(&self, signal_wavelength: f64) -> f64 {
        2.0 * PI * self.delta_x_s / signal_wavelength
    }
}

/// One pass through a down-conversion crystal, to first order in the gain.
///
/// Returns `(signal_in + i K idler_in^dag, idler_in + i K signal_in^dag)`;
/// the new terms carry one more gain degree than the terms they came from.
pub fn spdc(
    signal_in: &OperatorExpansion,
    idler_in: &OperatorExpansion,
    gain: Complex64,
) -> Result<(OperatorExpansion, OperatorExpansion), OperatorError> {
    check_gain(gain)?;
    let ik = Complex64::new(0.0, 1.0) * gain;
    let signal_out = signal_in.add(&idler_in.dagger().scale_raising_degree(ik, 1));
    let idler_out = idler_in.add(&signal_in.dagger().scale_raising_degree(ik, 1));
    Ok((signal_out, idler_out))
}

/// Propagation phase `exp(i 2 pi delta_x / wavelength)` on every coefficient.
pub fn phase_delay(
    x: &OperatorExpansion,
    delta_x: f64,
    wavelength: f64,
) -> Result<OperatorExpansion, OperatorError> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(OperatorError::NonPositiveWavelength(wavelength));
    }
    if !delta_x.is_finite() {
        return Err(OperatorError::NonFinite("delay"));
    }
    if delta_x == 0.0 {
        return Ok(x.clone());
    }
    Ok(x.scale(Complex64::from_polar(1.0, 2.0 * PI * delta_x / wavelength)))
}

/// Two-port splitter: `out1 = t a + r b`, `out2 = conj(t) b - conj(r) a`.
///
/// For real `t`, `r` the second port is `t b - r a`.
pub fn beam_splitter(
    a: &OperatorExpansion,
    b: &OperatorExpansion,
    bs: &BeamSplitterParams,
) -> Result<(OperatorExpansion, OperatorExpansion), OperatorError> {
    let bs = BeamSplitterParams::new(bs.t, bs.r)?;
    let out1 = a.scale(bs.t).add(&b.scale(bs.r));
    let out2 = b.scale(bs.t.conj()).add(&a.scale(-bs.r.conj()));
    Ok((out1, out2))
}

/// Amplitude loss: `T x + sqrt(1 - T^2) a_anc` with a fresh ancilla vacuum.
pub fn attenuate(
    x: &OperatorExpansion,
    transmission: f64,
    ancilla: &ModeLabel,
) -> Result<OperatorExpansion, OperatorError> {
    if !(0.0..=1.0).contains(&transmission) {
        return Err(OperatorError::TransmissionOutOfRange(transmission));
    }
    if ancilla.role != ModeRole::AncillaVacuum {
        return Err(OperatorError::NotAncilla(ancilla.name.clone()));
    }
    if x.contains_mode(&ancilla.name) {
        return Err(OperatorError::AncillaReused(ancilla.name.clone()));
    }
    let kept = if transmission == 1.0 {
        x.clone()
    } else {
        x.scale(Complex64::new(transmission, 0.0))
    };
    let leak = (1.0 - transmission * transmission).sqrt();
    let vacuum = OperatorExpansion::annihilation(ancilla).scale(Complex64::new(leak, 0.0));
    Ok(kept.add(&vacuum))
}

/// Drops every term whose gain degree exceeds `max_degree`.
pub fn truncate(x: &OperatorExpansion, max_degree: u32) -> OperatorExpansion {
    OperatorExpansion {
        terms: x
            .terms
            .iter()
            .filter(|(_, t)| t.gain_degree <= max_degree)
            .map(|(k, t)| (k.clone(), t.clone()))
            .collect(),
    }
}

//! Schrödinger-picture cross-check in a truncated Fock space.
//!
//! The two-crystal chain is applied to the vacuum state vector directly:
//! pair creation `1 + i K a^dag_s a^dag_i` per crystal, the lossy idler link
//! as a rotation with an ancilla mode, the signal delay as a photon-number
//! phase, and the signal splitter as a rotation of the two signal modes.
//! Building the state never touches the operator expansions; [`compare`]
//! puts both pictures side by side.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::expectation::{compose_setup, RatePrediction};
use crate::operator::DelaySetting;

/// Number of modes tracked: two signal modes, the shared idler, one ancilla.
pub const MODES: usize = 4;
/// Before the splitter: first-crystal signal. After: detector A port.
pub const SIGNAL_1: usize = 0;
/// Before the splitter: second-crystal signal. After: the unused port.
pub const SIGNAL_2: usize = 1;
pub const IDLER: usize = 2;
pub const ANCILLA: usize = 3;

pub const MAX_PER_MODE: u8 = 2;
pub const MAX_TOTAL: u8 = 4;
/// Largest gain for which the truncated expansion is trusted.
pub const MAX_ORACLE_GAIN: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("gain {0} too large for the truncated Fock expansion (limit {MAX_ORACLE_GAIN})")]
    GainTooLarge(f64),
}

pub type Occupation = [u8; MODES];

/// Sparse state vector over occupation-number tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amplitudes: BTreeMap<Occupation, Complex64>,
}

fn within_bounds(occ: &Occupation) -> bool {
    occ.iter().all(|&n| n <= MAX_PER_MODE) && occ.iter().map(|&n| n as u32).sum::<u32>() <= MAX_TOTAL as u32
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl FockState {
    pub fn vacuum() -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert([0; MODES], Complex64::new(1.0, 0.0));
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &BTreeMap<Occupation, Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.amplitudes.get(occ).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    fn accumulate(target: &mut BTreeMap<Occupation, Complex64>, occ: Occupation, amp: Complex64) {
        if within_bounds(&occ) {
            *target.entry(occ).or_default() += amp;
        }
    }

    /// `(1 + i K a^dag_m a^dag_n) |psi>`, dropping states outside the truncation.
    pub fn create_pair(&self, gain: Complex64, m: usize, n: usize) -> Self {
        let mut out = self.amplitudes.clone();
        let ik = Complex64::new(0.0, 1.0) * gain;
        for (occ, amp) in &self.amplitudes {
            let mut next = *occ;
            let factor = (f64::from(next[m]) + 1.0).sqrt() * (f64::from(next[n]) + 1.0).sqrt();
            next[m] += 1;
            next[n] += 1;
            Self::accumulate(&mut out, next, ik * factor * amp);
        }
        Self { amplitudes: out }
    }

    /// Multiplies each amplitude by `exp(i n_m phase)`.
    pub fn phase_shift(&self, m: usize, phase: f64) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(occ, amp)| (*occ, amp * Complex64::from_polar(1.0, phase * f64::from(occ[m]))))
                .collect(),
        }
    }

    /// Linear two-mode transformation given by the images of the creation
    /// operators: `a^dag_m -> from_m.0 a^dag_m + from_m.1 a^dag_n`, and
    /// likewise for `a^dag_n`.
    pub fn rotate(
        &self,
        m: usize,
        n: usize,
        from_m: (Complex64, Complex64),
        from_n: (Complex64, Complex64),
    ) -> Self {
        let mut out = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            let p = u32::from(occ[m]);
            let q = u32::from(occ[n]);
            let norm_in = (factorial(p) * factorial(q)).sqrt();
            for j in 0..=p {
                for k in 0..=q {
                    let coeff = binomial(p, j)
                        * binomial(q, k)
                        * from_m.0.powu(j)
                        * from_m.1.powu(p - j)
                        * from_n.0.powu(k)
                        * from_n.1.powu(q - k);
                    let on_m = j + k;
                    let on_n = p + q - on_m;
                    let norm_out = (factorial(on_m) * factorial(on_n)).sqrt();
                    let mut next = *occ;
                    next[m] = on_m as u8;
                    next[n] = on_n as u8;
                    Self::accumulate(&mut out, next, amp * coeff * (norm_out / norm_in));
                }
            }
        }
        out.retain(|_, a: &mut Complex64| *a != Complex64::new(0.0, 0.0));
        Self { amplitudes: out }
    }

    /// `<psi| f(occupations) |psi> / <psi|psi>` for a diagonal observable.
    pub fn expectation(&self, observable: impl Fn(&Occupation) -> f64) -> f64 {
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return 0.0;
        }
        self.amplitudes
            .iter()
            .map(|(occ, amp)| amp.norm_sqr() * observable(occ))
            .sum::<f64>()
            / norm
    }
}

/// Perturbative state of the two-crystal interferometer after the signal splitter.
pub fn build_state(config: &ExperimentConfig, delays: DelaySetting) -> Result<FockState, FockError> {
    for g in [config.crystal1.gain, config.crystal2.gain] {
        if g.abs() > MAX_ORACLE_GAIN {
            return Err(FockError::GainTooLarge(g));
        }
    }
    let zero = Complex64::new(0.0, 0.0);
    let re = |x: f64| Complex64::new(x, 0.0);

    let pump_phase = 2.0 * PI * delays.delta_x_p / config.pump.wavelength_m;
    let signal_phase = 2.0 * PI * delays.delta_x_s / config.signal_filter.center_wavelength();

    let state = FockState::vacuum().create_pair(re(config.crystal1.gain), SIGNAL_1, IDLER);

    let eta = config.idler_link.transmission * config.idler_link.mode_overlap;
    let leak = (1.0 - eta * eta).sqrt();
    let state = state.rotate(IDLER, ANCILLA, (re(eta), re(-leak)), (re(leak), re(eta)));

    let k2 = Complex64::from_polar(config.crystal2.gain, pump_phase);
    let state = if k2 == zero {
        state
    } else {
        state.create_pair(k2, SIGNAL_2, IDLER)
    };

    let state = state.phase_shift(SIGNAL_1, signal_phase);

    // port A collects r * (first signal) + t * (second signal)
    let r = config.reflectance.sqrt();
    let t = (1.0 - config.reflectance).sqrt();
    Ok(state.rotate(SIGNAL_1, SIGNAL_2, (re(r), re(t)), (re(t), re(-r))))
}

/// Mean photon numbers at D_A and D_B and the mean of their product.
pub fn detection_moments(state: &FockState) -> RatePrediction {
    RatePrediction {
        p_a: state.expectation(|occ| f64::from(occ[SIGNAL_1])),
        p_b: state.expectation(|occ| f64::from(occ[IDLER])),
        p_ab: state.expectation(|occ| f64::from(occ[SIGNAL_1]) * f64::from(occ[IDLER])),
    }
}

/// Engine and oracle moments at one delay setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub delta_x_p: f64,
    pub delta_x_s: f64,
    pub engine: RatePrediction,
    pub oracle: RatePrediction,
    /// Largest moment difference over `|K1|^2 + |K2|^2`.
    pub deviation: f64,
}

/// `max |engine - oracle| / (|K1|^2 + |K2|^2)` over the three moments.
pub fn relative_deviation(config: &ExperimentConfig, engine: &RatePrediction, oracle: &RatePrediction) -> f64 {
    let scale = config.crystal1.gain.powi(2) + config.crystal2.gain.powi(2);
    if scale == 0.0 {
        return 0.0;
    }
    [
        engine.p_a - oracle.p_a,
        engine.p_b - oracle.p_b,
        engine.p_ab - oracle.p_ab,
    ]
    .iter()
    .map(|d| d.abs() / scale)
    .fold(0.0, f64::max)
}

pub fn compare(config: &ExperimentConfig, delays: DelaySetting) -> Result<OracleComparison, FockError> {
    let engine = compose_setup(config, delays);
    let oracle = detection_moments(&build_state(config, delays)?);
    Ok(OracleComparison {
        delta_x_p: delays.delta_x_p,
        delta_x_s: delays.delta_x_s,
        engine,
        oracle,
        deviation: relative_deviation(config, &engine, &oracle),
    })
}

//! Gaussian spectral profiles and the coherence envelopes they imply.

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

use crate::config::{ExperimentConfig, ScanAxis};
use crate::expectation::{compose_setup, RatePrediction};
use crate::operator::DelaySetting;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("center wavelength must be positive, got {0}")]
    CenterWavelength(f64),
    #[error("spectral width must be positive, got {0}")]
    Width(f64),
    #[error("wavelength FWHM {fwhm} is not narrow compared with the center {center}")]
    NotNarrowband { center: f64, fwhm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fwhm {
    /// Full width at half maximum in wavelength, metres.
    Wavelength(f64),
    /// Full width at half maximum in frequency, Hz.
    Frequency(f64),
}

/// Gaussian spectral density described by center wavelength and FWHM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProfile {
    center_wavelength: f64,
    fwhm: Fwhm,
}

impl SpectralProfile {
    pub fn new(center_wavelength: f64, fwhm: Fwhm) -> Result<Self, SpectralError> {
        if !(center_wavelength > 0.0) || !center_wavelength.is_finite() {
            return Err(SpectralError::CenterWavelength(center_wavelength));
        }
        let width = match fwhm {
            Fwhm::Wavelength(w) | Fwhm::Frequency(w) => w,
        };
        if !(width > 0.0) || !width.is_finite() {
            return Err(SpectralError::Width(width));
        }
        if let Fwhm::Wavelength(w) = fwhm {
            // a tenth of the center is where the linearised c dλ/λ² stops making sense
            if w > 0.1 * center_wavelength {
                return Err(SpectralError::NotNarrowband {
                    center: center_wavelength,
                    fwhm: w,
                });
            }
        }
        Ok(Self {
            center_wavelength,
            fwhm,
        })
    }

    pub fn from_wavelength_fwhm(center_wavelength: f64, fwhm: f64) -> Result<Self, SpectralError> {
        Self::new(center_wavelength, Fwhm::Wavelength(fwhm))
    }

    pub fn from_frequency_fwhm(center_wavelength: f64, fwhm_hz: f64) -> Result<Self, SpectralError> {
        Self::new(center_wavelength, Fwhm::Frequency(fwhm_hz))
    }

    /// Profile whose envelope half-maximum delay equals `coherence_length`.
    pub fn with_coherence_length(
        center_wavelength: f64,
        coherence_length: f64,
    ) -> Result<Self, SpectralError> {
        if !(coherence_length > 0.0) || !coherence_length.is_finite() {
            return Err(SpectralError::Width(coherence_length));
        }
        let fwhm_hz = 2.0 * LN_2 * SPEED_OF_LIGHT / (PI * coherence_length);
        Self::from_frequency_fwhm(center_wavelength, fwhm_hz)
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    pub fn fwhm(&self) -> Fwhm {
        self.fwhm
    }
}

pub fn frequency_fwhm(p: &SpectralProfile) -> f64 {
    match p.fwhm {
        Fwhm::Frequency(hz) => hz,
        Fwhm::Wavelength(w) => SPEED_OF_LIGHT * w / (p.center_wavelength * p.center_wavelength),
    }
}

/// Normalised modulus of the Fourier transform of the Gaussian spectrum at
/// delay `delta_x / c`: `exp(-(pi dnu dx / c)^2 / (4 ln 2))`.
pub fn envelope(p: &SpectralProfile, delta_x: f64) -> f64 {
    if delta_x == 0.0 {
        return 1.0;
    }
    let arg = PI * frequency_fwhm(p) * delta_x / SPEED_OF_LIGHT;
    (-(arg * arg) / (4.0 * LN_2)).exp()
}

/// Delay at which [`envelope`] falls to one half.
pub fn coherence_length(p: &SpectralProfile) -> f64 {
    2.0 * LN_2 * SPEED_OF_LIGHT / (PI * frequency_fwhm(p))
}

/// Standard deviation of the Gaussian envelope in delay, `exp(-dx^2 / (2 s^2))`.
pub fn envelope_sigma(p: &SpectralProfile) -> f64 {
    (2.0 * LN_2).sqrt() * SPEED_OF_LIGHT / (PI * frequency_fwhm(p))
}

/// Baseline and oscillating part of a monochromatic prediction.
///
/// All rates are first harmonics in the phase difference, so the baseline is
/// the mean of the prediction and its half-pump-period shifted copy.
pub(crate) fn split_fringe(
    config: &ExperimentConfig,
    delays: DelaySetting,
) -> (RatePrediction, RatePrediction) {
    let here = compose_setup(config, delays);
    let shifted = compose_setup(
        config,
        DelaySetting::new(
            delays.delta_x_p + 0.5 * config.pump.wavelength_m,
            delays.delta_x_s,
        ),
    );
    let baseline = RatePrediction {
        p_a: 0.5 * (here.p_a + shifted.p_a),
        p_b: 0.5 * (here.p_b + shifted.p_b),
        p_ab: 0.5 * (here.p_ab + shifted.p_ab),
    };
    (here, baseline)
}

/// Fringe-mean of the monochromatic prediction (independent of delays).
pub fn fringe_baseline(config: &ExperimentConfig) -> RatePrediction {
    split_fringe(config, DelaySetting::default()).1
}

/// Envelope product `env_signal(dx_s) * env_pump(dx_p)`.
pub fn envelope_factor(config: &ExperimentConfig, delays: DelaySetting) -> f64 {
    envelope(&config.signal_filter, delays.delta_x_s) * envelope(&config.pump_profile(), delays.delta_x_p)
}

/// Monochromatic rates with the fringe term damped by both coherence envelopes.
pub fn modulated_rates(config: &ExperimentConfig, delays: DelaySetting) -> RatePrediction {
    let (mono, baseline) = split_fringe(config, delays);
    let damping = 1.0 - envelope_factor(config, delays);
    let damp = |value: f64, mean: f64| value - damping * (value - mean);
    RatePrediction {
        p_a: damp(mono.p_a, baseline.p_a),
        p_b: damp(mono.p_b, baseline.p_b),
        p_ab: damp(mono.p_ab, baseline.p_ab),
    }
}

/// Envelope of the scanned axis at `delta_x`, other axis held at zero.
pub fn axis_envelope(config: &ExperimentConfig, axis: ScanAxis, delta_x: f64) -> f64 {
    match axis {
        ScanAxis::Signal => envelope(&config.signal_filter, delta_x),
        ScanAxis::Pump => envelope(&config.pump_profile(), delta_x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal() -> SpectralProfile {
        SpectralProfile::from_wavelength_fwhm(808e-9, 2e-9).unwrap()
    }

    fn pump() -> SpectralProfile {
        SpectralProfile::from_frequency_fwhm(355e-9, 45e9).unwrap()
    }

    #[test]
    fn frequency_fwhm_examples() {
        // c * dλ / λ² evaluated by hand
        let expect = 299_792_458.0 * 2e-9 / (808e-9f64 * 808e-9);
        assert!((frequency_fwhm(&signal()) - expect).abs() < 1.0);
        assert!((frequency_fwhm(&signal()) / 9.19e11 - 1.0).abs() < 1e-3);
        assert_eq!(frequency_fwhm(&pump()), 4.5e10);
        let idler = SpectralProfile::from_wavelength_fwhm(632e-9, 3e-9).unwrap();
        assert!((frequency_fwhm(&idler) / 2.25e12 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(envelope(&pump(), 0.0), 1.0);
        assert_eq!(envelope(&signal(), 0.0), 1.0);
        let e = envelope(&pump(), 600e-6);
        assert!((e - 0.9715).abs() < 1e-4, "{e}");
        assert!(e > 0.9);
        let half = envelope(&signal(), 144e-6);
        assert!((half - 0.5).abs() < 2e-3, "{half}");
    }

    #[test]
    fn coherence_length_examples() {
        assert!((coherence_length(&pump()) - 2.94e-3).abs() < 5e-6);
        let sig_919 = SpectralProfile::from_frequency_fwhm(808e-9, 919e9).unwrap();
        assert!((coherence_length(&sig_919) - 144e-6).abs() < 0.5e-6);
        let wide = SpectralProfile::from_frequency_fwhm(808e-9, 1e300).unwrap();
        assert!(coherence_length(&wide) < 1e-280);
        let lc = coherence_length(&signal());
        assert!((envelope(&signal(), lc) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coherence_length_override_round_trips() {
        let p = SpectralProfile::with_coherence_length(355e-9, 1.4e-3).unwrap();
        assert!((coherence_length(&p) - 1.4e-3).abs() < 1e-15);
        assert!((envelope(&p, 1.4e-3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sigma_matches_envelope() {
        let s = envelope_sigma(&signal());
        for dx in [1e-6, 5e-5, 2e-4] {
            let g = (-(dx * dx) / (2.0 * s * s)).exp();
            assert!((g - envelope(&signal(), dx)).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(SpectralProfile::from_wavelength_fwhm(0.0, 1e-9).is_err());
        assert!(SpectralProfile::from_wavelength_fwhm(800e-9, 0.0).is_err());
        assert!(SpectralProfile::from_wavelength_fwhm(800e-9, 200e-9).is_err());
        assert!(SpectralProfile::from_frequency_fwhm(800e-9, -3.0).is_err());
    }
}

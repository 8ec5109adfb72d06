//! Photon-counting statistics: calibration, Poisson sampling and accidentals.
//!
//! Every scan point draws from its own ChaCha stream selected by the point
//! index, so records do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expectation::RatePrediction;

/// Largest Poisson mean we sample; beyond this counts stop being exact integers in f64.
pub const MAX_EXPECTED_COUNTS: f64 = 9.0e15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountingError {
    #[error("expected counts {0:e} exceed the representable range")]
    Overflow(f64),
    #[error("invalid rate {0}")]
    InvalidRate(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingConfig {
    /// D_A count rate at the fringe midpoint, 1/s.
    pub rate_a_cal: f64,
    /// D_B count rate at the fringe midpoint, 1/s.
    pub rate_b_cal: f64,
    /// True coincidences at the fringe midpoint as a fraction of `rate_a_cal`.
    pub coinc_efficiency: f64,
    /// Coincidence window, s.
    pub window: f64,
    /// Integration time per scan point, s.
    pub dwell: f64,
    pub seed: u64,
}

/// Detected rates in counts per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectedRates {
    pub rate_a: f64,
    pub rate_b: f64,
    /// True coincidences.
    pub coinc: f64,
    /// Chance coincidences between the two singles streams.
    pub accidental: f64,
}

impl DetectedRates {
    /// Coincidence rate a counter would see, accidentals included.
    pub fn measured_coinc(&self) -> f64 {
        self.coinc + self.accidental
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountSample {
    pub counts_a: u64,
    pub counts_b: u64,
    pub coincidences: u64,
}

/// Counts plus the accidental-coincidence mean that went into them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampledPoint {
    pub counts: CountSample,
    pub accidentals_expected: f64,
}

/// Maps model rates (units of |K|^2) to detected rates.
///
/// The fringe-mean model rates land on the calibrated detector rates. A
/// channel whose mean vanishes (no gain) sits flat at its calibration value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    baseline: RatePrediction,
    rate_a: f64,
    rate_b: f64,
    coinc: f64,
    window: f64,
}

impl Calibration {
    pub fn new(baseline: RatePrediction, cc: &CountingConfig) -> Self {
        Self {
            baseline,
            rate_a: cc.rate_a_cal,
            rate_b: cc.rate_b_cal,
            coinc: cc.rate_a_cal * cc.coinc_efficiency,
            window: cc.window,
        }
    }

    pub fn apply(&self, p: &RatePrediction) -> DetectedRates {
        let scale = |value: f64, mean: f64, cal: f64| {
            if mean > 0.0 {
                cal * value / mean
            } else {
                cal
            }
        };
        let rate_a = scale(p.p_a, self.baseline.p_a, self.rate_a);
        let rate_b = scale(p.p_b, self.baseline.p_b, self.rate_b);
        DetectedRates {
            rate_a,
            rate_b,
            coinc: scale(p.p_ab, self.baseline.p_ab, self.coinc),
            accidental: accidental_rate(rate_a, rate_b, self.window),
        }
    }
}

/// Rate of chance coincidences between two uncorrelated streams.
pub fn accidental_rate(r_a: f64, r_b: f64, window: f64) -> f64 {
    r_a * r_b * window
}

/// Probability of two or more pairs in one window, Poisson mean `pair_rate * window`.
pub fn double_pair_probability(pair_rate: f64, window: f64) -> f64 {
    let mu = pair_rate * window;
    if mu <= 0.0 {
        return 0.0;
    }
    // 1 - e^-mu (1 + mu), written to avoid cancellation for small mu
    if mu < 1e-3 {
        let mut term = mu * mu / 2.0;
        let mut sum = 0.0;
        let mut k = 2.0;
        while term > sum * 1e-18 {
            sum += term;
            k += 1.0;
            term *= mu / k;
        }
        return sum * (-mu).exp();
    }
    -(-mu).exp_m1() - mu * (-mu).exp()
}

/// Per-point generator: ChaCha8 seeded by the run seed, stream = point index.
pub fn point_rng(seed: u64, point_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point_index);
    rng
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64, CountingError> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(CountingError::InvalidRate(mean));
    }
    if mean > MAX_EXPECTED_COUNTS {
        return Err(CountingError::Overflow(mean));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|_| CountingError::InvalidRate(mean))?;
    Ok(dist.sample(rng) as u64)
}

/// Draws A, B, true-coincidence and accidental counts for one scan point,
/// in that order from the point's stream.
pub fn sample_counts(
    rates: &DetectedRates,
    cc: &CountingConfig,
    point_index: u64,
) -> Result<SampledPoint, CountingError> {
    let mut rng = point_rng(cc.seed, point_index);
    let accidentals_expected = rates.accidental * cc.dwell;
    let counts_a = poisson(&mut rng, rates.rate_a * cc.dwell)?;
    let counts_b = poisson(&mut rng, rates.rate_b * cc.dwell)?;
    let true_coinc = poisson(&mut rng, rates.coinc * cc.dwell)?;
    let accidental = poisson(&mut rng, accidentals_expected)?;
    Ok(SampledPoint {
        counts: CountSample {
            counts_a,
            counts_b,
            coincidences: true_coinc + accidental,
        },
        accidentals_expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(seed: u64) -> CountingConfig {
        CountingConfig {
            rate_a_cal: 42_000.0,
            rate_b_cal: 110_000.0,
            coinc_efficiency: 0.1,
            window: 2e-9,
            dwell: 0.5,
            seed,
        }
    }

    #[test]
    fn zero_rates_give_zero_counts() {
        let p = sample_counts(&DetectedRates::default(), &cc(3), 17).unwrap();
        assert_eq!(p.counts, CountSample::default());
        assert_eq!(p.accidentals_expected, 0.0);
    }

    #[test]
    fn accidental_rate_arithmetic() {
        assert!((accidental_rate(1e6, 1e6, 1e-9) - 1e3).abs() < 1e-9);
        assert_eq!(accidental_rate(0.0, 123.0, 2e-9), 0.0);
        // 42e3 * 110e3 * 2e-9
        assert!((accidental_rate(42e3, 110e3, 2e-9) - 9.24).abs() < 1e-12);
    }

    #[test]
    fn double_pair_examples() {
        assert_eq!(double_pair_probability(0.0, 2e-9), 0.0);
        assert!(double_pair_probability(1e-3, 2e-9) < 1e-23);
        let p = double_pair_probability(5e6, 2e-9);
        assert!((p - 4.9668e-5).abs() < 1e-8, "{p}");
        assert!(p < 1e-2);
        let p = double_pair_probability(1.1e5, 2e-9);
        assert!((p / 2.4182e-8 - 1.0).abs() < 1e-3, "{p}");
        // both branches agree at the switch-over
        let (mu_lo, mu_hi) = (0.999_999e-3, 1.000_001e-3);
        let lo = double_pair_probability(mu_lo / 2e-9, 2e-9) / (mu_lo * mu_lo);
        let hi = double_pair_probability(mu_hi / 2e-9, 2e-9) / (mu_hi * mu_hi);
        assert!((hi - lo).abs() < 1e-9, "{lo} {hi}");
    }

    #[test]
    fn sampling_is_order_independent() {
        let rates = DetectedRates {
            rate_a: 42_000.0,
            rate_b: 110_000.0,
            coinc: 4_200.0,
            accidental: 9.24,
        };
        let forward: Vec<_> = (0..20).map(|i| sample_counts(&rates, &cc(9), i).unwrap()).collect();
        let backward: Vec<_> = (0..20)
            .rev()
            .map(|i| sample_counts(&rates, &cc(9), i).unwrap())
            .collect();
        let mut backward = backward;
        backward.reverse();
        assert_eq!(forward, backward);
        assert_ne!(forward[0], forward[1]);
        assert_ne!(
            sample_counts(&rates, &cc(9), 0).unwrap(),
            sample_counts(&rates, &cc(10), 0).unwrap()
        );
    }

    #[test]
    fn overflow_rejected() {
        let rates = DetectedRates {
            rate_a: 1e300,
            rate_b: 0.0,
            coinc: 0.0,
            accidental: 0.0,
        };
        assert!(matches!(
            sample_counts(&rates, &cc(1), 0),
            Err(CountingError::Overflow(_))
        ));
    }

    #[test]
    fn calibration_maps_mean_to_detector_rates() {
        let base = RatePrediction {
            p_a: 2e-6,
            p_b: 2e-6,
            p_ab: 2e-6,
        };
        let cal = Calibration::new(base, &cc(1));
        let r = cal.apply(&base);
        assert_eq!(r.rate_a, 42_000.0);
        assert_eq!(r.rate_b, 110_000.0);
        assert!((r.coinc - 4_200.0).abs() < 1e-9);
        assert!((r.accidental - 9.24).abs() < 1e-12);
        assert!((r.measured_coinc() - 4_209.24).abs() < 1e-9);
        let flat = Calibration::new(RatePrediction::default(), &cc(1)).apply(&RatePrediction::default());
        assert_eq!(flat.rate_a, 42_000.0);
    }
}

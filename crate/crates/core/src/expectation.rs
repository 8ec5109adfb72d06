//! Vacuum expectation values of channel expansions and the full two-crystal chain.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::operator::{
    attenuate, beam_splitter, phase_delay, spdc, truncate, DelaySetting, LadderKind,
    ModeRegistry, ModeRole, OperatorExpansion,
};

/// Detection rates in units of the squared parametric gain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePrediction {
    /// Signal singles at D_A.
    pub p_a: f64,
    /// Idler singles at D_B.
    pub p_b: f64,
    /// Coincidences between D_A and D_B.
    pub p_ab: f64,
}

/// `<0| x^dag x |0>`: only creation amplitudes survive on the vacuum.
pub fn singles_rate(x: &OperatorExpansion) -> f64 {
    x.amplitudes(LadderKind::Creation)
        .values()
        .map(|c| c.norm_sqr())
        .sum()
}

/// `|| i s |0> ||^2`, i.e. `<0| s^dag i^dag i s |0>`.
///
/// `s|0>` is a one-photon superposition built from the creation amplitudes
/// of `s`. Applying `i` contracts its annihilation amplitudes against those
/// photons (vacuum component) and adds a second photon through its creation
/// amplitudes (two-photon component).
pub fn coincidence_rate(s: &OperatorExpansion, i: &OperatorExpansion) -> f64 {
    let photon = s.amplitudes(LadderKind::Creation);
    if photon.is_empty() {
        return 0.0;
    }
    let lowering = i.amplitudes(LadderKind::Annihilation);
    let raising = i.amplitudes(LadderKind::Creation);

    let vacuum: Complex64 = photon
        .iter()
        .filter_map(|(mode, beta)| lowering.get(mode).map(|alpha| alpha * beta))
        .sum();

    // amplitude of a^dag_m a^dag_n |0> keyed by the ordered pair (m <= n)
    let mut pairs: BTreeMap<(&str, &str), Complex64> = BTreeMap::new();
    for (&m, gamma) in &raising {
        for (&n, beta) in &photon {
            let key = if m <= n { (m, n) } else { (n, m) };
            *pairs.entry(key).or_default() += gamma * beta;
        }
    }
    // <0| a_n a_m a^dag_m a^dag_n |0> is 1 for m != n and 2 for m == n
    let two_photon: f64 = pairs
        .iter()
        .map(|((m, n), amp)| if m == n { 2.0 } else { 1.0 } * amp.norm_sqr())
        .sum();

    vacuum.norm_sqr() + two_photon
}

/// Output channels of the full chain for one delay setting.
#[derive(Debug, Clone)]
pub struct SetupOperators {
    /// Signal field at D_A, first splitter port.
    pub signal_a: OperatorExpansion,
    /// Signal field leaving the second splitter port.
    pub signal_other: OperatorExpansion,
    /// Idler field reaching D_B.
    pub idler: OperatorExpansion,
}

/// Builds the channel expansions of the two-crystal interferometer:
/// crystal one, lossy idler link, crystal two (pump phase on its gain),
/// signal delay on the first-crystal signal, then the signal splitter.
pub fn setup_operators(config: &ExperimentConfig, delays: DelaySetting) -> SetupOperators {
    let ls = config.signal_wavelength();
    let li = config.idler_wavelength();
    let mut modes = ModeRegistry::new();
    let so1 = modes.register("so1", ModeRole::SignalVacuum, ls).expect("fresh registry");
    let so2 = modes.register("so2", ModeRole::SignalVacuum, ls).expect("fresh registry");
    let io1 = modes.register("io1", ModeRole::IdlerVacuum, li).expect("fresh registry");
    let anc = modes.fresh_ancilla(li).expect("fresh registry");

    let k1 = config.crystal1.params().gain;
    let pump_phase = delays.pump_phase(config.pump.wavelength_m);
    let k2 = config.crystal2.params().gain * Complex64::from_polar(1.0, pump_phase);

    let (s1, i1) = spdc(
        &OperatorExpansion::annihilation(&so1),
        &OperatorExpansion::annihilation(&io1),
        k1,
    )
    .expect("gain validated with the config");
    let i1 = attenuate(&i1, config.eta(), &anc).expect("eta validated with the config");
    let (s2, i2) = spdc(&OperatorExpansion::annihilation(&so2), &i1, k2)
        .expect("gain validated with the config");
    let s2 = truncate(&s2, config.truncation_degree);
    let s1 = phase_delay(&s1, delays.delta_x_s, ls).expect("positive wavelength");
    let (signal_a, signal_other) =
        beam_splitter(&s2, &s1, &config.beam_splitter()).expect("unitary splitter");
    SetupOperators {
        signal_a,
        signal_other,
        idler: i2,
    }
}

/// Singles at both detectors and their coincidences for one delay setting.
pub fn compose_setup(config: &ExperimentConfig, delays: DelaySetting) -> RatePrediction {
    let ops = setup_operators(config, delays);
    RatePrediction {
        p_a: singles_rate(&ops.signal_a),
        p_b: singles_rate(&ops.idler),
        p_ab: coincidence_rate(&ops.signal_a, &ops.idler),
    }
}

use phasemem::config::{ExperimentConfig, ScanAxis};
use phasemem::scan::{fit_fringe, predict_scan, run_scan, Channel, FitInput, FringeFit};

fn lossy_pump(seed: u64, dwell: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.idler_link.transmission = 0.7;
    cfg.scan.axis = ScanAxis::Pump;
    cfg.scan.start_m = -1e-6;
    cfg.scan.stop_m = 1e-6;
    cfg.scan.dwell_s = dwell;
    cfg.detectors.seed = seed;
    cfg
}

fn fit_seed(seed: u64, dwell: f64) -> FringeFit {
    let cfg = lossy_pump(seed, dwell);
    let rec = run_scan(&cfg, ScanAxis::Pump, &cfg.scan.grid()).unwrap();
    fit_fringe(&rec.fit_input(Channel::A)).unwrap()
}

#[test]
fn noisy_visibility_tracks_the_idler_transmission() {
    let seeds = 40;
    let fits: Vec<FringeFit> = (1..=seeds).map(|s| fit_seed(s, 0.5)).collect();
    let mut covered = 0;
    for (s, f) in fits.iter().enumerate() {
        assert!(f.converged, "seed {}", s + 1);
        assert!((f.visibility - 0.70).abs() <= 0.02, "seed {}: V = {}", s + 1, f.visibility);
        assert!(f.visibility_sigma > 0.0 && f.visibility_sigma.is_finite());
        if (f.visibility - 0.70).abs() <= 3.0 * f.visibility_sigma {
            covered += 1;
        }
        assert!((f.period - 355e-9).abs() < 1e-9, "seed {}: {}", s + 1, f.period);
        assert!(f.reduced_residual > 0.5 && f.reduced_residual < 2.0, "{}", f.reduced_residual);
    }
    assert!(covered as f64 >= 0.95 * seeds as f64, "{covered}/{seeds} within 3 sigma");
}

#[test]
fn no_aliasing_on_either_axis() {
    for seed in 1..=10 {
        let pump = fit_seed(seed, 0.5);
        assert!((pump.period / 355e-9 - 1.0).abs() < 0.01, "{}", pump.period);

        let mut cfg = ExperimentConfig::default();
        cfg.detectors.seed = seed;
        let rec = run_scan(&cfg, ScanAxis::Signal, &cfg.scan.grid()).unwrap();
        for ch in [Channel::A, Channel::Coinc] {
            let f = fit_fringe(&rec.fit_input(ch)).unwrap();
            assert!((f.period / 808e-9 - 1.0).abs() < 0.01, "{:?}: {}", ch, f.period);
        }
    }
}

#[test]
fn noiseless_model_fits_to_rounding() {
    let cfg = lossy_pump(1, 0.5);
    let rec = predict_scan(&cfg, ScanAxis::Pump, &cfg.scan.grid()).unwrap();
    for ch in [Channel::A, Channel::Coinc] {
        let f = fit_fringe(&rec.model_input(ch)).unwrap();
        assert!(f.converged);
        assert!(f.reduced_residual <= 1e-12, "{:?}: {}", ch, f.reduced_residual);
    }
    let a = fit_fringe(&rec.model_input(Channel::A)).unwrap();
    assert!((a.visibility - 0.7).abs() < 1e-9, "{}", a.visibility);
}

#[test]
fn fit_is_invariant_under_rate_scaling() {
    let cfg = lossy_pump(1, 0.5);
    let rec = predict_scan(&cfg, ScanAxis::Pump, &cfg.scan.grid()).unwrap();
    let base = rec.model_input(Channel::A);
    let reference = fit_fringe(&base).unwrap();
    for scale in [1e-3, 1.0, 4.2e4, 1e9] {
        let scaled = FitInput::new(
            base.delays.clone(),
            base.values.iter().map(|v| v * scale).collect(),
            base.noise,
        );
        let f = fit_fringe(&scaled).unwrap();
        assert!((f.visibility - reference.visibility).abs() < 1e-9);
        assert!((f.period / reference.period - 1.0).abs() < 1e-9);
        assert!((f.baseline / (reference.baseline * scale) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn visibility_error_shrinks_with_dwell() {
    let seeds = 8;
    let mut previous: Option<(f64, f64)> = None;
    for dwell in [0.05, 0.5, 5.0] {
        let fits: Vec<FringeFit> = (1..=seeds).map(|s| fit_seed(s, dwell)).collect();
        let sigma = fits.iter().map(|f| f.visibility_sigma).sum::<f64>() / seeds as f64;
        let rms = (fits.iter().map(|f| (f.visibility - 0.7).powi(2)).sum::<f64>() / seeds as f64).sqrt();
        if let Some((s0, r0)) = previous {
            // ten times the dwell should cut the error by about sqrt(10)
            assert!(sigma < s0 / 2.5, "sigma {sigma} after {s0}");
            assert!(rms < r0, "rms {rms} after {r0}");
        }
        previous = Some((sigma, rms));
    }
}

#[test]
fn same_seed_same_fit() {
    assert_eq!(fit_seed(5, 0.5), fit_seed(5, 0.5));
    assert_ne!(fit_seed(5, 0.5).visibility, fit_seed(6, 0.5).visibility);
}

"""Smoke test for the phasemem_py extension.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import math

import phasemem_py as pm


def main():
    cfg = pm.Config.default()
    assert cfg.gain_1 == 1e-3 and cfg.eta == 1.0

    peak = pm.predict_rates(cfg)
    dark = pm.predict_rates(cfg, delta_x_p=355e-9 / 2)
    assert abs(peak.p_a / 2e-6 - 1) < 1e-9, peak
    assert dark.p_a < 1e-15, dark

    oracle = pm.oracle_rates(cfg, 1e-7, 3e-7)
    engine = pm.predict_rates(cfg, 1e-7, 3e-7)
    assert abs(oracle.p_a - engine.p_a) < 1e-2 * engine.p_a

    assert abs(pm.envelope(355e-9, 45e9, 600e-6) - 0.9715) < 1e-4
    assert abs(pm.coherence_length(355e-9, 45e9) - 2.94e-3) < 1e-5
    assert abs(pm.accidental_rate(42e3, 110e3, 2e-9) - 9.24) < 1e-12
    assert pm.double_pair_probability(5e7, 2e-9) < 1e-2

    scan = pm.simulate_scan(cfg)
    assert len(scan) == 401 and scan.counts is not None
    fit = scan.fit("a")
    assert abs(fit.period - 808e-9) < 1e-9, fit
    assert scan.to_csv().startswith("delay_m,rate_a_hz")

    cfg.eta = 0.7
    pump = pm.predict_scan(cfg, axis="pump")
    fit = pump.fit("a")
    assert abs(fit.period - 355e-9) < 1e-9, fit
    assert abs(fit.visibility - 0.7) < 5e-3, fit

    try:
        cfg.eta = 1.3
    except ValueError as e:
        assert "idler_link" in str(e)
    else:
        raise AssertionError("eta = 1.3 accepted")

    x = [i * 10e-9 for i in range(200)]
    y = [1 + 0.5 * math.cos(2 * math.pi * v / 500e-9) for v in x]
    assert abs(pm.fit_fringe(x, y).period - 500e-9) < 1e-12

    print("phasemem_py smoke test passed")


if __name__ == "__main__":
    main()

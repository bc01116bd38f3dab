"""One check per acceptance criterion at the stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
The default inversion grid (N=1000, eta=0.1) is used throughout, so this
module takes several minutes.
"""
import os
import re
import subprocess
import sys
import time

import numpy as np
import pytest

from cobro import analysis, ctmc, fourier, simulate
from cobro.fourier import FourierGrid, RainbowSpec
from cobro.pricing import (constant_rho_prices, mc_prices_rainbow, price_constant_rho,
                           rainbow_price_fourier, rainbow_prices_fourier)
from oracles import ALL_STYLES, MARKET, BASE_CFG, SECOND_CFG, STRIKES

pytestmark = pytest.mark.slow
GRID = FourierGrid()
TAU = 0.25
SWEEP = np.arange(80.0, 141.0, 2.0)


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def quotes(cfg, style):
    prices = rainbow_prices_fourier(cfg, MARKET, style, STRIKES, TAU, GRID)
    return analysis.QuoteSet(tuple(zip(STRIKES, prices)), style, TAU, MARKET)


@pytest.fixture(scope="module")
def calibrations():
    out = {}
    for style, cfg in (("PutOnMax", BASE_CFG), ("CallOnMin", BASE_CFG), ("PutOnMin", SECOND_CFG),
                       ("CallOnMax", BASE_CFG)):
        t0 = time.perf_counter()
        res = analysis.calibrate_constant_rho(quotes(cfg, style), GRID)
        out[style] = (res, time.perf_counter() - t0)
        fourier.clear_cache()
    return out


def test_criterion_1_stationary(acceptance):
    pi = ctmc.stationary_distribution(ctmc.Generator(ctmc.BASE_GENERATOR))
    elapsed = best_time(lambda: ctmc.stationary_distribution(ctmc.Generator(ctmc.BASE_GENERATOR)), 50)
    ok = np.array_equal(np.round(pi, 4), [0.2636, 0.4273, 0.3091]) and elapsed < 1e-3
    acceptance(1, "stationary distribution", ok,
               f"pi={np.round(pi, 6).tolist()}, {1e6 * elapsed:.0f} us")
    assert ok


def test_criterion_2_table5(acceptance):
    want = [-0.3177, -0.2488, 0.5784, 0.5298]
    t0 = time.perf_counter()
    got = [ctmc.expected_rho_bar(cfg, tau) for cfg in (BASE_CFG, SECOND_CFG) for tau in (0.25, 0.5)]
    elapsed = time.perf_counter() - t0
    err = max(abs(g - w) for g, w in zip(got, want))
    ok = err < 5e-4 and elapsed < 1.0
    acceptance(2, "Table 5", ok, f"max error {err:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_3_degenerate_equivalence(acceptance):
    cfg = ctmc.RegimeConfig(ctmc.Generator(ctmc.BASE_GENERATOR), [1, 0, 0], [0.6, 0.6, 0.6])
    spec = RainbowSpec("CallOnMax", 90.0, TAU)
    t0 = time.perf_counter()
    a = rainbow_price_fourier(cfg, MARKET, spec, GRID).value
    t_regime = time.perf_counter() - t0
    t0 = time.perf_counter()
    b = price_constant_rho(MARKET, spec, 0.2, GRID).value
    t_const = time.perf_counter() - t0
    fourier.clear_cache()
    diff = abs(a - b)
    ok = diff < 1e-9 and max(t_regime, t_const) < 10
    acceptance(3, "degenerate equivalence", ok,
               f"|diff|={diff:.1e} (1e-12 target {'met' if diff < 1e-12 else 'missed'}), "
               f"{t_regime:.1f} s / {t_const:.1f} s at N=1000")
    assert ok


def test_criterion_4_calibration(acceptance, calibrations):
    want = {"PutOnMax": -0.3177, "CallOnMin": -0.3190, "PutOnMin": 0.4940}
    parts, ok = [], True
    for style, target in want.items():
        res, secs = calibrations[style]
        good = abs(res.rho_star - target) < 0.01 and secs < 300
        ok &= good
        parts.append(f"{style} {res.rho_star:.4f} ({res.iterations} it, {secs:.0f} s)")
    acceptance(4, "calibration", ok, "; ".join(parts))
    assert ok


def test_criterion_5_fourier_vs_monte_carlo(acceptance):
    t0 = time.perf_counter()
    worst, pairs, failures = 0.0, 0, []
    for name, cfg in (("regime", BASE_CFG), ("constant", ctmc.RegimeConfig.constant(0.2))):
        for style in ALL_STYLES:
            strikes = np.array([0.0]) if style == "Put2Call1" else STRIKES
            vals, errs = mc_prices_rainbow(cfg, MARKET, style, strikes, TAU, 100_000, 2024)
            ref = rainbow_prices_fourier(cfg, MARKET, style, strikes, TAU, GRID)
            fourier.clear_cache()
            for k, v, e, f in zip(strikes, vals, errs, ref):
                pairs += 1
                z = abs(v - f) / e if e > 0 else np.inf
                worst = max(worst, z)
                if not z <= 3:
                    failures.append(f"{name} {style} K={k:g}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 600
    acceptance(5, "Fourier vs Monte Carlo", ok,
               f"{pairs} pairs, worst {worst:.2f} se, {elapsed:.0f} s"
               + (f", outside: {', '.join(failures)}" if failures else ""))
    assert ok


def test_criterion_6_simulation_benchmark(acceptance):
    reps, steps = 5000, 100
    grid = simulate.TimeGrid.uniform(1.0, steps)
    ep = simulate.simulate_cd_endpoints(BASE_CFG, 1.0, reps, 31, n_chain_steps=steps)
    pb = simulate.simulate_euler_paths(BASE_CFG, grid, reps, 31)
    checks = []
    for name, total in (("cd", ep.b_t + ep.w_t), ("euler", pb.b[:, -1] + pb.w[:, -1])):
        se = total.std(ddof=1) / np.sqrt(reps)
        checks.append((name, abs(total.mean()) < 3 * se, total.mean(), se))
    draws_ok = ep.total_draws == reps * (steps + 2) and pb.total_draws == reps * 3 * steps
    t_cd = best_time(lambda: simulate.simulate_cd_endpoints(BASE_CFG, 1.0, reps, 31, n_chain_steps=steps), 3)
    t_eu = best_time(lambda: simulate.simulate_euler_paths(BASE_CFG, grid, reps, 31), 3)
    ok = all(c[1] for c in checks) and draws_ok and t_cd <= t_eu
    acceptance(6, "simulation benchmark", ok,
               ", ".join(f"{n} mean {m:+.4f} (se {s:.4f})" for n, _, m, s in checks)
               + f"; draws/path {ep.total_draws // reps} vs {pb.total_draws // reps}"
               + f"; {1e3 * t_cd:.0f} ms vs {1e3 * t_eu:.0f} ms")
    assert ok


def test_criterion_7_error_shape(acceptance, calibrations):
    atm = (SWEEP >= 118) & (SWEEP <= 122)
    # deep out of the money: low strikes for the put, high strikes for the call
    windows = {"PutOnMax": SWEEP <= 88, "CallOnMin": SWEEP >= 132}
    parts, ok = [], True
    for style in ("PutOnMax", "CallOnMin", "CallOnMax"):
        rho = calibrations[style][0].rho_star
        true = rainbow_prices_fourier(BASE_CFG, MARKET, style, SWEEP, TAU, GRID)
        const = constant_rho_prices(MARKET, style, SWEEP, TAU, rho, GRID)
        fourier.clear_cache()
        rel = np.abs(const - true) / true
        if style in windows:
            ratio = rel[windows[style]].mean() / rel[atm].mean()
            ok &= ratio > 5
            parts.append(f"{style} OTM/ATM {ratio:.1f}x")
        else:
            ok &= rel.max() < 5e-3
            parts.append(f"{style} max {100 * rel.max():.3f}%")
    acceptance(7, "error shape", ok, ", ".join(parts))
    assert ok


PROPERTY_SUITES = ("roundtrip or char_fn or payoff_identity or zero_strike_identity or margrabe "
                   "or max_plus_min or clock_identities or reconstruction or marginals_ks")


def test_criterion_8_property_suites(acceptance):
    here = os.path.dirname(os.path.abspath(__file__))
    files = ["test_analysis.py", "test_fourier.py", "test_pricing.py", "test_simulate.py"]
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-m", "not slow", "-p", "no:cacheprovider",
                          "-k", PROPERTY_SUITES, *files], cwd=here, capture_output=True, text=True)
    summary = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    passed = re.search(r"(\d+) passed", summary)
    ok = res.returncode == 0 and passed is not None and "failed" not in summary
    acceptance(8, "property suites", ok, re.sub(r"=+", "", summary).strip())
    assert ok, res.stdout[-3000:]

import math

import numpy as np
import pytest

from cobro import ctmc
from cobro.analysis import (CalibrationError, CalibrationResult, QuoteSet, UnattainablePriceError,
                            calibrate_constant_rho, calibration_objective, implied_correlation,
                            relative_error, rho_hat_stationary, sample_rho_bar, taylor_price_approx)
from cobro.fourier import RainbowSpec
from cobro.pricing import constant_rho_prices, price_constant_rho, rainbow_price_fourier
from oracles import CALL_PUT, MARKET, BASE_CFG, SMALL_GRID, STRIKES, WIDE_GRID

TAU = 0.25


def self_quotes(rho, style="PutOnMax", grid=SMALL_GRID):
    # worthless far strikes are not quoted
    prices = constant_rho_prices(MARKET, style, STRIKES, TAU, rho, grid)
    keep = prices > 1e-8
    return QuoteSet(tuple(zip(STRIKES[keep], prices[keep])), style, TAU, MARKET)


# --- QuoteSet ----------------------------------------------------------------

def test_quote_set_validation():
    with pytest.raises(ValueError):
        QuoteSet((), "PutOnMax", TAU, MARKET)
    with pytest.raises(ValueError):
        QuoteSet(((90, 1.0), (90, 2.0)), "PutOnMax", TAU, MARKET)
    with pytest.raises(ValueError):
        QuoteSet(((90, 0.0),), "PutOnMax", TAU, MARKET)
    with pytest.raises(ValueError):
        QuoteSet(((90, 1.0),), "NotAStyle", TAU, MARKET)
    q = QuoteSet([[90, 1], [100, 2]], "PutOnMax", TAU, MARKET)
    np.testing.assert_array_equal(q.strikes, [90.0, 100.0])
    np.testing.assert_array_equal(q.prices, [1.0, 2.0])


# --- calibration -------------------------------------------------------------

@pytest.mark.parametrize("rho0", [-0.8, -0.4, 0.0, 0.37, 0.4, 0.8])
def test_calibration_roundtrip(rho0):
    res = calibrate_constant_rho(self_quotes(rho0, grid=WIDE_GRID), WIDE_GRID)
    assert isinstance(res, CalibrationResult)
    assert abs(res.rho_star - rho0) < 1e-3
    assert abs(res.final_gradient) < 1e-4


def test_calibration_objective_nonincreasing():
    res = calibrate_constant_rho(self_quotes(0.6, "CallOnMin"), SMALL_GRID)
    accepted = [v for _, v, g in res.trace if not math.isnan(g)]
    assert np.all(np.diff(accepted) <= 0)
    assert res.objective == accepted[-1]
    assert res.iterations == len(res.trace) - 1


def test_calibration_objective_zero_at_truth():
    q = self_quotes(-0.25)
    loss = calibration_objective(q, SMALL_GRID)
    assert loss(-0.25) < 1e-20 and loss(0.0) > 1e-4


def test_calibration_nonconvergence_carries_trace():
    with pytest.raises(CalibrationError) as err:
        calibrate_constant_rho(self_quotes(0.7), SMALL_GRID, max_iter=2)
    assert len(err.value.trace) == 3
    rho, value, grad = err.value.trace[0]
    assert rho == 0.0 and value > 0


def test_far_put_quotes_need_wider_grid():
    from cobro.fourier import GridTooCoarseError
    with pytest.raises(GridTooCoarseError):
        self_quotes(-0.8)


def test_calibration_stays_in_bracket():
    res = calibrate_constant_rho(self_quotes(0.95), SMALL_GRID, rho0=0.99)
    assert all(-0.999 <= r <= 0.999 for r, _, _ in res.trace)
    assert abs(res.rho_star - 0.95) < 1e-3


@pytest.mark.slow
def test_calibration_to_regime_put_on_max():
    prices = [rainbow_price_fourier(BASE_CFG, MARKET, RainbowSpec("PutOnMax", k, TAU), SMALL_GRID).value
              for k in STRIKES]
    q = QuoteSet(tuple(zip(STRIKES, prices)), "PutOnMax", TAU, MARKET)
    assert calibrate_constant_rho(q, SMALL_GRID).rho_star == pytest.approx(-0.3177, abs=0.01)


# --- implied correlation --------------------------------------------------------

@pytest.mark.parametrize("style", CALL_PUT)
@pytest.mark.parametrize("rho", [-0.8, -0.4, 0.0, 0.4, 0.55, 0.8])
def test_implied_correlation_roundtrip(style, rho):
    k = 110.0
    spec = RainbowSpec(style, k, TAU)
    price = price_constant_rho(MARKET, spec, rho, SMALL_GRID).value
    assert abs(implied_correlation(price, MARKET, spec, SMALL_GRID) - rho) < 1e-5


def test_implied_correlation_rejects_zero_price():
    with pytest.raises(UnattainablePriceError):
        implied_correlation(0.0, MARKET, RainbowSpec("PutOnMax", 120.0, TAU), SMALL_GRID)


def test_implied_correlation_rejects_price_out_of_range():
    spec = RainbowSpec("CallOnMax", 100.0, TAU)
    hi = price_constant_rho(MARKET, spec, -0.99, SMALL_GRID).value
    with pytest.raises(UnattainablePriceError):
        implied_correlation(hi * 1.1, MARKET, spec, SMALL_GRID)


def test_implied_correlation_of_regime_put_near_mean_rho():
    spec = RainbowSpec("PutOnMax", 120.0, TAU)
    price = rainbow_price_fourier(BASE_CFG, MARKET, spec, SMALL_GRID).value
    rho_imp = implied_correlation(price, MARKET, spec, SMALL_GRID)
    assert abs(rho_imp - ctmc.expected_rho_bar(BASE_CFG, TAU)) < 0.05
    assert abs(rho_imp + 0.3177) < 0.05


# --- Taylor approximation ---------------------------------------------------------

def test_taylor_constant_config_is_exact():
    cfg = ctmc.RegimeConfig(ctmc.Generator(ctmc.BASE_GENERATOR), [1, 0, 0], [0.6, 0.6, 0.6])
    spec = RainbowSpec("PutOnMax", 120.0, TAU)
    want = price_constant_rho(MARKET, spec, 0.2, SMALL_GRID).value
    assert taylor_price_approx(cfg, MARKET, spec, SMALL_GRID) == pytest.approx(want, abs=1e-12)


def test_taylor_affine_stub_is_first_order():
    spec = RainbowSpec("PutOnMax", 120.0, TAU)
    stub = lambda rho: 3.0 - 2.0 * rho
    got = taylor_price_approx(BASE_CFG, MARKET, spec, SMALL_GRID, n_chain_paths=2000,
                              constant_pricer=stub)
    assert got == pytest.approx(stub(ctmc.expected_rho_bar(BASE_CFG, TAU)), abs=1e-9)


def test_taylor_improves_on_first_order():
    spec = RainbowSpec("PutOnMax", 120.0, TAU)
    true = rainbow_price_fourier(BASE_CFG, MARKET, spec, SMALL_GRID).value
    first = price_constant_rho(MARKET, spec, ctmc.expected_rho_bar(BASE_CFG, TAU), SMALL_GRID).value
    second = taylor_price_approx(BASE_CFG, MARKET, spec, SMALL_GRID, n_chain_paths=100_000, rng_seed=0)
    assert abs(second - true) < abs(first - true)


# --- relative error and ergodic level ----------------------------------------------

def test_relative_error_values():
    assert relative_error(2.0, 2.0) == 0.0
    assert relative_error(35.2623, 37.2642) == pytest.approx(-0.0537, abs=1e-4)
    assert relative_error(35.4403, 33.8134) == pytest.approx(0.0481, abs=1e-4)
    with pytest.raises(ZeroDivisionError):
        relative_error(1.0, 0.0)


@pytest.mark.parametrize("alpha", [[0.7665, 0.7551, 0.2436], [0.8068, 0.8772, 0.0404],
                                   [0.6824, 0.6178, 0.5051], [0.5559, 0.4063, 0.9054]])
def test_rho_hat_stationary_table_rows(alpha):
    cfg = ctmc.RegimeConfig(ctmc.Generator(ctmc.BASE_GENERATOR), [1, 0, 0], alpha)
    assert rho_hat_stationary(cfg) == pytest.approx(0.2, abs=1e-3)


def test_rho_hat_stationary_constant():
    assert rho_hat_stationary(ctmc.RegimeConfig.constant(-0.3)) == pytest.approx(-0.3, abs=1e-15)
    cfg = ctmc.RegimeConfig(ctmc.Generator(ctmc.BASE_GENERATOR), [1, 0, 0], [0.6, 0.6, 0.6])
    assert rho_hat_stationary(cfg) == pytest.approx(0.2, abs=1e-14)


def test_rho_hat_stationary_rejects_reducible_chain():
    gen = ctmc.Generator(np.array([[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    cfg = ctmc.RegimeConfig(gen, [1, 0, 0], [0.3, 0.6, 0.9])
    with pytest.raises(ctmc.ReducibleChainError):
        rho_hat_stationary(cfg)


@pytest.mark.parametrize("tau", [0.25, 1.0])
def test_rho_bar_moment(tau):
    s = sample_rho_bar(BASE_CFG, tau, 100_000, 12)
    se = s.std(ddof=1) / math.sqrt(s.size)
    assert abs(s.mean() - ctmc.expected_rho_bar(BASE_CFG, tau)) < 3 * se
    assert np.all((s >= BASE_CFG.rho_levels.min() - 1e-12) & (s <= BASE_CFG.rho_levels.max() + 1e-12))


def test_rho_bar_seeded():
    np.testing.assert_array_equal(sample_rho_bar(BASE_CFG, 1.0, 5000, 3),
                                  sample_rho_bar(BASE_CFG, 1.0, 5000, 3))

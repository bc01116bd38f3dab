"""Calibration of a constant-correlation model, implied correlation,
ergodic correlation level and the second-order pricing-error approximation."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import ctmc, rng as rngmod
from .fourier import FourierGrid, MarketParams, RainbowStyle
from .pricing import constant_rho_prices, constant_rho_values

RHO_BOUND = 0.999


class CalibrationError(ArithmeticError):
    """Gradient descent did not reach the stopping rule; ``trace`` holds ``(rho, L, L')`` rows."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class UnattainablePriceError(ValueError):
    """No constant correlation in the bracket reproduces the price."""


@dataclass(frozen=True)
class CalibrationResult:
    rho_star: float
    iterations: int
    final_gradient: float
    objective: float
    trace: list = field(default_factory=list, repr=False, compare=False)


@dataclass(frozen=True)
class QuoteSet:
    entries: tuple
    style: RainbowStyle
    maturity: float
    market: MarketParams

    def __post_init__(self):
        entries = tuple((float(k), float(p)) for k, p in self.entries)
        if not entries:
            raise ValueError("need at least one quote")
        strikes = [k for k, _ in entries]
        if len(set(strikes)) != len(strikes):
            raise ValueError("strikes must be distinct")
        if any(p <= 0 for _, p in entries):
            raise ValueError("quoted prices must be positive")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "style", RainbowStyle(self.style))

    @property
    def strikes(self):
        return np.array([k for k, _ in self.entries])

    @property
    def prices(self):
        return np.array([p for _, p in self.entries])


def calibration_objective(quotes, grid=FourierGrid()):
    """``L(rho) = sum (Price^c(rho) - quote)^2`` as a callable."""
    strikes, target = quotes.strikes, quotes.prices

    def objective(rho):
        model = constant_rho_prices(quotes.market, quotes.style, strikes, quotes.maturity, rho, grid)
        return float(np.sum((model - target) ** 2))

    return objective


def calibrate_constant_rho(quotes, grid=FourierGrid(), *, rho0=0.0, tol=1e-4, h=1e-4,
                           max_iter=10_000):
    """Gradient descent on ``L`` from ``rho0`` with initial step ``|0.01 / L'(rho0)|``.

    ``L'`` is a central difference with spacing ``h``; the iterate is clamped to
    ``[-0.999, 0.999]`` and the step is halved whenever a move would increase
    ``L``. Stops when ``|L'| < tol``.
    """
    objective = calibration_objective(quotes, grid)

    def gradient(rho):
        return (objective(rho + h) - objective(rho - h)) / (2.0 * h)

    rho = float(np.clip(rho0, -RHO_BOUND, RHO_BOUND))
    value, grad = objective(rho), gradient(rho)
    trace = [(rho, value, grad)]
    if abs(grad) < tol:
        return CalibrationResult(rho, 0, grad, value, trace)
    step = abs(0.01 / grad)
    for it in range(1, max_iter + 1):
        cand = float(np.clip(rho - step * grad, -RHO_BOUND, RHO_BOUND))
        cand_value = objective(cand)
        if cand_value > value:
            step *= 0.5
            trace.append((cand, cand_value, float("nan")))
            continue
        rho, value = cand, cand_value
        grad = gradient(rho)
        trace.append((rho, value, grad))
        if abs(grad) < tol:
            return CalibrationResult(rho, it, grad, value, trace)
    raise CalibrationError(f"no convergence after {max_iter} iterations (|L'| = {abs(grad):.3e})", trace)


def implied_correlation(price, market, spec, grid=FourierGrid(), tol=1e-6):
    """Constant correlation whose price equals ``price``, by bisection on ``[-0.999, 0.999]``."""
    if not price > 0:
        raise UnattainablePriceError("price must be positive")

    def excess(rho, pricer=constant_rho_prices):
        return pricer(market, spec.style, [spec.strike], spec.maturity, rho, grid)[0] - price

    # only the sign matters at the bracket ends, where truncation noise is largest
    lo, hi = -RHO_BOUND, RHO_BOUND
    f_lo, f_hi = excess(lo, constant_rho_values), excess(hi, constant_rho_values)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise UnattainablePriceError(
            f"price {price:.6g} outside the constant-correlation range "
            f"[{min(f_lo, f_hi) + price:.6g}, {max(f_lo, f_hi) + price:.6g}]")
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        f_mid = excess(mid)
        if f_mid == 0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_rho_bar(cfg, tau, n_paths, rng_seed):
    """``rho_bar_tau = (2 T_tau - tau) / tau`` over independent chain paths."""
    clock = np.concatenate([ctmc.sample_clock(cfg, tau, count, gen)[0]
                            for _, count, gen in rngmod.blocks(rng_seed, n_paths)])
    return (2.0 * clock - tau) / tau


def taylor_price_approx(cfg, market, spec, grid=FourierGrid(), n_chain_paths=100_000, rng_seed=0,
                        h=0.01, constant_pricer: Optional[Callable[[float], float]] = None):
    """``Price^c(E rho_bar) + Var(rho_bar) / 2 * Price^c''(E rho_bar)``.

    ``constant_pricer`` replaces the constant-correlation pricer (a function
    of ``rho``); by default the Fourier pricer for ``spec`` is used.
    """
    if constant_pricer is None:
        def constant_pricer(rho):
            return float(constant_rho_prices(market, spec.style, [spec.strike], spec.maturity,
                                             rho, grid)[0])

    mean = ctmc.expected_rho_bar(cfg, spec.maturity)
    base = constant_pricer(mean)
    if cfg.is_constant:
        return base
    var = float(np.var(sample_rho_bar(cfg, spec.maturity, n_chain_paths, rng_seed), ddof=1))
    curvature = (constant_pricer(mean + h) - 2.0 * base + constant_pricer(mean - h)) / (h * h)
    return base + 0.5 * var * curvature


def relative_error(price_constant, price_dynamic):
    """``(Price^c - Price^d) / Price^d``."""
    if price_dynamic == 0:
        raise ZeroDivisionError("dynamic price is zero")
    return (price_constant - price_dynamic) / price_dynamic


def rho_hat_stationary(cfg):
    """Ergodic limit of the realised correlation, ``2 alpha' pi - 1``."""
    pi = ctmc.stationary_distribution(cfg.generator)
    return float(2.0 * cfg.alpha @ pi - 1.0)

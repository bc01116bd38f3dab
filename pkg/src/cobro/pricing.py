"""Valuation: rainbow options (Fourier and Monte Carlo), Quanto puts,
covariance swaps and options, and the Fourier Delta of a call on the max."""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from . import ctmc, fourier, rng as rngmod, simulate
from .fourier import FourierGrid, GridTooCoarseError, RainbowSpec, RainbowStyle


@dataclass(frozen=True)
class QuantoSpec:
    r1: float
    r2: float
    s0: float
    r0: float
    sigma1: float
    sigma2: float
    strike: float
    maturity: float

    def __post_init__(self):
        if self.s0 <= 0 or self.r0 <= 0:
            raise ValueError("spot price and exchange rate must be positive")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("volatilities must be nonnegative")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")


@dataclass(frozen=True)
class PriceResult:
    value: float
    stderr: Optional[float] = None
    method: str = "fourier"

    def __post_init__(self):
        if self.stderr is not None and self.stderr < 0:
            raise ValueError("stderr must be nonnegative")


def _params(style, market, strike, tau):
    style = RainbowStyle(style)
    if strike == 0 and style is not RainbowStyle.PUT2_CALL1:
        return fourier.zero_strike_params(style, market, tau)
    return fourier.payoff_params(style, market, RainbowSpec(style, strike, tau))


def _expectations(params, source):
    """Undiscounted expectations; ``source(g3, g4, g5)`` yields an object with ``values``."""
    out = np.array([p.cash for p in params], dtype=float)
    for piece in (0, 1):
        groups = {}
        for i, p in enumerate(params):
            x1, x, (g1, g2, g3, g4, g5) = p.pieces()[piece]
            if g1 == 0 and g2 == 0:
                continue
            key = (np.asarray(g3, float).tobytes(), np.asarray(g4, float).tobytes(),
                   np.asarray(g5, float).tobytes(), float(x))
            groups.setdefault(key, (g3, g4, g5, x, []))[-1].append((i, x1, g1, g2))
        for g3, g4, g5, x, items in groups.values():
            idx, x1, g1, g2 = (np.array(v) for v in zip(*items))
            out[idx] += source(g3, g4, g5).values(g1, g2, x1, x)
    return out


def _discount_and_check(values, market, tau):
    prices = np.exp(-market.r * tau) * values
    if np.any(prices < -1e-6):
        raise GridTooCoarseError(f"negative price {prices.min():.3e}; refine the inversion grid")
    return np.where(prices < 0.0, 0.0, prices)


def rainbow_prices_fourier(cfg, market, style, strikes, maturity, grid=FourierGrid()):
    """Fourier prices of one style at several strikes (one lattice per payoff piece)."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    params = [_params(style, market, k, maturity) for k in strikes]
    values = _expectations(params, lambda g3, g4, g5: fourier.lattice(cfg, maturity, g3, g4, g5, grid))
    return _discount_and_check(values, market, maturity)


def rainbow_price_fourier(cfg, market, spec, grid=FourierGrid()):
    value = rainbow_prices_fourier(cfg, market, spec.style, [spec.strike], spec.maturity, grid)[0]
    return PriceResult(float(value), None, "fourier")


def constant_rho_prices(market, style, strikes, maturity, rho, grid=FourierGrid()):
    """Prices under constant correlation ``rho`` at several strikes.

    Same inversion as :func:`rainbow_prices_fourier` with a single-state
    chain; the lattice is shared across ``rho`` values.
    """
    return _discount_and_check(constant_rho_values(market, style, strikes, maturity, rho, grid),
                               market, 0.0)


def constant_rho_values(market, style, strikes, maturity, rho, grid=FourierGrid()):
    """Discounted constant-correlation prices without the negativity guard.

    Near ``|rho| = 1`` the transform stops decaying along one axis and the
    truncated sum can dip slightly below zero for near-worthless options.
    """
    if not -1.0 < rho < 1.0:
        raise ValueError("constant correlation must lie in (-1, 1)")
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    params = [_params(style, market, k, maturity) for k in strikes]
    values = _expectations(
        params, lambda g3, g4, g5: fourier.constant_lattice(maturity, g3, g4, g5, grid).at(rho))
    return np.exp(-market.r * maturity) * values


def price_constant_rho(market, spec, rho, grid=FourierGrid()):
    value = constant_rho_prices(market, spec.style, [spec.strike], spec.maturity, rho, grid)[0]
    return PriceResult(float(value), None, "closed_constant")


def _terminal_spots(cfg, market, tau, n_paths, seed):
    ep = simulate.simulate_cd_endpoints(cfg, tau, n_paths, seed)
    x = 0.5 * (ep.b_t + ep.w_t)
    y = 0.5 * (ep.b_t - ep.w_t)
    b1, b2 = market.scales(tau)
    s1 = b1 * np.exp(market.sigma1 * (x + y))
    s2 = b2 * np.exp(market.sigma2 * (x - y))
    return s1, s2


def mc_prices_rainbow(cfg, market, style, strikes, maturity, n_paths, rng_seed):
    """Monte Carlo prices and standard errors at several strikes, on common draws."""
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    s1, s2 = _terminal_spots(cfg, market, maturity, n_paths, rng_seed)
    disc = np.exp(-market.r * maturity)
    values, errors = np.empty(strikes.size), np.empty(strikes.size)
    for i, k in enumerate(strikes):
        pay = disc * fourier.rainbow_payoff(style, s1, s2, k)
        values[i] = pay.mean()
        errors[i] = pay.std(ddof=1) / np.sqrt(n_paths)
    return values, errors


def mc_price_rainbow(cfg, market, spec, n_paths, rng_seed):
    """Discounted mean payoff over common-decomposition endpoints with an exact clock."""
    v, e = mc_prices_rainbow(cfg, market, spec.style, [spec.strike], spec.maturity, n_paths, rng_seed)
    return PriceResult(float(v[0]), float(e[0]), "monte_carlo")


def quanto_log_adjustment(q, cfg):
    """``ln E[exp(sigma1 sigma2 int_0^t rho_s ds)] = -sigma1 sigma2 t + ln L_t(2 sigma1 sigma2)``."""
    c = q.sigma1 * q.sigma2
    if c == 0:
        return 0.0
    lap = ctmc.laplace_T(cfg, q.maturity, 2.0 * c)
    return -c * q.maturity + float(np.log(lap.real))


def quanto_put_price(q, cfg):
    """Quanto put paid in domestic currency at the fixed rate ``r0``."""
    t = q.maturity
    ln_e = quanto_log_adjustment(q, cfg)
    carry = q.s0 * np.exp(-(q.r1 * t - q.r2 * t + ln_e))
    pv_strike = q.strike * np.exp(-q.r1 * t)
    if q.sigma1 == 0:
        return PriceResult(float(q.r0 * max(pv_strike - carry, 0.0)), None, "closed_form")
    vol = q.sigma1 * np.sqrt(t)
    d1 = (np.log(q.s0 / q.strike) + (q.r2 + 0.5 * q.sigma1 ** 2) * t - ln_e) / vol
    d2 = d1 - vol
    value = q.r0 * (pv_strike * ndtr(-d2) - carry * ndtr(-d1))
    return PriceResult(float(max(value, 0.0)), None, "closed_form")


def covariance_swap_value(cfg, market, t, strike_k):
    """``e^{-rt} (sigma1 sigma2 (2 E[T_t] - t) - K)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    cov = market.sigma1 * market.sigma2 * (2.0 * ctmc.expected_clock(cfg, t) - t)
    return PriceResult(float(np.exp(-market.r * t) * (cov - strike_k)), None, "closed_form")


def covariance_option_value(cfg, market, t, strike_k, n_paths, rng_seed):
    """``e^{-rt} E[max(sigma1 sigma2 (2 T_t - t) - K, 0)]`` over sampled occupation times."""
    if t <= 0:
        raise ValueError("t must be positive")
    clock = np.concatenate([ctmc.sample_clock(cfg, t, count, gen)[0]
                            for _, count, gen in rngmod.blocks(rng_seed, n_paths)])
    pay = np.exp(-market.r * t) * np.maximum(
        market.sigma1 * market.sigma2 * (2.0 * clock - t) - strike_k, 0.0)
    return PriceResult(float(pay.mean()), float(pay.std(ddof=1) / np.sqrt(n_paths)), "monte_carlo")


def delta_s1_fourier(cfg, market, spec, grid=FourierGrid()):
    """``dPrice / dS0_1`` of a call on the max by inverting the differentiated transforms.

    With ``k1 = ln(b1 / K)`` and ``k = ln(b1 / b2)`` both moving with
    ``ln S0_1``, differentiation multiplies the first transform by
    ``-i (lam1 + lam) / S0_1`` and adds the derivative of ``b1``; the
    second piece depends on ``S0_1`` only through ``-k``.
    """
    spec_style = RainbowStyle(spec.style)
    if spec_style is not RainbowStyle.CALL_ON_MAX:
        raise ValueError(f"Fourier Delta is only available for CallOnMax, not {spec_style.value}")
    tau, s0 = spec.maturity, market.s0_1
    p = _params(spec_style, market, spec.strike, tau)
    (x1a, xa, (a1, b1, t1, c1, c)), (x1b, xb, (a2, b2, t2, c2, mc)) = p.pieces()
    lat1 = fourier.lattice(cfg, tau, t1, c1, c, grid)
    lat2 = fourier.lattice(cfg, tau, t2, c2, mc, grid)
    if not (lat1.active1 and lat1.active2 and lat2.active1 and lat2.active2):
        raise ValueError("Fourier Delta needs a positive strike")
    growth = np.exp((market.r - 0.5 * market.sigma1 ** 2) * tau)
    lam1_a, lam_a = lat1.coordinates()
    h1 = (-1j * (lam1_a + lam_a) / s0) * (a1 * lat1.weight_a + b1 * lat1.weight_b) \
        + growth * lat1.weight_b
    h2 = (1j * lat2.coordinates()[1] / s0) * (a2 * lat2.weight_a + b2 * lat2.weight_b)
    total = lat1.invert(h1, x1a, xa)[0] + lat2.invert(h2, x1b, xb)[0]
    return float(np.exp(-market.r * tau) * total)

"""Independent reference values used by the tests."""
import math

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr

from cobro import ctmc
from cobro.fourier import FourierGrid, MarketParams

BASE_CFG = ctmc.RegimeConfig(ctmc.Generator(ctmc.BASE_GENERATOR), [1, 0, 0], [0.3, 0.6, 0.9])
SECOND_CFG = ctmc.RegimeConfig(ctmc.Generator(ctmc.BASE_GENERATOR), [0.2, 0, 0.8], [0.3, 0.6, 0.95])
MARKET = MarketParams(r=0.05, s0_1=100.0, s0_2=120.0, sigma1=0.2, sigma2=0.3)
# lambda range +-100 like the default grid, at a quarter of the points
SMALL_GRID = FourierGrid(400, 400, 0.25, 0.25)
# lambda range +-150: needed for far out-of-the-money puts once rho nears -1
WIDE_GRID = FourierGrid(600, 600, 0.25, 0.25)
STRIKES = np.arange(80.0, 141.0, 10.0)
CALL_PUT = ("CallOnMax", "CallOnMin", "PutOnMax", "PutOnMin")
ALL_STYLES = ("BestOfAssetsOrCash", "Put2Call1") + CALL_PUT


def series_expm(m, terms=300):
    """Truncated Taylor series with scaling and squaring on top."""
    m = np.asarray(m, dtype=np.complex128)
    norm = np.linalg.norm(m, 1)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    a = m / 2 ** s
    out = np.eye(m.shape[0], dtype=np.complex128)
    term = np.eye(m.shape[0], dtype=np.complex128)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def bs_call(s0, k, r, sigma, tau):
    d1 = (math.log(s0 / k) + (r + 0.5 * sigma ** 2) * tau) / (sigma * math.sqrt(tau))
    d2 = d1 - sigma * math.sqrt(tau)
    return s0 * ndtr(d1) - k * math.exp(-r * tau) * ndtr(d2)


def margrabe(s1, s2, sigma1, sigma2, rho, tau):
    """Value of ``max(S1 - S2, 0)`` at maturity ``tau``."""
    v = math.sqrt(sigma1 ** 2 + sigma2 ** 2 - 2 * rho * sigma1 * sigma2)
    d1 = (math.log(s1 / s2) + 0.5 * v * v * tau) / (v * math.sqrt(tau))
    return s1 * ndtr(d1) - s2 * ndtr(d1 - v * math.sqrt(tau))


def m_covariance(rho, tau):
    """Covariance of ``M = (X_T, Y_S)`` for constant correlation."""
    t = 0.5 * (1 + rho) * tau
    return np.diag([t, tau - t])


def gaussian_orthant(g4, g5, x1, x, cov):
    """``P(g4' M <= x1, g5' M <= x)`` for ``M ~ N(0, cov)``; handles degenerate directions."""
    g = np.array([g4, g5], dtype=float)
    c = g @ cov @ g.T
    return float(stats.multivariate_normal.cdf([x1, x], mean=[0, 0], cov=c, allow_singular=True,
                                               abseps=1e-12, releps=1e-12))


def gaussian_orthant_quad(g4, g5, x1, x, cov):
    """Same probability by one-dimensional quadrature: condition on ``g4' M``."""
    g4, g5 = np.asarray(g4, float), np.asarray(g5, float)
    v1 = g4 @ cov @ g4
    v2 = g5 @ cov @ g5
    c12 = g4 @ cov @ g5
    s1 = math.sqrt(v1)
    beta = c12 / v1
    resid = math.sqrt(max(v2 - beta * c12, 0.0))

    def f(u):
        mean = beta * u
        inner = ndtr((x - mean) / resid) if resid > 0 else float(mean <= x)
        return stats.norm.pdf(u, scale=s1) * inner

    val, _ = integrate.quad(f, -12 * s1, min(x1, 12 * s1), epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def rainbow_quad(style, k, rho, tau, market=MARKET):
    """Discounted constant-correlation rainbow price by two-dimensional quadrature."""
    from cobro.fourier import rainbow_payoff
    b1, b2 = market.scales(tau)
    v1, v2 = market.sigma1 * math.sqrt(tau), market.sigma2 * math.sqrt(tau)
    c = math.sqrt(1 - rho * rho)

    def f(z2, z1):
        s1 = b1 * math.exp(v1 * z1)
        s2 = b2 * math.exp(v2 * (rho * z1 + c * z2))
        pay = float(rainbow_payoff(style, np.array([s1]), np.array([s2]), k)[0])
        return pay * stats.norm.pdf(z1) * stats.norm.pdf(z2)

    val, _ = integrate.dblquad(f, -12, 12, -12, 12, epsabs=1e-14, epsrel=1e-10)
    return math.exp(-market.r * tau) * val

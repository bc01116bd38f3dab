"""Characteristic function of ``M = (X_T, Y_S)`` and 2-D Fourier inversion.

With ``S^i_tau = b_i exp(theta_i' M)``, every rainbow payoff splits into two
pieces of the form ``(a + b e^{theta' M}) 1{c_i' M <= k_i} 1{+-c' M <= +-k}``.
Each piece is an instance of

    G(x1, x) = E[(g1 + g2 e^{g3' M}) 1{g4' M <= x1} 1{g5' M <= x}]

whose damped transform is explicit in ``Phi_M``, so prices reduce to one
lattice sum per piece.
"""
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _backend, ctmc


class GridTooCoarseError(ArithmeticError):
    """The inversion sum did not produce a usable real value."""


class RainbowStyle(str, Enum):
    BEST_OF_ASSETS_OR_CASH = "BestOfAssetsOrCash"
    PUT2_CALL1 = "Put2Call1"
    CALL_ON_MAX = "CallOnMax"
    CALL_ON_MIN = "CallOnMin"
    PUT_ON_MAX = "PutOnMax"
    PUT_ON_MIN = "PutOnMin"


@dataclass(frozen=True)
class MarketParams:
    r: float
    s0_1: float
    s0_2: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("volatilities must be positive")
        if self.s0_1 <= 0 or self.s0_2 <= 0:
            raise ValueError("spot prices must be positive")

    def scales(self, tau):
        """``b_i = S0_i exp((r - sigma_i^2 / 2) tau)`` so that ``S_i = b_i e^{theta_i' M}``."""
        b1 = self.s0_1 * np.exp((self.r - 0.5 * self.sigma1 ** 2) * tau)
        b2 = self.s0_2 * np.exp((self.r - 0.5 * self.sigma2 ** 2) * tau)
        return b1, b2

    def thetas(self):
        return (np.array([self.sigma1, self.sigma1]),
                np.array([self.sigma2, -self.sigma2]))


BASE_MARKET = MarketParams(r=0.05, s0_1=100.0, s0_2=120.0, sigma1=0.2, sigma2=0.3)


@dataclass(frozen=True)
class RainbowSpec:
    style: RainbowStyle
    strike: float
    maturity: float

    def __post_init__(self):
        object.__setattr__(self, "style", RainbowStyle(self.style))
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")
        if self.strike < 0:
            raise ValueError("strike must be nonnegative")


@dataclass(frozen=True)
class FourierGrid:
    """Truncation ``n1, n``, steps ``eta1, eta`` and contour heights of the inversion sum."""

    n1: int = 1000
    n: int = 1000
    eta1: float = 0.1
    eta: float = 0.1
    lam1_im: float = 1.0
    lam_im: float = 1.0

    def __post_init__(self):
        if self.n1 < 1 or self.n < 1:
            raise ValueError("truncation indices must be >= 1")
        if self.eta1 <= 0 or self.eta <= 0:
            raise ValueError("steps must be positive")
        if self.lam1_im <= 0 or self.lam_im <= 0:
            raise ValueError("contours must lie strictly above the real axis")


@dataclass(frozen=True)
class PayoffParams:
    """Two-piece indicator-exponential form of a payoff in terms of ``M``.

    ``cash`` is paid unconditionally; it is nonzero only for the
    best-of-assets-or-cash style.
    """

    a1: float
    a2: float
    b1: float
    b2: float
    theta1: np.ndarray
    theta2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c: np.ndarray
    k1: float
    k2: float
    k: float
    cash: float = 0.0

    def evaluate(self, m):
        """Payoff for an ``(..., 2)`` array of ``M`` draws."""
        m = np.asarray(m, dtype=float)
        cm = m @ self.c
        first = (self.a1 + self.b1 * np.exp(m @ self.theta1)) * (m @ self.c1 <= self.k1) * (cm <= self.k)
        second = (self.a2 + self.b2 * np.exp(m @ self.theta2)) * (m @ self.c2 <= self.k2) * (cm >= self.k)
        return self.cash + first + second

    def pieces(self):
        """The two ``(x1, x, gammas)`` evaluations whose sum is the undiscounted price less cash."""
        return ((self.k1, self.k, (self.a1, self.b1, self.theta1, self.c1, self.c)),
                (self.k2, -self.k, (self.a2, self.b2, self.theta2, self.c2, -self.c)))


def rainbow_payoff(style, s1, s2, strike):
    """Direct payoff of a two-color rainbow option."""
    style = RainbowStyle(style)
    hi, lo = np.maximum(s1, s2), np.minimum(s1, s2)
    if style is RainbowStyle.BEST_OF_ASSETS_OR_CASH:
        return np.maximum(hi, strike)
    if style is RainbowStyle.PUT2_CALL1:
        return np.maximum(s1 - s2, 0.0)
    if style is RainbowStyle.CALL_ON_MAX:
        return np.maximum(hi - strike, 0.0)
    if style is RainbowStyle.CALL_ON_MIN:
        return np.maximum(lo - strike, 0.0)
    if style is RainbowStyle.PUT_ON_MAX:
        return np.maximum(strike - hi, 0.0)
    return np.maximum(strike - lo, 0.0)


def payoff_params(style, market, spec):
    """Indicator-exponential parameters of ``spec`` under ``market``."""
    style = RainbowStyle(style)
    tau, strike = spec.maturity, spec.strike
    b1, b2 = market.scales(tau)
    th1, th2 = market.thetas()
    zero = np.zeros(2)
    one_wins = (th2 - th1, np.log(b1 / b2))     # {S1 >= S2}
    two_wins = (th1 - th2, np.log(b2 / b1))     # {S1 <= S2}

    if style is RainbowStyle.PUT2_CALL1:
        c, k = one_wins
        # split indicator is vacuous (c = 0); both pieces live on {S1 >= S2}
        return PayoffParams(0.0, 0.0, b1, -b2, th1, th2, c, c, zero, k, k, 0.0)
    if strike <= 0:
        raise ValueError(f"{style.value} needs a positive strike; use zero_strike_params")
    above = (-th1, np.log(b1 / strike), -th2, np.log(b2 / strike))   # {S_i >= K}
    below = (th1, np.log(strike / b1), th2, np.log(strike / b2))     # {S_i <= K}

    if style in (RainbowStyle.CALL_ON_MAX, RainbowStyle.BEST_OF_ASSETS_OR_CASH):
        (c, k), (c1, k1, c2, k2), sgn, cash = one_wins, above, 1.0, 0.0
        if style is RainbowStyle.BEST_OF_ASSETS_OR_CASH:
            cash = strike
    elif style is RainbowStyle.CALL_ON_MIN:
        (c, k), (c1, k1, c2, k2), sgn, cash = two_wins, above, 1.0, 0.0
    elif style is RainbowStyle.PUT_ON_MAX:
        (c, k), (c1, k1, c2, k2), sgn, cash = one_wins, below, -1.0, 0.0
    else:
        (c, k), (c1, k1, c2, k2), sgn, cash = two_wins, below, -1.0, 0.0
    return PayoffParams(-sgn * strike, -sgn * strike, sgn * b1, sgn * b2,
                        th1, th2, c1, c2, c, k1, k2, k, cash)


def zero_strike_params(style, market, tau):
    """``K -> 0`` limit: ``max(S1, S2)``, ``min(S1, S2)`` or identically zero."""
    style = RainbowStyle(style)
    b1, b2 = market.scales(tau)
    th1, th2 = market.thetas()
    zero = np.zeros(2)
    if style in (RainbowStyle.CALL_ON_MAX, RainbowStyle.BEST_OF_ASSETS_OR_CASH):
        c, k = th2 - th1, np.log(b1 / b2)
    elif style is RainbowStyle.CALL_ON_MIN:
        c, k = th1 - th2, np.log(b2 / b1)
    elif style is RainbowStyle.PUT2_CALL1:
        return payoff_params(style, market, RainbowSpec(style, 0.0, tau))
    else:
        return PayoffParams(0.0, 0.0, 0.0, 0.0, th1, th2, zero, zero, zero, 0.0, 0.0, 0.0)
    return PayoffParams(0.0, 0.0, b1, b2, th1, th2, zero, zero, c, 0.0, 0.0, k)


def char_fn_M(cfg, tau, z1, z2):
    """``Phi(z1, z2) = E[exp(i (z1 X_T + z2 Y_S))] = e^{-tau z2^2 / 2} L_tau(-(z1^2 - z2^2) / 2)``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    z1 = np.asarray(z1, dtype=np.complex128)
    z2 = np.asarray(z2, dtype=np.complex128)
    z1, z2 = np.broadcast_arrays(z1, z2)
    lap = ctmc.laplace_T(cfg, tau, -0.5 * (z1 * z1 - z2 * z2))
    out = np.exp(-0.5 * tau * z2 * z2) * lap
    return out if out.ndim else complex(out)


def g_hat(params, cfg, tau, lam1, lam):
    """Damped transform of ``G``, valid for ``Im lam1 > 0`` and ``Im lam > 0``."""
    g1, g2, g3, g4, g5 = params
    lam1 = np.asarray(lam1, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    if np.any(lam1.imag <= 0) or np.any(lam.imag <= 0):
        raise ValueError("contour must lie strictly above the real axis")
    lam1, lam = np.broadcast_arrays(lam1, lam)
    out = np.zeros(lam.shape, dtype=np.complex128)
    if g1 == 0 and g2 == 0:
        return out if out.ndim else complex(out)
    g3, g4, g5 = (np.asarray(v, dtype=float) for v in (g3, g4, g5))
    w1 = lam1 * g4[0] + lam * g5[0]
    w2 = lam1 * g4[1] + lam * g5[1]
    scale = -1.0 / (lam * lam1)
    if g1:
        out += g1 * scale * char_fn_M(cfg, tau, w1, w2)
    if g2:
        out += g2 * scale * char_fn_M(cfg, tau, w1 - 1j * g3[0], w2 - 1j * g3[1])
    return out if out.ndim else complex(out)


# terms whose modulus bound falls below this are left out of the lattice sum
_NEGLIGIBLE = 1e-20
_LOG_NEGLIGIBLE = float(np.log(_NEGLIGIBLE))


class _HalfLattice:
    """Geometry of the inversion lattice for one ``(g3, g4, g5)``.

    Only flat indices ``0..c`` (rows ``j < 0`` plus the left half of the
    middle row, centre included) are stored: the transform at ``(-j, -k)``
    is the conjugate of the one at ``(j, k)``, so the full sum is twice the
    real part of the half sum minus the double-counted centre.

    An axis whose direction vector is zero carries a deterministic indicator
    ``1{0 <= x}`` and is dropped from the sum.
    """

    def __init__(self, tau, g3, g4, g5, grid):
        self.tau = tau
        self.grid = grid
        g3, g4, g5 = (np.asarray(v, dtype=float) for v in (g3, g4, g5))
        self.active1 = bool(np.any(g4 != 0))
        self.active2 = bool(np.any(g5 != 0))
        self.j = np.arange(-grid.n1, grid.n1 + 1) if self.active1 else np.zeros(1)
        self.k = np.arange(-grid.n, grid.n + 1) if self.active2 else np.zeros(1)
        nj, nk = self.j.size, self.k.size
        self.rows, self.cols = nj // 2, nk
        self.mid = nk // 2
        self.lam1, self.lam = self.coordinates()
        size = self.lam.size
        l1 = self.lam1 if self.active1 else 0.0
        l2 = self.lam if self.active2 else 0.0
        self.w1 = l1 * g4[0] + l2 * g5[0]
        self.w2 = l1 * g4[1] + l2 * g5[1]
        self.shift = -1j * g3
        scale = np.ones(size, dtype=np.complex128)
        if self.active1:
            scale = scale * (1j / self.lam1)
        if self.active2:
            scale = scale * (1j / self.lam)
        self.scale = scale

    def coordinates(self):
        """Complex ``(lam1, lam)`` at every point of the half lattice."""
        nk, grid = self.cols, self.grid
        flat = np.arange(self.rows * nk + self.mid + 1)
        jj, kk = self.j[flat // nk], self.k[flat % nk]
        return jj * grid.eta1 + 1j * grid.lam1_im, kk * grid.eta + 1j * grid.lam_im

    def _release(self):
        # full-lattice coordinates are only needed while building; lattices are cached
        del self.lam1, self.lam, self.w1, self.w2, self.scale

    def survivors(self, w1, w2, t_lo, t_hi):
        """Indices whose ``|Phi| * |scale|`` bound over clocks in ``[t_lo, t_hi]`` is not negligible."""
        a = (w1 * w1).real
        b = (w2 * w2).real
        tau = self.tau
        log_bound = np.maximum(-0.5 * (a * t_lo + b * (tau - t_lo)),
                               -0.5 * (a * t_hi + b * (tau - t_hi)))
        log_bound += np.log(np.abs(self.scale))
        return np.flatnonzero(log_bound > _LOG_NEGLIGIBLE)

    def _row_sums(self, h, x):
        """Per-row sums of ``h`` against the column phases at ``x``, plus the centre term."""
        e2 = np.exp(-1j * self.grid.eta * x * self.k)
        rows, cols, mid = self.rows, self.cols, self.mid
        sums = np.empty(rows + 1, dtype=np.complex128)
        if rows:
            sums[:rows] = h[: rows * cols].reshape(rows, cols) @ e2
        sums[rows] = h[rows * cols:] @ e2[: mid + 1]
        return sums, h[-1] * e2[mid]

    def _combine(self, sums, centre, x1, x):
        """Inverse transform from half-lattice row sums, for each ``x1`` and a common ``x``."""
        grid = self.grid
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        out = np.zeros(x1.size)
        live = np.ones(x1.size, dtype=bool)
        if not self.active1:
            live &= x1 >= 0
        if not self.active2 and x < 0:
            live[:] = False
        if not live.any():
            return out
        xl = x1[live]
        factor = np.ones(xl.size)
        if self.active1:
            factor = factor * grid.eta1 * np.exp(grid.lam1_im * xl) / (2 * np.pi)
        if self.active2:
            factor = factor * grid.eta * np.exp(grid.lam_im * x) / (2 * np.pi)
        e1 = np.exp(-1j * grid.eta1 * xl[:, None] * self.j[None, : self.rows + 1])
        # doubling the half sum counts the centre twice
        total = 2.0 * (e1 @ sums).real - centre.real
        if not np.all(np.isfinite(total)):
            raise GridTooCoarseError("non-finite inversion sum")
        residue = np.max(np.abs(factor * centre.imag))
        if residue > 1e-6:
            raise GridTooCoarseError(f"imaginary residue {residue:.3e} in inversion sum")
        out[live] = factor * total
        return out

    def invert(self, h, x1, x):
        """Inverse transform of half-lattice values ``h`` at each ``x1`` and a common ``x``."""
        sums, centre = self._row_sums(h, x)
        return self._combine(sums, centre, x1, x)


class Lattice(_HalfLattice):
    """Transform of ``G`` sampled on the half lattice for a regime model.

    ``weight_a`` and ``weight_b`` are the transforms of the ``g1`` and ``g2``
    parts, so that ``G_hat = g1 * weight_a + g2 * weight_b``.
    """

    def __init__(self, cfg, tau, g3, g4, g5, grid):
        super().__init__(tau, g3, g4, g5, grid)
        lo, hi = cfg.alpha.min() * tau, cfg.alpha.max() * tau
        self.weight_a = self._weights(cfg, self.w1, self.w2, lo, hi)
        self.weight_b = self._weights(cfg, self.w1 + self.shift[0], self.w2 + self.shift[1], lo, hi)
        self._release()

    def _weights(self, cfg, w1, w2, lo, hi):
        idx = self.survivors(w1, w2, lo, hi)
        out = np.zeros(w1.size, dtype=np.complex128)
        out[idx] = self.scale[idx] * _phi(cfg, self.tau, w1[idx], w2[idx])
        return out

    def values(self, g1, g2, x1, x):
        """``G(x1, x)`` for coefficients ``g1, g2`` (scalars or arrays aligned with ``x1``)."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        out = np.zeros(x1.size)
        for g, weight in ((g1, self.weight_a), (g2, self.weight_b)):
            g = np.broadcast_to(np.asarray(g, dtype=float), x1.shape)
            if np.any(g != 0):
                sums, centre = self._row_sums(weight, x)
                out += g * self._combine(sums, centre, x1, x)
        return out


class ConstantLattice(_HalfLattice):
    """Half lattice for single-state chains, reusable across correlation levels.

    For constant correlation ``Phi(w) = exp(c0(w) + rho * q(w))``; ``c0`` and
    ``q`` are stored once so each new ``rho`` costs one exponential per
    retained point, fused with the row reduction.
    """

    def __init__(self, tau, g3, g4, g5, grid):
        super().__init__(tau, g3, g4, g5, grid)
        self.parts = []
        self._shifted = {}
        size = self.w1.size
        d = grid.eta * np.asarray(g5, dtype=float) if self.active2 else np.zeros(2)
        # second differences along a row; the exponent is quadratic in the column
        self.d2c0 = -0.5 * tau * (d[0] ** 2 + d[1] ** 2)
        self.d2q = -0.5 * tau * (d[0] ** 2 - d[1] ** 2)
        for w1, w2 in ((self.w1, self.w2), (self.w1 + self.shift[0], self.w2 + self.shift[1])):
            idx = self._row_hull(self.survivors(w1, w2, 0.0, tau))
            u1, u2 = w1[idx], w2[idx]
            z = -0.5 * (u1 * u1 - u2 * u2)
            c0 = -0.5 * tau * u2 * u2 + 0.5 * tau * z
            rowptr = np.searchsorted(idx // self.cols, np.arange(self.rows + 2))
            has_centre = idx.size > 0 and idx[-1] == size - 1
            self.parts.append((idx, c0, 0.5 * tau * z, self.scale[idx], rowptr, has_centre))
        self._release()

    def _row_hull(self, idx):
        """Fill the gaps so each row's retained columns are contiguous."""
        if idx.size == 0:
            return idx
        row = idx // self.cols
        starts = np.flatnonzero(np.r_[True, row[1:] != row[:-1]])
        first = idx[starts]
        last = idx[np.r_[starts[1:] - 1, idx.size - 1]]
        counts = last - first + 1
        offsets = np.repeat(first - np.r_[0, np.cumsum(counts)[:-1]], counts)
        return np.arange(counts.sum()) + offsets

    def _offsets(self, x):
        hit = self._shifted.get(x)
        if hit is None:
            hit = []
            for idx, c0, *_ in self.parts:
                hit.append(c0 - 1j * self.grid.eta * x * self.k[idx % self.cols])
            self._shifted = {x: hit}
        return hit

    def part_sums(self, rho, x):
        """Row sums and centre terms of the ``g1`` and ``g2`` transforms at correlation ``rho``."""
        out = []
        for (idx, _, q, scale, rowptr, has_centre), c0x in zip(self.parts, self._offsets(x)):
            sums = _backend.quadratic_exp_row_sums(c0x, q, scale, rowptr, rho, self.d2c0, self.d2q)
            centre = complex(scale[-1] * np.exp(c0x[-1] + rho * q[-1])) if has_centre else 0j
            out.append((sums, centre))
        return out

    def values(self, rho, g1, g2, x1, x):
        """``G(x1, x)`` at correlation ``rho``; ``g1``, ``g2`` may be arrays aligned with ``x1``."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        out = np.zeros(x1.size)
        for g, (sums, centre) in zip((g1, g2), self.part_sums(rho, x)):
            g = np.broadcast_to(np.asarray(g, dtype=float), x1.shape)
            if np.any(g != 0):
                out += g * self._combine(sums, centre, x1, x)
        return out

    def at(self, rho):
        """View with the correlation fixed, exposing ``values(g1, g2, x1, x)``."""
        return _AtRho(self, rho)


class _AtRho:
    def __init__(self, lat, rho):
        self.lat, self.rho = lat, rho

    def values(self, g1, g2, x1, x):
        return self.lat.values(self.rho, g1, g2, x1, x)


def _phi(cfg, tau, w1, w2):
    return np.exp(-0.5 * tau * w2 * w2) * ctmc.laplace_T(cfg, tau, -0.5 * (w1 * w1 - w2 * w2))


_CACHE = OrderedDict()
_CACHE_SIZE = 8


def _cached(key, build):
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit
    value = build()
    _CACHE[key] = value
    while len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return value


def _vec_key(*arrays):
    return tuple(np.asarray(v, dtype=float).tobytes() for v in arrays)


def lattice(cfg, tau, g3, g4, g5, grid):
    """Cached :class:`Lattice`; prices at many strikes share one lattice."""
    key = ("regime", _vec_key(cfg.generator.a, cfg.q0, cfg.alpha, g3, g4, g5), float(tau), grid)
    return _cached(key, lambda: Lattice(cfg, tau, g3, g4, g5, grid))


def constant_lattice(tau, g3, g4, g5, grid):
    """Cached :class:`ConstantLattice`, shared by every correlation level."""
    key = ("constant", _vec_key(g3, g4, g5), float(tau), grid)
    return _cached(key, lambda: ConstantLattice(tau, g3, g4, g5, grid))


def clear_cache():
    _CACHE.clear()


def invert_G(x1, x, params, cfg, tau, grid):
    """``G(x1, x)`` from the truncated, discretised inversion sum."""
    g1, g2, g3, g4, g5 = params
    if g1 == 0 and g2 == 0:
        return 0.0
    return float(lattice(cfg, tau, g3, g4, g5, grid).values(g1, g2, x1, x)[0])

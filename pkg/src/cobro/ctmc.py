"""Finite-state continuous-time Markov chains driving the correlation clock.

The local correlation is ``rho_t = 2 alpha' Q_t - 1`` where ``Q`` is a chain
with generator ``A``; the clock is ``T_t = int_0^t alpha' Q_s ds``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _backend

BASE_GENERATOR = np.array([[-1.0, 0.8, 0.2],
                            [0.4, -1.0, 0.6],
                            [0.3, 0.7, -1.0]])


class ReducibleChainError(ValueError):
    """Raised when an operation needs an irreducible chain."""


@dataclass(frozen=True)
class Generator:
    """Transition-rate matrix; ``a[i, j]`` is the rate of jumping ``i -> j``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("generator must be a non-empty square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("generator entries must be finite")
        off = a - np.diag(np.diag(a))
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be nonnegative")
        if np.any(np.abs(a.sum(axis=1)) > 1e-12):
            raise ValueError("generator rows must sum to zero")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self):
        return self.a.shape[0]


@dataclass(frozen=True)
class RegimeConfig:
    """Chain generator, initial distribution ``q0`` and clock speeds ``alpha``."""

    generator: Generator
    q0: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        g = self.generator
        if not isinstance(g, Generator):
            g = Generator(g)
            object.__setattr__(self, "generator", g)
        q0 = np.array(self.q0, dtype=float).ravel()
        alpha = np.array(self.alpha, dtype=float).ravel()
        if q0.size != g.n or alpha.size != g.n:
            raise ValueError("q0 and alpha must match the generator size")
        if np.any(q0 < 0) or abs(q0.sum() - 1.0) > 1e-12:
            raise ValueError("q0 must be a probability vector")
        if np.any(alpha <= 0) or np.any(alpha >= 1):
            raise ValueError("alpha entries must lie strictly inside (0, 1)")
        q0.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def constant(cls, rho):
        """Single-state chain with constant correlation ``rho``."""
        if not -1.0 < rho < 1.0:
            raise ValueError("constant correlation must lie in (-1, 1)")
        return cls(Generator(np.zeros((1, 1))), [1.0], [(1.0 + rho) / 2.0])

    @property
    def n(self):
        return self.generator.n

    @property
    def rho_levels(self):
        return 2.0 * self.alpha - 1.0

    @property
    def is_constant(self):
        return bool(np.all(self.alpha == self.alpha[0]))


@dataclass(frozen=True)
class ChainPath:
    """Piecewise-constant chain realisation on ``[0, horizon]``.

    ``states[0]`` holds on ``[0, jump_times[0])``, ``states[i]`` on
    ``[jump_times[i-1], jump_times[i])`` and the last state up to ``horizon``.
    """

    jump_times: np.ndarray
    states: np.ndarray
    horizon: float
    draws: int = field(default=0, compare=False)

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        st = np.asarray(self.states, dtype=np.int64)
        if st.size != jt.size + 1:
            raise ValueError("need exactly one more state than jump times")
        if jt.size and (np.any(np.diff(jt) <= 0) or jt[-1] >= self.horizon or jt[0] <= 0):
            raise ValueError("jump times must be strictly increasing inside (0, horizon)")
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "states", st)

    def state_at(self, t):
        """State index at time(s) ``t`` (right-continuous)."""
        return self.states[np.searchsorted(self.jump_times, t, side="right")]

    def clock(self, alpha, t):
        """Exact ``T_t = int_0^t alpha[Q_s] ds`` at time(s) ``t``."""
        knots = np.concatenate(([0.0], self.jump_times, [self.horizon]))
        cum = np.concatenate(([0.0], np.cumsum(np.asarray(alpha)[self.states] * np.diff(knots))))
        return np.interp(t, knots, cum)

    def occupation(self, n_states):
        """Total time spent in each state over the horizon."""
        knots = np.concatenate(([0.0], self.jump_times, [self.horizon]))
        return np.bincount(self.states, weights=np.diff(knots), minlength=n_states)


def exp_matrix(m):
    """Matrix exponential by scaling and squaring with Pade approximants."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return _backend.expm_batch(m[None])[0]


def transition_matrix(g, t):
    """``P(t) = exp(A t)``; entries below rounding noise are clamped to zero."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    a = g.a if isinstance(g, Generator) else Generator(g).a
    p = exp_matrix(a * t).real
    p[(p < 0) & (p >= -1e-12)] = 0.0
    return p


def is_irreducible(g):
    a = g.a if isinstance(g, Generator) else np.asarray(g)
    n = a.shape[0]
    adj = (a > 0) & ~np.eye(n, dtype=bool)

    def reach(adjacency):
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adjacency[i]):
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        return len(seen) == n

    # strongly connected iff every state reachable from 0 forwards and backwards
    return reach(adj) and reach(adj.T)


def stationary_distribution(g):
    """Probability vector ``pi`` with ``A' pi = 0``."""
    if not is_irreducible(g):
        raise ReducibleChainError("stationary distribution needs an irreducible chain")
    n = g.n
    m = g.a.T.copy()
    m[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(m, rhs)
    pi[pi < 0] = 0.0
    return pi / pi.sum()


def laplace_T(cfg, t, z):
    """``E[exp(z T_t)] = q0' exp((A + z diag(alpha)) t) 1``; ``z`` may be an array."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    z = np.asarray(z, dtype=np.complex128)
    out = _backend.laplace_batch(cfg.generator.a, cfg.alpha, cfg.q0, float(t), z.ravel())
    return out.reshape(z.shape) if z.ndim else complex(out[0])


def _adaptive_simpson(f, a, b, tol, max_depth=50):
    def simpson(fa, fm, fb, h):
        return h * (fa + 4.0 * fm + fb) / 6.0

    def recurse(a, fa, m, fm, b, fb, whole, tol, depth):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, fa, lm, flm, m, fm, left, tol / 2.0, depth - 1)
                + recurse(m, fm, rm, frm, b, fb, right, tol / 2.0, depth - 1))

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    return recurse(a, fa, m, fm, b, fb, simpson(fa, fm, fb, b - a), tol, max_depth)


def expected_rho_bar(cfg, tau, tol=1e-8):
    """``E[rho_bar_tau] = (1/tau) int_0^tau (2 alpha' E[Q_s] - 1) ds``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if cfg.is_constant:
        return 2.0 * cfg.alpha[0] - 1.0
    a, q0, alpha = cfg.generator.a, cfg.q0, cfg.alpha

    def local(s):
        return 2.0 * (q0 @ exp_matrix(a * s).real @ alpha) - 1.0

    return _adaptive_simpson(local, 0.0, float(tau), tol * tau) / tau


def expected_clock(cfg, t):
    """``E[T_t]``, from ``rho_bar = (2 T_t - t) / t``."""
    return 0.5 * t * (1.0 + expected_rho_bar(cfg, t))


def _jump_matrix(a):
    rates = -np.diag(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        jump = np.where(rates[:, None] > 0, a / rates[:, None], 0.0)
    np.fill_diagonal(jump, 0.0)
    return rates, np.cumsum(jump, axis=1)


def _pick(cum_rows, u):
    """Categorical draw per row of cumulative probabilities."""
    idx = (u[:, None] >= cum_rows).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def sample_chain_path(cfg, horizon, rng):
    """Exact chain path: exponential holding times, then an embedded jump."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rates, cum = _jump_matrix(cfg.generator.a)
    q_cum = np.cumsum(cfg.q0)
    state = int(_pick(q_cum[None, :], np.array([rng.random()]))[0])
    draws = 1
    t = 0.0
    times, states = [], [state]
    while rates[state] > 0:
        t += rng.exponential(1.0 / rates[state])
        draws += 1
        if t >= horizon:
            break
        # the last entry of a jump row can fall short of 1 by rounding
        state = int(_pick(cum[state][None, :] / cum[state][-1], np.array([rng.random()]))[0])
        draws += 1
        times.append(t)
        states.append(state)
    return ChainPath(np.array(times), np.array(states), float(horizon), draws)


def sample_clock(cfg, t, n_paths, rng, with_occupation=False):
    """Exact ``T_t`` for ``n_paths`` independent chains (vectorised over paths).

    Returns ``(clock, draws)`` where ``draws`` counts uniforms and exponentials
    consumed; with ``with_occupation`` the per-state occupation times are
    returned as a third item.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    n = cfg.n
    alpha = cfg.alpha
    if cfg.is_constant and not with_occupation:
        return np.full(n_paths, alpha[0] * t), 0
    rates, cum = _jump_matrix(cfg.generator.a)
    safe = np.where(cum[:, -1:] > 0, cum, 1.0)
    cum = cum / safe[:, -1:]
    state = _pick(np.broadcast_to(np.cumsum(cfg.q0), (n_paths, n)), rng.random(n_paths))
    draws = n_paths
    now = np.zeros(n_paths)
    clock = np.zeros(n_paths)
    occ = np.zeros((n_paths, n)) if with_occupation else None
    active = np.arange(n_paths)
    while active.size:
        st = state[active]
        r = rates[st]
        hold = np.full(active.size, np.inf)
        live = r > 0
        hold[live] = rng.exponential(1.0, live.sum()) / r[live]
        draws += int(live.sum())
        end = np.minimum(now[active] + hold, t)
        dt = end - now[active]
        clock[active] += alpha[st] * dt
        if occ is not None:
            occ[active, st] += dt
        now[active] = end
        jumping = end < t
        active = active[jumping]
        if active.size:
            state[active] = _pick(cum[state[active]], rng.random(active.size))
            draws += active.size
    if with_occupation:
        return clock, draws, occ
    return clock, draws


def sample_grid_states(cfg, grid, n_paths, rng):
    """Chain states at ``grid[:-1]`` via one-step transition matrices.

    One uniform per grid interval per path (the initial draw from ``q0`` plus
    a transition for each later left endpoint). Returns ``(states, draws)``
    with ``states`` of shape ``(n_paths, len(grid) - 1)``.
    """
    grid = np.asarray(grid, dtype=float)
    steps = grid.size - 1
    n = cfg.n
    states = np.empty((n_paths, steps), dtype=np.int64)
    states[:, 0] = _pick(np.broadcast_to(np.cumsum(cfg.q0), (n_paths, n)), rng.random(n_paths))
    cache = {}
    for k in range(1, steps):
        dt = grid[k] - grid[k - 1]
        key = round(dt, 15)
        if key not in cache:
            p = transition_matrix(cfg.generator, dt)
            cache[key] = np.cumsum(p, axis=1) / p.sum(axis=1, keepdims=True)
        states[:, k] = _pick(cache[key][states[:, k - 1]], rng.random(n_paths))
    return states, n_paths * steps


def sample_grid_clock(cfg, grid, n_paths, rng):
    """Exact ``T`` at every grid point for ``n_paths`` chains, with left-endpoint states.

    Returns ``(clock, states, draws)``: ``clock`` has shape
    ``(n_paths, len(grid))``, ``states`` holds the chain state at each
    ``grid[:-1]`` and ``draws`` counts uniforms and exponentials consumed.
    """
    grid = np.asarray(grid, dtype=float)
    horizon = grid[-1]
    n = cfg.n
    alpha = cfg.alpha
    rates, cum = _jump_matrix(cfg.generator.a)
    safe = np.where(cum[:, -1:] > 0, cum, 1.0)
    cum = cum / safe[:, -1:]
    state = _pick(np.broadcast_to(np.cumsum(cfg.q0), (n_paths, n)), rng.random(n_paths))
    draws = n_paths
    now = np.zeros(n_paths)
    acc = np.zeros(n_paths)
    clock = np.zeros((n_paths, grid.size))
    states = np.empty((n_paths, grid.size - 1), dtype=np.int64)
    active = np.arange(n_paths)
    while active.size:
        st = state[active]
        r = rates[st]
        hold = np.full(active.size, np.inf)
        live = r > 0
        hold[live] = rng.exponential(1.0, live.sum()) / r[live]
        draws += int(live.sum())
        start = now[active]
        end = np.minimum(start + hold, horizon)
        inside = (grid[None, :] > start[:, None]) & (grid[None, :] <= end[:, None])
        rows, cols = np.nonzero(inside)
        clock[active[rows], cols] = acc[active[rows]] + alpha[st[rows]] * (grid[cols] - start[rows])
        left = (grid[None, :-1] >= start[:, None]) & (grid[None, :-1] < end[:, None])
        rows, cols = np.nonzero(left)
        states[active[rows], cols] = st[rows]
        acc[active] += alpha[st] * (end - start)
        now[active] = end
        active = active[end < horizon]
        if active.size:
            state[active] = _pick(cum[state[active]], rng.random(active.size))
            draws += active.size
    return clock, states, draws

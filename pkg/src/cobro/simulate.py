"""Simulation of ``(B, W)`` by the common decomposition and by Euler-Maruyama.

Common decomposition: draw the clock ``T``, then independent ``X`` and ``Y``
with ``B = X_T + Y_S`` and ``W = X_T - Y_S``. Euler: ``dW = rho dB +
sqrt(1 - rho^2) dZ`` with ``rho`` frozen at the left endpoint of each step.
"""
from dataclasses import dataclass, field

import numpy as np

from . import ctmc, rng as rngmod


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("a time grid needs at least two points")
        if p[0] != 0.0:
            raise ValueError("a time grid starts at 0")
        if np.any(np.diff(p) <= 0):
            raise ValueError("grid points must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, horizon, steps):
        return cls(np.linspace(0.0, horizon, int(steps) + 1))

    @property
    def steps(self):
        return self.points.size - 1

    @property
    def horizon(self):
        return float(self.points[-1])


@dataclass(frozen=True)
class PathBundle:
    """Sampled paths on a grid; arrays are ``(len(grid),)`` or ``(paths, len(grid))``.

    ``rho`` holds the local correlation at the left end of each interval.
    ``rng_draws`` counts normal variates, ``chain_draws`` the uniforms and
    exponentials used for the chain.
    """

    grid: TimeGrid
    b: np.ndarray
    w: np.ndarray
    t_clock: np.ndarray
    s_clock: np.ndarray
    rho: np.ndarray
    rng_draws: int
    chain_draws: int = 0
    x: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)

    @property
    def total_draws(self):
        return self.rng_draws + self.chain_draws


@dataclass(frozen=True)
class EndpointSample:
    """``(B_t, W_t)`` with the clock; draws are arrays or ints matching ``b_t``."""

    b_t: np.ndarray
    w_t: np.ndarray
    t_clock: np.ndarray
    rng_draws: int
    chain_draws: int = 0

    @property
    def total_draws(self):
        return self.rng_draws + self.chain_draws


def _grid(grid):
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def _assemble(grid, t_clock, states, alpha, normals_x, normals_y, chain_draws, rng_draws):
    s_clock = grid.points - t_clock
    dx = normals_x * np.sqrt(np.diff(t_clock, axis=-1))
    dy = normals_y * np.sqrt(np.diff(s_clock, axis=-1))
    pad = [(0, 0)] * (dx.ndim - 1) + [(1, 0)]
    x = np.pad(np.cumsum(dx, axis=-1), pad)
    y = np.pad(np.cumsum(dy, axis=-1), pad)
    return PathBundle(grid, x + y, x - y, t_clock, s_clock, 2.0 * alpha[states] - 1.0,
                      rng_draws, chain_draws, x, y)


def simulate_cd_path(cfg, grid, rng):
    """One common-decomposition path with the clock integrated exactly over the chain."""
    grid = _grid(grid)
    chain = ctmc.sample_chain_path(cfg, grid.horizon, rng)
    t_clock = chain.clock(cfg.alpha, grid.points)
    # interpolation can leave the clock a rounding error outside [0, t]
    t_clock = np.clip(np.maximum.accumulate(t_clock), 0.0, grid.points)
    t_clock[0] = 0.0
    states = chain.state_at(grid.points[:-1])
    n = grid.steps
    z = rng.standard_normal((2, n))
    return _assemble(grid, t_clock, states, cfg.alpha, z[0], z[1], chain.draws, 2 * n)


def simulate_cd_paths(cfg, grid, n_paths, seed):
    """``n_paths`` common-decomposition paths, reproducible from ``seed``."""
    grid = _grid(grid)
    n = grid.steps
    clocks, states, zx, zy = [], [], [], []
    chain_draws = 0
    for _, count, gen in rngmod.blocks(seed, n_paths):
        c, s, d = ctmc.sample_grid_clock(cfg, grid.points, count, gen)
        c = np.clip(c, 0.0, grid.points)
        z = gen.standard_normal((2, count, n))
        clocks.append(c)
        states.append(s)
        zx.append(z[0])
        zy.append(z[1])
        chain_draws += d
    return _assemble(grid, np.concatenate(clocks), np.concatenate(states), cfg.alpha,
                     np.concatenate(zx), np.concatenate(zy), chain_draws, 2 * n * n_paths)


def _clock_endpoint(cfg, t, n_chain_steps, count, gen):
    """Terminal clock: exact occupation time, or a left-endpoint sum over ``n_chain_steps`` cells."""
    if n_chain_steps is None:
        return ctmc.sample_clock(cfg, t, count, gen)
    grid = np.linspace(0.0, t, int(n_chain_steps) + 1)
    states, draws = ctmc.sample_grid_states(cfg, grid, count, gen)
    return cfg.alpha[states].sum(axis=1) * (t / n_chain_steps), draws


def simulate_cd_endpoint(cfg, t, n_chain_steps, rng):
    """``(B_t, W_t)`` from the chain and exactly two normal variates.

    With ``n_chain_steps = n`` the chain is read at ``n`` grid points (one
    uniform each) and ``T_t`` is the left-endpoint sum, for ``n + 2`` draws in
    total. ``None`` integrates the sampled chain exactly.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    clock, chain_draws = _clock_endpoint(cfg, t, n_chain_steps, 1, rng)
    clock = float(np.clip(clock[0], 0.0, t))
    z = rng.standard_normal(2)
    x = np.sqrt(clock) * z[0]
    y = np.sqrt(t - clock) * z[1]
    return EndpointSample(x + y, x - y, clock, 2, int(chain_draws))


def simulate_cd_endpoints(cfg, t, n_paths, seed, n_chain_steps=None):
    """Vectorised :func:`simulate_cd_endpoint`; draw counts are totals over paths."""
    if t <= 0:
        raise ValueError("t must be positive")
    b, w, clocks = [], [], []
    chain_draws = 0
    for _, count, gen in rngmod.blocks(seed, n_paths):
        clock, d = _clock_endpoint(cfg, t, n_chain_steps, count, gen)
        clock = np.clip(clock, 0.0, t)
        z = gen.standard_normal((2, count))
        x = np.sqrt(clock) * z[0]
        y = np.sqrt(t - clock) * z[1]
        b.append(x + y)
        w.append(x - y)
        clocks.append(clock)
        chain_draws += d
    return EndpointSample(np.concatenate(b), np.concatenate(w), np.concatenate(clocks),
                          2 * n_paths, int(chain_draws))


def _euler(cfg, grid, count, gen):
    states, chain_draws = ctmc.sample_grid_states(cfg, grid.points, count, gen)
    rho = 2.0 * cfg.alpha[states] - 1.0
    dt = np.diff(grid.points)
    z = gen.standard_normal((2, count, grid.steps)) * np.sqrt(dt)
    db = z[0]
    dw = rho * db + np.sqrt(1.0 - rho * rho) * z[1]
    pad = ((0, 0), (1, 0))
    b = np.pad(np.cumsum(db, axis=1), pad)
    w = np.pad(np.cumsum(dw, axis=1), pad)
    # clock implied by the frozen correlation: T = (t + int rho) / 2
    t_clock = np.pad(np.cumsum(0.5 * (1.0 + rho) * dt, axis=1), pad)
    return b, w, t_clock, rho, chain_draws


def simulate_euler_path(cfg, grid, rng):
    """One Euler-Maruyama path: ``n`` chain uniforms plus ``2n`` normals."""
    grid = _grid(grid)
    b, w, t_clock, rho, chain_draws = _euler(cfg, grid, 1, rng)
    return PathBundle(grid, b[0], w[0], t_clock[0], grid.points - t_clock[0], rho[0],
                      2 * grid.steps, chain_draws)


def simulate_euler_paths(cfg, grid, n_paths, seed):
    """``n_paths`` Euler-Maruyama paths, reproducible from ``seed``."""
    grid = _grid(grid)
    parts = [_euler(cfg, grid, count, gen) for _, count, gen in rngmod.blocks(seed, n_paths)]
    b, w, t_clock, rho = (np.concatenate([p[i] for p in parts]) for i in range(4))
    chain_draws = sum(p[4] for p in parts)
    return PathBundle(grid, b, w, t_clock, grid.points - t_clock, rho,
                      2 * grid.steps * n_paths, chain_draws)


def estimate_rho_hat(path):
    """Realised correlation ``sum(dB dW) / t`` along the last axis."""
    pts = path.grid.points
    if pts.size < 2:
        raise ValueError("need at least one increment")
    db = np.diff(path.b, axis=-1)
    dw = np.diff(path.w, axis=-1)
    return (db * dw).sum(axis=-1) / (pts[-1] - pts[0])


def _clock_at(path, t):
    pts = path.grid.points
    if not pts[0] <= t <= pts[-1]:
        raise ValueError(f"t={t} outside the simulated grid")
    tc = np.atleast_2d(path.t_clock)
    out = np.array([np.interp(t, pts, row) for row in tc])
    return out if np.ndim(path.t_clock) > 1 else float(out[0])


def realized_covariance(sigma1, sigma2, path, t):
    """``[ln S1, ln S2]_t = sigma1 sigma2 (2 T_t - t)``."""
    return sigma1 * sigma2 * (2.0 * _clock_at(path, t) - t)


def average_rho(path, t):
    """``rho_bar_t = (T_t - S_t) / t``."""
    if t <= 0:
        raise ValueError("t must be positive")
    return (2.0 * _clock_at(path, t) - t) / t

"""Kernel selection: compiled extension if importable, numpy fallback otherwise.

Set ``COBRO_PURE_PYTHON=1`` to force the fallback, ``COBRO_THREADS`` to cap
the number of OpenMP threads used by the compiled kernels.
"""
import os

from . import _fallback

try:
    if os.environ.get("COBRO_PURE_PYTHON"):
        raise ImportError("fallback forced by COBRO_PURE_PYTHON")
    from . import _kernels as _impl
    COMPILED = True
except ImportError:
    _impl = _fallback
    COMPILED = False

NAME = "cython" if COMPILED else "numpy"


def threads():
    env = os.environ.get("COBRO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def expm_batch(ms):
    return _impl.expm_batch(ms, num_threads=threads())


def laplace_batch(a, alpha, q0, tau, z):
    return _impl.laplace_batch(a, alpha, q0, tau, z, num_threads=threads())


def quadratic_exp_row_sums(c0, q, scale, rowptr, rho, d2c0, d2q):
    return _impl.quadratic_exp_row_sums(c0, q, scale, rowptr, rho, d2c0, d2q,
                                        num_threads=threads())

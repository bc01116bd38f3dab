"""Pure numpy implementations of the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics; batched over the leading axis instead of
looping in C. Used automatically when the extension is not built.
"""
import numpy as np

_THETA13 = 5.371920351148152e0
_B13 = (64764752532480000., 32382376266240000., 7771770303897600.,
        1187353796428800., 129060195264000., 10559470521600.,
        670442572800., 33522128640., 1323241920., 40840800.,
        960960., 16380., 182., 1.)
_CHUNK = 131072


def _expm_chunk(m):
    k, n, _ = m.shape
    eye = np.eye(n, dtype=np.complex128)
    norms = np.abs(m).sum(axis=1).max(axis=1)
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _THETA13))
    s = np.where(np.isfinite(s) & (s > 0), s, 0).astype(np.int64)
    a = m * np.ldexp(1.0, -s)[:, None, None]
    b = _B13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye
    u = a @ u
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    r = np.linalg.solve(v - u, v + u)
    for step in range(int(s.max(initial=0))):
        sel = s > step
        r[sel] = r[sel] @ r[sel]
    return r


def expm_batch(ms, num_threads=1):
    """Matrix exponential of each ``(n, n)`` slice of a ``(k, n, n)`` complex array."""
    ms = np.asarray(ms, dtype=np.complex128)
    if ms.ndim != 3 or ms.shape[1] != ms.shape[2]:
        raise ValueError("expected square matrices")
    out = np.empty_like(ms)
    for lo in range(0, ms.shape[0], _CHUNK):
        out[lo:lo + _CHUNK] = _expm_chunk(ms[lo:lo + _CHUNK])
    return out


def laplace_batch(a, alpha, q0, tau, z, num_threads=1):
    """``q0' exp((a + z_k diag(alpha)) tau) 1`` for every entry ``z_k`` of a 1-D array."""
    a = np.asarray(a, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    q0 = np.asarray(q0, dtype=np.float64)
    z = np.asarray(z, dtype=np.complex128).ravel()
    n = a.shape[0]
    if n == 1:
        return q0[0] * np.exp((a[0, 0] + z * alpha[0]) * tau)
    out = np.empty(z.shape, dtype=np.complex128)
    ones = np.ones(n)
    for lo in range(0, z.size, _CHUNK):
        zc = z[lo:lo + _CHUNK]
        m = np.broadcast_to(a * tau, (zc.size, n, n)).astype(np.complex128)
        idx = np.arange(n)
        m[:, idx, idx] += zc[:, None] * alpha[None, :] * tau
        shift = np.trace(m, axis1=1, axis2=2) / n
        m[:, idx, idx] -= shift[:, None]
        e = _expm_chunk(m)
        out[lo:lo + _CHUNK] = (q0 @ e @ ones) * np.exp(shift)
    return out


def quadratic_exp_row_sums(c0, q, scale, rowptr, rho, d2c0, d2q, block=64, num_threads=1):
    """``out[r] = sum(scale[i] * exp(c0[i] + rho * q[i]))`` over contiguous rows.

    The compiled version exploits the quadratic exponent; here every term is
    exponentiated directly, so ``d2c0``, ``d2q`` and ``block`` are unused.
    """
    c0 = np.asarray(c0, dtype=np.complex128)
    q = np.asarray(q, dtype=np.complex128)
    rowptr = np.asarray(rowptr, dtype=np.int64)
    if block < 1:
        raise ValueError("block must be positive")
    if c0.shape != q.shape or np.shape(scale) != c0.shape or rowptr[-1] != c0.size:
        raise ValueError("row pointers do not match the value arrays")
    vals = np.asarray(scale, dtype=np.complex128) * np.exp(c0 + rho * q)
    out = np.zeros(rowptr.size - 1, dtype=np.complex128)
    full = rowptr[1:] > rowptr[:-1]
    if vals.size:
        out[full] = np.add.reduceat(vals, rowptr[:-1][full])
    return out

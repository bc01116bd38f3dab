# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: small dense complex matrix exponentials and batched
evaluation of the clock Laplace transform ``q0' exp((A + z diag(alpha)) tau) 1``.

Mirrors ``cobro._fallback`` function for function.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport ceil, exp, log2, NAN

cnp.import_array()

cdef extern from "<complex.h>" nogil:
    double complex cexp(double complex)
    double cabs(double complex)

cdef enum:
    NMAX = 12
    NN = NMAX * NMAX

cdef double THETA3 = 1.495585217958292e-2
cdef double THETA5 = 2.539398330063230e-1
cdef double THETA7 = 9.504178996162932e-1
cdef double THETA9 = 2.097847961257068e0
cdef double THETA13 = 5.371920351148152e0

cdef double[4] B3 = [120., 60., 12., 1.]
cdef double[6] B5 = [30240., 15120., 3360., 420., 30., 1.]
cdef double[8] B7 = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.]
cdef double[10] B9 = [17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                      2162160., 110880., 3960., 90., 1.]
cdef double[14] B13 = [64764752532480000., 32382376266240000., 7771770303897600.,
                       1187353796428800., 129060195264000., 10559470521600.,
                       670442572800., 33522128640., 1323241920., 40840800.,
                       960960., 16380., 182., 1.]


cdef inline void _matmul(const double complex* a, const double complex* b,
                         double complex* out, int n) noexcept nogil:
    cdef int i, j, k
    cdef double complex s
    for i in range(n):
        for j in range(n):
            s = 0
            for k in range(n):
                s = s + a[i * n + k] * b[k * n + j]
            out[i * n + j] = s


cdef inline void _matmul3(const double complex* a, const double complex* b,
                          double complex* out) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[i * 3 + j] = (a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j]
                              + a[i * 3 + 2] * b[6 + j])


cdef inline void _mm(const double complex* a, const double complex* b,
                     double complex* out, int n) noexcept nogil:
    if n == 3:
        _matmul3(a, b, out)
    else:
        _matmul(a, b, out, n)


cdef inline double _norm1(const double complex* a, int n) noexcept nogil:
    cdef int i, j
    cdef double best = 0.0, col
    for j in range(n):
        col = 0.0
        for i in range(n):
            col = col + cabs(a[i * n + j])
        if col > best:
            best = col
    return best


cdef int _solve(double complex* a, double complex* b, int n) noexcept nogil:
    """Overwrite ``b`` with ``a^{-1} b`` (partial pivoting). Returns 0 on success."""
    cdef int i, j, k, p
    cdef double best, v
    cdef double complex t, f
    for k in range(n):
        p = k
        best = cabs(a[k * n + k])
        for i in range(k + 1, n):
            v = cabs(a[i * n + k])
            if v > best:
                best = v
                p = i
        if best == 0.0:
            return 1
        if p != k:
            for j in range(n):
                t = a[k * n + j]; a[k * n + j] = a[p * n + j]; a[p * n + j] = t
                t = b[k * n + j]; b[k * n + j] = b[p * n + j]; b[p * n + j] = t
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            if f != 0:
                for j in range(k, n):
                    a[i * n + j] = a[i * n + j] - f * a[k * n + j]
                for j in range(n):
                    b[i * n + j] = b[i * n + j] - f * b[k * n + j]
    for k in range(n - 1, -1, -1):
        for j in range(n):
            t = b[k * n + j]
            for i in range(k + 1, n):
                t = t - a[k * n + i] * b[i * n + j]
            b[k * n + j] = t / a[k * n + k]
    return 0


cdef int _expm(double complex* m, double complex* out, int n) noexcept nogil:
    """Scaling and squaring with Pade approximants of degree 3..13 (Higham 2005).

    ``m`` is clobbered. Returns nonzero if the Pade denominator is singular.
    """
    cdef double complex a2[NN]
    cdef double complex a4[NN]
    cdef double complex a6[NN]
    cdef double complex u[NN]
    cdef double complex v[NN]
    cdef double complex tmp[NN]
    cdef int i, j, s = 0, nn = n * n, deg
    cdef double nrm = _norm1(m, n), scale
    cdef const double* b

    if nrm <= THETA3:
        deg = 3; b = B3
    elif nrm <= THETA5:
        deg = 5; b = B5
    elif nrm <= THETA7:
        deg = 7; b = B7
    elif nrm <= THETA9:
        deg = 9; b = B9
    else:
        deg = 13; b = B13
        s = <int>ceil(log2(nrm / THETA13))
        if s < 0:
            s = 0
        scale = 1.0
        for i in range(s):
            scale = scale * 0.5
        for i in range(nn):
            m[i] = m[i] * scale

    _mm(m, m, a2, n)
    _mm(a2, a2, a4, n)
    if deg >= 7:
        _mm(a4, a2, a6, n)

    if deg == 13:
        for i in range(nn):
            tmp[i] = b[13] * a6[i] + b[11] * a4[i] + b[9] * a2[i]
        _mm(a6, tmp, u, n)
        for i in range(nn):
            u[i] = u[i] + b[7] * a6[i] + b[5] * a4[i] + b[3] * a2[i]
        for i in range(n):
            u[i * n + i] = u[i * n + i] + b[1]
        for i in range(nn):
            tmp[i] = b[12] * a6[i] + b[10] * a4[i] + b[8] * a2[i]
        _mm(a6, tmp, v, n)
        for i in range(nn):
            v[i] = v[i] + b[6] * a6[i] + b[4] * a4[i] + b[2] * a2[i]
        for i in range(n):
            v[i * n + i] = v[i * n + i] + b[0]
    else:
        for i in range(nn):
            u[i] = b[3] * a2[i]
            v[i] = b[2] * a2[i]
        if deg >= 5:
            for i in range(nn):
                u[i] = u[i] + b[5] * a4[i]
                v[i] = v[i] + b[4] * a4[i]
        if deg >= 7:
            for i in range(nn):
                u[i] = u[i] + b[7] * a6[i]
                v[i] = v[i] + b[6] * a6[i]
        if deg >= 9:
            _mm(a6, a2, tmp, n)
            for i in range(nn):
                u[i] = u[i] + b[9] * tmp[i]
                v[i] = v[i] + b[8] * tmp[i]
        for i in range(n):
            u[i * n + i] = u[i * n + i] + b[1]
            v[i * n + i] = v[i * n + i] + b[0]

    _mm(m, u, tmp, n)
    for i in range(nn):
        u[i] = tmp[i]
        out[i] = v[i] + u[i]
        v[i] = v[i] - u[i]
    if _solve(v, out, n):
        return 1
    for j in range(s):
        _mm(out, out, tmp, n)
        for i in range(nn):
            out[i] = tmp[i]
    return 0


cdef double complex _laplace_one(const double* a, const double* alpha, const double* q0,
                                 double tau, double complex z, int n) noexcept nogil:
    cdef double complex m[NN]
    cdef double complex e[NN]
    cdef int i, j
    cdef double complex acc = 0, shift = 0
    if n == 1:
        return q0[0] * cexp((a[0] + z * alpha[0]) * tau)
    for i in range(n):
        for j in range(n):
            m[i * n + j] = a[i * n + j] * tau
        m[i * n + i] = m[i * n + i] + z * alpha[i] * tau
        shift = shift + m[i * n + i]
    # exp(M) = exp(mu) exp(M - mu I) with mu = trace/n; trims squarings when z dominates
    shift = shift / n
    for i in range(n):
        m[i * n + i] = m[i * n + i] - shift
    if _expm(m, e, n):
        return NAN
    for i in range(n):
        if q0[i] != 0.0:
            for j in range(n):
                acc = acc + q0[i] * e[i * n + j]
    return acc * cexp(shift)


def expm_batch(ms, int num_threads=1):
    """Matrix exponential of each ``(n, n)`` slice of a ``(k, n, n)`` complex array."""
    cdef double complex[:, :, ::1] src = np.ascontiguousarray(ms, dtype=np.complex128).copy()
    cdef Py_ssize_t k = src.shape[0], idx
    cdef int n = src.shape[1], bad = 0
    if src.shape[2] != n:
        raise ValueError("expected square matrices")
    if n > NMAX:
        raise ValueError(f"compiled kernel supports n <= {NMAX}")
    out = np.empty((k, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] dst = out
    for idx in prange(k, nogil=True, num_threads=max(num_threads, 1)):
        if _expm(&src[idx, 0, 0], &dst[idx, 0, 0], n):
            bad += 1
    if bad:
        raise FloatingPointError("singular Pade denominator")
    return out


def laplace_batch(a, alpha, q0, double tau, z, int num_threads=1):
    """``q0' exp((a + z_k diag(alpha)) tau) 1`` for every entry ``z_k`` of a 1-D array."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] alv = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(q0, dtype=np.float64)
    cdef const double complex[::1] zv = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef int n = av.shape[0]
    cdef Py_ssize_t k = zv.shape[0], idx
    if n > NMAX:
        raise ValueError(f"compiled kernel supports n <= {NMAX}")
    out = np.empty(k, dtype=np.complex128)
    cdef double complex[::1] ov = out
    if k == 0:
        return out
    for idx in prange(k, nogil=True, num_threads=max(num_threads, 1), schedule="static"):
        ov[idx] = _laplace_one(&av[0, 0], &alv[0], &qv[0], tau, zv[idx], n)
    return out


def quadratic_exp_row_sums(c0, q, scale, rowptr, double rho, double d2c0, double d2q,
                           int block=64, int num_threads=1):
    """``out[r] = sum(scale[i] * exp(c0[i] + rho * q[i]))`` over contiguous rows.

    Within a row the exponent is quadratic in the column index with constant
    second difference ``d2c0 + rho * d2q``, so consecutive terms follow from
    two complex multiplications. The recurrence restarts from an exact
    exponential every ``block`` terms to bound rounding growth.
    """
    cdef const double complex[::1] cv = np.ascontiguousarray(c0, dtype=np.complex128)
    cdef const double complex[::1] qv = np.ascontiguousarray(q, dtype=np.complex128)
    cdef const double complex[::1] sv = np.ascontiguousarray(scale, dtype=np.complex128)
    cdef const cnp.int64_t[::1] ptr = np.ascontiguousarray(rowptr, dtype=np.int64)
    cdef Py_ssize_t nrows = ptr.shape[0] - 1, r, i, t, stop
    cdef double complex acc, e, ratio
    cdef double step = exp(d2c0 + rho * d2q)
    if block < 1:
        raise ValueError("block must be positive")
    if cv.shape[0] != qv.shape[0] or cv.shape[0] != sv.shape[0] or ptr[nrows] != cv.shape[0]:
        raise ValueError("row pointers do not match the value arrays")
    out = np.zeros(max(nrows, 0), dtype=np.complex128)
    cdef double complex[::1] ov = out
    for r in prange(nrows, nogil=True, num_threads=max(num_threads, 1), schedule="static"):
        acc = 0
        i = ptr[r]
        while i < ptr[r + 1]:
            stop = min(i + block, ptr[r + 1])
            e = cexp(cv[i] + rho * qv[i])
            ratio = 0
            if i + 1 < stop:
                ratio = cexp((cv[i + 1] - cv[i]) + rho * (qv[i + 1] - qv[i]))
            for t in range(i, stop):
                acc = acc + sv[t] * e
                e = e * ratio
                ratio = ratio * step
            i = stop
        ov[r] = acc
    return out

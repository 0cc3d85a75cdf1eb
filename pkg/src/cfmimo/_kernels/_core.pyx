# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Line-for-line twin of ``pyref.py``. All arithmetic is explicit on
(re, im) double pairs so that, compiled with -ffp-contract=off, results
are bit-identical to the pure-Python fallback.
"""

from libc.math cimport fabs, log, sqrt, INFINITY

import numpy as np

from ..errors import BracketError, ConvergenceError, NotPositiveDefiniteError

cdef double LN2 = 0.6931471805599453
cdef int _MAX_SWEEPS = 60
cdef int _MAX_BISECT = 400
cdef double _BRACKET_CAP = 2.0 ** 60


cdef inline void _cdiv(double ar_, double ai_, double br_, double bi_,
                       double *qr, double *qi) noexcept:
    cdef double r, den
    if fabs(br_) >= fabs(bi_):
        r = bi_ / br_
        den = br_ + bi_ * r
        qr[0] = (ar_ + ai_ * r) / den
        qi[0] = (ai_ - ar_ * r) / den
    else:
        r = br_ / bi_
        den = bi_ + br_ * r
        qr[0] = (ar_ * r + ai_) / den
        qi[0] = (ai_ * r - ar_) / den


cdef inline object _as_components(object a):
    # complex128 C-contiguous (n, m) -> float64 view (n, m, 2), zero copy
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    return arr.view(np.float64).reshape(arr.shape[0], arr.shape[1], 2)


def eigh(a):
    """Cyclic-Jacobi eigendecomposition of a Hermitian matrix."""
    cdef Py_ssize_t n = a.shape[0]
    av_arr = np.array(_as_components(a), dtype=np.float64, copy=True)
    cdef double[:, :, ::1] av = av_arr
    vv_arr = np.zeros((n, n, 2), dtype=np.float64)
    cdef double[:, :, ::1] vv = vv_arr
    cdef Py_ssize_t i, j, p, q, r, c2, sweep, newc, oldc
    cdef double s2, scale, tol2, off2, xr, xm, m2, m, phr, phm, tau, sgn, t, c, s
    cdef double upr, upi, uqr, uqi, wr, wi

    for i in range(n):
        vv[i, i, 0] = 1.0

    s2 = 0.0
    for i in range(n):
        for j in range(n):
            s2 += av[i, j, 0] * av[i, j, 0] + av[i, j, 1] * av[i, j, 1]
    scale = sqrt(s2)
    if scale > 0.0:
        tol2 = (1e-13 * scale) * (1e-13 * scale)
        for sweep in range(_MAX_SWEEPS):
            off2 = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off2 += av[p, q, 0] * av[p, q, 0] + av[p, q, 1] * av[p, q, 1]
            if off2 <= tol2:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    xr = av[p, q, 0]
                    xm = av[p, q, 1]
                    m2 = xr * xr + xm * xm
                    if m2 == 0.0:
                        continue
                    m = sqrt(m2)
                    phr = xr / m
                    phm = xm / m
                    tau = (av[q, q, 0] - av[p, p, 0]) / (2.0 * m)
                    sgn = 1.0 if tau >= 0.0 else -1.0
                    t = sgn / (fabs(tau) + sqrt(1.0 + tau * tau))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    for r in range(n):
                        upr = av[r, p, 0]
                        upi = av[r, p, 1]
                        uqr = av[r, q, 0]
                        uqi = av[r, q, 1]
                        wr = phr * uqr + phm * uqi
                        wi = phr * uqi - phm * uqr
                        av[r, p, 0] = c * upr - s * wr
                        av[r, p, 1] = c * upi - s * wi
                        av[r, q, 0] = s * upr + c * wr
                        av[r, q, 1] = s * upi + c * wi
                    for c2 in range(n):
                        upr = av[p, c2, 0]
                        upi = av[p, c2, 1]
                        uqr = av[q, c2, 0]
                        uqi = av[q, c2, 1]
                        wr = phr * uqr - phm * uqi
                        wi = phr * uqi + phm * uqr
                        av[p, c2, 0] = c * upr - s * wr
                        av[p, c2, 1] = c * upi - s * wi
                        av[q, c2, 0] = s * upr + c * wr
                        av[q, c2, 1] = s * upi + c * wi
                    av[p, q, 0] = 0.0
                    av[p, q, 1] = 0.0
                    av[q, p, 0] = 0.0
                    av[q, p, 1] = 0.0
                    for r in range(n):
                        upr = vv[r, p, 0]
                        upi = vv[r, p, 1]
                        uqr = vv[r, q, 0]
                        uqi = vv[r, q, 1]
                        wr = phr * uqr + phm * uqi
                        wi = phr * uqi - phm * uqr
                        vv[r, p, 0] = c * upr - s * wr
                        vv[r, p, 1] = c * upi - s * wi
                        vv[r, q, 0] = s * upr + c * wr
                        vv[r, q, 1] = s * upi + c * wi

    vals = [av[i, i, 0] for i in range(n)]
    order = sorted(range(n), key=lambda idx: vals[idx])
    values = np.empty(n, dtype=np.float64)
    vectors = np.empty((n, n), dtype=np.complex128)
    vecv_arr = vectors.view(np.float64).reshape(n, n, 2)
    cdef double[:, :, ::1] vecv = vecv_arr
    cdef double[::1] valv = values
    for newc in range(n):
        oldc = order[newc]
        valv[newc] = av[oldc, oldc, 0]
        for r in range(n):
            vecv[r, newc, 0] = vv[r, oldc, 0]
            vecv[r, newc, 1] = vv[r, oldc, 1]
    return vectors, values


def chol(a):
    """Lower Cholesky factor of a Hermitian PD matrix."""
    cdef Py_ssize_t n = a.shape[0]
    cdef double[:, :, ::1] av = _as_components(a)
    out = np.zeros((n, n), dtype=np.complex128)
    lv_arr = out.view(np.float64).reshape(n, n, 2)
    cdef double[:, :, ::1] lv = lv_arr
    cdef Py_ssize_t i, j, k
    cdef double d, ljj, sr, si
    for j in range(n):
        d = av[j, j, 0]
        for k in range(j):
            d -= lv[j, k, 0] * lv[j, k, 0] + lv[j, k, 1] * lv[j, k, 1]
        if not d > 0.0:
            raise NotPositiveDefiniteError(f"cholesky pivot {d!r} at index {j}")
        ljj = sqrt(d)
        lv[j, j, 0] = ljj
        for i in range(j + 1, n):
            sr = av[i, j, 0]
            si = av[i, j, 1]
            for k in range(j):
                sr -= lv[i, k, 0] * lv[j, k, 0] + lv[i, k, 1] * lv[j, k, 1]
                si -= lv[i, k, 1] * lv[j, k, 0] - lv[i, k, 0] * lv[j, k, 1]
            lv[i, j, 0] = sr / ljj
            lv[i, j, 1] = si / ljj
    return out


def chol_solve(lmat, b):
    """Solve A x = b given the lower Cholesky factor L of A."""
    cdef Py_ssize_t n = lmat.shape[0]
    cdef Py_ssize_t m = b.shape[1]
    cdef double[:, :, ::1] lv = _as_components(lmat)
    out = np.array(_as_components(b), dtype=np.float64, copy=True)
    cdef double[:, :, ::1] xv = out
    cdef Py_ssize_t col, i, k
    cdef double sr, si
    for col in range(m):
        for i in range(n):
            sr = xv[i, col, 0]
            si = xv[i, col, 1]
            for k in range(i):
                sr -= lv[i, k, 0] * xv[k, col, 0] - lv[i, k, 1] * xv[k, col, 1]
                si -= lv[i, k, 0] * xv[k, col, 1] + lv[i, k, 1] * xv[k, col, 0]
            xv[i, col, 0] = sr / lv[i, i, 0]
            xv[i, col, 1] = si / lv[i, i, 0]
        for i in range(n - 1, -1, -1):
            sr = xv[i, col, 0]
            si = xv[i, col, 1]
            for k in range(i + 1, n):
                sr -= lv[k, i, 0] * xv[k, col, 0] + lv[k, i, 1] * xv[k, col, 1]
                si -= lv[k, i, 0] * xv[k, col, 1] - lv[k, i, 1] * xv[k, col, 0]
            xv[i, col, 0] = sr / lv[i, i, 0]
            xv[i, col, 1] = si / lv[i, i, 0]
    return out.view(np.complex128).reshape(n, m)


def logdet2(lmat):
    """log2 det(L L^H) from the lower Cholesky factor L."""
    cdef Py_ssize_t n = lmat.shape[0]
    cdef double[:, :, ::1] lv = _as_components(lmat)
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += log(lv[i, i, 0])
    return 2.0 * s / LN2


def det(a):
    """Determinant of a general complex matrix via partial-pivot elimination."""
    cdef Py_ssize_t n = a.shape[0]
    av_arr = np.array(_as_components(a), dtype=np.float64, copy=True)
    cdef double[:, :, ::1] av = av_arr
    cdef double detr = 1.0, deti = 0.0, sign = 1.0
    cdef Py_ssize_t col, r, c2, pbest
    cdef double best, v, pr, pi, nr, ni, fr, fi, tr_, ti, swr, swi
    for col in range(n):
        pbest = col
        best = av[col, col, 0] * av[col, col, 0] + av[col, col, 1] * av[col, col, 1]
        for r in range(col + 1, n):
            v = av[r, col, 0] * av[r, col, 0] + av[r, col, 1] * av[r, col, 1]
            if v > best:
                best = v
                pbest = r
        if best == 0.0:
            return complex(0.0, 0.0)
        if pbest != col:
            for c2 in range(n):
                swr = av[col, c2, 0]
                swi = av[col, c2, 1]
                av[col, c2, 0] = av[pbest, c2, 0]
                av[col, c2, 1] = av[pbest, c2, 1]
                av[pbest, c2, 0] = swr
                av[pbest, c2, 1] = swi
            sign = -sign
        pr = av[col, col, 0]
        pi = av[col, col, 1]
        nr = detr * pr - deti * pi
        ni = detr * pi + deti * pr
        detr = nr
        deti = ni
        for r in range(col + 1, n):
            _cdiv(av[r, col, 0], av[r, col, 1], pr, pi, &fr, &fi)
            if fr == 0.0 and fi == 0.0:
                continue
            for c2 in range(col + 1, n):
                tr_ = fr * av[col, c2, 0] - fi * av[col, c2, 1]
                ti = fr * av[col, c2, 1] + fi * av[col, c2, 0]
                av[r, c2, 0] -= tr_
                av[r, c2, 1] -= ti
    return complex(sign * detr, sign * deti)


cdef double _power_at(double[::1] phi, double[::1] lam, double xi) except -1.0:
    cdef Py_ssize_t n = phi.shape[0]
    cdef double s = 0.0, p, d, dd
    cdef Py_ssize_t i
    for i in range(n):
        p = phi[i]
        if p > 0.0:
            d = lam[i] + xi
            dd = d * d
            if dd == 0.0:
                return INFINITY
            s += p / dd
    return s


def power_at_xi(phi, lam, xi):
    """sum_n phi_n / (lam_n + xi)^2, with 0/0 terms dropped (phi_n <= 0)."""
    cdef double[::1] pv = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    return _power_at(pv, lv, xi)


def xi_root(phi, lam, pmax):
    """Power-constraint multiplier: the xi >= 0 with power_at_xi == pmax."""
    cdef double[::1] pv = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double pm_ = pmax
    cdef double hi, lo, mid, width, pm
    cdef int it
    if _power_at(pv, lv, 0.0) <= pm_:
        return 0.0
    hi = 1.0
    while _power_at(pv, lv, hi) > pm_:
        hi *= 2.0
        if hi > _BRACKET_CAP:
            raise BracketError("no sign change for xi up to 2**60")
    lo = 0.0
    for it in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        width = hi - lo
        pm = _power_at(pv, lv, mid)
        if width <= 1e-13 * mid:
            return mid
        if fabs(pm - pm_) <= 1e-14 * pm_:
            return mid
        if pm > pm_:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("xi bisection exceeded iteration cap")

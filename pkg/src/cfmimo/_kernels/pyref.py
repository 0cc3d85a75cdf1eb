"""Pure-Python kernel backend.

Line-for-line twin of ``_core.pyx``: same operation order, divisions only
through the shared Smith formula or by real scalars, no library linear
algebra. Slow but dependable; selected when the compiled extension is
unavailable or when CFMIMO_KERNELS=python. The two backends must produce
bit-identical results, so any change here has to be mirrored in the .pyx.
"""

import math

import numpy as np

from ..errors import BracketError, ConvergenceError, NotPositiveDefiniteError

LN2 = 0.6931471805599453

_MAX_SWEEPS = 60
_MAX_BISECT = 400
_BRACKET_CAP = 2.0**60


def _split(a, n, m):
    ar = [[float(a[i, j].real) for j in range(m)] for i in range(n)]
    ai = [[float(a[i, j].imag) for j in range(m)] for i in range(n)]
    return ar, ai


def _cdiv(ar_, ai_, br_, bi_):
    # Smith's algorithm, same branch structure as the C side.
    if abs(br_) >= abs(bi_):
        r = bi_ / br_
        den = br_ + bi_ * r
        return (ar_ + ai_ * r) / den, (ai_ - ar_ * r) / den
    r = br_ / bi_
    den = bi_ + br_ * r
    return (ar_ * r + ai_) / den, (ai_ * r - ar_) / den


def eigh(a):
    """Cyclic-Jacobi eigendecomposition of a Hermitian matrix.

    ``a`` must already be exactly Hermitian (the numerics layer
    symmetrizes). Returns (vectors, values) with values ascending,
    vectors in the matching column order.
    """
    n = a.shape[0]
    ar, ai = _split(a, n, n)
    vr = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    vi = [[0.0] * n for _ in range(n)]

    s2 = 0.0
    for i in range(n):
        for j in range(n):
            s2 += ar[i][j] * ar[i][j] + ai[i][j] * ai[i][j]
    scale = math.sqrt(s2)
    if scale > 0.0:
        tol2 = (1e-13 * scale) ** 2
        for _sweep in range(_MAX_SWEEPS):
            off2 = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off2 += ar[p][q] * ar[p][q] + ai[p][q] * ai[p][q]
            if off2 <= tol2:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    xr = ar[p][q]
                    xm = ai[p][q]
                    m2 = xr * xr + xm * xm
                    if m2 == 0.0:
                        continue
                    m = math.sqrt(m2)
                    phr = xr / m
                    phm = xm / m
                    tau = (ar[q][q] - ar[p][p]) / (2.0 * m)
                    sgn = 1.0 if tau >= 0.0 else -1.0
                    t = sgn / (abs(tau) + math.sqrt(1.0 + tau * tau))
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = t * c
                    # A <- A Q, columns p and q (Q embeds the phase e^{-i phi})
                    for r in range(n):
                        upr = ar[r][p]
                        upi = ai[r][p]
                        uqr = ar[r][q]
                        uqi = ai[r][q]
                        wr = phr * uqr + phm * uqi
                        wi = phr * uqi - phm * uqr
                        ar[r][p] = c * upr - s * wr
                        ai[r][p] = c * upi - s * wi
                        ar[r][q] = s * upr + c * wr
                        ai[r][q] = s * upi + c * wi
                    # A <- Q^H A, rows p and q
                    for c2 in range(n):
                        upr = ar[p][c2]
                        upi = ai[p][c2]
                        uqr = ar[q][c2]
                        uqi = ai[q][c2]
                        wr = phr * uqr - phm * uqi
                        wi = phr * uqi + phm * uqr
                        ar[p][c2] = c * upr - s * wr
                        ai[p][c2] = c * upi - s * wi
                        ar[q][c2] = s * upr + c * wr
                        ai[q][c2] = s * upi + c * wi
                    ar[p][q] = 0.0
                    ai[p][q] = 0.0
                    ar[q][p] = 0.0
                    ai[q][p] = 0.0
                    # V <- V Q
                    for r in range(n):
                        upr = vr[r][p]
                        upi = vi[r][p]
                        uqr = vr[r][q]
                        uqi = vi[r][q]
                        wr = phr * uqr + phm * uqi
                        wi = phr * uqi - phm * uqr
                        vr[r][p] = c * upr - s * wr
                        vi[r][p] = c * upi - s * wi
                        vr[r][q] = s * upr + c * wr
                        vi[r][q] = s * upi + c * wi

    vals = [ar[i][i] for i in range(n)]
    order = sorted(range(n), key=lambda idx: vals[idx])
    values = np.empty(n, dtype=np.float64)
    vectors = np.empty((n, n), dtype=np.complex128)
    for newc, oldc in enumerate(order):
        values[newc] = vals[oldc]
        for r in range(n):
            vectors[r, newc] = complex(vr[r][oldc], vi[r][oldc])
    return vectors, values


def chol(a):
    """Lower Cholesky factor of a Hermitian PD matrix."""
    n = a.shape[0]
    ar, ai = _split(a, n, n)
    lr = [[0.0] * n for _ in range(n)]
    li = [[0.0] * n for _ in range(n)]
    for j in range(n):
        d = ar[j][j]
        for k in range(j):
            d -= lr[j][k] * lr[j][k] + li[j][k] * li[j][k]
        if not d > 0.0:
            raise NotPositiveDefiniteError(f"cholesky pivot {d!r} at index {j}")
        ljj = math.sqrt(d)
        lr[j][j] = ljj
        for i in range(j + 1, n):
            sr = ar[i][j]
            si = ai[i][j]
            for k in range(j):
                sr -= lr[i][k] * lr[j][k] + li[i][k] * li[j][k]
                si -= li[i][k] * lr[j][k] - lr[i][k] * li[j][k]
            lr[i][j] = sr / ljj
            li[i][j] = si / ljj
    out = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            out[i, j] = complex(lr[i][j], li[i][j])
    return out


def chol_solve(lmat, b):
    """Solve A x = b given the lower Cholesky factor L of A."""
    n = lmat.shape[0]
    m = b.shape[1]
    lr, li = _split(lmat, n, n)
    xr, xi_ = _split(b, n, m)
    for col in range(m):
        # forward: L y = b
        for i in range(n):
            sr = xr[i][col]
            si = xi_[i][col]
            for k in range(i):
                sr -= lr[i][k] * xr[k][col] - li[i][k] * xi_[k][col]
                si -= lr[i][k] * xi_[k][col] + li[i][k] * xr[k][col]
            xr[i][col] = sr / lr[i][i]
            xi_[i][col] = si / lr[i][i]
        # backward: L^H x = y
        for i in range(n - 1, -1, -1):
            sr = xr[i][col]
            si = xi_[i][col]
            for k in range(i + 1, n):
                sr -= lr[k][i] * xr[k][col] + li[k][i] * xi_[k][col]
                si -= lr[k][i] * xi_[k][col] - li[k][i] * xr[k][col]
            xr[i][col] = sr / lr[i][i]
            xi_[i][col] = si / lr[i][i]
    out = np.empty((n, m), dtype=np.complex128)
    for i in range(n):
        for j in range(m):
            out[i, j] = complex(xr[i][j], xi_[i][j])
    return out


def logdet2(lmat):
    """log2 det(L L^H) from the lower Cholesky factor L."""
    n = lmat.shape[0]
    s = 0.0
    for i in range(n):
        s += math.log(float(lmat[i, i].real))
    return 2.0 * s / LN2


def det(a):
    """Determinant of a general complex matrix via partial-pivot elimination."""
    n = a.shape[0]
    ar, ai = _split(a, n, n)
    detr = 1.0
    deti = 0.0
    sign = 1.0
    for col in range(n):
        pbest = col
        best = ar[col][col] * ar[col][col] + ai[col][col] * ai[col][col]
        for r in range(col + 1, n):
            v = ar[r][col] * ar[r][col] + ai[r][col] * ai[r][col]
            if v > best:
                best = v
                pbest = r
        if best == 0.0:
            return complex(0.0, 0.0)
        if pbest != col:
            ar[col], ar[pbest] = ar[pbest], ar[col]
            ai[col], ai[pbest] = ai[pbest], ai[col]
            sign = -sign
        pr = ar[col][col]
        pi = ai[col][col]
        nr = detr * pr - deti * pi
        ni = detr * pi + deti * pr
        detr = nr
        deti = ni
        for r in range(col + 1, n):
            fr, fi = _cdiv(ar[r][col], ai[r][col], pr, pi)
            if fr == 0.0 and fi == 0.0:
                continue
            for c2 in range(col + 1, n):
                tr_ = fr * ar[col][c2] - fi * ai[col][c2]
                ti = fr * ai[col][c2] + fi * ar[col][c2]
                ar[r][c2] -= tr_
                ai[r][c2] -= ti
    return complex(sign * detr, sign * deti)


def power_at_xi(phi, lam, xi):
    """sum_n phi_n / (lam_n + xi)^2, with 0/0 terms dropped (phi_n <= 0)."""
    n = len(phi)
    s = 0.0
    for i in range(n):
        p = float(phi[i])
        if p > 0.0:
            d = float(lam[i]) + xi
            dd = d * d
            if dd == 0.0:
                return math.inf
            s += p / dd
    return s


def xi_root(phi, lam, pmax):
    """Power-constraint multiplier: the xi >= 0 with power_at_xi == pmax.

    Inputs must be pre-clamped to phi >= 0, lam >= 0. Upper bracket found
    by doubling from 1 (cap 2^60); bisection stops on relative bracket
    width 1e-13 or relative power residual 1e-14.
    """
    phi = [float(x) for x in phi]
    lam = [float(x) for x in lam]
    if power_at_xi(phi, lam, 0.0) <= pmax:
        return 0.0
    hi = 1.0
    while power_at_xi(phi, lam, hi) > pmax:
        hi *= 2.0
        if hi > _BRACKET_CAP:
            raise BracketError("no sign change for xi up to 2**60")
    lo = 0.0
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        width = hi - lo
        pm = power_at_xi(phi, lam, mid)
        if width <= 1e-13 * mid:
            return mid
        if abs(pm - pmax) <= 1e-14 * pmax:
            return mid
        if pm > pmax:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("xi bisection exceeded iteration cap")

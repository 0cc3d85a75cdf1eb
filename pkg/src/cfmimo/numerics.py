"""Dense complex-matrix kernel layer.

Hermitian eigendecomposition (cyclic Jacobi), Cholesky, HPD solves,
log-determinants, general determinants, and a guarded bisection root
finder. All arithmetic is complex128; matrices here are small (antenna
dimensions), so the kernels favor determinism over asymptotics. Near-
Hermitian inputs are symmetrized, never rejected.
"""

from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import BracketError, ConvergenceError, DimensionError, NumericError

KERNEL_BACKEND = _kernels.BACKEND

_BISECT_CAP = 200


class EigenPair(NamedTuple):
    vectors: np.ndarray  # unitary, columns are eigenvectors
    values: np.ndarray  # real, ascending


def _as_matrix(a, name="matrix"):
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be at least 1x1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} has non-finite entries")
    return arr


def _as_square(a, name="matrix"):
    arr = _as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got {arr.shape}")
    return arr


def _symmetrized(a):
    return np.ascontiguousarray((a + a.conj().T) * 0.5)


def hermitian_eig(a) -> EigenPair:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized as (a + a^H)/2 before factoring, since the
    accumulated sums feeding this routine carry Hermitian roundoff.
    """
    arr = _as_square(a)
    vectors, values = _kernels.eigh(_symmetrized(arr))
    return EigenPair(vectors=vectors, values=values)


def cholesky_lower(w) -> np.ndarray:
    """Lower-triangular L with positive real diagonal and L L^H = w.

    Raises NotPositiveDefiniteError when a pivot is not strictly positive.
    """
    arr = _as_square(w)
    return _kernels.chol(_symmetrized(arr))


def solve_hpd(a, b) -> np.ndarray:
    """Solve a x = b for Hermitian positive-definite a, without inverting."""
    arr = _as_square(a, "a")
    brr = np.ascontiguousarray(b, dtype=np.complex128)
    squeeze = brr.ndim == 1
    if squeeze:
        brr = brr.reshape(-1, 1)
    if brr.ndim != 2 or brr.shape[0] != arr.shape[0]:
        raise DimensionError(f"b with shape {np.shape(b)} not conformal to a {arr.shape}")
    if not np.isfinite(brr).all():
        raise NumericError("b has non-finite entries")
    lmat = _kernels.chol(_symmetrized(arr))
    x = _kernels.chol_solve(lmat, brr)
    return x[:, 0] if squeeze else x


def logdet_hpd(a) -> float:
    """log2 det(a) for Hermitian positive-definite a, via Cholesky."""
    arr = _as_square(a)
    lmat = _kernels.chol(_symmetrized(arr))
    return _kernels.logdet2(lmat)


def det(a) -> complex:
    """Determinant of a general complex square matrix (partial-pivot LU)."""
    arr = _as_square(a)
    return _kernels.det(arr)


def bisection_root(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Root of a monotone-decreasing f with f(lo) >= 0 >= f(hi).

    Returns x with |f(x)| <= tol or bracket width <= tol*max(1, |x|).
    Deterministic: identical inputs give bit-identical outputs.
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    a_ = float(lo)
    b_ = float(hi)
    if not (f(a_) >= 0.0 >= f(b_)):
        raise BracketError(f"f({a_}) and f({b_}) do not bracket a sign change")
    for _ in range(_BISECT_CAP):
        mid = 0.5 * (a_ + b_)
        fm = f(mid)
        if abs(fm) <= tol or (b_ - a_) <= tol * max(1.0, abs(mid)):
            return mid
        if fm > 0.0:
            a_ = mid
        else:
            b_ = mid
    raise ConvergenceError("bisection exceeded 200 iterations")

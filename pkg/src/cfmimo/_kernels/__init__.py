"""Kernel backend selection.

The compiled Cython extension is preferred; the pure-Python reference is
the fallback. Force a backend with CFMIMO_KERNELS=cython|python. Both
produce bit-identical results (enforced by tests/test_numerics.py).
"""

import os

_requested = os.environ.get("CFMIMO_KERNELS", "auto")
if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(f"CFMIMO_KERNELS must be auto|cython|python, got {_requested!r}")

if _requested in ("auto", "cython"):
    try:
        from . import _core as impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import pyref as impl

        BACKEND = "python"
else:
    from . import pyref as impl

    BACKEND = "python"

eigh = impl.eigh
chol = impl.chol
chol_solve = impl.chol_solve
logdet2 = impl.logdet2
det = impl.det
power_at_xi = impl.power_at_xi
xi_root = impl.xi_root

"""Policy providers: the source of per-user (U_k, W_k) each near-RT loop.

Every provider must hand back a FilterWeightSet whose W_k are PD via
Cholesky construction. Returning None from near_rt signals the caller to
fall back to the expert for that loop (the event is recorded).
"""

import numpy as np

from . import precoder
from .errors import NumericError


class ExpertProvider:
    """Closed-form optimum: U = J^-1 Xi_kk, W = E(U)^-1, evaluated on the
    gathered effective channels over all users."""

    kind = "expert"

    def near_rt(self, n, xi_set, reward_prev, sim):
        return precoder.filters_from_xi(xi_set)

    def episode_end(self, n, xi_set, reward_prev, sim):
        pass


class FrozenProvider:
    """Replays a fixed filter/weight set every loop (tests, ablations)."""

    kind = "frozen"

    def __init__(self, fws: precoder.FilterWeightSet):
        self.fws = fws

    def near_rt(self, n, xi_set, reward_prev, sim):
        return self.fws

    def episode_end(self, n, xi_set, reward_prev, sim):
        pass


class ExternalProvider:
    """Delegates to an external agent via a callback.

    act_fn(n, xi_set, reward_prev, sim) must return a FilterWeightSet or
    None (invalid/failed action -> expert fallback for that loop).
    end_fn is called once per episode with the terminal observation.
    """

    kind = "external-agent"

    def __init__(self, act_fn, end_fn=None):
        self._act_fn = act_fn
        self._end_fn = end_fn

    def near_rt(self, n, xi_set, reward_prev, sim):
        return self._act_fn(n, xi_set, reward_prev, sim)

    def episode_end(self, n, xi_set, reward_prev, sim):
        if self._end_fn is not None:
            self._end_fn(n, xi_set, reward_prev, sim)


def validate_filters(fws: precoder.FilterWeightSet, K, Nr, Ns) -> None:
    """Reject malformed filter/weight sets before they reach the O-DUs."""
    if fws.U.shape != (K, Nr, Ns) or fws.W.shape != (K, Ns, Ns) or fws.L_chol.shape != (K, Ns, Ns):
        raise NumericError("filter/weight set has wrong shapes")
    if not (np.isfinite(fws.U).all() and np.isfinite(fws.W).all() and np.isfinite(fws.L_chol).all()):
        raise NumericError("filter/weight set has non-finite entries")
    diag = np.diagonal(fws.L_chol, axis1=1, axis2=2)
    if np.any(diag.real <= 0) or np.any(diag.imag != 0):
        raise NumericError("Cholesky diagonal must be real and strictly positive")

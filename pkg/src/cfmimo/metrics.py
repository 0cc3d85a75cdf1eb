"""Effective channels, SINR, rates, MSE matrices, and WMMSE objectives.

Every "inverse times matrix" is an HPD solve; imaginary residues below
1e-9 relative are truncated, anything larger raises NumericError because
it indicates an upstream inconsistency, not roundoff.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DimensionError, NumericError

_IMAG_TOL = 1e-9


@dataclass
class EffectiveChannelSet:
    xi: np.ndarray  # (K, K, Nr, Ns); xi[k, i] couples user i's signal into user k
    noise_power: float


def effective_channels(H, V, serve_mask, noise_power) -> EffectiveChannelSet:
    """xi[k, i] = sum_{l in LUE_i} H[k, l] @ V[i, l].

    V must be zero outside the clusters; serve_mask is applied defensively
    so stray entries cannot leak in.
    """
    H = np.asarray(H)
    V = np.asarray(V)
    if H.ndim != 4 or V.ndim != 4 or H.shape[:2] != V.shape[:2] or H.shape[3] != V.shape[2]:
        raise DimensionError(f"H {H.shape} and V {V.shape} do not conform")
    Vm = np.where(serve_mask[:, :, None, None], V, 0.0)
    xi = np.einsum("klrt,ilts->kirs", H, Vm)
    return EffectiveChannelSet(xi=xi, noise_power=float(noise_power))


def interference_covariance(xi_set: EffectiveChannelSet, k: int) -> np.ndarray:
    """sum_{i != k} xi_ki xi_ki^H + sigma^2 I."""
    xi = xi_set.xi
    K, _, Nr, _ = xi.shape
    c = np.zeros((Nr, Nr), dtype=np.complex128)
    for i in range(K):
        if i != k:
            c += xi[k, i] @ xi[k, i].conj().T
    return c + xi_set.noise_power * np.eye(Nr)


def sinr_matrix(xi_set: EffectiveChannelSet, k: int) -> np.ndarray:
    """Gamma_k = xi_kk xi_kk^H (interference covariance)^-1, via HPD solve."""
    xi_kk = xi_set.xi[k, k]
    s = xi_kk @ xi_kk.conj().T
    c = interference_covariance(xi_set, k)
    return numerics.solve_hpd(c, s).conj().T


def user_rate(gamma_k: np.ndarray) -> float:
    """r_k = log2 det(I + Gamma_k); the determinant's imaginary residue is
    checked against 1e-9 relative and discarded."""
    n = gamma_k.shape[0]
    d = numerics.det(np.eye(n) + gamma_k)
    mag = abs(d)
    if mag > 0 and abs(d.imag) > _IMAG_TOL * mag:
        raise NumericError(f"det(I+Gamma) has imaginary residue {d.imag} vs {d.real}")
    if d.real <= 0:
        raise NumericError(f"det(I+Gamma) must be positive, got {d.real}")
    return float(np.log2(d.real))


def rx_covariance(xi_set: EffectiveChannelSet, k: int) -> np.ndarray:
    """J_k = sum_i xi_ki xi_ki^H + sigma^2 I (Hermitian PD)."""
    xi = xi_set.xi
    K, _, Nr, _ = xi.shape
    j = np.zeros((Nr, Nr), dtype=np.complex128)
    for i in range(K):
        j += xi[k, i] @ xi[k, i].conj().T
    return j + xi_set.noise_power * np.eye(Nr)


def mse_matrix(xi_set: EffectiveChannelSet, u_k: np.ndarray, k: int) -> np.ndarray:
    """E_k for receive filter u_k (Hermitian PSD by construction)."""
    xi = xi_set.xi
    K, _, _, Ns = xi.shape
    m = np.eye(Ns) - u_k.conj().T @ xi[k, k]
    e = m @ m.conj().T
    for i in range(K):
        if i != k:
            t = u_k.conj().T @ xi[k, i]
            e += t @ t.conj().T
    e += xi_set.noise_power * (u_k.conj().T @ u_k)
    return e


def _real_checked(z: complex, what: str) -> float:
    if abs(z) > 0 and abs(z.imag) > _IMAG_TOL * abs(z):
        raise NumericError(f"{what} has imaginary residue {z.imag}")
    return float(z.real)


def wmmse_objective(omega, W, E) -> float:
    """sum_k omega_k (tr(W_k E_k) - log2 det W_k)."""
    total = 0.0
    for k, w in enumerate(omega):
        tr = _real_checked(np.trace(np.asarray(W[k]) @ np.asarray(E[k])), "tr(WE)")
        total += w * (tr - numerics.logdet_hpd(W[k]))
    return total


@dataclass
class PerOruContext:
    """Inputs for the single-O-RU block objective at O-RU l.

    h_at: (i -> H_il), x: (i -> X_i), y: (k -> Y_k), z: ((i, k) -> Z_ikl),
    omega per user, users = K_l, i_range = the sum range (K or K_l)."""

    h_at: dict
    x: dict
    y: dict
    z: dict
    omega: np.ndarray
    users: list
    i_range: list


def per_oru_objective(l: int, v_l: dict, ctx: PerOruContext) -> float:
    """The three-term block objective in the precoders of O-RU l.

    v_l maps k in K_l to the candidate V_kl. Equals the V_l-dependent part
    of the global objective up to a V_l-independent constant.
    """
    t_cross = 0.0
    t_quad = 0.0
    t_lin = 0.0
    for i in ctx.i_range:
        wi = ctx.omega[i]
        h_il = ctx.h_at[i]
        x_i = ctx.x[i]
        for k in ctx.users:
            hv = h_il @ v_l[k]
            t_cross += 2.0 * wi * np.trace(ctx.z[(i, k)].conj().T @ x_i @ hv).real
            t_quad += wi * np.trace(hv.conj().T @ x_i @ hv).real
    for k in ctx.users:
        t_lin -= 2.0 * ctx.omega[k] * np.trace(ctx.y[k] @ ctx.h_at[k] @ v_l[k]).real
    return t_cross + t_quad + t_lin


def global_v_objective(omega, xi_set: EffectiveChannelSet, X, Y) -> float:
    """sum_k omega_k tr[sum_i xi_ki^H X_k xi_ki - 2 Re{Y_k xi_kk}].

    The V-dependent part of the WMMSE objective for fixed (U, W); used by
    the equivalence tests against per_oru_objective.
    """
    xi = xi_set.xi
    K = xi.shape[0]
    total = 0.0
    for k in range(K):
        acc = 0.0
        for i in range(K):
            acc += np.trace(xi[k, i].conj().T @ X[k] @ xi[k, i]).real
        acc -= 2.0 * np.trace(Y[k] @ xi[k, k]).real
        total += omega[k] * acc
    return total


def rate_report(H, V, serve_mask, noise_power):
    """Per-user rates from true channels; returns (rates, aggregate, min)."""
    xi_set = effective_channels(H, V, serve_mask, noise_power)
    K = xi_set.xi.shape[0]
    rates = np.empty(K)
    for k in range(K):
        rates[k] = user_rate(sinr_matrix(xi_set, k))
    return rates, float(rates.sum()), float(rates.min())

"""Reference precoders: centralized RZF, distributed RZF, and the
cellular-WMMSE (coupling-term-free) precoder update."""

import numpy as np

from . import numerics, precoder
from .errors import DegenerateChannelError


def _stack_full(H):
    """(K, L, Nr, Nt) -> (K*Nr, L*Nt) with user-major rows, O-RU-major cols."""
    K, L, Nr, Nt = H.shape
    return H.transpose(0, 2, 1, 3).reshape(K * Nr, L * Nt)


def crzf(H, serve_mask, kl, lam, pmax, Ns) -> np.ndarray:
    """Centralized RZF with fractional power allocation.

    V~ = H^H (H H^H + lam I)^-1 on the full stacked channel; non-serving
    (k, l) blocks are zeroed, then one global eta scales the strongest
    O-RU to exactly Pmax.
    """
    K, L, Nr, Nt = H.shape
    hs = _stack_full(H)
    if not np.any(np.abs(hs) > 0):
        raise DegenerateChannelError("all-zero channel in C-RZF")
    gram = hs @ hs.conj().T + lam * np.eye(K * Nr)
    vt = numerics.solve_hpd(gram, hs).conj().T  # (L*Nt, K*Nr)
    V = np.zeros((K, L, Nt, Ns), dtype=np.complex128)
    for k in range(K):
        for l in range(L):
            if serve_mask[k, l]:
                block = vt[l * Nt : (l + 1) * Nt, k * Nr : (k + 1) * Nr]
                V[k, l] = block[:, :Ns]
    powers = np.array([precoder.oru_power(V, kl[l], l) for l in range(L)])
    pmax_l = powers.max()
    if pmax_l <= 0:
        raise DegenerateChannelError("zero-power C-RZF precoder")
    eta = np.sqrt(pmax / pmax_l)
    return V * eta


def drzf(H, kl, lam, pmax, Ns) -> np.ndarray:
    """Distributed RZF: each O-RU regularizes over its own served users and
    normalizes its local power to exactly Pmax."""
    K, L, Nr, Nt = H.shape
    V = np.zeros((K, L, Nt, Ns), dtype=np.complex128)
    for l in range(L):
        users = kl[l]
        if not users:
            continue
        hl = np.concatenate([H[k, l] for k in users], axis=0)  # (K_l*Nr, Nt)
        gram = hl @ hl.conj().T + lam * np.eye(len(users) * Nr)
        vt = numerics.solve_hpd(gram, hl).conj().T  # (Nt, K_l*Nr)
        power = 0.0
        blocks = {}
        for idx, k in enumerate(users):
            b = vt[:, idx * Nr : (idx + 1) * Nr][:, :Ns]
            blocks[k] = b
            power += float((b.real**2 + b.imag**2).sum())
        if power <= 0:
            raise DegenerateChannelError(f"zero-power D-RZF precoder at O-RU {l}")
        eta = np.sqrt(pmax / power)
        for k, b in blocks.items():
            V[k, l] = b * eta
    return V


def drl_wmmse_v(l, omega, view, x, y, users, pmax):
    """Cellular-WMMSE block update: identical to the full per-O-RU update
    with the cross-O-RU coupling term deleted (and no coupling in Phi)."""
    return precoder.oru_precoder_update(
        l, users, "full", omega, view, x, y, pmax, include_z=False
    )

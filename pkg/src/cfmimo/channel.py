"""Topology, large-scale fading, clustering, and small-scale fading.

Positions are static within a run; mobility enters only through the
temporal correlation coefficient. Large-scale gains use the 3GPP 38.901
UMi-NLOS pathloss with wrap-around (torus) distances; shadow fading is
off by default. Small-scale fading follows a first-order Gauss-Markov
process stepped once per RT loop from counter-based streams.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0

from . import rng
from .errors import ConfigError
from .scenario import Scenario

SPEED_OF_LIGHT = 299792458.0


@dataclass
class ChannelState:
    oru_xy: np.ndarray  # (L, 2)
    ue_xy: np.ndarray  # (K, 2)
    odu_of_oru: np.ndarray  # (L,) O-DU index per O-RU
    odu_orus: list  # per O-DU, ascending O-RU indices
    beta: np.ndarray = None  # (K, L) linear power gain
    epsilon: np.ndarray = None  # (K,) temporal correlation
    serve_mask: np.ndarray = None  # (K, L) bool, l serves k
    lue: list = None  # per user, ascending serving O-RUs
    kl: list = None  # per O-RU, ascending served users
    similar: np.ndarray = None  # (K, I_card) int, k first then ascending
    G: np.ndarray = None  # (K, L, Nr, Nt) small-scale fading
    H: np.ndarray = None  # (K, L, Nr, Nt) true channel
    H_hat: np.ndarray = None  # estimated channel (is H when rho2 == 0)


def odu_of_position(x: float, y: float, side: float, U: int) -> int:
    """O-DU index of the square subarea containing (x, y)."""
    root = math.isqrt(U)
    sub = side / root
    ix = min(int(x // sub), root - 1)
    iy = min(int(y // sub), root - 1)
    return iy * root + ix


def deploy(scenario: Scenario) -> ChannelState:
    """Uniform positions over the square; O-RUs assigned to subarea O-DUs."""
    gen = rng.stream(scenario.seed, rng.DEPLOY)
    side = scenario.area_side
    oru_xy = gen.uniform(0.0, side, size=(scenario.L, 2))
    ue_xy = gen.uniform(0.0, side, size=(scenario.K, 2))
    odu = np.array(
        [odu_of_position(oru_xy[l, 0], oru_xy[l, 1], side, scenario.U) for l in range(scenario.L)],
        dtype=np.int64,
    )
    odu_orus = [sorted(np.flatnonzero(odu == u).tolist()) for u in range(scenario.U)]
    return ChannelState(oru_xy=oru_xy, ue_xy=ue_xy, odu_of_oru=odu, odu_orus=odu_orus)


def pathloss(d3d, scenario: Scenario):
    """UMi-NLOS pathloss as a linear power gain; d3d in meters."""
    d3d = np.asarray(d3d, dtype=np.float64)
    if np.any(d3d <= 0):
        raise ConfigError("pathloss requires d3d > 0")
    pl_db = (
        22.4
        + 35.3 * np.log10(d3d)
        + 21.3 * np.log10(scenario.fc / 1e9)
        - 0.3 * (scenario.ue_height - 1.5)
    )
    return 10.0 ** (-pl_db / 10.0)


def wrap_distance(ue_xy, oru_xy, side, dz):
    """3-D distance with per-axis torus wrap (min over the 9 shifted copies)."""
    d = np.abs(ue_xy[:, None, :] - oru_xy[None, :, :])
    d = np.minimum(d, side - d)
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2 + dz**2)


def large_scale(state: ChannelState, scenario: Scenario) -> np.ndarray:
    dz = scenario.oru_height - scenario.ue_height
    d3d = wrap_distance(state.ue_xy, state.oru_xy, scenario.area_side, dz)
    return pathloss(d3d, scenario)


def cluster(beta: np.ndarray, scenario: Scenario):
    """User-centric clusters: the L_ue strongest O-RUs per user, ties to lower index."""
    K, L = beta.shape
    mask = np.zeros((K, L), dtype=bool)
    lue = []
    for k in range(K):
        order = np.lexsort((np.arange(L), -beta[k]))
        chosen = sorted(order[: scenario.L_ue].tolist())
        lue.append(chosen)
        mask[k, chosen] = True
    kl = [sorted(np.flatnonzero(mask[:, l]).tolist()) for l in range(L)]
    return mask, lue, kl


def similarity_sets(beta: np.ndarray, scenario: Scenario) -> np.ndarray:
    """I_k per user: k first, then the I_card-1 strongest-profile neighbors
    by the score sum_l beta_il*beta_kl, ties to lower user index; the
    non-k members are stored in ascending user index."""
    K = beta.shape[0]
    score = beta @ beta.T
    out = np.empty((K, scenario.I_card), dtype=np.int64)
    for k in range(K):
        others = [i for i in range(K) if i != k]
        others.sort(key=lambda i: (-score[k, i], i))
        members = sorted(others[: scenario.I_card - 1])
        out[k, 0] = k
        out[k, 1:] = members
    return out


def temporal_coeff(v_k: float, scenario: Scenario) -> float:
    """epsilon_k = J0(2*pi*(v/c)*fc*T)."""
    if v_k < 0:
        raise ConfigError("velocity must be >= 0")
    x = 2.0 * math.pi * (v_k / SPEED_OF_LIGHT) * scenario.fc * scenario.T
    return float(j0(x))


def fading_init(state: ChannelState, scenario: Scenario, episode: int) -> None:
    """Draw G i.i.d. CN(0,1) and recompute H (and H_hat when rho2 > 0 is
    applied later per loop). One stream per O-RU keyed by episode."""
    K, L = scenario.K, scenario.L
    G = np.empty((K, L, scenario.Nr, scenario.Nt), dtype=np.complex128)
    for l in range(L):
        gen = rng.stream(scenario.seed, rng.FADING_INIT, l, episode)
        G[:, l] = rng.complex_normal(gen, (K, scenario.Nr, scenario.Nt))
    state.G = G
    _recompute_h(state)


def fading_step(state: ChannelState, scenario: Scenario, t: int) -> None:
    """G(t) = eps*G(t-1) + sqrt(1-eps^2)*Omega(t) with fresh i.i.d. Omega."""
    K, L = scenario.K, scenario.L
    eps = state.epsilon[:, None, None]
    decay = np.sqrt(1.0 - state.epsilon**2)[:, None, None]
    for l in range(L):
        gen = rng.stream(scenario.seed, rng.FADING_STEP, l, t)
        om = rng.complex_normal(gen, (K, scenario.Nr, scenario.Nt))
        state.G[:, l] = eps * state.G[:, l] + decay * om
    _recompute_h(state)


def _recompute_h(state: ChannelState) -> None:
    state.H = np.sqrt(state.beta)[:, :, None, None] * state.G
    state.H_hat = state.H


def corrupt_csi(state: ChannelState, scenario: Scenario, t: int) -> None:
    """H_hat = H + error with i.i.d. CN(0, rho2*beta_kl) entries; the true
    H is retained for rate evaluation. No-op (H_hat is H) when rho2 == 0."""
    if scenario.rho2 == 0.0:
        state.H_hat = state.H
        return
    K, L = scenario.K, scenario.L
    err = np.empty_like(state.H)
    for l in range(L):
        gen = rng.stream(scenario.seed, rng.CSI_ERROR, l, t)
        err[:, l] = rng.complex_normal(gen, (K, scenario.Nr, scenario.Nt)) * np.sqrt(
            scenario.rho2 * state.beta[:, l]
        )[:, None, None]
    state.H_hat = state.H + err


def build(scenario: Scenario, episode: int = 0) -> ChannelState:
    """Deploy, large-scale gains, clusters, similarity sets, initial fading."""
    state = deploy(scenario)
    state.beta = large_scale(state, scenario)
    state.epsilon = np.array([temporal_coeff(v, scenario) for v in scenario.v])
    state.serve_mask, state.lue, state.kl = cluster(state.beta, scenario)
    state.similar = similarity_sets(state.beta, scenario)
    fading_init(state, scenario, episode)
    return state

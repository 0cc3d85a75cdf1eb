"""WMMSE/BCD precoding engine.

Closed-form weight/filter updates, per-O-RU closed-form precoder updates
(full coupling or cluster-restricted "scalable"), the power-constraint
multiplier via complementary slackness plus bisection, per-user QoS dual
ascent, and the complete iterative solver used as expert oracle.
"""

import csv
import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, metrics, numerics, rng
from .errors import (
    ModelFormatError,
    NotPositiveDefiniteError,
    NumericError,
    StalenessError,
)

_PHI_NEG_TOL = -1e-9
_JITTER = 1e-12


@dataclass
class FilterWeightSet:
    U: np.ndarray  # (K, Nr, Ns) receive filters
    W: np.ndarray  # (K, Ns, Ns) Hermitian PD weights
    L_chol: np.ndarray  # (K, Ns, Ns) lower Cholesky factors of W


@dataclass(frozen=True)
class DualState:
    mu: np.ndarray  # (K,) >= 0
    omega: np.ndarray  # (K,) = 1 + mu
    xi: np.ndarray  # (L,) >= 0
    delta: np.ndarray  # (K,) step sizes


def initial_dual_state(K: int, L: int, delta) -> DualState:
    mu = np.ones(K)
    return DualState(mu=mu, omega=1.0 + mu, xi=np.zeros(L), delta=np.asarray(delta, dtype=float))


class ArrayView:
    """Direct (no-staleness) view over channel and precoder tensors."""

    def __init__(self, H, V, lue=None):
        self._H = H
        self._V = V
        self.lue = lue

    def h(self, i, j):
        return self._H[i, j]

    def v(self, k, j):
        return self._V[k, j]


def update_W(e_k: np.ndarray) -> np.ndarray:
    """W_k = E_k^-1 (Hermitian PD); +1e-12 I regularization on a zero pivot."""
    n = e_k.shape[0]
    eye = np.eye(n)
    try:
        w = numerics.solve_hpd(e_k, eye)
    except NotPositiveDefiniteError:
        w = numerics.solve_hpd(e_k + _JITTER * eye, eye)
    return (w + w.conj().T) * 0.5


def update_U(j_k: np.ndarray, xi_kk: np.ndarray) -> np.ndarray:
    """U_k = J_k^-1 Xi_kk via HPD solve."""
    return numerics.solve_hpd(j_k, xi_kk)


def compute_Z(i: int, k: int, l: int, view, lue_k) -> np.ndarray:
    """Z_ikl = sum_{j in LUE_k \\ {l}} H_ij V_kj (cross-O-RU coupling)."""
    z = None
    for j in lue_k:
        if j == l:
            continue
        h = view.h(i, j)
        v = view.v(k, j)
        if h is None or v is None:
            raise StalenessError(f"missing H[{i},{j}] or V[{k},{j}] in view")
        term = h @ v
        z = term if z is None else z + term
    if z is None:
        h = view.h(i, l)
        v = view.v(k, l)
        z = np.zeros((h.shape[0], v.shape[1]), dtype=np.complex128)
    return z


def _assemble_a(l, i_range, omega, view, x):
    a = None
    for i in i_range:
        h = view.h(i, l)
        t = omega[i] * (h.conj().T @ x[i] @ h)
        a = t if a is None else a + t
    return a


def _assemble_b(l, users, i_range, omega, view, x, y, z):
    b = {}
    for k in users:
        h_kl = view.h(k, l)
        bk = omega[k] * (h_kl.conj().T @ y[k].conj().T)
        if z is not None:
            for i in i_range:
                h_il = view.h(i, l)
                bk = bk - omega[i] * (h_il.conj().T @ x[i].conj().T @ z[(i, k)])
        b[k] = bk
    return b


def update_V_oru(l, mode, omega, view, x, y, z, xi_l, users):
    """Closed-form V_kl for all k in K_l at the given multiplier xi_l.

    mode=full sums interference over every user; mode=scalable restricts
    to K_l. z=None deletes the coupling term (cellular-WMMSE variant).
    Solved, never inverted; a non-PD left side (possible only at xi=0
    with rank-deficient X) gets 1e-12 I jitter and a warning.
    """
    i_range = users if mode == "scalable" else range(len(omega))
    a = _assemble_a(l, i_range, omega, view, x)
    b = _assemble_b(l, users, i_range, omega, view, x, y, z)
    nt = a.shape[0]
    stacked = np.concatenate([b[k] for k in users], axis=1)
    lhs = a + xi_l * np.eye(nt)
    try:
        sol = numerics.solve_hpd(lhs, stacked)
    except NotPositiveDefiniteError:
        warnings.warn(f"jittering singular precoder system at O-RU {l}", stacklevel=2)
        jitter = _JITTER * max(1.0, float(np.abs(np.diagonal(lhs)).max()))
        sol = numerics.solve_hpd(lhs + jitter * np.eye(nt), stacked)
    ns = b[users[0]].shape[1]
    return {k: sol[:, idx * ns : (idx + 1) * ns] for idx, k in enumerate(users)}


def solve_xi(phi_diag, lambda_diag, pmax: float) -> float:
    """Power multiplier from complementary slackness.

    0 when the unconstrained precoders fit the budget, else the unique
    xi > 0 with sum_n phi_n/(lambda_n + xi)^2 = pmax by bisection.
    """
    phi = np.asarray(phi_diag, dtype=np.float64)
    lam = np.asarray(lambda_diag, dtype=np.float64)
    if not (np.isfinite(phi).all() and np.isfinite(lam).all()):
        raise NumericError("non-finite diagonals passed to solve_xi")
    if np.any(phi < _PHI_NEG_TOL):
        raise NumericError(f"Phi diagonal below {_PHI_NEG_TOL}: {phi.min()}")
    phi = np.maximum(phi, 0.0)
    lam = np.maximum(lam, 0.0)
    return float(_kernels.xi_root(phi, lam, float(pmax)))


def oru_precoder_update(l, users, mode, omega, view, x, y, pmax, include_z=True, xi_layers=None):
    """Full per-O-RU pipeline: coupling terms, eigendecomposition,
    complementary-slackness xi, then the precoder block solved in the
    eigenbasis.

    The coupling matrix is rank-deficient whenever K_l*Ns < Nt, so
    roundoff-level Phi entries on null directions are filtered before the
    bisection (they would otherwise masquerade as 1/xi^2 power terms) and
    the spectral solve zeroes those directions. When the budget binds the
    block is polished onto it exactly; a polish beyond 1e-6 relative would
    mean a bug and raises.

    With xi_layers set, xi comes from the neural surrogate's forward pass
    instead of bisection; an under-shot surrogate xi is caught by the same
    budget projection. Returns (v_new: {k: V_kl}, xi_l).
    """
    from .errors import InvariantViolationError

    i_range = list(users) if mode == "scalable" else list(range(len(omega)))
    z = None
    if include_z:
        z = {}
        for k in users:
            lue_k = view.lue[k]
            for i in i_range:
                z[(i, k)] = compute_Z(i, k, l, view, lue_k)
    a = _assemble_a(l, i_range, omega, view, x)
    pair = numerics.hermitian_eig(a)
    b = _assemble_b(l, users, i_range, omega, view, x, y, z)
    lam = np.maximum(pair.values, 0.0)
    coeff = {k: pair.vectors.conj().T @ b[k] for k in users}
    phi = np.zeros(a.shape[0])
    for k in users:
        c = coeff[k]
        phi += (c.real**2 + c.imag**2).sum(axis=1)
    if np.any(phi < _PHI_NEG_TOL):
        raise NumericError(f"Phi diagonal below {_PHI_NEG_TOL}: {phi.min()}")
    phi = np.maximum(phi, 0.0)
    # Null-direction roundoff masquerades as 1/xi^2 power terms; the keep
    # mask is shared by the bisection curve and the spectral solve so the
    # delivered power equals the bisection target exactly.
    keep = phi >= 1e-14 * phi.max() if phi.max() > 0.0 else phi > 0.0
    phi = np.where(keep, phi, 0.0)
    surrogate = xi_layers is not None
    if surrogate:
        feats = np.concatenate([phi, lam, [pmax]])
        xi_l = float(forward_pass(xi_layers, feats))
    else:
        xi_l = float(_kernels.xi_root(phi, lam, float(pmax)))
    denom = lam + xi_l
    inv = np.where(keep & (denom > 0.0), 1.0 / np.where(denom > 0.0, denom, 1.0), 0.0)
    v_new = {}
    power = 0.0
    for k in users:
        v = pair.vectors @ (inv[:, None] * coeff[k])
        v_new[k] = v
        power += float((v.real**2 + v.imag**2).sum())
    if surrogate:
        if power > pmax:
            scale = np.sqrt(pmax / power)
            v_new = {k: v * scale for k, v in v_new.items()}
    elif xi_l > 0.0 and power > 0.0:
        scale = np.sqrt(pmax / power)
        if not 1.0 - 1e-6 < scale < 1.0 + 1e-6:
            raise InvariantViolationError(
                f"per-O-RU power {power} too far from budget {pmax} at xi={xi_l}"
            )
        v_new = {k: v * scale for k, v in v_new.items()}
    elif power > pmax:
        scale = np.sqrt(pmax / power)
        v_new = {k: v * scale for k, v in v_new.items()}
    return v_new, xi_l


def xy_from_filters(U, W):
    """X_i = U_i W_i U_i^H and Y_i = W_i U_i^H for the V update."""
    x = {}
    y = {}
    for i in range(len(U)):
        x[i] = U[i] @ W[i] @ U[i].conj().T
        y[i] = W[i] @ U[i].conj().T
    return x, y


def dual_ascent_mu(dual: DualState, rates, r_min) -> DualState:
    """mu_k <- max(0, mu_k + delta_k (R_min_k - r_k)); omega = 1 + mu."""
    mu = np.maximum(0.0, dual.mu + dual.delta * (np.asarray(r_min) - np.asarray(rates)))
    return replace(dual, mu=mu, omega=1.0 + mu)


def oru_power(V, kl_l, l) -> float:
    """Transmit power at O-RU l: sum_{k in K_l} tr(V_kl V_kl^H)."""
    p = 0.0
    for k in kl_l:
        v = V[k, l]
        p += float((v.real**2 + v.imag**2).sum())
    return p


def init_matched_filter(H, lue, kl, pmax, Ns) -> np.ndarray:
    """Per-user matched-filter init: top-Ns right-singular directions of
    H_kl, each O-RU's budget split evenly over its served users."""
    K, L, Nr, Nt = H.shape
    V = np.zeros((K, L, Nt, Ns), dtype=np.complex128)
    for k in range(K):
        for l in lue[k]:
            gram = H[k, l].conj().T @ H[k, l]
            pair = numerics.hermitian_eig(gram)
            cols = pair.vectors[:, ::-1][:, :Ns]
            share = pmax / (len(kl[l]) * Ns)
            V[k, l] = cols * np.sqrt(share)
    return V


def mmse_filters(xi_set, omega_unused=None):
    """Per-user (U, E) at the MMSE receive filter for the current V."""
    K = xi_set.xi.shape[0]
    Nr, Ns = xi_set.xi.shape[2], xi_set.xi.shape[3]
    U = np.empty((K, Nr, Ns), dtype=np.complex128)
    E = np.empty((K, Ns, Ns), dtype=np.complex128)
    for k in range(K):
        j = metrics.rx_covariance(xi_set, k)
        U[k] = update_U(j, xi_set.xi[k, k])
        E[k] = metrics.mse_matrix(xi_set, U[k], k)
    return U, E


def filters_from_xi(xi_set) -> FilterWeightSet:
    """Expert filter/weight pair: U = J^-1 Xi_kk, W = E(U)^-1, L = chol(W)."""
    U, E = mmse_filters(xi_set)
    K, Ns = E.shape[0], E.shape[1]
    W = np.empty((K, Ns, Ns), dtype=np.complex128)
    Lc = np.empty((K, Ns, Ns), dtype=np.complex128)
    for k in range(K):
        W[k] = update_W(E[k])
        Lc[k] = numerics.cholesky_lower(W[k])
    return FilterWeightSet(U=U, W=W, L_chol=Lc)


@dataclass
class BcdResult:
    V: np.ndarray
    U: np.ndarray
    W: np.ndarray
    trace: list  # objective after init filters, then after each iteration
    block_trace: list  # objective after every block update (optional)
    iterations: int


def bcd_solve(
    H,
    lue,
    kl,
    serve_mask,
    pmax,
    noise_power,
    omega,
    init_V=None,
    max_iters=500,
    tol=1e-6,
    record_blocks=False,
) -> BcdResult:
    """Centralized block-coordinate descent on the weighted-MSE objective.

    Per iteration: MMSE filter update, weight update, then one Gauss-Seidel
    sweep of per-O-RU precoder blocks (mode=full, fresh coupling terms) in
    ascending O-RU index. Stops when the relative objective change drops
    below tol. The returned trace is non-increasing; an increase beyond
    1e-7 relative raises InvariantViolationError (it would mean a bug).
    """
    from .errors import InvariantViolationError

    omega = np.asarray(omega, dtype=float)
    K, L = H.shape[0], H.shape[1]
    Ns = min(H.shape[2], H.shape[3])
    V = init_matched_filter(H, lue, kl, pmax, Ns) if init_V is None else init_V.copy()

    def objective(fws_w, u, v):
        xi_set = metrics.effective_channels(H, v, serve_mask, noise_power)
        e = [metrics.mse_matrix(xi_set, u[k], k) for k in range(K)]
        return metrics.wmmse_objective(omega, fws_w, e)

    trace = []
    block_trace = []
    iterations = 0
    U = W = None
    for it in range(max_iters):
        xi_set = metrics.effective_channels(H, V, serve_mask, noise_power)
        U, E = mmse_filters(xi_set)
        if record_blocks and W is not None:
            block_trace.append(objective(W, U, V))
        W = np.stack([update_W(E[k]) for k in range(K)])
        obj_uw = metrics.wmmse_objective(omega, W, E)
        if it == 0:
            trace.append(obj_uw)
        if record_blocks:
            block_trace.append(obj_uw)
        x, y = xy_from_filters(U, W)
        view = ArrayView(H, V, lue=lue)
        for l in range(L):
            if not kl[l]:
                continue
            v_new, _ = oru_precoder_update(l, kl[l], "full", omega, view, x, y, pmax)
            for k, v in v_new.items():
                V[k, l] = v
            if record_blocks:
                block_trace.append(objective(W, U, V))
        obj_end = objective(W, U, V)
        prev = trace[-1]
        trace.append(obj_end)
        iterations = it + 1
        if obj_end > prev + 1e-7 * max(1.0, abs(prev)):
            raise InvariantViolationError(
                f"objective increased {prev} -> {obj_end} in full-mode BCD"
            )
        if abs(obj_end - prev) <= tol * max(1.0, abs(prev)):
            break
    return BcdResult(V=V, U=U, W=W, trace=trace, block_trace=block_trace, iterations=iterations)


def xi_dataset_gen(
    count,
    nt,
    seed,
    phi_range=(1e-6, 1e2),
    lam_range=(1e-6, 1e2),
    pmax_range=(1e-1, 1e1),
) -> np.ndarray:
    """Training table for the xi surrogate: log-uniform diagonals, each row
    solved by bisection. Columns: phi_0..phi_{nt-1}, lambda_0.., pmax, xi."""
    if count <= 0:
        raise ValueError("count must be positive")
    gen = rng.stream(seed, rng.XI_DATASET)
    rows = np.empty((count, 2 * nt + 2))
    for r in range(count):
        phi = 10.0 ** gen.uniform(np.log10(phi_range[0]), np.log10(phi_range[1]), nt)
        lam = 10.0 ** gen.uniform(np.log10(lam_range[0]), np.log10(lam_range[1]), nt)
        pmax = 10.0 ** gen.uniform(np.log10(pmax_range[0]), np.log10(pmax_range[1]))
        rows[r, :nt] = phi
        rows[r, nt : 2 * nt] = lam
        rows[r, 2 * nt] = pmax
        rows[r, 2 * nt + 1] = solve_xi(phi, lam, pmax)
    return rows


def xi_dataset_header(nt: int) -> list:
    return [f"phi_{i}" for i in range(nt)] + [f"lambda_{i}" for i in range(nt)] + ["pmax", "xi"]


def write_xi_dataset(path, rows, nt) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(xi_dataset_header(nt))
        for row in rows:
            writer.writerow([repr(float(x)) for x in row])


def load_xi_model(model_file) -> list:
    """Parse the portable feed-forward model format.

    {"layers": [{"rows": r, "cols": c, "weights": [r*c row-major],
                 "bias": [r], "activation": "relu"|"linear"}]}
    """
    try:
        with open(model_file) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file: {exc}") from exc
    if not isinstance(doc, dict) or "layers" not in doc or not isinstance(doc["layers"], list):
        raise ModelFormatError("model file must hold {'layers': [...]}")
    layers = []
    for idx, spec in enumerate(doc["layers"]):
        try:
            r, c = int(spec["rows"]), int(spec["cols"])
            w = np.asarray(spec["weights"], dtype=np.float64)
            b = np.asarray(spec["bias"], dtype=np.float64)
            act = spec["activation"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"layer {idx}: {exc}") from exc
        if act not in ("relu", "linear"):
            raise ModelFormatError(f"layer {idx}: unknown activation {act!r}")
        if w.size != r * c or b.size != r:
            raise ModelFormatError(f"layer {idx}: weight/bias sizes do not match rows/cols")
        layers.append((w.reshape(r, c), b, act))
    if not layers:
        raise ModelFormatError("model has no layers")
    for prev, nxt in zip(layers, layers[1:]):
        if nxt[0].shape[1] != prev[0].shape[0]:
            raise ModelFormatError("layer input size does not match previous output")
    return layers


def forward_pass(layers, inputs):
    """Forward pass of a loaded surrogate; scalar output clamped >= 0."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    if x.shape[1] != layers[0][0].shape[1]:
        raise ModelFormatError(
            f"input width {x.shape[1]} does not match model input {layers[0][0].shape[1]}"
        )
    h = x.T
    for w, b, act in layers:
        h = w @ h + b[:, None]
        if act == "relu":
            h = np.maximum(h, 0.0)
    out = np.maximum(h[0], 0.0)
    return float(out[0]) if single else out


def xi_approx_eval(model_file, inputs) -> np.ndarray:
    """Deterministic forward pass of the xi surrogate file.

    inputs: (2*Nt+1,) vector or (batch, 2*Nt+1) matrix of
    [phi..., lambda..., pmax]. Returns a scalar per row, clamped >= 0.
    """
    return forward_pass(load_xi_model(model_file), inputs)

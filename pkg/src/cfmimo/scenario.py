"""Experiment configuration.

A Scenario is immutable and fully determines a run together with the mode.
The JSON file schema uses exactly these field names, with Pmax and
noise_power in dBm (converted to watts on load) and R_min / v / delta
given either as scalars (broadcast to all users) or per-user lists.
"""

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .errors import ConfigError

_FIELDS_DBM = ("Pmax", "noise_power")
_FIELDS_PER_USER = ("R_min", "v", "delta")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class Scenario:
    K: int
    L: int
    U: int
    Nt: int
    Nr: int
    Ns: int
    area_side: float
    oru_height: float
    ue_height: float
    Pmax: float  # watts
    noise_power: float  # watts
    fc: float  # Hz
    T: float  # seconds per RT loop
    N_RT: int
    N_nRT: int
    L_ue: int
    I_card: int
    R_min: tuple  # bits/s/Hz, per user
    v: tuple  # m/s, per user
    delta: tuple  # dual step sizes, per user
    rzf_lambda: float | None  # None -> K*Nr*sigma^2/Pmax default
    rho2: float
    seed: int

    def __post_init__(self):
        _validate(self)

    @property
    def rzf_lambda_eff(self) -> float:
        if self.rzf_lambda is not None:
            return self.rzf_lambda
        return self.K * self.Nr * self.noise_power / self.Pmax

    def with_updates(self, **kw) -> "Scenario":
        return replace(self, **kw)


def _per_user(value, K, name):
    if isinstance(value, (int, float)):
        return tuple(float(value) for _ in range(K))
    vals = tuple(float(x) for x in value)
    if len(vals) != K:
        raise ConfigError(f"{name} must have K={K} entries, got {len(vals)}")
    return vals


def _validate(s: Scenario) -> None:
    if min(s.K, s.L, s.U, s.Nt, s.Nr) < 1:
        raise ConfigError("K, L, U, Nt, Nr must all be >= 1")
    if s.Ns != min(s.Nt, s.Nr):
        raise ConfigError(f"Ns must equal min(Nt, Nr)={min(s.Nt, s.Nr)}, got {s.Ns}")
    root = math.isqrt(s.U)
    if root * root != s.U:
        raise ConfigError(f"U must be a perfect square, got {s.U}")
    if not 1 <= s.L_ue <= s.L:
        raise ConfigError(f"L_ue must be in [1, L={s.L}], got {s.L_ue}")
    if not 1 <= s.I_card <= s.K:
        raise ConfigError(f"I_card must be in [1, K={s.K}], got {s.I_card}")
    if s.Pmax <= 0 or s.noise_power <= 0:
        raise ConfigError("Pmax and noise_power must be positive")
    if s.area_side <= 0 or s.fc <= 0 or s.T <= 0:
        raise ConfigError("area_side, fc, T must be positive")
    if s.N_RT < 1 or s.N_nRT < 1:
        raise ConfigError("N_RT and N_nRT must be >= 1")
    for name in _FIELDS_PER_USER:
        vals = getattr(s, name)
        if len(vals) != s.K:
            raise ConfigError(f"{name} must have K={s.K} entries")
    if any(x < 0 for x in s.R_min):
        raise ConfigError("R_min entries must be >= 0")
    if any(x < 0 for x in s.v):
        raise ConfigError("v entries must be >= 0")
    if any(x <= 0 for x in s.delta):
        raise ConfigError("delta entries must be > 0")
    if s.rho2 < 0:
        raise ConfigError("rho2 must be >= 0")
    if s.rzf_lambda is not None and s.rzf_lambda < 0:
        raise ConfigError("rzf_lambda must be >= 0")


def from_dict(doc: dict) -> Scenario:
    doc = dict(doc)
    try:
        K = int(doc["K"])
        kw = {
            "K": K,
            "L": int(doc["L"]),
            "U": int(doc["U"]),
            "Nt": int(doc["Nt"]),
            "Nr": int(doc["Nr"]),
            "area_side": float(doc["area_side"]),
            "oru_height": float(doc["oru_height"]),
            "ue_height": float(doc["ue_height"]),
            "Pmax": dbm_to_watt(float(doc["Pmax"])),
            "noise_power": dbm_to_watt(float(doc["noise_power"])),
            "fc": float(doc["fc"]),
            "T": float(doc["T"]),
            "N_RT": int(doc["N_RT"]),
            "N_nRT": int(doc["N_nRT"]),
            "L_ue": int(doc["L_ue"]),
            "I_card": int(doc["I_card"]),
            "rho2": float(doc.get("rho2", 0.0)),
            "seed": int(doc["seed"]),
        }
    except KeyError as exc:
        raise ConfigError(f"missing scenario field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario field: {exc}") from exc
    kw["Ns"] = int(doc.get("Ns", min(kw["Nt"], kw["Nr"])))
    for name in _FIELDS_PER_USER:
        if name not in doc:
            raise ConfigError(f"missing scenario field '{name}'")
        kw[name] = _per_user(doc[name], K, name)
    lam = doc.get("rzf_lambda")
    kw["rzf_lambda"] = None if lam is None else float(lam)
    return Scenario(**kw)


def load(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"scenario file {path} must hold a JSON object")
    return from_dict(doc)


def to_normalized_dict(s: Scenario) -> dict:
    """Round-trippable config document (powers back in dBm, vectors expanded)."""
    doc = asdict(s)
    doc["Pmax"] = watt_to_dbm(s.Pmax)
    doc["noise_power"] = watt_to_dbm(s.noise_power)
    for name in _FIELDS_PER_USER:
        doc[name] = list(getattr(s, name))
    return doc


def save_normalized(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(to_normalized_dict(s), indent=2, sort_keys=True) + "\n")

import json
from pathlib import Path

import numpy as np
import pytest

from cfmimo import scenario

REPO_ROOT = Path(__file__).resolve().parent.parent
DESK_CONFIG = REPO_ROOT / "configs" / "desk.json"


@pytest.fixture(scope="session")
def desk():
    return scenario.load(DESK_CONFIG)


def tiny_scenario(**overrides):
    """Small WMMSE-friendly scenario for unit tests."""
    doc = {
        "K": 3,
        "L": 4,
        "U": 1,
        "Nt": 2,
        "Nr": 2,
        "area_side": 500.0,
        "oru_height": 10.0,
        "ue_height": 2.0,
        "Pmax": 30.0,
        "noise_power": -114.0,
        "fc": 2e9,
        "T": 1e-3,
        "N_RT": 10,
        "N_nRT": 20,
        "L_ue": 2,
        "I_card": 2,
        "R_min": 0.0,
        "v": 1.4,
        "delta": 0.1,
        "rzf_lambda": None,
        "rho2": 0.0,
        "seed": 3,
    }
    doc.update(overrides)
    return scenario.from_dict(doc)


def random_hpd(rng, n, scale=1.0):
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (b.conj().T @ b + 1e-3 * np.eye(n))


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

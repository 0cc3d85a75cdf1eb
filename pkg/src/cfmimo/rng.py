"""Counter-based random streams.

Every draw comes from a Philox generator keyed by (seed, purpose, entity,
loop), so values do not depend on execution order or parallel schedule and
distinct purposes/entities/loops never share a stream.
"""

import numpy as np

DEPLOY = 1
FADING_INIT = 2
FADING_STEP = 3
CSI_ERROR = 4
XI_DATASET = 5

_SQRT_HALF = np.sqrt(0.5)


def stream(seed: int, purpose: int, entity: int = 0, loop: int = 0) -> np.random.Generator:
    if not 0 <= purpose < 16:
        raise ValueError(f"purpose out of range: {purpose}")
    if not 0 <= entity < 2**20:
        raise ValueError(f"entity out of range: {entity}")
    if not 0 <= loop < 2**40:
        raise ValueError(f"loop out of range: {loop}")
    sub = (purpose << 60) | (entity << 40) | loop
    key = ((int(seed) & (2**64 - 1)) << 64) | sub
    return np.random.Generator(np.random.Philox(key=key))


def complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) entries: real and imaginary parts N(0, 1/2)."""
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    return (re + 1j * im) * _SQRT_HALF

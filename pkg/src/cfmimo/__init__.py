"""Cell-free massive MIMO downlink precoding simulator.

Deterministic WMMSE/BCD precoding with QoS dual ascent, a scalable
distributed variant running under O-RAN multi-timescale control loops
with stale inter-O-DU information, RZF baselines, per-interface signaling
accounting, and a wire-protocol bridge for external policy agents.
"""

from .numerics import KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]

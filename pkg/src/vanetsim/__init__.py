"""Deterministic discrete-event simulator for cluster-based vehicular routing.

Implements the acr protocol (mobility-address clustering, head election,
hybrid intra/inter-cluster forwarding, roadside-unit reporting) next to
simplified aodv and dsdv baselines, plus an experiment harness that
measures reachability, end-to-end delay and total traffic received.
"""

__version__ = "0.1.0"

from .addressing import (
    LocoAddress,
    encode_loco,
    hamming_distance,
    mobility_distance,
    update_loco,
)

__all__ = [
    "LocoAddress",
    "encode_loco",
    "update_loco",
    "hamming_distance",
    "mobility_distance",
    "__version__",
]

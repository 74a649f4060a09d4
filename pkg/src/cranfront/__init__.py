"""Rate-fronthaul regions and quantizer optimization for uplink C-RAN compress-and-forward."""

from .model import (
    InstanceError,
    InvalidQuantizer,
    NetworkInstance,
    QuantizerB,
    background_quantizer,
    b_from_q,
    q_from_b,
    random_instance,
    random_quantizer,
    validate,
)

__all__ = [
    "InstanceError",
    "InvalidQuantizer",
    "NetworkInstance",
    "QuantizerB",
    "background_quantizer",
    "b_from_q",
    "q_from_b",
    "random_instance",
    "random_quantizer",
    "validate",
]

__version__ = "0.1.0"

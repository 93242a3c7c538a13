"""Tsetlin Machine core: model, compute backends, serialization kind."""

from .backends import available_backends, default_backend_name, get_kernel
from .model import (
    MODEL_KIND,
    EpochStats,
    TMConfig,
    TrainedEpoch,
    TsetlinMachine,
    literal_name,
)

__all__ = [
    "MODEL_KIND",
    "EpochStats",
    "TMConfig",
    "TrainedEpoch",
    "TsetlinMachine",
    "available_backends",
    "default_backend_name",
    "get_kernel",
    "literal_name",
]

"""Reclamation backends and the name-based selector."""

from __future__ import annotations

from typing import Any

from ..acquire_retire import Backend, ConfigError
from .ebr import EbrBackend
from .hp import HpBackend
from .ibr import IbrBackend

__all__ = ["BACKENDS", "EbrBackend", "HpBackend", "IbrBackend", "make_backend"]

BACKENDS: dict[str, type[Backend]] = {
    "ebr": EbrBackend,
    "ibr": IbrBackend,
    "hp": HpBackend,
}
_NOT_IMPLEMENTED = {"hyaline", "rchyaline", "crystalline", "he", "ptb", "ptp"}


def make_backend(name: str, **config: Any) -> Backend:
    """Build a configured backend: ``make_backend("ibr", epoch_freq=20)``."""
    key = name.lower()
    if key in _NOT_IMPLEMENTED:
        raise ConfigError(f"backend not implemented: {name}")
    try:
        cls = BACKENDS[key]
    except KeyError:
        raise ConfigError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None
    if key != "hp":
        config.pop("slots", None)
    return cls(**config)

"""Benchmark data structures in manual and reference-counted flavours."""

from __future__ import annotations

from typing import Any, Union

from ..acquire_retire import ConfigError
from ..backends import make_backend
from ..manual import ManualDomain
from ..rc import RcDomain
from .base import (
    ConcurrentMap,
    ConcurrentQueue,
    SequentialMap,
    SequentialQueue,
    bucket_of,
)
from .bst import INF0, MAX_KEY, ManualBst, RcBst
from .dlqueue import ManualQueue, RcQueue
from .hmlist import ManualHashTable, ManualList, RcHashTable, RcList

__all__ = [
    "MAX_KEY",
    "SCHEMES",
    "STRUCTURES",
    "ConcurrentMap",
    "ConcurrentQueue",
    "ManualBst",
    "ManualHashTable",
    "ManualList",
    "ManualQueue",
    "RcBst",
    "RcHashTable",
    "RcList",
    "RcQueue",
    "SequentialMap",
    "SequentialQueue",
    "bucket_of",
    "make_domain",
    "make_structure",
]

STRUCTURES = ("list", "hash", "bst", "dlqueue")
SCHEMES = ("ebr", "ibr", "hp", "rc-ebr", "rc-ibr", "rc-hp")

_CLASSES = {
    ("list", False): ManualList,
    ("list", True): RcList,
    ("hash", False): ManualHashTable,
    ("hash", True): RcHashTable,
    ("bst", False): ManualBst,
    ("bst", True): RcBst,
    ("dlqueue", False): ManualQueue,
    ("dlqueue", True): RcQueue,
}

Domain = Union[ManualDomain, RcDomain]


def make_domain(scheme: str, **backend_config: Any) -> Domain:
    """``"ebr"`` gives manual EBR; ``"rc-ebr"`` reference counting over EBR."""
    automatic = scheme.startswith("rc-")
    backend = make_backend(scheme[3:] if automatic else scheme, **backend_config)
    return RcDomain(backend) if automatic else ManualDomain(backend)


def make_structure(name: str, domain: Domain, *, buckets: int = 1) -> Union[ConcurrentMap, ConcurrentQueue]:
    """Build an empty structure; the calling thread must be registered."""
    try:
        cls = _CLASSES[name, domain.automatic]
    except KeyError:
        raise ConfigError(f"unknown structure {name!r}; choose from {list(STRUCTURES)}") from None
    if name == "hash":
        return cls(domain, buckets)
    return cls(domain)

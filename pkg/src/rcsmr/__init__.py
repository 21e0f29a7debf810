"""Automatic reference counting built from manual memory-reclamation schemes.

Layers, bottom up: ``sticky`` (wait-free counter), ``acquire_retire`` plus
``backends`` (EBR, IBR, hazard slots), ``rc`` (strong and weak references),
``structures`` (list, hash table, BST, queue), ``bench`` and ``verification``.
"""

from .acquire_retire import ConfigError, ProperExecutionError, RegistrationError
from .backends import make_backend
from .ledger import Heap, Ledger, MemorySafetyError, Payload
from .rc import (
    AtomicStrongRef,
    AtomicWeakRef,
    Managed,
    RcDomain,
    SnapshotRef,
    StrongRef,
    WeakRef,
    WeakSnapshotRef,
)
from .sticky import StickyCounter

__version__ = "0.1.0"

__all__ = [
    "AtomicStrongRef",
    "AtomicWeakRef",
    "ConfigError",
    "Heap",
    "Ledger",
    "Managed",
    "MemorySafetyError",
    "Payload",
    "ProperExecutionError",
    "RcDomain",
    "RegistrationError",
    "SnapshotRef",
    "StickyCounter",
    "StrongRef",
    "WeakRef",
    "WeakSnapshotRef",
    "make_backend",
]

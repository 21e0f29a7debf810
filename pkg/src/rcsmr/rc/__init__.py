"""Automatic reference counting over any acquire-retire backend."""

from .core import Managed, RcDomain
from .strong import AtomicStrongRef, SnapshotRef, StrongRef
from .weak import AtomicWeakRef, WeakRef, WeakSnapshotRef

__all__ = [
    "AtomicStrongRef",
    "AtomicWeakRef",
    "Managed",
    "RcDomain",
    "SnapshotRef",
    "StrongRef",
    "WeakRef",
    "WeakSnapshotRef",
]

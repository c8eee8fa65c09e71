"""Deterministic desk-scale copyright-claim registry.

Claims bind content ids to accounts on an event-sourced ledger; a
bonding-curve curation token stakes claims and complaints; curated claims
license reuse through tokens with canonical machine-readable metadata; and
a reasoner answers whether an intended reuse, down to metaverse parcel
coordinates, is covered by an owned license.
"""

from .config import EngineConfig
from .content_store import Blob, ContentId, ContentStore
from .ledger import Engine, Event, Tx, replay

__all__ = [
    "Blob",
    "ContentId",
    "ContentStore",
    "Engine",
    "EngineConfig",
    "Event",
    "Tx",
    "replay",
]

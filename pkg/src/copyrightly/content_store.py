"""Content-addressable blob store.

Stands in for networked decentralized storage: blobs are addressed by the
SHA-256 of their bytes, rendered as ``cid:<64 hex chars>``. Identical bytes
always map to the same id, so exact copies are detectable by id equality
alone. When given a root directory the store keeps one file per digest
(``<root>/<hex>``) next to an in-memory index; without one it is purely
in-memory.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import NotFound

_CID_RE = re.compile(r"^cid:[0-9a-f]{64}$")


@dataclass(frozen=True)
class ContentId:
    value: str

    def __post_init__(self) -> None:
        if not _CID_RE.match(self.value):
            raise ValueError(f"not a content id: {self.value!r}")

    @property
    def hex(self) -> str:
        return self.value[4:]

    @staticmethod
    def for_bytes(data: bytes) -> "ContentId":
        return ContentId("cid:" + hashlib.sha256(data).hexdigest())

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Blob:
    data: bytes
    media_hint: str | None = None


class ContentStore:
    """Immutable blob storage keyed by content id.

    Reads are lock-free; writes are serialized. The transaction engine only
    ever calls it from its single-threaded applier.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._index: dict[str, Blob] = {}
        self._lock = threading.Lock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            for path in self.root.iterdir():
                if path.is_file() and re.fullmatch(r"[0-9a-f]{64}", path.name):
                    self._index["cid:" + path.name] = Blob(path.read_bytes())

    def put(self, data: bytes, media_hint: str | None = None) -> ContentId:
        """Store bytes and return their id; storing the same bytes is a no-op."""
        cid = ContentId.for_bytes(data)
        with self._lock:
            if cid.value not in self._index:
                self._index[cid.value] = Blob(data, media_hint)
                if self.root is not None:
                    (self.root / cid.hex).write_bytes(data)
        return cid

    def get(self, cid: ContentId) -> Blob:
        blob = self._index.get(cid.value)
        if blob is None:
            raise NotFound(f"no blob stored under {cid}")
        return blob

    def has(self, cid: ContentId) -> bool:
        return cid.value in self._index

    def __len__(self) -> int:
        return len(self._index)

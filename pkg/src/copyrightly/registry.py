"""Authorship claims, supporting evidence and social-media oracle checks.

A manifestation binds a content id to the claiming account at a point in
logical time. Content ids collide only for exact copies, so a second claim
on the same id is rejected outright. Evidence accumulates append-only:
uploaded blobs from anyone, plus social-media assets that pass the oracle
check (the asset's fetched description must contain the claim's content id
verbatim).

Status is derived, never stored: a claim is Pending until its grace period
elapses, Challenged while any unresolved complaint holds more stake than
the claim side, Defeated once a complaint wins, and Claimable otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Protocol
import json

from . import tokenomics
from .content_store import ContentId
from .errors import (
    DuplicateContent,
    InvalidParams,
    OracleUnavailable,
    UnknownContent,
    UnknownManifestation,
    VerificationFailed,
)

if TYPE_CHECKING:
    from .ledger import Engine, Event

PENDING = "Pending"
CLAIMABLE = "Claimable"
CHALLENGED = "Challenged"
DEFEATED = "Defeated"

UPLOAD = "upload"
SOCIAL = "social"

PLATFORMS = ("youtube", "twitter", "facebook")


@dataclass
class Manifestation:
    content_id: str
    title: str
    claimant: str
    claimed_at: int
    # Both flags are resolution outcomes; the visible status is derived.
    defeated: bool = False
    vindicated: bool = False


@dataclass
class Evidence:
    manifestation: str
    kind: str
    registered_by: str
    at: int
    evidence_cid: str | None = None
    platform: str | None = None
    asset_id: str | None = None


class SocialAssetFetcher(Protocol):
    def fetch(self, platform: str, asset_id: str) -> str | None:
        """Return the asset's description text, or None when unreachable."""
        ...


class FixtureFetcher:
    """Fetcher backed by a static {platform: {asset_id: description}} mapping."""

    def __init__(self, assets: dict[str, dict[str, str]] | None = None):
        self.assets = assets or {}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureFetcher":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({str(p): {str(a): str(d) for a, d in m.items()} for p, m in raw.items()})

    def add(self, platform: str, asset_id: str, description: str) -> None:
        self.assets.setdefault(platform, {})[asset_id] = description

    def fetch(self, platform: str, asset_id: str) -> str | None:
        return self.assets.get(platform, {}).get(asset_id)


# -- operations -----------------------------------------------------------------


def manifest(eng: "Engine", sender: str, content_id: ContentId, title: str, at: int) -> list["Event"]:
    if not eng.store.has(content_id):
        raise UnknownContent(f"{content_id} has no stored blob")
    if content_id.value in eng.manifestations:
        raise DuplicateContent(f"{content_id} already claimed (exact copy)")
    return [eng.emit("Manifested", {
        "content_id": content_id.value,
        "title": title,
        "claimant": sender,
        "at": at,
    })]


def add_upload_evidence(eng: "Engine", sender: str, manifestation_cid: ContentId,
                        evidence_cid: ContentId, at: int) -> list["Event"]:
    _get(eng, manifestation_cid)
    if not eng.store.has(evidence_cid):
        raise UnknownContent(f"{evidence_cid} has no stored blob")
    return [eng.emit("EvidenceAdded", {
        "manifestation": manifestation_cid.value,
        "evidence_cid": evidence_cid.value,
        "by": sender,
        "at": at,
    })]


def verify_social_evidence(eng: "Engine", sender: str, manifestation_cid: ContentId,
                           platform: str, asset_id: str, at: int,
                           fetcher: SocialAssetFetcher | None = None) -> list["Event"]:
    """Record social evidence iff the fetched description contains the claim's id.

    The containment check is exact and case-sensitive on the full
    ``cid:<hex>`` form. An unreachable fetcher aborts with no state change.
    The fetcher defaults to the engine-configured one.
    """
    m = _get(eng, manifestation_cid)
    if platform not in PLATFORMS:
        raise InvalidParams(f"unknown platform {platform!r}")
    fetcher = fetcher if fetcher is not None else eng.fetcher
    if fetcher is None:
        raise OracleUnavailable("no social asset fetcher configured")
    description = fetcher.fetch(platform, asset_id)
    if description is None:
        raise OracleUnavailable(f"{platform} asset {asset_id!r} unreachable")
    if m.content_id not in description:
        raise VerificationFailed(
            f"description of {platform} asset {asset_id!r} lacks {m.content_id}")
    return [eng.emit("SocialEvidenceVerified", {
        "manifestation": manifestation_cid.value,
        "platform": platform,
        "asset_id": asset_id,
        "by": sender,
        "at": at,
    })]


def manifestation_status(eng: "Engine", mcid: ContentId, at: int | None = None) -> str:
    """Current status, recomputable from facts at any logical time."""
    m = _get(eng, mcid)
    when = eng.clock if at is None else at
    if m.defeated:
        return DEFEATED
    for c in eng.complaints.values():
        if c.manifestation == mcid.value and c.status in tokenomics.UNRESOLVED:
            if tokenomics.is_blocking(eng, c.id):
                return CHALLENGED
    if m.vindicated or when >= m.claimed_at + eng.config.grace_period:
        return CLAIMABLE
    return PENDING


def _get(eng: "Engine", mcid: ContentId) -> Manifestation:
    m = eng.manifestations.get(mcid.value)
    if m is None:
        raise UnknownManifestation(f"no manifestation for {mcid}")
    return m


# -- event appliers (shared by live execution and replay) -------------------------


def apply_manifested(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    m = Manifestation(
        content_id=payload["content_id"],
        title=payload["title"],
        claimant=payload["claimant"],
        claimed_at=payload["at"],
    )
    eng.manifestations[m.content_id] = m
    eng.evidence.setdefault(m.content_id, [])


def apply_evidence_added(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    eng.evidence.setdefault(payload["manifestation"], []).append(Evidence(
        manifestation=payload["manifestation"],
        kind=UPLOAD,
        registered_by=payload["by"],
        at=payload["at"],
        evidence_cid=payload["evidence_cid"],
    ))


def apply_social_evidence_verified(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    eng.evidence.setdefault(payload["manifestation"], []).append(Evidence(
        manifestation=payload["manifestation"],
        kind=SOCIAL,
        registered_by=payload["by"],
        at=payload["at"],
        platform=payload["platform"],
        asset_id=payload["asset_id"],
    ))


# -- transaction handlers -----------------------------------------------------------


def handle_manifest(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return manifest(eng, sender, params["content"], params["title"], at)


def handle_evidence_add(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return add_upload_evidence(eng, sender, params["manifestation"], params["evidence"], at)


def handle_evidence_social(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return verify_social_evidence(
        eng, sender, params["manifestation"], params["platform"], params["asset"], at)

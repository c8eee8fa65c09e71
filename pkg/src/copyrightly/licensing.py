"""License NFTs with canonical machine-readable metadata.

A token is minted against a curated claim and points, through an immutable
token URI, at a metadata document that encodes the licensed terms: an
agreement wrapping a scoped action with participant, object, time window,
territory and instrument dimensions. The document doubles as ordinary
marketplace metadata because the display fields (name, description,
external_link, image, animation_url) sit at the top level as plain JSON.

Serialization is canonical: a fixed key order, fixed 2-space indentation
and a fixed UTC millisecond timestamp form, so equal terms always produce
byte-identical documents and therefore the same content id.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import TYPE_CHECKING

from . import registry
from .content_store import ContentId
from .errors import (
    GracePeriodActive,
    InvalidParams,
    InvalidTerms,
    MalformedMetadata,
    MissingField,
    MonetizationBlocked,
    NoStake,
    NotClaimant,
    NotOwner,
    UnknownManifestation,
    UnknownToken,
)
from .tokenomics import StakeTarget, stake_total

if TYPE_CHECKING:
    from .ledger import Engine, Event

MAKE_AVAILABLE = "MakeAvailable"
# Open enumeration: minting is restricted to the verbs below, while the
# parser accepts any agreement verb it finds so foreign documents load.
MINTABLE_ACTIONS = {MAKE_AVAILABLE}

METADATA_CONTEXT = {
    "@vocab": "https://schema.org/",
    "cro": "https://rhizomik.net/ontologies/copyrightonto.owl#",
    "voxels": "https://voxels.com/",
    "external_link": "https://opensea.io/metadata/external_link",
    "animation_url": "https://opensea.io/metadata/animation_url",
    "youtube_url": "https://opensea.io/metadata/youtube_url",
}

MARKETPLACE_FIELDS = ("name", "description", "external_link", "image", "animation_url")

_TIMESTAMP_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,6}))?Z$")


def account_did(chain_id: int, address: str) -> str:
    return f"did:ethr:0x{chain_id:x}:{address}"


def nft_did(chain_id: int, contract: str, token_id: int | str) -> str:
    return f"did:eip155:{chain_id}:erc721:{contract}:{token_id}"


@dataclass(frozen=True, order=True)
class TimestampMs:
    """UTC instant with millisecond precision, kept as two integers."""

    seconds: int
    millis: int = 0

    # Largest instant renderable with a four-digit year (9999-12-31T23:59:59Z).
    MAX_SECONDS = 253_402_300_799

    def __post_init__(self) -> None:
        if not 0 <= self.seconds <= self.MAX_SECONDS or not 0 <= self.millis <= 999:
            raise ValueError(f"bad timestamp ({self.seconds}, {self.millis})")

    def isoformat(self) -> str:
        base = datetime.fromtimestamp(self.seconds, tz=timezone.utc)
        return base.strftime("%Y-%m-%dT%H:%M:%S") + f".{self.millis:03d}Z"

    def total_millis(self) -> int:
        return self.seconds * 1000 + self.millis

    @staticmethod
    def parse(text: str) -> "TimestampMs":
        m = _TIMESTAMP_RE.match(text)
        if not m:
            raise ValueError(f"not a UTC timestamp: {text!r}")
        y, mo, d, h, mi, s = (int(g) for g in m.groups()[:6])
        seconds = int(datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc).timestamp())
        frac = m.group(7) or "0"
        millis = int(frac.ljust(3, "0")[:3])
        return TimestampMs(seconds, millis)


@dataclass(frozen=True)
class LicenseTerms:
    """Everything the metadata document carries besides the token's own DID."""

    licensor_did: str
    agree_time: TimestampMs
    action: str
    start_time: TimestampMs
    content_ref: str
    end_time: TimestampMs | None = None
    territories: tuple[str, ...] = ()
    instrument: str | None = None
    licensor_url: str | None = None
    content_name: str | None = None
    content_url: str | None = None
    name: str | None = None
    description: str | None = None
    external_link: str | None = None
    image: str | None = None
    animation_url: str | None = None

    def validate(self) -> None:
        if not self.licensor_did:
            raise InvalidTerms("licensor DID must be set")
        if not self.action:
            raise InvalidTerms("action verb must be set")
        if not self.content_ref:
            raise InvalidTerms("licensed content reference must be set")
        if self.end_time is not None and self.start_time > self.end_time:
            raise InvalidTerms("license window ends before it starts")
        if self.action == MAKE_AVAILABLE and not self.territories:
            raise InvalidTerms("location-scoped action needs at least one territory")


@dataclass
class LicenseNft:
    token_id: int
    owner: str
    manifestation: str
    token_uri: str
    minted_at: int
    nft_did: str


def content_ref_for(cid: ContentId) -> str:
    return f"ipfs://{cid.hex}"


def content_key(ref: str) -> str:
    """Normalize a licensed-content reference for equality with content ids."""
    body = ref[len("ipfs://"):] if ref.startswith("ipfs://") else ref
    if re.fullmatch(r"[0-9a-f]{64}", body):
        return "cid:" + body
    return ref if ref.startswith("cid:") else body


# -- canonical serialization --------------------------------------------------------


def serialize_terms(token_did: str, terms: LicenseTerms) -> bytes:
    """Render terms as the canonical metadata document (UTF-8 bytes)."""
    terms.validate()
    doc: dict = {"@context": dict(METADATA_CONTEXT), "@id": token_did, "@type": "cro:Agree"}
    for key in MARKETPLACE_FIELDS:
        value = getattr(terms, key)
        if value is not None:
            doc[key] = value
    doc["cro:when"] = terms.agree_time.isoformat()
    who: dict = {"@id": terms.licensor_did}
    if terms.licensor_url is not None:
        who["url"] = terms.licensor_url
    doc["cro:who"] = who
    term: dict = {"@type": f"cro:{terms.action}", "startTime": terms.start_time.isoformat()}
    if terms.end_time is not None:
        term["endTime"] = terms.end_time.isoformat()
    term["cro:who"] = {"owns": {"@id": token_did}}
    content: dict = {"@id": terms.content_ref, "@type": "cro:Manifestation"}
    if terms.content_name is not None:
        content["name"] = terms.content_name
    if terms.content_url is not None:
        content["url"] = terms.content_url
    term["cro:what"] = content
    if terms.instrument is not None:
        term["cro:with"] = {"@id": terms.instrument}
    if terms.territories:
        term["cro:where"] = [{"@id": t} for t in terms.territories]
    doc["cro:what"] = term
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def parse_terms(data: bytes) -> tuple[str, LicenseTerms]:
    """Inverse of serialize_terms on its image; unknown extra keys are ignored."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise MalformedMetadata(f"metadata is not UTF-8: {e}") from None
    except json.JSONDecodeError as e:
        raise MalformedMetadata(f"metadata is not JSON (line {e.lineno} col {e.colno})") from None
    if not isinstance(doc, dict):
        raise MalformedMetadata("metadata root must be an object")

    token_did = _str_field(doc, "@id")
    if _str_field(doc, "@type") != "cro:Agree":
        raise MalformedMetadata("top-level @type must be an agreement")
    who = _obj_field(doc, "cro:who")
    term = _obj_field(doc, "cro:what")
    verb = _str_field(term, "@type", at="cro:what")
    if not verb.startswith("cro:") or len(verb) <= 4:
        raise MalformedMetadata(f"term @type {verb!r} is not an action verb")

    owns = term.get("cro:who")
    if isinstance(owns, dict):
        owned = owns.get("owns")
        if isinstance(owned, dict) and owned.get("@id") not in (None, token_did):
            raise MalformedMetadata("nested ownership reference names a different token")

    content = _obj_field(term, "cro:what", at="cro:what")
    instrument = term.get("cro:with")
    where = term.get("cro:where", [])
    if not isinstance(where, list):
        raise MalformedMetadata("cro:where must be a list")

    terms = LicenseTerms(
        licensor_did=_str_field(who, "@id", at="cro:who"),
        agree_time=_time_field(doc, "cro:when"),
        action=verb[4:],
        start_time=_time_field(term, "startTime", at="cro:what"),
        end_time=_time_field(term, "endTime", at="cro:what", optional=True),
        content_ref=_str_field(content, "@id", at="cro:what.cro:what"),
        territories=tuple(_str_field(entry, "@id", at="cro:where") for entry in where),
        instrument=_str_field(instrument, "@id", at="cro:with") if instrument is not None else None,
        licensor_url=_opt_str(who, "url"),
        content_name=_opt_str(content, "name"),
        content_url=_opt_str(content, "url"),
        name=_opt_str(doc, "name"),
        description=_opt_str(doc, "description"),
        external_link=_opt_str(doc, "external_link"),
        image=_opt_str(doc, "image"),
        animation_url=_opt_str(doc, "animation_url"),
    )
    return token_did, terms


def _qualify(key: str, at: str | None) -> str:
    return f"{at}.{key}" if at else key


def _str_field(obj, key: str, at: str | None = None) -> str:
    if not isinstance(obj, dict):
        raise MalformedMetadata(f"{at or 'document'} must be an object")
    if key not in obj:
        raise MissingField(_qualify(key, at))
    value = obj[key]
    if not isinstance(value, str):
        raise MalformedMetadata(f"{_qualify(key, at)} must be a string")
    return value


def _obj_field(obj: dict, key: str, at: str | None = None) -> dict:
    if key not in obj:
        raise MissingField(_qualify(key, at))
    value = obj[key]
    if not isinstance(value, dict):
        raise MalformedMetadata(f"{_qualify(key, at)} must be an object")
    return value


def _opt_str(obj: dict, key: str) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise MalformedMetadata(f"{key} must be a string")
    return value


def _time_field(obj: dict, key: str, at: str | None = None,
                optional: bool = False) -> TimestampMs | None:
    if key not in obj:
        if optional:
            return None
        raise MissingField(_qualify(key, at))
    try:
        return TimestampMs.parse(_str_field(obj, key, at))
    except ValueError as e:
        raise MalformedMetadata(str(e)) from None


# -- operations ------------------------------------------------------------------------


def mint_license(eng: "Engine", sender: str, manifestation_cid: ContentId,
                 terms: LicenseTerms, at: int) -> list["Event"]:
    """Mint a license token for a curated claim.

    Requires the claimant, a live stake, an elapsed grace period and an
    unblocked claim. The terms' licensor, agreement time and licensed
    content are bound to the claim here, whatever the caller passed in.
    """
    m = eng.manifestations.get(manifestation_cid.value)
    if m is None:
        raise UnknownManifestation(f"no manifestation for {manifestation_cid}")
    if sender != m.claimant:
        raise NotClaimant(f"{sender} did not claim {manifestation_cid}")
    if at < m.claimed_at + eng.config.grace_period:
        raise GracePeriodActive(
            f"minting opens at {m.claimed_at + eng.config.grace_period}")
    status = registry.manifestation_status(eng, manifestation_cid, at)
    if status != registry.CLAIMABLE:
        raise MonetizationBlocked(f"{manifestation_cid} is {status}")
    if stake_total(eng, StakeTarget.claim(manifestation_cid)) == 0:
        raise NoStake(f"{manifestation_cid} has no stake backing it")
    if terms.action not in MINTABLE_ACTIONS:
        raise InvalidTerms(f"cannot license action {terms.action!r}")

    try:
        agree_time = TimestampMs(at)
    except ValueError:
        raise InvalidTerms(f"mint time {at} is not a representable timestamp") from None
    token_id = eng.next_token_id
    did = nft_did(eng.config.chain_id, eng.config.nft_contract, token_id)
    ref = content_ref_for(manifestation_cid)
    bound = replace(
        terms,
        licensor_did=account_did(eng.config.chain_id, sender),
        agree_time=agree_time,
        content_ref=ref,
        content_name=terms.content_name if terms.content_name is not None else m.title,
        image=terms.image if terms.image is not None else ref,
        animation_url=terms.animation_url if terms.animation_url is not None else ref,
    )
    metadata = serialize_terms(did, bound)
    token_uri = ContentId.for_bytes(metadata)
    return [eng.emit("NftMinted", {
        "token_id": token_id,
        "owner": sender,
        "manifestation": manifestation_cid.value,
        "token_uri": token_uri.value,
        "nft_did": did,
        "at": at,
        "metadata_hex": metadata.hex(),
    })]


def transfer(eng: "Engine", sender: str, token_id: int, new_owner: str,
             at: int) -> list["Event"]:
    nft = eng.nfts.get(token_id)
    if nft is None:
        raise UnknownToken(f"no token #{token_id}")
    if nft.owner != sender:
        raise NotOwner(f"token #{token_id} belongs to {nft.owner}")
    return [eng.emit("NftTransferred", {
        "token_id": token_id,
        "from": sender,
        "to": new_owner,
        "at": at,
    })]


# -- event appliers ----------------------------------------------------------------------


def apply_nft_minted(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    # The log carries the metadata bytes so a fresh engine can re-seed its
    # blob store during replay; puts are idempotent.
    metadata = bytes.fromhex(payload["metadata_hex"])
    eng.store.put(metadata, media_hint="license-metadata")
    nft = LicenseNft(
        token_id=payload["token_id"],
        owner=payload["owner"],
        manifestation=payload["manifestation"],
        token_uri=payload["token_uri"],
        minted_at=payload["at"],
        nft_did=payload["nft_did"],
    )
    eng.nfts[nft.token_id] = nft
    eng.next_token_id = max(eng.next_token_id, nft.token_id + 1)


def apply_nft_transferred(eng: "Engine", event: "Event") -> None:
    eng.nfts[event.payload["token_id"]].owner = event.payload["to"]


# -- transaction handlers ----------------------------------------------------------------


def handle_nft_mint(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return mint_license(eng, sender, params["manifestation"], params["terms"], at)


def handle_nft_transfer(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return transfer(eng, sender, params["token"], params["to"], at)


def terms_from_input(raw: dict) -> LicenseTerms:
    """Build terms from user-supplied fields (terms file or scenario params).

    Licensor, agreement time and content binding are engine-controlled and
    filled at mint, so placeholders are used here.
    """
    def time_of(key: str) -> TimestampMs | None:
        value = raw.get(key)
        if value is None:
            return None
        try:
            if isinstance(value, int):
                return TimestampMs(value)
            if isinstance(value, str):
                if value.isdigit():
                    return TimestampMs(int(value))
                return TimestampMs.parse(value)
        except ValueError as e:
            raise InvalidParams(str(e)) from None
        raise InvalidParams(f"{key} must be an epoch integer or UTC timestamp")

    start = time_of("start")
    if start is None:
        raise InvalidParams("license terms need a start time")
    territories = raw.get("territories", ())
    if isinstance(territories, str):
        territories = tuple(t for t in territories.split(",") if t)
    return LicenseTerms(
        licensor_did="did:ethr:0x0:pending",
        agree_time=TimestampMs(0),
        action=raw.get("action", MAKE_AVAILABLE),
        start_time=start,
        end_time=time_of("end"),
        content_ref="ipfs://pending",
        territories=tuple(territories),
        instrument=raw.get("instrument"),
        licensor_url=raw.get("licensor_url"),
        content_name=raw.get("content_name"),
        content_url=raw.get("content_url"),
        name=raw.get("name"),
        description=raw.get("description"),
        external_link=raw.get("external_link"),
        image=raw.get("image"),
        animation_url=raw.get("animation_url"),
    )

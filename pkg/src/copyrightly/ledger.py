"""Deterministic event-sourced transaction engine.

The engine is the chain stand-in: accounts holding integer ether base
units, a logical clock injected per transaction, and an append-only event
log. A transaction either commits completely, appending its events, or
fails with a domain error and leaves no trace. Every state change flows
through an event applier, and replaying a log through the same appliers on
a fresh engine reconstructs the exact state, which the canonical state
digest makes checkable.

The digest deliberately excludes two things: the content store (off-chain
by construction) and the current clock, which successful no-op
transactions advance without emitting events and which is therefore not
recoverable from the log.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import licensing, registry, tokenomics
from .config import EngineConfig
from .content_store import ContentStore
from .errors import ClockRegression, CorruptLog, DomainError, InsufficientFunds, InvalidParams

LogicalTime = int


@dataclass(frozen=True)
class Event:
    seq: int
    time: int
    kind: str
    payload: dict

    def encode(self) -> str:
        return json.dumps(
            {"seq": self.seq, "time": self.time, "kind": self.kind, "payload": self.payload},
            sort_keys=True, separators=(",", ":"))

    @staticmethod
    def decode(line: str) -> "Event":
        try:
            raw = json.loads(line)
            return Event(seq=int(raw["seq"]), time=int(raw["time"]),
                         kind=str(raw["kind"]), payload=dict(raw["payload"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise CorruptLog(f"undecodable event record: {e}") from None


@dataclass(frozen=True)
class Tx:
    at: int
    sender: str
    action: str
    params: dict = field(default_factory=dict)


Applier = Callable[["Engine", Event], None]
Handler = Callable[["Engine", str, int, dict], list[Event]]

_APPLIERS: dict[str, Applier] = {
    "Manifested": registry.apply_manifested,
    "EvidenceAdded": registry.apply_evidence_added,
    "SocialEvidenceVerified": registry.apply_social_evidence_verified,
    "Staked": tokenomics.apply_staked,
    "Unstaked": tokenomics.apply_unstaked,
    "ComplaintOpened": tokenomics.apply_complaint_opened,
    "ComplaintResolved": tokenomics.apply_complaint_resolved,
    "AppealFiled": tokenomics.apply_appeal_filed,
    "ArbitrationRuled": tokenomics.apply_arbitration_ruled,
    "NftMinted": licensing.apply_nft_minted,
    "NftTransferred": licensing.apply_nft_transferred,
}

EVENT_KINDS = tuple(_APPLIERS)

# action -> (handler, required params, optional params)
_HANDLERS: dict[str, tuple[Handler, tuple[str, ...], tuple[str, ...]]] = {
    "noop": (lambda eng, sender, at, params: [], (), ()),
    "manifest": (registry.handle_manifest, ("content", "title"), ()),
    "evidence.add": (registry.handle_evidence_add, ("manifestation", "evidence"), ()),
    "evidence.social": (registry.handle_evidence_social,
                        ("manifestation", "platform", "asset"), ()),
    "stake": (tokenomics.handle_stake, ("target", "eth"), ()),
    "unstake": (tokenomics.handle_unstake, ("target", "cly"), ()),
    "complain": (tokenomics.handle_complain, ("manifestation", "evidence", "eth"), ()),
    "resolve": (tokenomics.handle_resolve, ("complaint",), ()),
    "appeal": (tokenomics.handle_appeal, ("complaint",), ()),
    "arbitrate": (tokenomics.handle_arbitrate, ("complaint", "ruling"), ()),
    "nft.mint": (licensing.handle_nft_mint, ("manifestation", "terms"), ()),
    "nft.transfer": (licensing.handle_nft_transfer, ("token", "to"), ()),
}

ACTIONS = tuple(_HANDLERS)

_MUTABLE_STATE = (
    "clock", "accounts", "curve", "manifestations", "evidence", "stakes",
    "first_stake_seq", "complaints", "next_complaint_id", "nfts",
    "next_token_id", "events", "next_seq",
)


class Engine:
    """Single-writer engine; apply transactions strictly sequentially.

    Read-only views (digest, status queries, the rights reasoner) may be
    taken between transactions.
    """

    def __init__(self, config: EngineConfig | None = None,
                 store: ContentStore | None = None,
                 fetcher: registry.SocialAssetFetcher | None = None):
        self.config = config or EngineConfig()
        self.store = store if store is not None else ContentStore()
        self.fetcher = fetcher
        self.clock: int = 0
        # Genesis: the test faucet is the only ether source in the system.
        self.accounts: dict[str, int] = dict(self.config.faucet)
        self.curve = tokenomics.BondingCurveState()
        self.manifestations: dict[str, registry.Manifestation] = {}
        self.evidence: dict[str, list[registry.Evidence]] = {}
        self.stakes: dict[tuple[str, tokenomics.StakeTarget], int] = {}
        self.first_stake_seq: dict[tuple[str, tokenomics.StakeTarget], int] = {}
        self.complaints: dict[int, tokenomics.Complaint] = {}
        self.next_complaint_id = 1
        self.nfts: dict[int, licensing.LicenseNft] = {}
        self.next_token_id = 1
        self.events: list[Event] = []
        self.next_seq = 1

    # -- transaction application ------------------------------------------------

    def apply(self, tx: Tx) -> list[Event]:
        """Apply one transaction atomically; returns the events it appended."""
        entry = _HANDLERS.get(tx.action)
        if entry is None:
            raise InvalidParams(f"unknown action {tx.action!r}")
        handler, required, optional = entry
        missing = [k for k in required if k not in tx.params]
        if missing:
            raise InvalidParams(f"{tx.action}: missing parameters {missing}")
        unknown = set(tx.params) - set(required) - set(optional)
        if unknown:
            raise InvalidParams(f"{tx.action}: unknown parameters {sorted(unknown)}")
        if tx.at < self.clock:
            raise ClockRegression(f"t={tx.at} precedes engine clock {self.clock}")
        snapshot = self._snapshot()
        self.clock = tx.at
        try:
            return handler(self, tx.sender, tx.at, tx.params)
        except Exception:
            # Domain rejections and unexpected failures alike must leave no
            # trace, even if the handler already emitted some events.
            self._restore(snapshot)
            raise

    def emit(self, kind: str, payload: dict) -> Event:
        """Append an event and run its applier; only call from handlers."""
        event = Event(self.next_seq, self.clock, kind, dict(payload))
        _APPLIERS[kind](self, event)
        self.events.append(event)
        self.next_seq += 1
        return event

    def _snapshot(self) -> dict:
        snap = {name: copy.deepcopy(getattr(self, name)) for name in _MUTABLE_STATE
                if name != "events"}
        snap["events"] = list(self.events)
        return snap

    def _restore(self, snapshot: dict) -> None:
        for name, value in snapshot.items():
            setattr(self, name, value)

    # -- balances ------------------------------------------------------------------

    def balance(self, address: str) -> int:
        return self.accounts.get(address, 0)

    def credit(self, address: str, amount: int) -> int:
        if amount < 0:
            raise InvalidParams("credit amount must be non-negative")
        self.accounts[address] = self.accounts.get(address, 0) + amount
        return self.accounts[address]

    def debit(self, address: str, amount: int) -> int:
        if amount < 0:
            raise InvalidParams("debit amount must be non-negative")
        held = self.accounts.get(address, 0)
        if held < amount:
            raise InsufficientFunds(f"{address} holds {held}, needs {amount}")
        self.accounts[address] = held - amount
        return self.accounts[address]

    def total_ether(self) -> int:
        """Accounts plus curve reserve; constant outside the genesis faucet."""
        return sum(self.accounts.values()) + self.curve.reserve

    # -- canonical state ---------------------------------------------------------------

    def state_dict(self) -> dict:
        def target_str(key: tuple[str, tokenomics.StakeTarget]) -> tuple[str, str]:
            staker, target = key
            return staker, target.encode()

        return {
            "accounts": {a: b for a, b in sorted(self.accounts.items())},
            "curve": {"supply": self.curve.supply, "reserve": self.curve.reserve},
            "manifestations": {
                cid: {
                    "title": m.title,
                    "claimant": m.claimant,
                    "claimed_at": m.claimed_at,
                    "defeated": m.defeated,
                    "vindicated": m.vindicated,
                } for cid, m in sorted(self.manifestations.items())
            },
            "evidence": {
                cid: [{
                    "kind": ev.kind,
                    "by": ev.registered_by,
                    "at": ev.at,
                    "evidence_cid": ev.evidence_cid,
                    "platform": ev.platform,
                    "asset_id": ev.asset_id,
                } for ev in entries] for cid, entries in sorted(self.evidence.items())
            },
            "stakes": sorted([*target_str(k), v] for k, v in self.stakes.items()),
            "first_stake": sorted([*target_str(k), v] for k, v in self.first_stake_seq.items()),
            "complaints": {
                str(cid): {
                    "manifestation": c.manifestation,
                    "complainant": c.complainant,
                    "evidence_cid": c.evidence_cid,
                    "opened_at": c.opened_at,
                    "deadline": c.deadline,
                    "status": c.status,
                } for cid, c in sorted(self.complaints.items())
            },
            "nfts": {
                str(tid): {
                    "owner": n.owner,
                    "manifestation": n.manifestation,
                    "token_uri": n.token_uri,
                    "minted_at": n.minted_at,
                    "nft_did": n.nft_did,
                } for tid, n in sorted(self.nfts.items())
            },
            "next_complaint": self.next_complaint_id,
            "next_token": self.next_token_id,
            "next_seq": self.next_seq,
        }

    def digest(self) -> str:
        canonical = json.dumps(self.state_dict(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -- replay ------------------------------------------------------------------------------


def replay(events: Iterable[Event], config: EngineConfig | None = None,
           store: ContentStore | None = None,
           fetcher: registry.SocialAssetFetcher | None = None) -> Engine:
    """Rebuild an engine from an event log produced under the same config."""
    eng = Engine(config, store, fetcher)
    for event in events:
        if event.seq != eng.next_seq:
            raise CorruptLog(f"sequence gap: expected {eng.next_seq}, got {event.seq}")
        if event.time < eng.clock:
            raise CorruptLog(f"event {event.seq} goes back in time")
        applier = _APPLIERS.get(event.kind)
        if applier is None:
            raise CorruptLog(f"unknown event kind {event.kind!r}")
        try:
            applier(eng, event)
        except (KeyError, TypeError, ValueError, AttributeError, DomainError) as e:
            raise CorruptLog(f"event {event.seq} has an undecodable payload: {e}") from None
        eng.events.append(event)
        eng.next_seq += 1
        eng.clock = event.time
    return eng


def read_log(path: str | Path) -> list[Event]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(Event.decode(line))
    return events


def append_log(path: str | Path, events: Iterable[Event]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for event in events:
            fh.write(event.encode() + "\n")

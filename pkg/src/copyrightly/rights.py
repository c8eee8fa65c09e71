"""Reuse-authorization reasoning over licensed terms and a territory map.

Minting and ownership events are folded into a flat fact set of
(subject, predicate, object) triples mirroring the license metadata, with
ownership facts replaced (not accumulated) on transfer. A world model maps
planar parcels to polygons and arranges parcels and territories in an
acyclic containment graph.

An authorization request names who wants to reuse what, when, where and
with which instrument; it is granted when at least one license token
satisfies all of, in order:

1. the agreement predates the request,
2. the requester owns the token,
3. the licensed action and content match the request,
4. the request falls inside the licensed time window,
5. the request coordinates land on a licensed parcel or one transitively
   contained in a licensed territory,
6. the instruments are compatible (checked only when both sides name one).

Geometry is exact rational arithmetic: a point on a parcel boundary counts
as inside, and overlapping parcels resolve to the lowest parcel id.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable

from . import licensing
from .content_store import ContentId, ContentStore
from .errors import (
    CyclicContainment,
    MalformedGeometry,
    MalformedMetadata,
    NotFound,
    ParseError,
    UnknownParcel,
    WorldNotLoaded,
)

if TYPE_CHECKING:
    from .ledger import Event

Point = tuple[Fraction, Fraction]

TYPE = "a"
WHEN = "cro:when"
WHO = "cro:who"
WHAT = "cro:what"
WITH = "cro:with"
WHERE = "cro:where"
START = "schema:startTime"
END = "schema:endTime"
OWNS = "schema:owns"
AGREE = "cro:Agree"

CONDITIONS = (
    "agreement-active",
    "owned-by-reuser",
    "action-and-content-match",
    "within-license-window",
    "location-licensed",
    "instrument-compatible",
)

TERRITORY_KINDS = ("neighborhood", "island")


@dataclass(frozen=True)
class Fact:
    subject: str
    predicate: str
    object: str


@dataclass(frozen=True)
class Parcel:
    id: str
    name: str
    polygon: tuple[Point, ...]


@dataclass(frozen=True)
class Territory:
    id: str
    kind: str


@dataclass
class WorldModel:
    parcels: dict[str, Parcel]
    territories: dict[str, Territory]
    parents: dict[str, tuple[str, ...]]

    def knows(self, node_id: str) -> bool:
        return node_id in self.parcels or node_id in self.territories


@dataclass(frozen=True)
class ReuseRequest:
    reuser_did: str
    content: ContentId
    action: str
    at: int
    coords: Point
    instrument: str | None = None


@dataclass
class Decision:
    is_authorized: bool
    why: list[str]
    trace: list[tuple[str, bool]]

    def as_dict(self) -> dict:
        return {
            "isAuthorized": self.is_authorized,
            "why": list(self.why),
            "trace": [{"condition": c, "satisfied": ok} for c, ok in self.trace],
        }


# -- exact planar geometry --------------------------------------------------------


def _orient(a: Point, b: Point, c: Point) -> int:
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (cross > 0) - (cross < 0)


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    if _orient(a, b, p) != 0:
        return False
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def _segments_touch(p: Point, q: Point, a: Point, b: Point) -> bool:
    """Closed segments share at least one point."""
    d1, d2 = _orient(p, q, a), _orient(p, q, b)
    d3, d4 = _orient(a, b, p), _orient(a, b, q)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return (_on_segment(p, q, a) or _on_segment(p, q, b)
            or _on_segment(a, b, p) or _on_segment(a, b, q))


def _edges(polygon: tuple[Point, ...]) -> list[tuple[Point, Point]]:
    return [(polygon[i], polygon[(i + 1) % len(polygon)]) for i in range(len(polygon))]


def _check_simple(polygon: tuple[Point, ...], parcel_id: str) -> None:
    n = len(polygon)
    if n < 3:
        raise MalformedGeometry(f"parcel {parcel_id}: needs at least 3 vertices")
    if len(set(polygon)) != n:
        raise MalformedGeometry(f"parcel {parcel_id}: repeated vertex")
    edges = _edges(polygon)
    for i in range(n):
        for j in range(i + 1, n):
            p, q = edges[i]
            a, b = edges[j]
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                # Adjacent edges may only meet at their shared vertex.
                others = [v for v in (p, q) if v not in (a, b)]
                shared_ok = all(not _on_segment(a, b, v) for v in others)
                others = [v for v in (a, b) if v not in (p, q)]
                shared_ok = shared_ok and all(not _on_segment(p, q, v) for v in others)
                if not shared_ok:
                    raise MalformedGeometry(f"parcel {parcel_id}: collinear edge overlap")
            elif _segments_touch(p, q, a, b):
                raise MalformedGeometry(f"parcel {parcel_id}: self-intersecting outline")


def point_in_parcel(parcel: Parcel, point: Point) -> bool:
    """Even-odd containment with boundary points counting as inside."""
    for a, b in _edges(parcel.polygon):
        if _on_segment(a, b, point):
            return True
    x, y = point
    inside = False
    for (x1, y1), (x2, y2) in _edges(parcel.polygon):
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > x:
                inside = not inside
    return inside


def parcel_at(world: WorldModel, point: Point) -> str | None:
    """Id of the parcel containing the point; lowest id wins on overlap."""
    containing = [p.id for p in world.parcels.values() if point_in_parcel(p, point)]
    return min(containing) if containing else None


def contained_in_plus(world: WorldModel, node_id: str) -> set[str]:
    """Everything reachable through one or more containment edges."""
    if not world.knows(node_id):
        raise UnknownParcel(f"unknown world node {node_id!r}")
    reachable: set[str] = set()
    frontier = list(world.parents.get(node_id, ()))
    while frontier:
        node = frontier.pop()
        if node in reachable:
            continue
        reachable.add(node)
        frontier.extend(world.parents.get(node, ()))
    return reachable


# -- world document ------------------------------------------------------------------


def load_world(document: str) -> WorldModel:
    """Parse a world file: territory/parcel/contained records, one per line."""
    parcels: dict[str, Parcel] = {}
    territories: dict[str, Territory] = {}
    edges: list[tuple[str, str, int]] = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as e:
            raise ParseError(str(e), lineno) from None
        if not tokens:
            continue
        keyword, args = tokens[0], tokens[1:]
        if keyword == "territory":
            if len(args) != 2:
                raise ParseError("territory takes <id> <kind>", lineno)
            node_id, kind = args
            if kind not in TERRITORY_KINDS:
                raise ParseError(f"territory kind must be one of {TERRITORY_KINDS}", lineno)
            if node_id in territories or node_id in parcels:
                raise ParseError(f"duplicate world node {node_id!r}", lineno)
            territories[node_id] = Territory(node_id, kind)
        elif keyword == "parcel":
            if len(args) < 3:
                raise ParseError("parcel takes <id> <name> <vertex>...", lineno)
            node_id, name = args[0], args[1]
            if node_id in territories or node_id in parcels:
                raise ParseError(f"duplicate world node {node_id!r}", lineno)
            polygon = tuple(_parse_vertex(tok, lineno) for tok in args[2:])
            _check_simple(polygon, node_id)
            parcels[node_id] = Parcel(node_id, name, polygon)
        elif keyword == "contained":
            if len(args) != 2:
                raise ParseError("contained takes <child> <parent>", lineno)
            edges.append((args[0], args[1], lineno))
        else:
            raise ParseError(f"unknown world record {keyword!r}", lineno)

    parents: dict[str, list[str]] = {}
    for child, parent, lineno in edges:
        for node in (child, parent):
            if node not in parcels and node not in territories:
                raise ParseError(f"containment names unknown node {node!r}", lineno)
        if parent not in parents.setdefault(child, []):
            parents[child].append(parent)
    world = WorldModel(parcels, territories, {c: tuple(ps) for c, ps in parents.items()})
    _check_acyclic(world)
    return world


def _parse_vertex(token: str, lineno: int) -> Point:
    if not (token.startswith("(") and token.endswith(")")):
        raise ParseError(f"vertex must look like (x,y), got {token!r}", lineno)
    parts = token[1:-1].split(",")
    if len(parts) != 2:
        raise ParseError(f"vertex must have two coordinates, got {token!r}", lineno)
    try:
        return Fraction(parts[0]), Fraction(parts[1])
    except (ValueError, ZeroDivisionError) as e:
        raise ParseError(f"bad coordinate in {token!r}: {e}", lineno) from None


def _check_acyclic(world: WorldModel) -> None:
    DONE, ACTIVE = 2, 1
    state: dict[str, int] = {}

    def visit(node: str, path: list[str]) -> None:
        state[node] = ACTIVE
        path.append(node)
        for parent in world.parents.get(node, ()):
            if state.get(parent) == ACTIVE:
                cycle = " -> ".join(path + [parent])
                raise CyclicContainment(f"containment cycle: {cycle}")
            if state.get(parent) != DONE:
                visit(parent, path)
        path.pop()
        state[node] = DONE

    for node in list(world.parents):
        if state.get(node) != DONE:
            visit(node, [])


# -- fact store and reasoner ------------------------------------------------------------


class RightsStore:
    """One-writer fact store fed from the event log, plus the reasoner."""

    def __init__(self, chain_id: int = 4):
        self.chain_id = chain_id
        self.facts: set[Fact] = set()
        self.world: WorldModel | None = None
        self.ingest_errors: list[tuple[int, str]] = []
        self._token_dids: dict[int, str] = {}

    def load_world(self, document: str) -> WorldModel:
        self.world = load_world(document)
        return self.world

    def ingest(self, events: Iterable["Event"], store: ContentStore) -> int:
        """Fold mint/transfer events into the fact set; returns facts changed.

        A token whose metadata cannot be fetched or parsed is skipped
        whole: the failure lands in ``ingest_errors`` and no partial facts
        appear.
        """
        changed = 0
        for event in events:
            if event.kind == "NftMinted":
                changed += self._ingest_mint(event, store)
            elif event.kind == "NftTransferred":
                changed += self._ingest_transfer(event)
        return changed

    def _ingest_mint(self, event: "Event", store: ContentStore) -> int:
        payload = event.payload
        try:
            blob = store.get(ContentId(payload["token_uri"]))
            token_did, terms = licensing.parse_terms(blob.data)
        except (MalformedMetadata, NotFound, ValueError) as e:
            self.ingest_errors.append((event.seq, str(e)))
            return 0
        term_id = token_did + "#term"
        fresh = [
            Fact(token_did, TYPE, AGREE),
            Fact(token_did, WHEN, terms.agree_time.isoformat()),
            Fact(token_did, WHO, terms.licensor_did),
            Fact(token_did, WHAT, term_id),
            Fact(term_id, TYPE, f"cro:{terms.action}"),
            Fact(term_id, START, terms.start_time.isoformat()),
            Fact(term_id, WHAT, terms.content_ref),
        ]
        if terms.end_time is not None:
            fresh.append(Fact(term_id, END, terms.end_time.isoformat()))
        if terms.instrument is not None:
            fresh.append(Fact(term_id, WITH, terms.instrument))
        fresh.extend(Fact(term_id, WHERE, t) for t in terms.territories)
        owner_did = licensing.account_did(self.chain_id, payload["owner"])
        self._token_dids[payload["token_id"]] = token_did
        changed = self._set_owner(token_did, owner_did)
        for fact in fresh:
            if fact not in self.facts:
                self.facts.add(fact)
                changed += 1
        return changed

    def _ingest_transfer(self, event: "Event") -> int:
        token_did = self._token_dids.get(event.payload["token_id"])
        if token_did is None:
            self.ingest_errors.append(
                (event.seq, f"transfer of unknown token #{event.payload['token_id']}"))
            return 0
        new_owner = licensing.account_did(self.chain_id, event.payload["to"])
        return self._set_owner(token_did, new_owner)

    def _set_owner(self, token_did: str, owner_did: str) -> int:
        changed = 0
        stale = [f for f in self.facts if f.predicate == OWNS and f.object == token_did]
        for fact in stale:
            if fact.subject != owner_did:
                self.facts.discard(fact)
                changed += 1
        fact = Fact(owner_did, OWNS, token_did)
        if fact not in self.facts:
            self.facts.add(fact)
            changed += 1
        return changed

    # -- queries --------------------------------------------------------------------

    def _objects(self, subject: str, predicate: str) -> list[str]:
        return [f.object for f in self.facts if f.subject == subject and f.predicate == predicate]

    def _object(self, subject: str, predicate: str) -> str | None:
        objs = self._objects(subject, predicate)
        return objs[0] if objs else None

    def authorize_reuse(self, request: ReuseRequest) -> Decision:
        """Evaluate the six license conditions against every known agreement.

        ``why`` lists every token granting the reuse; the trace shows each
        condition's outcome for the winning token, or for the nearest miss
        when nothing grants it.
        """
        if self.world is None:
            raise WorldNotLoaded("load a world model before authorizing reuses")
        agreements = sorted(f.subject for f in self.facts
                            if f.predicate == TYPE and f.object == AGREE)
        outcomes = {nft: self._conditions(nft, request) for nft in agreements}
        granting = [nft for nft in agreements if all(ok for _, ok in outcomes[nft])]
        if granting:
            return Decision(True, granting, outcomes[granting[0]])
        if not agreements:
            return Decision(False, [], [(c, False) for c in CONDITIONS])

        def prefix_len(nft: str) -> int:
            n = 0
            for _, ok in outcomes[nft]:
                if not ok:
                    break
                n += 1
            return n

        best = min(agreements, key=lambda nft: (
            -prefix_len(nft), -sum(ok for _, ok in outcomes[nft]), nft))
        return Decision(False, [], outcomes[best])

    def _conditions(self, nft: str, request: ReuseRequest) -> list[tuple[str, bool]]:
        now_ms = request.at * 1000

        agree_when = self._parse_time(self._object(nft, WHEN))
        c1 = agree_when is not None and agree_when.total_millis() <= now_ms

        c2 = Fact(request.reuser_did, OWNS, nft) in self.facts

        term = self._object(nft, WHAT)
        term_type = self._object(term, TYPE) if term else None
        licensed_ref = self._object(term, WHAT) if term else None
        c3 = (term_type == f"cro:{request.action}"
              and licensed_ref is not None
              and licensing.content_key(licensed_ref) == request.content.value)

        start = self._parse_time(self._object(term, START)) if term else None
        end = self._parse_time(self._object(term, END)) if term else None
        c4 = (start is not None and start.total_millis() <= now_ms
              and (end is None or now_ms <= end.total_millis()))

        where = set(self._objects(term, WHERE)) if term else set()
        parcel = parcel_at(self.world, request.coords)
        c5 = parcel is not None and bool(where) and (
            parcel in where or contained_in_plus(self.world, parcel) & where)

        licensed_with = self._object(term, WITH) if term else None
        c6 = (licensed_with is None or request.instrument is None
              or licensed_with == request.instrument)

        return list(zip(CONDITIONS, (c1, c2, c3, bool(c4), bool(c5), c6)))

    @staticmethod
    def _parse_time(text: str | None) -> licensing.TimestampMs | None:
        if text is None:
            return None
        try:
            return licensing.TimestampMs.parse(text)
        except ValueError:
            return None

"""Curation token: bonding-curve mint/burn, staking, complaints, resolution.

The curation token exists only inside stake positions; the sum of all
positions equals the supply at every step. Minting pays ether into a
reserve and prices tokens along a linear curve ``price(s) = k*s`` with a
rational slope ``k``, so the cost of moving supply from ``a`` to ``b`` is
``k*(b^2 - a^2)/2``.

All amounts are integers in 1e-18 base units and every rounding is chosen
so the reserve can never fall below the burn obligation of the current
supply:

* a purchase mints the largest ``d`` whose exact cost fits the offered
  ether, charges ``ceil(cost(d))`` and leaves the remainder with the buyer,
  so a buy-then-burn round trip loses at most one base unit;
* a burn returns ``floor`` of the exact refund, with dust accruing to the
  reserve.

Complaints carry their own stake pool and block the challenged claim only
while they out-stake it. At the deadline the side with strictly more stake
takes the other side's pool, split pro rata (floored), with leftover units
going to winners in order of their first stake. Ties favour the claim
side. An appeal freezes resolution until an external arbitration ruling is
injected, which forces the winner regardless of stake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .content_store import ContentId
from .errors import (
    AfterDeadline,
    AlreadyAppealed,
    AlreadyDefeated,
    AlreadyResolved,
    BeforeDeadline,
    ConflictPending,
    InsufficientFunds,
    InsufficientStake,
    InvalidParams,
    NotAParty,
    NotAppealed,
    PendingAppeal,
    TargetResolved,
    UnknownComplaint,
    UnknownContent,
    UnknownManifestation,
    UnknownTarget,
    ZeroAmount,
)

if TYPE_CHECKING:
    from .ledger import Engine, Event

OPEN = "Open"
APPEALED = "Appealed"
RESOLVED_FOR_CLAIM = "ResolvedForClaim"
RESOLVED_FOR_COMPLAINT = "ResolvedForComplaint"
UNRESOLVED = (OPEN, APPEALED)

CLAIM_SIDE = "claim"
COMPLAINT_SIDE = "complaint"

FOR_CLAIM = "ForClaim"
FOR_COMPLAINT = "ForComplaint"


@dataclass(frozen=True)
class StakeTarget:
    """What a position backs: a claim (keyed by content id) or a complaint."""

    kind: str
    key: str | int

    def encode(self) -> str:
        return f"{self.kind}:{self.key}"

    @staticmethod
    def decode(text: str) -> "StakeTarget":
        kind, _, rest = text.partition(":")
        if kind == CLAIM_SIDE and rest:
            return StakeTarget(CLAIM_SIDE, rest)
        if kind == COMPLAINT_SIDE and rest.isdigit():
            return StakeTarget(COMPLAINT_SIDE, int(rest))
        raise InvalidParams(f"not a stake target: {text!r}")

    @staticmethod
    def claim(mcid: ContentId | str) -> "StakeTarget":
        value = mcid.value if isinstance(mcid, ContentId) else mcid
        return StakeTarget(CLAIM_SIDE, value)

    @staticmethod
    def complaint(complaint_id: int) -> "StakeTarget":
        return StakeTarget(COMPLAINT_SIDE, complaint_id)


@dataclass
class BondingCurveState:
    supply: int = 0
    reserve: int = 0


@dataclass
class Complaint:
    id: int
    manifestation: str
    complainant: str
    evidence_cid: str
    opened_at: int
    deadline: int
    status: str = OPEN


# -- curve arithmetic (exact, integer in/out) -----------------------------------


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def mintable(num: int, den: int, supply: int, eth: int) -> int:
    """Largest whole amount whose exact cost at the current supply is <= eth."""
    return math.isqrt(supply * supply + (2 * eth * den) // num) - supply


def mint_charge(num: int, den: int, supply: int, minted: int) -> int:
    """Exact cost of minting, rounded up so the reserve is never short."""
    return _ceil_div(num * ((supply + minted) ** 2 - supply * supply), 2 * den)


def burn_return(num: int, den: int, supply: int, burned: int) -> int:
    """Exact refund of burning from the current supply, rounded down."""
    return num * (supply * supply - (supply - burned) ** 2) // (2 * den)


def reserve_obligation(num: int, den: int, supply: int) -> int:
    """Ether owed if the whole supply burned; reserve minus this is dust."""
    return num * supply * supply // (2 * den)


# -- stake table queries ----------------------------------------------------------


def stake_total(eng: "Engine", target: StakeTarget) -> int:
    return sum(amount for (_, t), amount in eng.stakes.items() if t == target)


def positions_on(eng: "Engine", target: StakeTarget) -> list[tuple[str, int]]:
    return [(staker, amount) for (staker, t), amount in eng.stakes.items() if t == target]


def is_blocking(eng: "Engine", complaint_id: int) -> bool:
    """Strictly more stake on the complaint than on the challenged claim."""
    c = _get_complaint(eng, complaint_id)
    complaint_stake = stake_total(eng, StakeTarget.complaint(c.id))
    claim_stake = stake_total(eng, StakeTarget.claim(c.manifestation))
    return complaint_stake > claim_stake


def _get_complaint(eng: "Engine", complaint_id: int) -> Complaint:
    c = eng.complaints.get(complaint_id)
    if c is None:
        raise UnknownComplaint(f"no complaint #{complaint_id}")
    return c


def _unresolved_complaints_on(eng: "Engine", mcid_value: str) -> list[Complaint]:
    return [c for c in eng.complaints.values()
            if c.manifestation == mcid_value and c.status in UNRESOLVED]


# -- operations ---------------------------------------------------------------------


def buy_and_stake(eng: "Engine", sender: str, eth_amount: int, target: StakeTarget,
                  at: int) -> list["Event"]:
    _check_target_open(eng, target)
    if eth_amount <= 0:
        raise ZeroAmount("purchase must offer a positive amount of ether")
    if eng.accounts.get(sender, 0) < eth_amount:
        raise InsufficientFunds(f"{sender} holds less than {eth_amount}")
    num, den = eng.config.curve_num, eng.config.curve_den
    minted = mintable(num, den, eng.curve.supply, eth_amount)
    if minted == 0:
        raise ZeroAmount("offer too small to mint a single base unit")
    charged = mint_charge(num, den, eng.curve.supply, minted)
    return [eng.emit("Staked", {
        "staker": sender,
        "target": target.encode(),
        "eth_charged": charged,
        "cly_minted": minted,
        "at": at,
    })]


def unstake_and_burn(eng: "Engine", sender: str, target: StakeTarget, cly_amount: int,
                     at: int) -> list["Event"]:
    if cly_amount <= 0:
        raise ZeroAmount("burn amount must be positive")
    _check_target_exists(eng, target)
    _check_target_unlocked(eng, target)
    held = eng.stakes.get((sender, target), 0)
    if held < cly_amount:
        raise InsufficientStake(f"{sender} has {held} staked on {target.encode()}")
    num, den = eng.config.curve_num, eng.config.curve_den
    returned = burn_return(num, den, eng.curve.supply, cly_amount)
    return [eng.emit("Unstaked", {
        "staker": sender,
        "target": target.encode(),
        "cly_burned": cly_amount,
        "eth_returned": returned,
        "at": at,
    })]


def open_complaint(eng: "Engine", sender: str, manifestation_cid: ContentId,
                   evidence_cid: ContentId, eth_stake: int, at: int) -> list["Event"]:
    m = eng.manifestations.get(manifestation_cid.value)
    if m is None:
        raise UnknownManifestation(f"no manifestation for {manifestation_cid}")
    if m.defeated:
        raise AlreadyDefeated(f"{manifestation_cid} already defeated")
    if not eng.store.has(evidence_cid):
        raise UnknownContent(f"{evidence_cid} has no stored blob")
    if eth_stake <= 0:
        raise ZeroAmount("complaint must stake a positive amount of ether")
    if eng.accounts.get(sender, 0) < eth_stake:
        raise InsufficientFunds(f"{sender} holds less than {eth_stake}")
    num, den = eng.config.curve_num, eng.config.curve_den
    minted = mintable(num, den, eng.curve.supply, eth_stake)
    if minted == 0:
        raise ZeroAmount("stake too small to mint a single base unit")
    charged = mint_charge(num, den, eng.curve.supply, minted)
    complaint_id = eng.next_complaint_id
    opened = eng.emit("ComplaintOpened", {
        "complaint": complaint_id,
        "manifestation": manifestation_cid.value,
        "complainant": sender,
        "evidence_cid": evidence_cid.value,
        "at": at,
        "deadline": at + eng.config.resolution_window,
    })
    staked = eng.emit("Staked", {
        "staker": sender,
        "target": StakeTarget.complaint(complaint_id).encode(),
        "eth_charged": charged,
        "cly_minted": minted,
        "at": at,
    })
    return [opened, staked]


def resolve_complaint(eng: "Engine", complaint_id: int, at: int) -> list["Event"]:
    """Settle a complaint at or after its deadline.

    The side with strictly more stake wins and absorbs the other side's
    pool; a tie keeps the claim standing. Stake moves between positions,
    nothing is burned.
    """
    c = _get_complaint(eng, complaint_id)
    if c.status == APPEALED:
        raise PendingAppeal(f"complaint #{complaint_id} awaits arbitration")
    if c.status != OPEN:
        raise AlreadyResolved(f"complaint #{complaint_id} is {c.status}")
    if at < c.deadline:
        raise BeforeDeadline(f"deadline for #{complaint_id} is {c.deadline}")
    complaint_stake = stake_total(eng, StakeTarget.complaint(c.id))
    claim_stake = stake_total(eng, StakeTarget.claim(c.manifestation))
    winner = COMPLAINT_SIDE if complaint_stake > claim_stake else CLAIM_SIDE
    gains, losers = _redistribution_plan(eng, c, winner)
    return [eng.emit("ComplaintResolved", {
        "complaint": c.id,
        "winner": winner,
        "gains": gains,
        "losers": losers,
        "at": at,
    })]


def appeal(eng: "Engine", sender: str, complaint_id: int, at: int) -> list["Event"]:
    c = _get_complaint(eng, complaint_id)
    if c.status == APPEALED:
        raise AlreadyAppealed(f"complaint #{complaint_id} already appealed")
    if c.status != OPEN:
        raise AlreadyResolved(f"complaint #{complaint_id} is {c.status}")
    if at >= c.deadline:
        raise AfterDeadline(f"appeals for #{complaint_id} closed at {c.deadline}")
    claim_t = StakeTarget.claim(c.manifestation)
    complaint_t = StakeTarget.complaint(c.id)
    if (sender, claim_t) not in eng.stakes and (sender, complaint_t) not in eng.stakes:
        raise NotAParty(f"{sender} holds no stake on either side of #{complaint_id}")
    return [eng.emit("AppealFiled", {"complaint": c.id, "by": sender, "at": at})]


def arbitration_rule(eng: "Engine", complaint_id: int, ruling: str, at: int) -> list["Event"]:
    """Inject an external arbitration outcome for an appealed complaint."""
    c = _get_complaint(eng, complaint_id)
    if c.status != APPEALED:
        raise NotAppealed(f"complaint #{complaint_id} is {c.status}")
    if ruling not in (FOR_CLAIM, FOR_COMPLAINT):
        raise InvalidParams(f"ruling must be {FOR_CLAIM} or {FOR_COMPLAINT}")
    winner = CLAIM_SIDE if ruling == FOR_CLAIM else COMPLAINT_SIDE
    gains, losers = _redistribution_plan(eng, c, winner)
    return [eng.emit("ArbitrationRuled", {
        "complaint": c.id,
        "ruling": ruling,
        "winner": winner,
        "gains": gains,
        "losers": losers,
        "at": at,
    })]


def _redistribution_plan(eng: "Engine", c: Complaint, winner: str,
                         ) -> tuple[list[list], list[list]]:
    """Pro-rata split of the losing pool, floored, leftovers by first stake.

    Returns (gains, losers) as [staker, amount] pairs. When the forced
    winner side holds no stake there is nobody to pay, so the losing
    positions stay in place and both lists come back empty.
    """
    claim_t = StakeTarget.claim(c.manifestation)
    complaint_t = StakeTarget.complaint(c.id)
    win_t, lose_t = (claim_t, complaint_t) if winner == CLAIM_SIDE else (complaint_t, claim_t)
    winners = positions_on(eng, win_t)
    losers = positions_on(eng, lose_t)
    loser_total = sum(amount for _, amount in losers)
    winner_total = sum(amount for _, amount in winners)
    if winner_total == 0:
        return [], []
    gains = [[staker, loser_total * amount // winner_total] for staker, amount in winners]
    leftover = loser_total - sum(g for _, g in gains)
    by_first_stake = sorted(range(len(winners)),
                            key=lambda i: eng.first_stake_seq[(winners[i][0], win_t)])
    for i in by_first_stake[:leftover]:
        gains[i][1] += 1
    return gains, [[staker, amount] for staker, amount in losers]


# -- target checks ---------------------------------------------------------------------


def _check_target_exists(eng: "Engine", target: StakeTarget) -> None:
    if target.kind == CLAIM_SIDE:
        if target.key not in eng.manifestations:
            raise UnknownTarget(f"no manifestation for {target.key}")
    elif target.kind == COMPLAINT_SIDE:
        if target.key not in eng.complaints:
            raise UnknownTarget(f"no complaint #{target.key}")
    else:
        raise UnknownTarget(f"unknown target kind {target.kind!r}")


def _check_target_open(eng: "Engine", target: StakeTarget) -> None:
    _check_target_exists(eng, target)
    if target.kind == CLAIM_SIDE:
        if eng.manifestations[target.key].defeated:
            raise TargetResolved(f"{target.key} was defeated")
    else:
        status = eng.complaints[target.key].status
        if status not in UNRESOLVED:
            raise TargetResolved(f"complaint #{target.key} is {status}")


def _check_target_unlocked(eng: "Engine", target: StakeTarget) -> None:
    if target.kind == CLAIM_SIDE:
        pending = _unresolved_complaints_on(eng, str(target.key))
        if pending:
            ids = ", ".join(f"#{c.id}" for c in pending)
            raise ConflictPending(f"claim stakes locked by open complaint {ids}")
    else:
        if eng.complaints[target.key].status in UNRESOLVED:
            raise ConflictPending(f"complaint #{target.key} stakes locked until solved")


# -- event appliers ----------------------------------------------------------------------


def apply_staked(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    target = StakeTarget.decode(payload["target"])
    key = (payload["staker"], target)
    eng.debit(payload["staker"], payload["eth_charged"])
    eng.curve.reserve += payload["eth_charged"]
    eng.curve.supply += payload["cly_minted"]
    eng.stakes[key] = eng.stakes.get(key, 0) + payload["cly_minted"]
    eng.first_stake_seq.setdefault(key, event.seq)


def apply_unstaked(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    target = StakeTarget.decode(payload["target"])
    key = (payload["staker"], target)
    eng.stakes[key] -= payload["cly_burned"]
    if eng.stakes[key] == 0:
        del eng.stakes[key]
        del eng.first_stake_seq[key]
    eng.curve.supply -= payload["cly_burned"]
    eng.curve.reserve -= payload["eth_returned"]
    eng.credit(payload["staker"], payload["eth_returned"])


def apply_complaint_opened(eng: "Engine", event: "Event") -> None:
    payload = event.payload
    c = Complaint(
        id=payload["complaint"],
        manifestation=payload["manifestation"],
        complainant=payload["complainant"],
        evidence_cid=payload["evidence_cid"],
        opened_at=payload["at"],
        deadline=payload["deadline"],
    )
    eng.complaints[c.id] = c
    eng.next_complaint_id = max(eng.next_complaint_id, c.id + 1)


def _apply_settlement(eng: "Engine", payload: dict, status: str) -> None:
    c = eng.complaints[payload["complaint"]]
    winner = payload["winner"]
    claim_t = StakeTarget.claim(c.manifestation)
    complaint_t = StakeTarget.complaint(c.id)
    win_t, lose_t = (claim_t, complaint_t) if winner == CLAIM_SIDE else (complaint_t, claim_t)
    for staker, _ in payload["losers"]:
        key = (staker, lose_t)
        del eng.stakes[key]
        del eng.first_stake_seq[key]
    for staker, gain in payload["gains"]:
        eng.stakes[(staker, win_t)] += gain
    c.status = status
    m = eng.manifestations[c.manifestation]
    if winner == CLAIM_SIDE:
        m.vindicated = True
    else:
        m.defeated = True


def apply_complaint_resolved(eng: "Engine", event: "Event") -> None:
    winner = event.payload["winner"]
    status = RESOLVED_FOR_CLAIM if winner == CLAIM_SIDE else RESOLVED_FOR_COMPLAINT
    _apply_settlement(eng, event.payload, status)


def apply_appeal_filed(eng: "Engine", event: "Event") -> None:
    eng.complaints[event.payload["complaint"]].status = APPEALED


def apply_arbitration_ruled(eng: "Engine", event: "Event") -> None:
    apply_complaint_resolved(eng, event)


# -- transaction handlers ---------------------------------------------------------------


def handle_stake(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return buy_and_stake(eng, sender, params["eth"], params["target"], at)


def handle_unstake(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return unstake_and_burn(eng, sender, params["target"], params["cly"], at)


def handle_complain(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return open_complaint(
        eng, sender, params["manifestation"], params["evidence"], params["eth"], at)


def handle_resolve(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return resolve_complaint(eng, params["complaint"], at)


def handle_appeal(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return appeal(eng, sender, params["complaint"], at)


def handle_arbitrate(eng: "Engine", sender: str, at: int, params: dict) -> list["Event"]:
    return arbitration_rule(eng, params["complaint"], params["ruling"], at)

import math
import random

import pytest

from copyrightly import tokenomics
from copyrightly.config import EngineConfig
from copyrightly.content_store import ContentId
from copyrightly.errors import (
    AfterDeadline, AlreadyAppealed, AlreadyDefeated, AlreadyResolved, BeforeDeadline,
    ConflictPending, InsufficientFunds, InsufficientStake, NotAParty, NotAppealed,
    PendingAppeal, TargetResolved, UnknownComplaint, UnknownContent,
    UnknownManifestation, UnknownTarget, ZeroAmount)
from copyrightly.ledger import Engine, Tx
from copyrightly.tokenomics import (
    StakeTarget, burn_return, is_blocking, mint_charge, mintable, reserve_obligation)

from conftest import UNIT_CONFIG, eth_for_exact, put_blob, stake_exact, tx
from oracles import first_stake_order, proportional_split

WEI_CONFIG = EngineConfig(faucet={"alice": 10**20, "bob": 10**20})


@pytest.fixture
def claimed(eng):
    cid = put_blob(eng, b"the work")
    tx(eng, 100, "alice", "manifest", content=cid, title="w")
    return cid


def claim_of(cid):
    return StakeTarget.claim(cid)


# -- curve basics -----------------------------------------------------------------


def test_half_ether_mints_one_token_at_genesis():
    # Price integral oracle: cost of the first whole token at unit whole-
    # token slope is the area under p(s)=s from 0 to 1, i.e. 0.5 ether.
    eng = Engine(WEI_CONFIG)
    cid = eng.store.put(b"w")
    eng.apply(Tx(0, "alice", "manifest", {"content": cid, "title": "w"}))
    events = eng.apply(Tx(1, "alice", "stake",
                          {"target": claim_of(cid), "eth": 5 * 10**17}))
    steps = 100_000
    integral = sum((s + 0.5) / steps for s in range(steps)) * (10**18 / steps)  # wei
    assert abs(integral - 5 * 10**17) / 5e17 < 1e-9
    assert events[0].payload["cly_minted"] == 10**18
    assert events[0].payload["eth_charged"] == 5 * 10**17


def test_equal_purchases_mint_strictly_less(eng, claimed):
    first = tx(eng, 150, "alice", "stake", target=claim_of(claimed), eth=5000)
    second = tx(eng, 160, "bob", "stake", target=claim_of(claimed), eth=5000)
    assert second[0].payload["cly_minted"] < first[0].payload["cly_minted"]


def test_zero_offer_rejected(eng, claimed):
    with pytest.raises(ZeroAmount):
        tx(eng, 150, "alice", "stake", target=claim_of(claimed), eth=0)


def test_dust_offer_rejected(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 1000)
    # Marginal price at supply 1000 is ~1000 wei per unit; 1 wei mints nothing.
    with pytest.raises(ZeroAmount):
        tx(eng, 160, "bob", "stake", target=claim_of(claimed), eth=1)


def test_unknown_and_resolved_targets(eng, claimed):
    with pytest.raises(UnknownTarget):
        tx(eng, 150, "alice", "stake", target=StakeTarget.complaint(9), eth=10)
    with pytest.raises(InsufficientFunds):
        tx(eng, 150, "alice", "stake", target=claim_of(claimed), eth=10**12)


def test_round_trip_loses_at_most_one_unit():
    rng = random.Random(21)
    for _ in range(1000):
        num = rng.choice([1, 1, 3, 7])
        den = rng.choice([1, 2, 10, 10**6, 10**18])
        config = EngineConfig(curve_num=num, curve_den=den,
                              faucet={"seed": 10**45, "alice": 10**45})
        eng = Engine(config)
        cid = eng.store.put(b"w")
        eng.apply(Tx(0, "seed", "manifest", {"content": cid, "title": "w"}))
        if rng.random() < 0.7:
            try:
                eng.apply(Tx(1, "seed", "stake", {"target": claim_of(cid),
                                                  "eth": rng.randrange(1, 10**22)}))
            except ZeroAmount:
                pass
        offer = rng.randrange(1, 10**20)
        before = eng.balance("alice")
        try:
            events = eng.apply(Tx(2, "alice", "stake",
                                  {"target": claim_of(cid), "eth": offer}))
        except ZeroAmount:
            continue
        minted = events[0].payload["cly_minted"]
        eng.apply(Tx(3, "alice", "unstake", {"target": claim_of(cid), "cly": minted}))
        loss = before - eng.balance("alice")
        assert 0 <= loss <= 1


def test_early_adopter_gain(eng, claimed):
    paid = eth_for_exact(eng, 100)
    tx(eng, 150, "alice", "stake", target=claim_of(claimed), eth=paid)
    stake_exact(eng, 160, "bob", claim_of(claimed), 100)
    events = tx(eng, 170, "alice", "unstake", target=claim_of(claimed), cly=100)
    assert events[0].payload["eth_returned"] > paid


def test_unstake_errors(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 100)
    with pytest.raises(ZeroAmount):
        tx(eng, 160, "alice", "unstake", target=claim_of(claimed), cly=0)
    with pytest.raises(InsufficientStake):
        tx(eng, 160, "alice", "unstake", target=claim_of(claimed), cly=101)
    with pytest.raises(InsufficientStake):
        tx(eng, 160, "bob", "unstake", target=claim_of(claimed), cly=1)


def test_curve_invariants_over_random_sequences():
    rng = random.Random(99)
    for _ in range(200):
        config = EngineConfig(
            curve_num=rng.choice([1, 2, 5]), curve_den=rng.choice([1, 3, 1000]),
            faucet={"a": 10**18, "b": 10**18})
        eng = Engine(config)
        cid = eng.store.put(b"w")
        eng.apply(Tx(0, "a", "manifest", {"content": cid, "title": "w"}))
        dust = eng.curve.reserve - reserve_obligation(
            config.curve_num, config.curve_den, eng.curve.supply)
        total = eng.total_ether()
        t = 1
        for _ in range(15):
            t += 1
            who = rng.choice(["a", "b"])
            try:
                if rng.random() < 0.6:
                    eng.apply(Tx(t, who, "stake", {"target": claim_of(cid),
                                                   "eth": rng.randrange(0, 10**9)}))
                else:
                    held = eng.stakes.get((who, claim_of(cid)), 0)
                    eng.apply(Tx(t, who, "unstake",
                                 {"target": claim_of(cid),
                                  "cly": rng.randrange(0, max(held, 1) + 1)}))
            except (ZeroAmount, InsufficientStake):
                pass
            new_dust = eng.curve.reserve - reserve_obligation(
                config.curve_num, config.curve_den, eng.curve.supply)
            assert new_dust >= dust >= 0
            dust = new_dust
            assert sum(eng.stakes.values()) == eng.curve.supply
            assert eng.total_ether() == total


# -- complaints ------------------------------------------------------------------------


def open_complaint(eng, claimed, at=200, sender="bob", amount=None):
    proof = put_blob(eng, b"counter-evidence")
    eth = eth_for_exact(eng, amount) if amount else 5000
    return tx(eng, at, sender, "complain",
              manifestation=claimed, evidence=proof, eth=eth)


def test_blocking_boundary(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 100)
    open_complaint(eng, claimed, amount=100)
    assert not is_blocking(eng, 1)  # equal stakes: strict inequality required
    stake_exact(eng, 210, "carol", StakeTarget.complaint(1), 1)
    assert is_blocking(eng, 1)
    stake_exact(eng, 220, "dave", claim_of(claimed), 50)
    assert not is_blocking(eng, 1)
    with pytest.raises(UnknownComplaint):
        is_blocking(eng, 42)


def test_blocking_matches_stake_table_oracle(eng, claimed):
    rng = random.Random(17)
    stake_exact(eng, 150, "alice", claim_of(claimed), rng.randrange(1, 200))
    open_complaint(eng, claimed, amount=rng.randrange(1, 200))
    t = 300
    for _ in range(40):
        t += 1
        side = rng.choice([claim_of(claimed), StakeTarget.complaint(1)])
        stake_exact(eng, t, rng.choice(["carol", "dave"]), side, rng.randrange(1, 50))
        table = {"claim": 0, "complaint": 0}
        for (_, target), amount in eng.stakes.items():
            table[target.kind] += amount
        assert is_blocking(eng, 1) == (table["complaint"] > table["claim"])


def test_complaint_validation(eng, claimed):
    proof = put_blob(eng, b"proof")
    with pytest.raises(ZeroAmount):
        tx(eng, 200, "bob", "complain", manifestation=claimed, evidence=proof, eth=0)
    with pytest.raises(UnknownManifestation):
        tx(eng, 200, "bob", "complain",
           manifestation=ContentId("cid:" + "9" * 64), evidence=proof, eth=100)
    with pytest.raises(UnknownContent):
        tx(eng, 200, "bob", "complain", manifestation=claimed,
           evidence=ContentId("cid:" + "8" * 64), eth=100)


def test_stake_lock_during_open_complaint(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 100)
    open_complaint(eng, claimed, amount=50)  # non-blocking, still locks
    with pytest.raises(ConflictPending):
        tx(eng, 300, "alice", "unstake", target=claim_of(claimed), cly=10)
    with pytest.raises(ConflictPending):
        tx(eng, 300, "bob", "unstake", target=StakeTarget.complaint(1), cly=10)


def test_resolution_example_split(eng, claimed):
    # Claim side 60+40 against complaint side 90+60: the complaint wins and
    # the 100-unit claim pool moves over pro rata (60 and 40 exactly).
    stake_exact(eng, 150, "alice", claim_of(claimed), 60)
    stake_exact(eng, 160, "dave", claim_of(claimed), 40)
    open_complaint(eng, claimed, at=200, amount=90)
    stake_exact(eng, 210, "carol", StakeTarget.complaint(1), 60)
    with pytest.raises(BeforeDeadline):
        tx(eng, 1199, "bob", "resolve", complaint=1)
    events = tx(eng, 1200, "bob", "resolve", complaint=1)
    payload = events[0].payload
    assert payload["winner"] == "complaint"
    assert dict((s, g) for s, g in payload["gains"]) == {"bob": 60, "carol": 40}
    assert eng.stakes[("bob", StakeTarget.complaint(1))] == 150
    assert eng.stakes[("carol", StakeTarget.complaint(1))] == 100
    assert ("alice", claim_of(claimed)) not in eng.stakes
    assert eng.manifestations[claimed.value].defeated
    assert sum(eng.stakes.values()) == eng.curve.supply
    with pytest.raises(AlreadyResolved):
        tx(eng, 1300, "bob", "resolve", complaint=1)


def test_tie_resolves_for_claim(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 100)
    open_complaint(eng, claimed, amount=100)
    events = tx(eng, 1200, "bob", "resolve", complaint=1)
    assert events[0].payload["winner"] == "claim"
    assert eng.stakes[("alice", claim_of(claimed))] == 200
    assert not eng.manifestations[claimed.value].defeated
    assert eng.manifestations[claimed.value].vindicated


def test_resolution_matches_rational_oracle():
    rng = random.Random(23)
    for _ in range(300):
        eng = Engine(UNIT_CONFIG)
        cid = eng.store.put(rng.randbytes(8))
        eng.apply(Tx(100, "alice", "manifest", {"content": cid, "title": "w"}))
        stakers = ["alice", "bob", "carol", "dave"]
        rng.shuffle(stakers)
        n_claim = rng.randrange(1, 4)
        t = 150
        for who in stakers[:n_claim]:
            t += 1
            stake_exact(eng, t, who, claim_of(cid), rng.randrange(1, 500))
        proof = eng.store.put(b"p")
        t += 1
        eng.apply(Tx(t, "eve", "complain", {
            "manifestation": cid, "evidence": proof,
            "eth": eth_for_exact(eng, rng.randrange(1, 500))}))
        for who in stakers[n_claim:]:
            t += 1
            if rng.random() < 0.7:
                stake_exact(eng, t, who, StakeTarget.complaint(1), rng.randrange(1, 500))

        claim_positions = [(s, a) for (s, tgt), a in eng.stakes.items()
                           if tgt == claim_of(cid)]
        complaint_positions = [(s, a) for (s, tgt), a in eng.stakes.items()
                               if tgt == StakeTarget.complaint(1)]
        claim_total = sum(a for _, a in claim_positions)
        complaint_total = sum(a for _, a in complaint_positions)
        supply_before = eng.curve.supply

        events = eng.apply(Tx(t + 10**6, "keeper", "resolve", {"complaint": 1}))
        payload = events[0].payload
        expected_winner = "complaint" if complaint_total > claim_total else "claim"
        assert payload["winner"] == expected_winner

        winners = complaint_positions if expected_winner == "complaint" else claim_positions
        losers = claim_positions if expected_winner == "complaint" else complaint_positions
        win_target = (StakeTarget.complaint(1) if expected_winner == "complaint"
                      else claim_of(cid))
        first = first_stake_order(eng.events[:-1], win_target.encode())
        expected = proportional_split(losers, winners, first)
        assert dict((s, g) for s, g in payload["gains"]) == expected
        assert sum(expected.values()) == sum(a for _, a in losers)
        assert eng.curve.supply == supply_before
        assert sum(eng.stakes.values()) == eng.curve.supply


def test_appeal_window_and_parties(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 100)
    open_complaint(eng, claimed, at=200, amount=150)  # deadline 1200
    with pytest.raises(NotAParty):
        tx(eng, 300, "mallory", "appeal", complaint=1)
    with pytest.raises(AfterDeadline):
        tx(eng, 1200, "alice", "appeal", complaint=1)
    tx(eng, 1199, "alice", "appeal", complaint=1)
    assert eng.complaints[1].status == tokenomics.APPEALED
    with pytest.raises(AlreadyAppealed):
        tx(eng, 1199, "bob", "appeal", complaint=1)
    with pytest.raises(PendingAppeal):
        tx(eng, 1300, "bob", "resolve", complaint=1)
    # Appealed complaints still block and still lock stakes.
    with pytest.raises(ConflictPending):
        tx(eng, 1300, "alice", "unstake", target=claim_of(claimed), cly=10)


def test_arbitration_overrides_stake_weight(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 100)
    open_complaint(eng, claimed, at=200, amount=150)
    with pytest.raises(NotAppealed):
        tx(eng, 300, "court", "arbitrate", complaint=1, ruling="ForClaim")
    tx(eng, 400, "bob", "appeal", complaint=1)
    events = tx(eng, 1300, "court", "arbitrate", complaint=1, ruling="ForClaim")
    assert events[0].payload["winner"] == "claim"
    assert eng.stakes[("alice", claim_of(claimed))] == 250
    assert eng.complaints[1].status == tokenomics.RESOLVED_FOR_CLAIM
    assert eng.manifestations[claimed.value].vindicated


def test_arbitration_for_complaint_defeats(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 200)
    open_complaint(eng, claimed, at=200, amount=50)
    tx(eng, 400, "alice", "appeal", complaint=1)
    tx(eng, 1300, "court", "arbitrate", complaint=1, ruling="ForComplaint")
    assert eng.manifestations[claimed.value].defeated
    assert eng.stakes[("bob", StakeTarget.complaint(1))] == 250


def test_complaint_on_defeated_claim(eng, claimed):
    stake_exact(eng, 150, "alice", claim_of(claimed), 10)
    open_complaint(eng, claimed, at=200, amount=50)
    tx(eng, 1200, "bob", "resolve", complaint=1)
    with pytest.raises(AlreadyDefeated):
        open_complaint(eng, claimed, at=1300)
    with pytest.raises(TargetResolved):
        tx(eng, 1300, "carol", "stake", target=claim_of(claimed), eth=100)
    with pytest.raises(TargetResolved):
        tx(eng, 1300, "carol", "stake", target=StakeTarget.complaint(1), eth=100)
    # The winner can now exit its resolved complaint pool.
    tx(eng, 1300, "bob", "unstake", target=StakeTarget.complaint(1), cly=60)


def test_minted_per_ether_non_increasing_in_supply():
    rng = random.Random(41)
    for _ in range(500):
        num, den = rng.choice([(1, 1), (1, 10**18), (3, 7), (2, 1000)])
        eth = rng.randrange(1, 10**20)
        supplies = sorted(rng.randrange(0, 10**19) for _ in range(4))
        minted = [mintable(num, den, s, eth) for s in supplies]
        assert minted == sorted(minted, reverse=True)


def test_mint_and_burn_helpers_are_adjoint():
    rng = random.Random(31)
    for _ in range(500):
        num, den = rng.choice([(1, 1), (1, 10**18), (3, 7)])
        supply = rng.randrange(0, 10**9)
        delta = rng.randrange(1, 10**9)
        charge = mint_charge(num, den, supply, delta)
        back = burn_return(num, den, supply + delta, delta)
        assert 0 <= charge - back <= 1
        # mintable never overshoots what the charge paid for
        assert mintable(num, den, supply, charge) >= delta
        assert math.isqrt((supply + delta) ** 2) == supply + delta

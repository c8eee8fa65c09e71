from pathlib import Path

import pytest

from copyrightly.config import EngineConfig
from copyrightly.content_store import ContentId
from copyrightly.ledger import Engine, Tx
from copyrightly.registry import FixtureFetcher
from copyrightly.tokenomics import StakeTarget, mint_charge

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = sorted((REPO / "scenarios").glob("*.cly"))
WORLD_FILE = REPO / "worlds" / "voxels.world"
FIXTURES = Path(__file__).resolve().parent / "fixtures"

# Unit-slope curve and short windows: stake arithmetic in small integers.
UNIT_CONFIG = EngineConfig(
    curve_num=1, curve_den=1, grace_period=700, resolution_window=1000,
    faucet={"alice": 10**9, "bob": 10**9, "carol": 10**9, "dave": 10**9, "eve": 10**9},
)


@pytest.fixture
def eng() -> Engine:
    return Engine(UNIT_CONFIG, fetcher=FixtureFetcher())


def tx(eng: Engine, at: int, sender: str, action: str, **params):
    return eng.apply(Tx(at, sender, action, params))


def put_blob(eng: Engine, data: bytes) -> ContentId:
    return eng.store.put(data)


def eth_for_exact(eng: Engine, amount: int) -> int:
    """Ether that mints exactly `amount` base units at the current supply.

    Exact only while the marginal price of one unit exceeds the slope
    granularity, which holds for the unit-slope test config.
    """
    return mint_charge(eng.config.curve_num, eng.config.curve_den,
                       eng.curve.supply, amount)


def stake_exact(eng: Engine, at: int, sender: str, target: StakeTarget, amount: int):
    events = tx(eng, at, sender, "stake", target=target, eth=eth_for_exact(eng, amount))
    assert events[0].payload["cly_minted"] == amount
    return events

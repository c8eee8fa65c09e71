"""Engine configuration: curve slope, time windows, chain identity, faucet."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

WEEK = 7 * 86_400

# Slope of the linear mint price, as a rational eth-base-units per
# cly-base-unit per cly-base-unit. The default makes one whole token
# (1e18 base units) cost one whole ether per token of supply.
DEFAULT_CURVE_NUM = 1
DEFAULT_CURVE_DEN = 10**18


@dataclass(frozen=True)
class EngineConfig:
    curve_num: int = DEFAULT_CURVE_NUM
    curve_den: int = DEFAULT_CURVE_DEN
    grace_period: int = WEEK
    resolution_window: int = WEEK
    chain_id: int = 4
    nft_contract: str = "0x8e8b33d27e87273e35f622a4ce92bd2a1d3e3a97"
    faucet: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.curve_num <= 0 or self.curve_den <= 0:
            raise ValueError("curve slope must be a positive rational")
        if self.grace_period < 0 or self.resolution_window < 0:
            raise ValueError("time windows must be non-negative")
        for addr, amount in self.faucet.items():
            if amount < 0:
                raise ValueError(f"negative faucet allocation for {addr}")

    def with_overrides(self, **kwargs) -> "EngineConfig":
        return replace(self, **kwargs)


_FILE_KEYS = {
    "curve_num": int,
    "curve_den": int,
    "grace_period": int,
    "resolution_window": int,
    "chain_id": int,
    "nft_contract": str,
}


def load_config(path: str | Path) -> EngineConfig:
    """Read a JSON config file; absent keys keep their defaults."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    kwargs = {}
    for key, conv in _FILE_KEYS.items():
        if key in raw:
            kwargs[key] = conv(raw[key])
    if "faucet" in raw:
        kwargs["faucet"] = {str(a): int(v) for a, v in raw["faucet"].items()}
    unknown = set(raw) - set(_FILE_KEYS) - {"faucet"}
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return EngineConfig(**kwargs)


def dump_config(config: EngineConfig, path: str | Path) -> None:
    doc = {
        "curve_num": config.curve_num,
        "curve_den": config.curve_den,
        "grace_period": config.grace_period,
        "resolution_window": config.resolution_window,
        "chain_id": config.chain_id,
        "nft_contract": config.nft_contract,
        "faucet": dict(sorted(config.faucet.items())),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

"""Line-oriented scenario scripts and their runner.

A scenario is a self-contained experiment: fixture directives first, then
transaction steps and read-only queries with optional expectations. The
grammar, one record per line, ``#`` comments allowed:

    scenario <name>
    config <key>=<value> ...          # engine overrides (curve_num, grace_period, ...)
    world <path>                      # world model file, relative to the scenario
    faucet <address> <wei>            # genesis ether
    blob <name> <text> | hex:<hex>    # store content; $<name> expands to its id
    social <platform> <asset> <text>  # oracle fixture entry
    step <time> <sender> <command> [<k>=<v> ...] [-> <expectation>]
    query <time> <sender> <command> [<k>=<v> ...] [-> <expectation>]

An expectation is ``ok``/``err:<ErrorName>`` plus any number of ``k=v``
checks against the step's result record (a bare ``k=v`` list implies
``ok``). Step times must be non-decreasing and directives must precede the
first step. Reports are byte-stable: the same scenario always renders the
same text.
"""

from __future__ import annotations

import json
import re
import shlex
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import licensing
from .config import EngineConfig
from .content_store import ContentId, ContentStore
from .errors import DomainError, EngineError, ParseError
from .ledger import Engine, Event, Tx
from .registry import FixtureFetcher
from .rights import ReuseRequest, RightsStore
from .tokenomics import StakeTarget

_SUBST_RE = re.compile(r"\$([A-Za-z_][A-Za-z0-9_-]*)")

_CONFIG_KEYS = {
    "curve_num": int,
    "curve_den": int,
    "grace_period": int,
    "resolution_window": int,
    "chain_id": int,
    "nft_contract": str,
}

# Commands that change state, with their parameter converters. Everything
# not listed here goes to the terms record of nft.mint.
_TX_PARAMS: dict[str, dict[str, str]] = {
    "noop": {},
    "manifest": {"content": "cid", "title": "str"},
    "evidence.add": {"manifestation": "cid", "evidence": "cid"},
    "evidence.social": {"manifestation": "cid", "platform": "str", "asset": "str"},
    "stake": {"target": "target", "eth": "int"},
    "unstake": {"target": "target", "cly": "int"},
    "complain": {"manifestation": "cid", "evidence": "cid", "eth": "int"},
    "resolve": {"complaint": "int"},
    "appeal": {"complaint": "int"},
    "arbitrate": {"complaint": "int", "ruling": "str"},
    "nft.mint": {"manifestation": "cid"},
    "nft.transfer": {"token": "int", "to": "str"},
}

_QUERY_COMMANDS = ("digest", "rights.authorize")


@dataclass(frozen=True)
class Expectation:
    outcome: str                      # "ok" | "err"
    error: str | None = None
    values: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Step:
    lineno: int
    kind: str                         # "step" | "query"
    time: int
    sender: str
    command: str
    params: dict[str, str]
    expect: Expectation | None


@dataclass
class Scenario:
    name: str
    base_dir: Path
    config_overrides: dict = field(default_factory=dict)
    world_path: str | None = None
    faucet: dict[str, int] = field(default_factory=dict)
    blobs: dict[str, bytes] = field(default_factory=dict)
    social: list[tuple[str, str, str]] = field(default_factory=list)
    steps: list[Step] = field(default_factory=list)


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    scenario = Scenario(name=path.stem, base_dir=path.parent)
    subs: dict[str, str] = {}
    last_time: int | None = None
    in_steps = False
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as e:
            raise ParseError(str(e), lineno) from None
        if not tokens:
            continue
        keyword, args = tokens[0], tokens[1:]
        if keyword in ("step", "query"):
            in_steps = True
            step = _parse_step(keyword, args, lineno, subs)
            if last_time is not None and step.time < last_time:
                raise ParseError(f"step time {step.time} decreases", lineno)
            last_time = step.time
            scenario.steps.append(step)
            continue
        if in_steps:
            raise ParseError(f"directive {keyword!r} must precede the first step", lineno)
        if keyword == "scenario":
            if len(args) != 1:
                raise ParseError("scenario takes one name", lineno)
            scenario.name = args[0]
        elif keyword == "config":
            for pair in args:
                key, sep, value = pair.partition("=")
                if not sep or key not in _CONFIG_KEYS:
                    raise ParseError(f"bad config override {pair!r}", lineno)
                try:
                    scenario.config_overrides[key] = _CONFIG_KEYS[key](value)
                except ValueError as e:
                    raise ParseError(str(e), lineno) from None
        elif keyword == "world":
            if len(args) != 1:
                raise ParseError("world takes one path", lineno)
            scenario.world_path = args[0]
        elif keyword == "faucet":
            if len(args) != 2:
                raise ParseError("faucet takes <address> <wei>", lineno)
            try:
                amount = int(args[1])
            except ValueError:
                raise ParseError(f"bad faucet amount {args[1]!r}", lineno) from None
            scenario.faucet[args[0]] = scenario.faucet.get(args[0], 0) + amount
        elif keyword == "blob":
            if len(args) != 2:
                raise ParseError("blob takes <name> <content>", lineno)
            name, body = args
            if name in subs:
                raise ParseError(f"blob {name!r} already defined", lineno)
            if body.startswith("hex:"):
                try:
                    data = bytes.fromhex(body[4:])
                except ValueError:
                    raise ParseError(f"bad hex blob {name!r}", lineno) from None
            else:
                data = body.encode("utf-8")
            scenario.blobs[name] = data
            subs[name] = ContentId.for_bytes(data).value
        elif keyword == "social":
            if len(args) != 3:
                raise ParseError("social takes <platform> <asset> <description>", lineno)
            platform, asset, description = args
            scenario.social.append((platform, asset, _substitute(description, subs, lineno)))
        else:
            raise ParseError(f"unknown record {keyword!r}", lineno)
    return scenario


def _substitute(value: str, subs: dict[str, str], lineno: int) -> str:
    def repl(m: re.Match) -> str:
        name = m.group(1)
        if name not in subs:
            raise ParseError(f"reference to undefined blob ${name}", lineno)
        return subs[name]

    return _SUBST_RE.sub(repl, value)


def _parse_step(kind: str, args: list[str], lineno: int, subs: dict[str, str]) -> Step:
    if "->" in args:
        split = args.index("->")
        args, expect_tokens = args[:split], args[split + 1:]
        expect_tokens = [_substitute(tok, subs, lineno) for tok in expect_tokens]
        expect = _parse_expectation(expect_tokens, lineno)
    else:
        expect = None
    if len(args) < 3:
        raise ParseError(f"{kind} takes <time> <sender> <command> ...", lineno)
    time_tok, sender, command = args[0], args[1], args[2]
    try:
        time = int(time_tok)
    except ValueError:
        raise ParseError(f"bad step time {time_tok!r}", lineno) from None
    if time < 0:
        raise ParseError("step time must be non-negative", lineno)
    known = tuple(_TX_PARAMS) if kind == "step" else _QUERY_COMMANDS
    if command not in known:
        raise ParseError(f"unknown {kind} command {command!r}", lineno)
    params: dict[str, str] = {}
    for pair in args[3:]:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ParseError(f"parameters must be key=value, got {pair!r}", lineno)
        if key in params:
            raise ParseError(f"duplicate parameter {key!r}", lineno)
        params[key] = _substitute(value, subs, lineno)
    return Step(lineno, kind, time, sender, command, params, expect)


def _parse_expectation(tokens: list[str], lineno: int) -> Expectation:
    if not tokens:
        raise ParseError("empty expectation after ->", lineno)
    outcome, error = "ok", None
    values: dict[str, str] = {}
    rest = tokens
    if tokens[0] == "ok":
        rest = tokens[1:]
    elif tokens[0].startswith("err:"):
        outcome, error = "err", tokens[0][4:]
        if not error:
            raise ParseError("err: needs an error name", lineno)
        rest = tokens[1:]
    for pair in rest:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ParseError(f"expectation checks must be key=value, got {pair!r}", lineno)
        values[key] = value
    return Expectation(outcome, error, values)


# -- running ------------------------------------------------------------------------


@dataclass
class StepResult:
    step: Step
    outcome: str                      # "ok" | "err"
    error: str | None
    values: dict[str, str]
    passed: bool | None               # None when the step has no expectation

    def summary(self) -> str:
        if self.outcome == "err":
            return f"err:{self.error}"
        rendered = " ".join(f"{k}={v}" for k, v in sorted(self.values.items()))
        return ("ok " + rendered).strip()


@dataclass
class Report:
    name: str
    results: list[StepResult]
    digest: str
    engine: Engine
    rights_store: RightsStore

    @property
    def ok(self) -> bool:
        return all(r.passed is not False for r in self.results)

    def expectation_counts(self) -> tuple[int, int]:
        passed = sum(1 for r in self.results if r.passed is True)
        failed = sum(1 for r in self.results if r.passed is False)
        return passed, failed

    def render_text(self) -> str:
        lines = [f"scenario {self.name}"]
        for i, r in enumerate(self.results, start=1):
            mark = ""
            if r.passed is True:
                mark = " [pass]"
            elif r.passed is False:
                mark = f" [FAIL expected {_render_expect(r.step.expect)}]"
            lines.append(
                f"  {i:02d} t={r.step.time} {r.step.sender} {r.step.command}"
                f" -> {r.summary()}{mark}")
        lines.append(f"digest {self.digest}")
        passed, failed = self.expectation_counts()
        lines.append(f"result: {len(self.results)} steps, "
                     f"{passed} expectations passed, {failed} failed")
        return "\n".join(lines) + "\n"

    def render_json(self) -> str:
        passed, failed = self.expectation_counts()
        doc = {
            "scenario": self.name,
            "ok": self.ok,
            "digest": self.digest,
            "passed": passed,
            "failed": failed,
            "steps": [{
                "index": i,
                "line": r.step.lineno,
                "time": r.step.time,
                "sender": r.step.sender,
                "command": r.step.command,
                "outcome": r.outcome,
                "error": r.error,
                "values": r.values,
                "expectation_passed": r.passed,
            } for i, r in enumerate(self.results, start=1)],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _render_expect(expect: Expectation | None) -> str:
    if expect is None:
        return ""
    parts = [expect.outcome if expect.outcome == "ok" else f"err:{expect.error}"]
    parts.extend(f"{k}={v}" for k, v in sorted(expect.values.items()))
    return " ".join(parts)


def parse_coords(text: str) -> tuple[Fraction, Fraction]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"coordinates must be x,y, got {text!r}")
    return Fraction(parts[0]), Fraction(parts[1])


def run_scenario(scenario: Scenario, config: EngineConfig | None = None,
                 store: ContentStore | None = None) -> Report:
    """Execute every step against a fresh engine built from the fixtures."""
    config = config or EngineConfig()
    if scenario.config_overrides:
        config = config.with_overrides(**scenario.config_overrides)
    if scenario.faucet:
        merged = dict(config.faucet)
        for addr, amount in scenario.faucet.items():
            merged[addr] = merged.get(addr, 0) + amount
        config = config.with_overrides(faucet=merged)
    fetcher = FixtureFetcher()
    for platform, asset, description in scenario.social:
        fetcher.add(platform, asset, description)
    eng = Engine(config, store if store is not None else ContentStore(), fetcher)
    for data in scenario.blobs.values():
        eng.store.put(data)
    rights_store = RightsStore(chain_id=config.chain_id)
    if scenario.world_path is not None:
        world_file = scenario.base_dir / scenario.world_path
        rights_store.load_world(world_file.read_text(encoding="utf-8"))
    ingested = 0

    results: list[StepResult] = []
    for step in scenario.steps:
        if step.kind == "step":
            outcome, error, values = _run_tx(eng, step)
        else:
            # Queries see facts up to the current tip; feeding the rights
            # store incrementally here is deliberate.
            fresh = eng.events[ingested:]
            rights_store.ingest(fresh, eng.store)
            ingested += len(fresh)
            outcome, error, values = _run_query(eng, rights_store, config, step)
        passed = None if step.expect is None else _check(step.expect, outcome, error, values)
        results.append(StepResult(step, outcome, error, values, passed))
    rights_store.ingest(eng.events[ingested:], eng.store)
    return Report(scenario.name, results, eng.digest(), eng, rights_store)


def _run_tx(eng: Engine, step: Step) -> tuple[str, str | None, dict[str, str]]:
    try:
        params = _typed_params(eng.config, step)
        events = eng.apply(Tx(step.time, step.sender, step.command, params))
    except DomainError as e:
        return "err", type(e).__name__, {}
    return "ok", None, result_values(step.command, events)


def _typed_params(config: EngineConfig, step: Step) -> dict:
    spec = _TX_PARAMS[step.command]
    params: dict = {}
    terms_fields: dict[str, str] = {}
    for key, value in step.params.items():
        if key in spec:
            params[key] = _convert(spec[key], value)
        elif step.command == "nft.mint":
            terms_fields[key] = value
        else:
            params[key] = value  # let the engine reject unknown parameters
    if step.command == "nft.mint":
        params["terms"] = licensing.terms_from_input(terms_fields)
    return params


def _convert(kind: str, value: str):
    if kind == "int":
        return int(value)
    if kind == "cid":
        return ContentId(value)
    if kind == "target":
        return StakeTarget.decode(value)
    return value


def result_values(command: str, events: list[Event]) -> dict[str, str]:
    if command == "manifest":
        return {"manifestation": events[0].payload["content_id"]}
    if command == "stake":
        return {"minted": str(events[0].payload["cly_minted"]),
                "charged": str(events[0].payload["eth_charged"])}
    if command == "unstake":
        return {"burned": str(events[0].payload["cly_burned"]),
                "returned": str(events[0].payload["eth_returned"])}
    if command == "complain":
        return {"complaint": str(events[0].payload["complaint"]),
                "minted": str(events[1].payload["cly_minted"])}
    if command in ("resolve", "arbitrate"):
        return {"winner": events[0].payload["winner"]}
    if command == "nft.mint":
        return {"token": str(events[0].payload["token_id"]),
                "uri": events[0].payload["token_uri"],
                "did": events[0].payload["nft_did"]}
    return {}


def _run_query(eng: Engine, rights_store: RightsStore, config: EngineConfig,
               step: Step) -> tuple[str, str | None, dict[str, str]]:
    try:
        if step.command == "digest":
            return "ok", None, {"digest": eng.digest()}
        reuser = step.params.get("reuser", step.sender)
        if not reuser.startswith("did:"):
            reuser = licensing.account_did(config.chain_id, reuser)
        request = ReuseRequest(
            reuser_did=reuser,
            content=ContentId(step.params["content"]),
            action=step.params.get("action", licensing.MAKE_AVAILABLE),
            at=step.time,
            coords=parse_coords(step.params["coords"]),
            instrument=step.params.get("instrument"),
        )
        decision = rights_store.authorize_reuse(request)
    except (EngineError, KeyError, ValueError) as e:
        name = type(e).__name__ if isinstance(e, EngineError) else "InvalidParams"
        return "err", name, {}
    return "ok", None, {
        "authorized": "true" if decision.is_authorized else "false",
        "why": ",".join(decision.why),
    }


def _check(expect: Expectation, outcome: str, error: str | None,
           values: dict[str, str]) -> bool:
    if expect.outcome != outcome:
        return False
    if expect.outcome == "err" and expect.error != error:
        return False
    return all(values.get(k) == v for k, v in expect.values.items())

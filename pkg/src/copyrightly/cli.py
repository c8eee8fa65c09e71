"""Command-line front end.

State lives in a directory (``--state-dir``, ``$CLY_STATE_DIR`` or
``./.cly``): an append-only ``events.log``, the blob store under
``store/``, an optional ``config.json``, an optional ``social.json``
oracle fixture and the world model installed by ``rights world``. Every
invocation rebuilds the engine by replaying the log, applies at most one
transaction and appends the events it produced.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import scenario as scenario_mod
from .config import EngineConfig, dump_config, load_config
from .content_store import ContentId, ContentStore
from .errors import DomainError, EngineError, ParseError, WorldNotLoaded
from .ledger import Engine, Tx, append_log, read_log, replay
from .licensing import MAKE_AVAILABLE, account_did, terms_from_input
from .registry import FixtureFetcher, PLATFORMS
from .rights import ReuseRequest, RightsStore
from .tokenomics import FOR_CLAIM, FOR_COMPLAINT, StakeTarget

_ACTION_ALIASES = {"make-available": MAKE_AVAILABLE}
_RULING_ALIASES = {"for-claim": FOR_CLAIM, "for-complaint": FOR_COMPLAINT}

WORLD_FILE = "world.txt"


class Workspace:
    def __init__(self, state_dir: Path, config_path: str | None):
        self.state_dir = state_dir
        state_dir.mkdir(parents=True, exist_ok=True)
        if config_path:
            self.config = load_config(config_path)
        elif (state_dir / "config.json").exists():
            self.config = load_config(state_dir / "config.json")
        else:
            self.config = EngineConfig()
        store = ContentStore(state_dir / "store")
        social = state_dir / "social.json"
        fetcher = FixtureFetcher.from_file(social) if social.exists() else FixtureFetcher()
        self.log_path = state_dir / "events.log"
        events = read_log(self.log_path) if self.log_path.exists() else []
        self.engine: Engine = replay(events, self.config, store, fetcher)

    def transact(self, sender: str, action: str, params: dict, at: int | None) -> dict[str, str]:
        when = self.engine.clock if at is None else at
        events = self.engine.apply(Tx(when, sender, action, params))
        append_log(self.log_path, events)
        return scenario_mod.result_values(action, events)

    def rights_store(self) -> RightsStore:
        rs = RightsStore(chain_id=self.config.chain_id)
        world = self.state_dir / WORLD_FILE
        if world.exists():
            rs.load_world(world.read_text(encoding="utf-8"))
        rs.ingest(self.engine.events, self.engine.store)
        return rs


def _add_tx_args(parser: argparse.ArgumentParser, sender: bool = True) -> None:
    if sender:
        parser.add_argument("--sender", "-s", required=True, help="account address")
    parser.add_argument("--at", type=int, default=None,
                        help="logical time in seconds (default: current engine clock)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cly", description=__doc__.splitlines()[0])
    parser.add_argument("--state-dir", default=None, help="engine state directory")
    parser.add_argument("--config", default=None, help="config file overriding the state dir's")
    sub = parser.add_subparsers(dest="command", required=True)

    store = sub.add_parser("store", help="content-addressable blob store").add_subparsers(
        dest="sub", required=True)
    put = store.add_parser("put", help="store a file, print its content id")
    put.add_argument("file")
    put.add_argument("--hint", default=None)
    get = store.add_parser("get", help="write a stored blob to a file")
    get.add_argument("cid")
    get.add_argument("-o", "--output", required=True)

    manifest = sub.add_parser("manifest", help="store a file and claim authorship of it")
    manifest.add_argument("file")
    manifest.add_argument("--title", required=True)
    _add_tx_args(manifest)

    evidence = sub.add_parser("evidence", help="attach evidence to a claim").add_subparsers(
        dest="sub", required=True)
    ev_add = evidence.add_parser("add", help="upload a supporting file")
    ev_add.add_argument("manifestation")
    ev_add.add_argument("file")
    _add_tx_args(ev_add)
    ev_social = evidence.add_parser("social", help="verify a social asset via the oracle")
    ev_social.add_argument("manifestation")
    ev_social.add_argument("--platform", required=True, choices=PLATFORMS)
    ev_social.add_argument("--asset", required=True)
    _add_tx_args(ev_social)

    stake = sub.add_parser("stake", help="buy curation tokens and stake them")
    stake.add_argument("target", help="claim:<cid> or complaint:<id>")
    stake.add_argument("--eth", type=int, required=True)
    _add_tx_args(stake)

    unstake = sub.add_parser("unstake", help="burn staked tokens back to ether")
    unstake.add_argument("target")
    unstake.add_argument("--cly", type=int, required=True)
    _add_tx_args(unstake)

    complain = sub.add_parser("complain", help="challenge a claim with evidence and stake")
    complain.add_argument("manifestation")
    complain.add_argument("--evidence", required=True, help="evidence file")
    complain.add_argument("--eth", type=int, required=True)
    _add_tx_args(complain)

    resolve = sub.add_parser("resolve", help="settle a complaint at its deadline")
    resolve.add_argument("complaint", type=int)
    _add_tx_args(resolve, sender=False)
    resolve.add_argument("--sender", "-s", default="keeper")

    appeal = sub.add_parser("appeal", help="freeze a complaint for arbitration")
    appeal.add_argument("complaint", type=int)
    _add_tx_args(appeal)

    arbitrate = sub.add_parser("arbitrate", help="inject an arbitration ruling")
    arbitrate.add_argument("complaint", type=int)
    arbitrate.add_argument("--ruling", required=True, choices=sorted(_RULING_ALIASES))
    _add_tx_args(arbitrate, sender=False)
    arbitrate.add_argument("--sender", "-s", default="arbitrator")

    nft = sub.add_parser("nft", help="license tokens").add_subparsers(dest="sub", required=True)
    mint = nft.add_parser("mint", help="mint a license token for a curated claim")
    mint.add_argument("manifestation")
    mint.add_argument("--terms", required=True, help="JSON terms file")
    _add_tx_args(mint)
    transfer = nft.add_parser("transfer", help="hand a token to a new owner")
    transfer.add_argument("token", type=int)
    transfer.add_argument("to")
    _add_tx_args(transfer)
    show = nft.add_parser("show", help="print a token and its metadata document")
    show.add_argument("token", type=int)

    rights = sub.add_parser("rights", help="reuse authorization").add_subparsers(
        dest="sub", required=True)
    rights.add_parser("ingest", help="rebuild the fact set from the log and report counts")
    world = rights.add_parser("world", help="install a world model file")
    world.add_argument("file")
    authorize = rights.add_parser("authorize", help="check whether a reuse is licensed")
    authorize.add_argument("--reuser", required=True, help="DID or account address")
    authorize.add_argument("--content", required=True)
    authorize.add_argument("--action", default="make-available")
    authorize.add_argument("--at", type=int, required=True)
    authorize.add_argument("--coords", required=True, help="x,y")
    authorize.add_argument("--instrument", default=None)
    authorize.add_argument("--json", action="store_true")

    run = sub.add_parser("scenario", help="scenario scripts").add_subparsers(
        dest="sub", required=True)
    runner = run.add_parser("run", help="execute a scenario file and check expectations")
    runner.add_argument("file")
    runner.add_argument("--json", action="store_true")
    runner.add_argument("--emit-log", default=None, help="write the emitted event log here")
    runner.add_argument("--emit-config", default=None, help="write the effective config here")

    rep = sub.add_parser("replay", help="rebuild state from an event log, print its digest")
    rep.add_argument("log")

    sub.add_parser("digest", help="print the current state digest")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    state_dir = Path(args.state_dir or os.environ.get("CLY_STATE_DIR", ".cly"))
    try:
        return _dispatch(args, state_dir)
    except ParseError as e:
        print(f"error: ParseError: {e}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except EngineError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace, state_dir: Path) -> int:
    if args.command == "scenario":
        return _cmd_scenario(args)
    if args.command == "replay":
        ws = Workspace(state_dir, args.config)
        engine = replay(read_log(args.log), ws.config, ContentStore(), FixtureFetcher())
        print(engine.digest())
        return 0

    ws = Workspace(state_dir, args.config)
    if args.command == "store":
        if args.sub == "put":
            cid = ws.engine.store.put(Path(args.file).read_bytes(), media_hint=args.hint)
            print(cid.value)
        else:
            blob = ws.engine.store.get(ContentId(args.cid))
            Path(args.output).write_bytes(blob.data)
            print(f"{args.cid} -> {args.output} ({len(blob.data)} bytes)")
        return 0
    if args.command == "digest":
        print(ws.engine.digest())
        return 0
    if args.command == "manifest":
        cid = ws.engine.store.put(Path(args.file).read_bytes())
        values = ws.transact(args.sender, "manifest",
                             {"content": cid, "title": args.title}, args.at)
        print(values["manifestation"])
        return 0
    if args.command == "evidence":
        mcid = ContentId(args.manifestation)
        if args.sub == "add":
            ecid = ws.engine.store.put(Path(args.file).read_bytes())
            ws.transact(args.sender, "evidence.add",
                        {"manifestation": mcid, "evidence": ecid}, args.at)
            print(f"upload evidence {ecid.value} attached to {mcid.value}")
        else:
            ws.transact(args.sender, "evidence.social",
                        {"manifestation": mcid, "platform": args.platform,
                         "asset": args.asset}, args.at)
            print(f"{args.platform} asset {args.asset} verified for {mcid.value}")
        return 0
    if args.command == "stake":
        values = ws.transact(args.sender, "stake",
                             {"target": StakeTarget.decode(args.target),
                              "eth": args.eth}, args.at)
        print(f"minted {values['minted']} for {values['charged']} wei")
        return 0
    if args.command == "unstake":
        values = ws.transact(args.sender, "unstake",
                             {"target": StakeTarget.decode(args.target),
                              "cly": args.cly}, args.at)
        print(f"burned {values['burned']}, returned {values['returned']} wei")
        return 0
    if args.command == "complain":
        ecid = ws.engine.store.put(Path(args.evidence).read_bytes())
        values = ws.transact(args.sender, "complain",
                             {"manifestation": ContentId(args.manifestation),
                              "evidence": ecid, "eth": args.eth}, args.at)
        print(f"complaint {values['complaint']} opened, staked {values['minted']}")
        return 0
    if args.command == "resolve":
        values = ws.transact(args.sender, "resolve", {"complaint": args.complaint}, args.at)
        print(f"complaint {args.complaint} resolved for the {values['winner']} side")
        return 0
    if args.command == "appeal":
        ws.transact(args.sender, "appeal", {"complaint": args.complaint}, args.at)
        print(f"complaint {args.complaint} appealed")
        return 0
    if args.command == "arbitrate":
        values = ws.transact(args.sender, "arbitrate",
                             {"complaint": args.complaint,
                              "ruling": _RULING_ALIASES[args.ruling]}, args.at)
        print(f"complaint {args.complaint} ruled for the {values['winner']} side")
        return 0
    if args.command == "nft":
        return _cmd_nft(ws, args)
    if args.command == "rights":
        return _cmd_rights(ws, args)
    raise AssertionError(f"unhandled command {args.command}")


def _cmd_nft(ws: Workspace, args: argparse.Namespace) -> int:
    if args.sub == "mint":
        raw = json.loads(Path(args.terms).read_text(encoding="utf-8"))
        values = ws.transact(args.sender, "nft.mint",
                             {"manifestation": ContentId(args.manifestation),
                              "terms": terms_from_input(raw)}, args.at)
        print(f"token {values['token']} minted, uri {values['uri']}")
        print(values["did"])
        return 0
    if args.sub == "transfer":
        ws.transact(args.sender, "nft.transfer", {"token": args.token, "to": args.to}, args.at)
        print(f"token {args.token} transferred to {args.to}")
        return 0
    nft = ws.engine.nfts.get(args.token)
    if nft is None:
        print(f"error: UnknownToken: no token #{args.token}", file=sys.stderr)
        return 1
    blob = ws.engine.store.get(ContentId(nft.token_uri))
    print(f"token {nft.token_id} ({nft.nft_did})")
    print(f"owner {nft.owner}")
    print(f"manifestation {nft.manifestation}")
    print(f"token_uri {nft.token_uri} (minted at {nft.minted_at})")
    sys.stdout.write(blob.data.decode("utf-8"))
    return 0


def _cmd_rights(ws: Workspace, args: argparse.Namespace) -> int:
    if args.sub == "world":
        text = Path(args.file).read_text(encoding="utf-8")
        RightsStore().load_world(text)  # validate before installing
        (ws.state_dir / WORLD_FILE).write_text(text, encoding="utf-8")
        print(f"world model installed from {args.file}")
        return 0
    if args.sub == "ingest":
        rs = RightsStore(chain_id=ws.config.chain_id)
        count = rs.ingest(ws.engine.events, ws.engine.store)
        print(f"{count} facts from {len(ws.engine.events)} events")
        for seq, message in rs.ingest_errors:
            print(f"skipped event {seq}: {message}")
        return 0
    rs = ws.rights_store()
    if rs.world is None:
        raise WorldNotLoaded("install a world model first: cly rights world <file>")
    reuser = args.reuser
    if not reuser.startswith("did:"):
        reuser = account_did(ws.config.chain_id, reuser)
    decision = rs.authorize_reuse(ReuseRequest(
        reuser_did=reuser,
        content=ContentId(args.content),
        action=_ACTION_ALIASES.get(args.action, args.action),
        at=args.at,
        coords=scenario_mod.parse_coords(args.coords),
        instrument=args.instrument,
    ))
    if args.json:
        print(json.dumps(decision.as_dict(), indent=2, sort_keys=True))
    else:
        print(f"isAuthorized: {'true' if decision.is_authorized else 'false'}")
        print(f"why: {', '.join(decision.why) if decision.why else '-'}")
        trace = " ".join(f"{c}={'yes' if ok else 'no'}" for c, ok in decision.trace)
        print(f"trace: {trace}")
    return 0


def _cmd_scenario(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else EngineConfig()
    scn = scenario_mod.parse_scenario(args.file)
    report = scenario_mod.run_scenario(scn, config)
    sys.stdout.write(report.render_json() if args.json else report.render_text())
    if args.emit_log:
        Path(args.emit_log).write_text(
            "".join(ev.encode() + "\n" for ev in report.engine.events), encoding="utf-8")
    if args.emit_config:
        dump_config(report.engine.config, args.emit_config)
    return 0 if report.ok else 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

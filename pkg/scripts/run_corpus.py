#!/usr/bin/env python3
"""Run every bundled scenario, verify replay determinism, print digests.

Exit status is nonzero if any expectation fails or any replay diverges.
"""

import sys
from pathlib import Path

from copyrightly.ledger import replay
from copyrightly.scenario import parse_scenario, run_scenario

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    failures = 0
    for path in sorted((REPO / "scenarios").glob("*.cly")):
        report = run_scenario(parse_scenario(path))
        rebuilt = replay(report.engine.events, report.engine.config)
        replay_ok = rebuilt.digest() == report.digest
        passed, failed = report.expectation_counts()
        status = "ok" if report.ok and replay_ok else "FAIL"
        print(f"{status:4s} {path.name:30s} steps={len(report.results):3d} "
              f"expectations={passed}/{passed + failed} "
              f"replay={'match' if replay_ok else 'DIVERGED'} {report.digest}")
        if status != "ok":
            failures += 1
            sys.stdout.write(report.render_text())
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

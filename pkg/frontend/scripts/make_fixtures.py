#!/usr/bin/env python3
"""Produce the default experiments' CSV outputs for the figure acceptance tests.

Usage: python3 scripts/make_fixtures.py [out_dir]
Drives the `simplexctl` command-line runner; only its documented outputs are
consumed by the figure tests.
"""

import subprocess
import sys
import tempfile


def run(config_text: str, out_dir: str) -> None:
    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as fh:
        fh.write(config_text)
        path = fh.name
    subprocess.run(
        ["simplexctl", "run", path, "--out", out_dir, "--seed", "0"],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    print(f"wrote {out_dir}")


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else "fixtures-out"
    for name in ("sir", "sir-noisy", "hospital", "replicator", "replicator-random-cost"):
        run(f"experiment = {name}\n", f"{out}/{name}")
    run("experiment = lowerbound\nT_list = 100,200\ntrials = 5\n", f"{out}/lowerbound")
    for c3 in (20, 10, 5, 1):
        run(f"experiment = sir\nc3 = {c3}\n", f"{out}/grid/c3-{c3:02d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

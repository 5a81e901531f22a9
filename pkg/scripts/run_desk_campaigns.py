"""Run every bundled desk config and write one bundle per config plus a merged one."""
import argparse
import sys
from pathlib import Path

from gkvcs import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="desk-results", help="output directory")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    status = 0
    for name in cli.bundled_configs():
        code = cli.main(["run", "--config", name, "--out", str(out / name), "--parallel", str(args.parallel)])
        print(f"{name}: exit {code}", file=sys.stderr)
        status = max(status, code)
    dirs = [str(out / name) for name in cli.bundled_configs()]
    cli.main(["report-merge", *dirs, "--out", str(out / "merged"), "--format", "both"])
    return status


if __name__ == "__main__":
    raise SystemExit(main())

"""Tabulate closed-form versus numeric levels of the level-changing models.

Prints one CSV row per level: variant, form, sector, label, analytic,
numeric, abs_error.  The closed forms are predictions, so large errors here
are findings rather than failures.
"""
import argparse
import sys

from gkvcs import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="desk-extradiag", help="config path or bundled name")
    ap.add_argument("--levels", type=int, default=12)
    args = ap.parse_args()
    raw = cli.load_raw(args.config)
    raw = {**raw, "spectrum": {**raw.get("spectrum", {}), "levels": args.levels}}
    cfg = cli.parse_config(raw)
    records = []
    for variant in cfg.spectrum.get("variants", ["extradiag", "general"]):
        records += cli._spectrum_job(cfg, variant, None)
    bundle = cli.make_bundle([cfg.digest], [cfg.name], cli._sanitize(records))
    sys.stdout.write(cli.spectrum_csv(bundle))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Run every analytic-claim check and write the JSON report."""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from tetraform.cli import cmd_verify  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/verification_report.json")
    ap.add_argument("--selector", default="all")
    args = ap.parse_args()
    report, code = cmd_verify(args.selector, args.out)
    for e in report:
        print(f"{'PASS' if e['pass'] else 'FAIL'} {e['name']}: error={e['error']:.3e}")
    print(f"{sum(e['pass'] for e in report)}/{len(report)} checks passed -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Stationary-formation experiment: both bundled gains from the same seed.

Runs the two stationary configs, writes the trajectory/xi CSV traces, and
prints where each run crossed the convergence threshold.  The interesting
columns to plot afterwards are c12..c34 against t: all six pairwise cosines
settle at -1/3.
"""

import argparse
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from tetraform.cli import cmd_simulate  # noqa: E402

CONFIGS = ["stationary_cos.json", "stationary_exp.json"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/stationary", help="output root directory")
    ap.add_argument(
        "--configs-dir",
        default=str(pathlib.Path(__file__).resolve().parent.parent / "configs"),
    )
    args = ap.parse_args()
    for name in CONFIGS:
        cfg = pathlib.Path(args.configs_dir) / name
        out = pathlib.Path(args.out) / cfg.stem
        manifest = cmd_simulate(str(cfg), str(out))
        s = manifest.summary
        print(f"{cfg.stem}: converged={s['converged']} at t={s['converged_time']}, "
              f"final formation error {s['final_formation_error']:.3e}")
        print(f"  traces: {manifest.outputs['trajectory']}, {manifest.outputs['xi_trace']}")
    print(json.dumps({"runs": CONFIGS, "out": args.out}))


if __name__ == "__main__":
    main()

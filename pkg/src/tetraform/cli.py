"""Command-line front end: simulate / sweep / verify.

Configs are single JSON documents; outputs are CSV traces plus JSON
manifests whose summary numbers can be recomputed from the CSVs.  Exit
codes: 0 success, 1 malformed config, 2 non-finite abort, 3 failed
verification checks.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import analysis
from .control_laws import check_ensemble, gain_to_config, parse_gain_spec
from .formation_topology import topology_from_config, topology_to_config
from .simulator import (
    NonFiniteStateError,
    NotConvergedError,
    SimConfig,
    Trajectory,
    converged_time,
    formation_error,
    read_trajectory_csv,
    rotation_rate_estimate,
    simulate,
    write_trajectory_csv,
)
from .xi_transform import write_xi_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONFINITE = 2
EXIT_VERIFY_FAILED = 3

CONVERGENCE_TOL = 1e-6
RATE_WINDOW = 20.0


class ConfigError(ValueError):
    """Malformed run configuration; message names the offending field."""


def _require(cond, field, msg):
    if not cond:
        raise ConfigError(f"config field '{field}': {msg}")


def config_from_dict(doc: dict) -> SimConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - {
        "topology",
        "gain",
        "integrator",
        "dt",
        "T",
        "stride",
        "seed",
        "initial_state",
    }
    _require(not unknown, ",".join(sorted(unknown)), "unknown field(s)")
    _require("topology" in doc, "topology", "missing")
    _require("gain" in doc, "gain", "missing")
    try:
        topo = topology_from_config(doc["topology"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'topology': {exc}") from exc
    _require(topo.n == 4, "topology", "runs need exactly 4 agents (summary metrics are tetrahedron-specific)")
    try:
        gain = parse_gain_spec(doc["gain"])
    except ValueError as exc:
        raise ConfigError(f"config field 'gain': {exc}") from exc
    dt = doc.get("dt", 1e-3)
    horizon = doc.get("T", 200.0)
    stride = doc.get("stride", 100)
    integrator = doc.get("integrator", "rk4")
    _require(isinstance(dt, (int, float)) and dt > 0, "dt", "must be a number > 0")
    _require(isinstance(horizon, (int, float)) and horizon > 0, "T", "must be a number > 0")
    _require(isinstance(stride, int) and stride >= 1, "stride", "must be an integer >= 1")
    _require(integrator in ("euler", "rk4"), "integrator", "must be 'euler' or 'rk4'")
    seed = doc.get("seed")
    initial = doc.get("initial_state")
    _require(
        (seed is None) != (initial is None),
        "seed/initial_state",
        "exactly one of them is required",
    )
    if initial is not None:
        try:
            initial = check_ensemble(np.asarray(initial, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config field 'initial_state': {exc}") from exc
    if seed is not None:
        _require(isinstance(seed, int), "seed", "must be an integer")
    try:
        return SimConfig(
            topology=topo,
            gain=gain,
            dt=float(dt),
            horizon=float(horizon),
            integrator=integrator,
            stride=stride,
            seed=seed,
            initial_state=initial,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: SimConfig) -> dict:
    doc = {
        "topology": topology_to_config(cfg.topology),
        "gain": gain_to_config(cfg.gain),
        "integrator": cfg.integrator,
        "dt": cfg.dt,
        "T": cfg.horizon,
        "stride": cfg.stride,
    }
    if cfg.seed is not None:
        doc["seed"] = cfg.seed
    else:
        doc["initial_state"] = [[float(x) for x in row] for row in cfg.initial_state]
    return doc


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    outputs: dict
    summary: dict
    wall_time_s: float


def _is_rotating(doc: dict) -> bool:
    return doc["topology"].get("type") == "rotating_tetrahedron"


def _summarize(cfg: SimConfig, traj: Trajectory, doc: dict) -> dict:
    final_err = formation_error(traj.final_state)
    conv_t = converged_time(traj, tol=CONVERGENCE_TOL)
    summary = {
        "final_formation_error": final_err,
        "converged": conv_t is not None,
        "converged_time": conv_t,
        "rotation_rate": None,
    }
    if _is_rotating(doc) and conv_t is not None:
        k = doc["topology"]["k"]
        window = min(RATE_WINDOW, 0.5 * cfg.horizon)
        spin = [a for a in range(1, 5) if a != k][0]
        try:
            summary["rotation_rate"] = rotation_rate_estimate(
                traj, spin, window, axis_agent=k, error_tol=CONVERGENCE_TOL
            )
        except NotConvergedError:
            summary["rotation_rate"] = None
    return summary


def cmd_simulate(config_path, out_dir) -> RunManifest:
    cfg = load_config(config_path)
    doc = config_to_dict(cfg)
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    traj = simulate(cfg)
    wall = time.perf_counter() - t0
    traj_path = os.path.join(out_dir, "trajectory.csv")
    xi_path = os.path.join(out_dir, "xi_trace.csv")
    write_trajectory_csv(traj, traj_path)
    write_xi_trace_csv(traj, xi_path)
    manifest = RunManifest(
        config=doc,
        config_hash=config_hash(doc),
        outputs={"trajectory": traj_path, "xi_trace": xi_path},
        summary=_summarize(cfg, traj, doc),
        wall_time_s=wall,
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(asdict(manifest), fh, indent=2)
        fh.write("\n")
    return manifest


def _worker_count(n_jobs: int) -> int:
    cap = os.environ.get("TETRAFORM_THREADS")
    workers = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(workers, n_jobs))


def _sweep_one(args):
    doc, seed, out_dir = args
    doc = dict(doc)
    doc.pop("initial_state", None)
    doc["seed"] = seed
    cfg = config_from_dict(doc)
    entry = {"seed": seed}
    try:
        t0 = time.perf_counter()
        traj = simulate(cfg)
        wall = time.perf_counter() - t0
        summary = _summarize(cfg, traj, doc)
        entry.update(summary)
        if not summary["converged"]:
            # stalled runs get their terminal state classified for the report
            try:
                entry["terminal_class"] = analysis.classify_equilibrium(
                    traj.final_state, cfg.topology, cfg.gain
                ).tag
            except ValueError:
                entry["terminal_class"] = "Unclassified"
        manifest = RunManifest(
            config=doc,
            config_hash=config_hash(doc),
            outputs={},
            summary=summary,
            wall_time_s=wall,
        )
        with open(os.path.join(out_dir, f"run_seed{seed}.json"), "w") as fh:
            json.dump(asdict(manifest), fh, indent=2)
            fh.write("\n")
    except NonFiniteStateError as exc:
        entry["error"] = str(exc)
    return entry


def cmd_sweep(config_path, seeds, out_dir) -> dict:
    if seeds < 1:
        raise ConfigError("config field 'seeds': must be >= 1")
    cfg = load_config(config_path)
    doc = config_to_dict(cfg)
    base = cfg.seed if cfg.seed is not None else 0
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(doc, base + i, out_dir) for i in range(seeds)]
    t0 = time.perf_counter()
    workers = _worker_count(len(jobs))
    if workers == 1:
        entries = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_sweep_one, jobs))
    entries.sort(key=lambda e: e["seed"])
    good = [e for e in entries if "error" not in e]
    failed = [e for e in entries if "error" in e]
    converged = [e for e in good if e["converged"]]
    summary = {
        "config_hash": config_hash(doc),
        "seeds": seeds,
        "base_seed": base,
        "converged": len(converged),
        "convergence_fraction": len(converged) / seeds,
        "max_final_error": max((e["final_formation_error"] for e in good), default=None),
        "not_converged_seeds": [e["seed"] for e in good if not e["converged"]],
        "failed_runs": failed,
        "runs": entries,
        "wall_time_s": time.perf_counter() - t0,
    }
    with open(os.path.join(out_dir, "sweep_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def cmd_verify(selector, out_path) -> tuple[list[dict], int]:
    report = analysis.run_verification(selector)
    if out_path:
        os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
        with open(out_path, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    code = EXIT_OK if all(e["pass"] for e in report) else EXIT_VERIFY_FAILED
    return report, code


def recompute_summary_from_csv(csv_path, config_doc: dict) -> dict:
    """Re-derive the manifest summary numbers from an emitted trajectory CSV."""
    data = read_trajectory_csv(csv_path)
    traj = Trajectory(
        times=data["times"],
        states=data["states"],
        cos_pairs=data["cos_pairs"],
        lyapunov=data["lyapunov"],
        max_field=data["max_field"],
    )
    cfg = config_from_dict(config_doc)
    return _summarize(cfg, traj, config_doc)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tetraform",
        description="Simulate and verify intrinsic tetrahedron formations of reduced attitudes.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configured simulation")
    sim.add_argument("--config", required=True, help="path to a JSON run config")
    sim.add_argument("--out", required=True, help="output directory")

    sw = sub.add_parser("sweep", help="run many seeded simulations")
    sw.add_argument("--config", required=True, help="path to a JSON run config")
    sw.add_argument("--out", required=True, help="output directory")
    sw.add_argument("--seeds", type=int, default=10, help="number of seeded runs")

    ver = sub.add_parser("verify", help="run the analytic-claim verification suites")
    ver.add_argument(
        "--selector",
        default="all",
        choices=["all", "lambda", "spectra", "identity", "kkt", "invariance"],
    )
    ver.add_argument("--out", default=None, help="optional path for the JSON report")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            manifest = cmd_simulate(args.config, args.out)
            s = manifest.summary
            print(
                f"simulate: final_error={s['final_formation_error']:.3e} "
                f"converged={s['converged']} wall={manifest.wall_time_s:.2f}s"
            )
            return EXIT_OK
        if args.command == "sweep":
            summary = cmd_sweep(args.config, args.seeds, args.out)
            print(
                f"sweep: {summary['converged']}/{summary['seeds']} converged, "
                f"max_final_error={summary['max_final_error']:.3e}"
            )
            return EXIT_OK
        if args.command == "verify":
            report, code = cmd_verify(args.selector, args.out)
            for e in report:
                status = "PASS" if e["pass"] else "FAIL"
                print(f"{status} {e['name']}: error={e['error']:.3e}")
            n_bad = sum(not e["pass"] for e in report)
            print(f"verify: {len(report) - n_bad}/{len(report)} checks passed")
            return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteStateError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())

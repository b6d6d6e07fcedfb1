"""Norm-preserving integration of the closed loop plus runtime observables.

Agents are advanced with exponential-map steps (each update is an exact
rotation of the current attitude), so the state never leaves the sphere and
no projection step is needed.  Both integrators share that update; they only
differ in how the per-step rotation vector is assembled:

* "euler":  h*omega = dt * omega(state)
* "rk4":    h*omega = dt/6 * (k1 + 2 k2 + 2 k3 + k4), the classical stage
            combination with every stage velocity evaluated at an
            exponentially-updated intermediate state.

At dt = 1e-3 the euler step keeps a stationary limit exact (equilibria of
the field are fixed points of the map), but parks a *rotating* run at an
O(dt) offset from the invariant tetrahedron; use rk4 for rotating graphs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from . import _fastpath
from . import sphere_geometry as sg
from .control_laws import (
    AFFINE_COSINE,
    GainFunction,
    angular_velocities,
    check_ensemble,
    closed_loop_field,
    random_ensemble,
)
from .formation_topology import WeightedTopology

INTEGRATORS = ("euler", "rk4")


class NonFiniteStateError(RuntimeError):
    """Integration produced a non-finite or off-sphere state."""


class NotConvergedError(RuntimeError):
    """An estimate was requested on a window before formation convergence."""


@dataclass(frozen=True)
class SimConfig:
    topology: WeightedTopology
    gain: GainFunction
    dt: float = 1e-3
    horizon: float = 200.0
    integrator: str = "rk4"
    stride: int = 100
    seed: Optional[int] = None
    initial_state: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.initial_state is None and self.seed is None:
            raise ValueError("provide either a seed or an explicit initial state")
        if self.initial_state is not None and self.seed is not None:
            raise ValueError("seed and explicit initial state are mutually exclusive")
        if self.initial_state is not None:
            state = check_ensemble(self.initial_state)
            if state.shape != (self.topology.n, 3):
                raise ValueError(
                    f"initial state shape {state.shape} does not match n={self.topology.n}"
                )
            object.__setattr__(self, "initial_state", state)

    def initial(self) -> np.ndarray:
        if self.initial_state is not None:
            return self.initial_state.copy()
        return random_ensemble(self.topology.n, self.seed)


def pair_indices(n: int) -> list[tuple[int, int]]:
    """Unordered pairs (0-indexed) in the canonical order (1,2),(1,3),...,(3,4)."""
    return list(itertools.combinations(range(n), 2))


def pair_cosines(state) -> np.ndarray:
    """Pairwise inner products of an (..., n, 3) ensemble, canonical pair order."""
    G = np.asarray(state, dtype=float)
    n = G.shape[-2]
    c = G @ np.swapaxes(G, -1, -2)
    ii, jj = zip(*pair_indices(n))
    return c[..., list(ii), list(jj)]


def formation_error(state) -> np.ndarray | float:
    """Max over pairs of |cos(theta_ij) + 1/3|; zero exactly on the tetrahedron set."""
    G = np.asarray(state, dtype=float)
    if G.shape[-2] != 4:
        raise ValueError("formation_error is defined for 4 agents")
    err = np.abs(pair_cosines(G) + 1.0 / 3.0).max(axis=-1)
    return float(err) if err.ndim == 0 else err


# ---------------------------------------------------------------------------
# Lyapunov value

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(80)


def _pair_potential(cosines, gain: GainFunction) -> np.ndarray:
    """Integral of f(x) sin(x) from theta to pi, vectorized over cosines."""
    c = np.clip(np.asarray(cosines, dtype=float), -1.0, 1.0)
    if gain.family == AFFINE_COSINE:
        return 0.5 * gain.a * (1.0 + c) ** 2
    theta = np.arccos(c)
    half = 0.5 * (np.pi - theta)
    x = half[..., None] * (_GL_NODES + 1.0) + theta[..., None]
    return half * np.sum(_GL_WEIGHTS * gain.eval(x) * np.sin(x), axis=-1)


def lyapunov_value(state, gain: GainFunction) -> float:
    """Energy-like value summing the pair potential over all unordered pairs.

    Closed form for the affine-cosine family; adaptive quadrature otherwise.
    Nonincreasing along complete-graph trajectories for admissible gains.
    """
    G = check_ensemble(state)
    if G.ndim != 2:
        raise ValueError("lyapunov_value expects a single ensemble; see trajectory recording")
    cos = pair_cosines(G)
    if gain.family == AFFINE_COSINE:
        return float(np.sum(0.5 * gain.a * (1.0 + cos) ** 2))
    total = 0.0
    for c in cos:
        theta = math.acos(min(1.0, max(-1.0, c)))
        val, _ = quad(lambda x: float(gain.eval(x)) * math.sin(x), theta, math.pi)
        total += val
    return total


# ---------------------------------------------------------------------------
# stepping

def integrate_step(state, topo, gain, dt, method="euler") -> np.ndarray:
    """One exponential-map step of the closed loop; output rows exactly unit."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if method not in INTEGRATORS:
        raise ValueError(f"unknown integrator {method!r}")
    G = np.asarray(state, dtype=float)
    if method == "euler":
        w = angular_velocities(G, topo, gain)
    else:
        k1 = angular_velocities(G, topo, gain)
        k2 = angular_velocities(sg.exp_rotate(G, 0.5 * dt * k1), topo, gain)
        k3 = angular_velocities(sg.exp_rotate(G, 0.5 * dt * k2), topo, gain)
        k4 = angular_velocities(sg.exp_rotate(G, dt * k3), topo, gain)
        w = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return sg.exp_rotate(G, dt * w)


@dataclass
class Trajectory:
    """Recorded samples of one run (or a batch stacked on an inner axis).

    states has shape (m, n, 3) for a single run and (m, B, n, 3) for a batch;
    the observable arrays drop the trailing axes accordingly.
    """

    times: np.ndarray
    states: np.ndarray
    cos_pairs: np.ndarray
    lyapunov: np.ndarray
    max_field: np.ndarray

    def __post_init__(self):
        m = len(self.times)
        if not (len(self.states) == len(self.cos_pairs) == len(self.lyapunov) == m):
            raise ValueError("trajectory arrays must share the time axis length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def batched(self) -> bool:
        return self.states.ndim == 4

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def formation_errors(self) -> np.ndarray:
        return np.abs(self.cos_pairs + 1.0 / 3.0).max(axis=-1)


def _record_samples(states, topo, gain):
    cos = pair_cosines(states)
    V = np.sum(_pair_potential(cos, gain), axis=-1)
    speeds = np.linalg.norm(closed_loop_field(states, topo, gain), axis=-1)
    return cos, V, speeds.max(axis=-1)


def _sample_steps(nsteps: int, stride: int) -> np.ndarray:
    steps = list(range(0, nsteps, stride))
    steps.append(nsteps)
    return np.asarray(steps)


def run(initial, topo, gain, dt, horizon, integrator="rk4", stride=1) -> Trajectory:
    """Integrate from `initial` (single (n,3) ensemble or (B,n,3) batch).

    Recording happens every `stride` steps plus always the final step.
    Raises NonFiniteStateError with a step diagnostic if the state leaves
    the sphere or goes non-finite.
    """
    G = check_ensemble(initial).copy()
    single = G.ndim == 2
    if single:
        G = G[None]
    nsteps = int(round(horizon / dt))
    if nsteps < 1:
        raise ValueError("horizon shorter than one step")
    steps = _sample_steps(nsteps, stride)
    rec = np.empty((len(steps),) + G.shape)

    kind = _fastpath.gain_kind(gain) if _fastpath.HAVE_NUMBA else None
    if kind is not None:
        a = gain.a if gain.a is not None else 1.0
        status, at = _fastpath.run_loop(
            G,
            topo.weight_matrix(),
            kind,
            float(a),
            float(dt),
            nsteps,
            int(stride),
            integrator == "rk4",
            rec,
        )
        if status != _fastpath.STATUS_OK:
            what = "non-finite state" if status == _fastpath.STATUS_NONFINITE else "norm drift"
            raise NonFiniteStateError(f"{what} at step {at} (t={at * dt:.6g})")
    else:
        r = 0
        for s in range(nsteps):
            if s % stride == 0:
                rec[r] = G
                r += 1
            G = integrate_step(G, topo, gain, dt, method=integrator)
            if not np.all(np.isfinite(G)):
                raise NonFiniteStateError(f"non-finite state at step {s + 1} (t={(s + 1) * dt:.6g})")
            if np.abs(np.linalg.norm(G, axis=-1) - 1.0).max() > 1e-9:
                raise NonFiniteStateError(f"norm drift at step {s + 1} (t={(s + 1) * dt:.6g})")
        rec[r] = G

    times = steps * dt
    if single:
        rec = rec[:, 0]
    cos, V, maxfield = _record_samples(rec, topo, gain)
    return Trajectory(times=times, states=rec, cos_pairs=cos, lyapunov=V, max_field=maxfield)


def simulate(config: SimConfig) -> Trajectory:
    """Run one configured simulation; deterministic for a fixed config."""
    return run(
        config.initial(),
        config.topology,
        config.gain,
        config.dt,
        config.horizon,
        integrator=config.integrator,
        stride=config.stride,
    )


# ---------------------------------------------------------------------------
# trajectory diagnostics

def converged_time(traj: Trajectory, tol: float = 1e-6, hold: float = 1.0) -> Optional[float]:
    """First sample time from which the formation error stays below tol.

    Requires the error to remain below tol for at least `hold` time units
    (through the end of the trajectory if it is shorter than that), so a
    transversal crossing does not count as convergence.
    """
    if traj.batched:
        raise ValueError("converged_time works on single-run trajectories")
    err = traj.formation_errors()
    below = err < tol
    if not below[-1]:
        return None
    # last index where the error was above tol
    above = np.nonzero(~below)[0]
    start = 0 if len(above) == 0 else above[-1] + 1
    t0 = traj.times[start]
    if traj.times[-1] - t0 < hold and start > 0:
        return None
    return float(t0)


def agent_drift(traj: Trajectory, agent: int, window: float) -> float:
    """Largest geodesic excursion of one agent from its pose at window start."""
    sel = traj.times >= traj.times[-1] - window
    g = traj.states[sel, agent - 1]
    return float(sg.geodesic_distance(g[0], g).max())


def rotation_rate_estimate(
    traj: Trajectory,
    agent: int,
    window: float,
    axis_agent: int = 1,
    error_tol: float = 1e-6,
) -> float:
    """Least-squares angular rate of `agent` about the axis through `axis_agent`.

    The azimuth of the agent in a plane orthogonal to the axis is unwrapped
    and fitted linearly in time over the trailing `window`.  The sign is the
    measured spin direction; callers interested in the speed take abs().
    Raises NotConvergedError if the formation error exceeds error_tol
    anywhere in the window.
    """
    if traj.batched:
        raise ValueError("rotation_rate_estimate works on single-run trajectories")
    sel = traj.times >= traj.times[-1] - window
    if np.count_nonzero(sel) < 4:
        raise ValueError("window too short: fewer than 4 recorded samples")
    err = traj.formation_errors()[sel]
    if err.max() >= error_tol:
        raise NotConvergedError(
            f"formation error {err.max():.3e} in window exceeds {error_tol:g}"
        )
    axis = sg.normalized(traj.states[-1, axis_agent - 1])
    u = np.cross(axis, sg.E3 if abs(axis[2]) < 0.9 else sg.E1)
    u = sg.normalized(u)
    v = np.cross(axis, u)
    g = traj.states[sel, agent - 1]
    az = np.unwrap(np.arctan2(g @ v, g @ u))
    t = traj.times[sel]
    slope = np.polyfit(t, az, 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# CSV export

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv_header(n: int) -> str:
    cols = ["t"]
    cols += [f"g{i + 1}{ax}" for i in range(n) for ax in "xyz"]
    cols += [f"c{i + 1}{j + 1}" for i, j in pair_indices(n)]
    cols += ["V", "maxfield"]
    return ",".join(cols)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per recorded sample; floats printed with 17 significant digits."""
    if traj.batched:
        raise ValueError("CSV export works on single-run trajectories")
    n = traj.states.shape[-2]
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv_header(n) + "\n")
        for k in range(traj.n_samples):
            row = [traj.times[k]]
            row += list(traj.states[k].ravel())
            row += list(traj.cos_pairs[k])
            row += [traj.lyapunov[k], traj.max_field[k]]
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_trajectory_csv(path) -> dict:
    """Load a trajectory CSV back into arrays keyed by column group."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    n = sum(1 for c in names if c.endswith("x") and c.startswith("g"))
    times = np.atleast_1d(data["t"])
    states = np.stack(
        [
            np.stack([np.atleast_1d(data[f"g{i + 1}{ax}"]) for ax in "xyz"], axis=-1)
            for i in range(n)
        ],
        axis=1,
    )
    cos = np.stack(
        [np.atleast_1d(data[f"c{i + 1}{j + 1}"]) for i, j in pair_indices(n)], axis=-1
    )
    return {
        "times": times,
        "states": states,
        "cos_pairs": cos,
        "lyapunov": np.atleast_1d(data["V"]),
        "max_field": np.atleast_1d(data["maxfield"]),
    }

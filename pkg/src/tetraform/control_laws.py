"""Gain-function families, distinguished formations, and the closed-loop fields.

The control drives every agent away from its neighbors along the connecting
great circles; with the right interaction graph the balance point of that
mutual repulsion is the regular tetrahedron.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import sphere_geometry as sg
from .formation_topology import WeightedTopology, complete_graph

TETRAHEDRON_COS = -1.0 / 3.0
TETRAHEDRON_ANGLE = math.acos(TETRAHEDRON_COS)

MONOTONE_POSITIVE = "monotone_positive"
AFFINE_COSINE = "affine_cosine"
CUSTOM = "custom"


class SingularChartError(ValueError):
    """Raised when azimuth/elevation rates are requested at a chart pole."""


@dataclass(frozen=True)
class GainFunction:
    """Scalar gain f(theta) on [0, pi] with its derivative and family tag.

    `eval_cos` is the same gain as a function of the cosine of the angle,
    F(c) = f(arccos c); the closed-loop equations only ever need f through
    the pairwise cosines, so this form avoids needless arccos/cos round
    trips for families where F is available directly.
    """

    eval: Callable
    deriv: Optional[Callable]
    eval_cos: Callable
    family: str
    a: Optional[float] = None

    def __call__(self, theta):
        return self.eval(theta)

    def eval_cos_deriv(self, c, h=1e-6):
        """dF/dc at cosine value c; chain rule when deriv exists, else central diff."""
        if self.family == AFFINE_COSINE:
            return self.a
        if self.deriv is not None:
            c = np.clip(c, -1.0, 1.0)
            s = np.sqrt(1.0 - c * c)
            return -self.deriv(np.arccos(c)) / s
        return (self.eval_cos(c + h) - self.eval_cos(c - h)) / (2.0 * h)


def _check_monotone_positive(f, fprime, n_grid=256):
    theta = np.linspace(1e-3, math.pi - 1e-3, n_grid)
    fv = np.asarray(f(theta), dtype=float)
    if not np.all(fv > 0):
        raise ValueError("gain is not strictly positive on (0, pi)")
    if fprime is not None:
        dv = np.asarray(fprime(theta), dtype=float)
        if not np.all(dv < 0):
            raise ValueError("gain derivative is not strictly negative on (0, pi)")


def affine_cosine_gain(a: float) -> GainFunction:
    """f(theta) = a cos(theta) + a with a > 0."""
    if not a > 0:
        raise ValueError("affine-cosine gain needs a > 0")
    a = float(a)
    return GainFunction(
        eval=lambda th: a * np.cos(th) + a,
        deriv=lambda th: -a * np.sin(th),
        eval_cos=lambda c: a * c + a,
        family=AFFINE_COSINE,
        a=a,
    )


def exponential_gain() -> GainFunction:
    """f(theta) = exp(-theta); positive with negative slope everywhere."""
    return GainFunction(
        eval=lambda th: np.exp(-np.asarray(th, dtype=float)),
        deriv=lambda th: -np.exp(-np.asarray(th, dtype=float)),
        eval_cos=lambda c: np.exp(-np.arccos(np.clip(c, -1.0, 1.0))),
        family=MONOTONE_POSITIVE,
        a=None,
    )


def custom_gain(f, fprime=None, monotone=False) -> GainFunction:
    """Wrap opaque callables; grid-validates the monotone contract if claimed."""
    if monotone:
        _check_monotone_positive(f, fprime)
    return GainFunction(
        eval=f,
        deriv=fprime,
        eval_cos=lambda c: f(np.arccos(np.clip(c, -1.0, 1.0))),
        family=MONOTONE_POSITIVE if monotone else CUSTOM,
        a=None,
    )


_GAIN_SPEC_RE = re.compile(r"^\s*(\w+)\s*(.*)$")


def parse_gain_spec(spec) -> GainFunction:
    """Build a gain from a config entry.

    Accepts {"type": "affine_cosine", "a": 1.0}, {"type": "exponential"},
    or the compact string forms "affine_cosine a=1" / "exponential".
    """
    if isinstance(spec, str):
        m = _GAIN_SPEC_RE.match(spec)
        if not m:
            raise ValueError(f"cannot parse gain spec {spec!r}")
        name, rest = m.group(1), m.group(2)
        params = {}
        for tok in rest.replace(",", " ").split():
            if "=" not in tok:
                raise ValueError(f"bad gain parameter {tok!r} in {spec!r}")
            key, val = tok.split("=", 1)
            params[key] = float(val)
        spec = {"type": name, **params}
    if not isinstance(spec, dict):
        raise ValueError(f"gain spec must be a string or object, got {type(spec).__name__}")
    kind = spec.get("type")
    if kind == "affine_cosine":
        if "a" not in spec:
            raise ValueError("affine_cosine gain needs parameter 'a'")
        return affine_cosine_gain(float(spec["a"]))
    if kind == "exponential":
        return exponential_gain()
    raise ValueError(f"unknown gain type {kind!r}")


def gain_to_config(gain: GainFunction) -> dict:
    if gain.family == AFFINE_COSINE:
        return {"type": "affine_cosine", "a": gain.a}
    return {"type": "exponential"}


# ---------------------------------------------------------------------------
# ensembles and distinguished formations

def check_ensemble(state, tol=1e-9) -> np.ndarray:
    """Validate an (..., n, 3) stack of unit vectors and return it as float array."""
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != 3 or state.ndim < 2:
        raise ValueError(f"ensemble must have shape (..., n, 3), got {state.shape}")
    if not np.all(np.isfinite(state)):
        raise ValueError("ensemble contains non-finite entries")
    err = np.abs(np.linalg.norm(state, axis=-1) - 1.0).max()
    if err > tol:
        raise ValueError(f"ensemble rows deviate from unit norm by {err:.3e}")
    return state


def random_ensemble(n: int, seed) -> np.ndarray:
    """n agents drawn i.i.d. uniform on the sphere; deterministic per seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sg.uniform_sphere(rng, n)


def reference_tetrahedron_rpy():
    """Azimuth/elevation arrays of the canonical tetrahedron used for linearization."""
    idx = np.arange(4)
    psi = np.pi / 4 + idx * np.pi / 2
    phi = (-1.0) ** idx * np.arcsin(np.sqrt(3.0) / 3.0)
    return sg.wrap_angle(psi), phi


def reference_tetrahedron() -> np.ndarray:
    """Canonical regular tetrahedron with agents alternating above/below the equator."""
    psi, phi = reference_tetrahedron_rpy()
    return sg.rpy_embed(psi, phi)


def polar_tetrahedron() -> np.ndarray:
    """Regular tetrahedron with agent 1 at the pole and agent 2 in the +x half of XOZ."""
    s, c = math.sin(TETRAHEDRON_ANGLE), TETRAHEDRON_COS
    half = math.sqrt(6.0) / 3.0
    return np.array(
        [
            [0.0, 0.0, 1.0],
            [s, 0.0, c],
            [-s / 2.0, half, c],
            [-s / 2.0, -half, c],
        ]
    )


def cross_formation() -> np.ndarray:
    """Coplanar equilibrium with pairwise cosines in {0, -1}; unstable."""
    return np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 0], [0, -1.0, 0]])


# ---------------------------------------------------------------------------
# closed-loop fields

def angular_velocities(state, topo: WeightedTopology, gain: GainFunction) -> np.ndarray:
    """Commanded angular velocity of every agent, shape (..., n, 3).

    omega_i = -sum_j W(i,j) f(theta_ij) cross(Gamma_i, Gamma_j); each output
    is orthogonal to its own agent by construction.
    """
    G = np.asarray(state, dtype=float)
    W = topo.weight_matrix()
    c = np.clip(G @ np.swapaxes(G, -1, -2), -1.0, 1.0)
    coeff = W * gain.eval_cos(c)
    s = coeff @ G
    return -np.cross(G, s)


def control_velocity(i: int, state, topo: WeightedTopology, gain: GainFunction) -> np.ndarray:
    """Angular velocity commanded to agent i (1-based node label)."""
    G = check_ensemble(state)
    if not (1 <= i <= topo.n):
        raise ValueError(f"agent {i} outside 1..{topo.n}")
    return angular_velocities(G, topo, gain)[..., i - 1, :]


def closed_loop_field(state, topo: WeightedTopology, gain: GainFunction) -> np.ndarray:
    """Velocity of every agent under the closed loop: dGamma_i/dt, shape (..., n, 3)."""
    G = np.asarray(state, dtype=float)
    return np.cross(angular_velocities(G, topo, gain), G)


def rpy_closed_loop_field(angles, gain: GainFunction):
    """Azimuth/elevation rates of the complete-graph closed loop.

    `angles` is an (..., n, 2) array of (psi, phi) rows (a list of RpyAngles
    works).  Returns (psi_dot, phi_dot) with shape (..., n) each.  This chart
    form exists as a cross-check oracle for the Cartesian field; it is only
    stated for the unweighted all-to-all coupling, and it blows up at the
    poles, where a SingularChartError is raised instead of regularizing.
    """
    ang = np.asarray(angles, dtype=float)
    if ang.shape[-1] != 2:
        raise ValueError("angles must have shape (..., n, 2) of (psi, phi) rows")
    psi, phi = ang[..., 0], ang[..., 1]
    cphi = np.cos(phi)
    if np.any(np.abs(cphi) < 1e-9):
        raise SingularChartError("elevation too close to a pole: cos(phi) ~ 0")
    dpsi = psi[..., :, None] - psi[..., None, :]
    sphi = np.sin(phi)
    # pairwise geodesic distance expressed through the chart
    ct = cphi[..., :, None] * cphi[..., None, :] * np.cos(dpsi) + sphi[..., :, None] * sphi[..., None, :]
    theta = np.arccos(np.clip(ct, -1.0, 1.0))
    f = np.asarray(gain.eval(theta), dtype=float)
    n = ang.shape[-2]
    f[..., np.arange(n), np.arange(n)] = 0.0
    psi_dot = np.sum(f * np.sin(dpsi) * cphi[..., None, :], axis=-1) / cphi
    phi_dot = np.sum(
        f
        * (
            sphi[..., :, None] * cphi[..., None, :] * np.cos(dpsi)
            - cphi[..., :, None] * sphi[..., None, :]
        ),
        axis=-1,
    )
    return psi_dot, phi_dot


def rpy_field_of_state(state, gain: GainFunction):
    """Convenience: chart rates for a Cartesian ensemble away from the poles."""
    G = check_ensemble(state)
    phi = np.arcsin(np.clip(G[..., 2], -1.0, 1.0))
    psi = np.arctan2(G[..., 1], G[..., 0])
    return rpy_closed_loop_field(np.stack([psi, phi], axis=-1), gain)


_COMPLETE4 = complete_graph(4)


def complete_graph4() -> WeightedTopology:
    """The all-to-all 4-agent graph (shared instance)."""
    return _COMPLETE4

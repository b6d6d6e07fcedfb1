"""Primitive geometry on the unit sphere and the rotation group.

All vector quantities are plain numpy arrays with the last axis of length 3.
Every function broadcasts over leading axes unless its docstring says
otherwise, and everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


class RpyAngles(NamedTuple):
    """Azimuth/elevation pair (psi in [-pi, pi), phi in [-pi/2, pi/2])."""

    psi: float
    phi: float


def wrap_angle(x):
    """Wrap angle(s) into [-pi, pi)."""
    return np.mod(np.asarray(x) + np.pi, 2.0 * np.pi) - np.pi


def normalized(v):
    """Scale v to unit length along the last axis."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def is_unit(v, tol=1e-12):
    v = np.asarray(v, dtype=float)
    return bool(np.all(np.abs(np.linalg.norm(v, axis=-1) - 1.0) <= tol))


def check_unit(v, tol=1e-12):
    """Return v unchanged after validating unit norm within tol."""
    v = np.asarray(v, dtype=float)
    err = np.abs(np.linalg.norm(v, axis=-1) - 1.0).max()
    if err > tol:
        raise ValueError(f"vector is not unit length (deviation {err:.3e} > {tol:g})")
    return v


def is_rotation(R, tol=1e-10):
    """True if R is orthogonal with determinant +1 within tol."""
    R = np.asarray(R, dtype=float)
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max() <= tol
    return bool(ortho and np.abs(np.linalg.det(R) - 1.0).max() <= tol)


def hat(v):
    """Skew-symmetric matrix of v, so that hat(v) @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    zero = np.zeros_like(x)
    rows = [
        np.stack([zero, -z, y], axis=-1),
        np.stack([z, zero, -x], axis=-1),
        np.stack([-y, x, zero], axis=-1),
    ]
    return np.stack(rows, axis=-2)


def rodrigues_exp(axis, angle):
    """Rotation matrix for a right-handed rotation by `angle` about unit `axis`."""
    k = check_unit(axis, tol=1e-9)
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle)[..., None, None]
    s = np.sin(angle)[..., None, None]
    outer = k[..., :, None] * k[..., None, :]
    return c * np.eye(3) + s * hat(k) + (1.0 - c) * outer


def exp_rotate(v, w):
    """Rotate v by the rotation exp(hat(w)), i.e. by angle |w| about w/|w|.

    Rotating with the axis-angle closed form keeps |v| exactly; no
    renormalization is applied afterwards.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    a = np.linalg.norm(w, axis=-1, keepdims=True)
    k = np.divide(w, a, out=np.zeros_like(w), where=a > 0.0)
    ca = np.cos(a)
    sa = np.sin(a)
    kv = np.sum(k * v, axis=-1, keepdims=True)
    return v * ca + np.cross(k, v) * sa + k * kv * (1.0 - ca)


def geodesic_distance(a, b):
    """Great-circle angle between unit vectors, in [0, pi].

    The inner product is clamped to [-1, 1] before arccos as a float guard.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.arccos(np.clip(np.sum(a * b, axis=-1), -1.0, 1.0))


def rotation_axis(a, b):
    """Unit rotation axis carrying a to b along the connecting great circle.

    For 0 < theta < pi this is cross(a, b)/sin(theta).  In the degenerate
    aligned/antipodal cases any orthogonal direction would do; we pick a
    deterministic one: the normalized projection of e3 onto the plane
    orthogonal to a, or e1 when a is parallel to e3.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1:
        raise ValueError("rotation_axis expects single vectors")
    cr = np.cross(a, b)
    n = np.linalg.norm(cr)
    if n >= 1e-12:
        return cr / n
    p = E3 - np.dot(E3, a) * a
    pn = np.linalg.norm(p)
    if pn < 1e-9:
        return E1.copy()
    return p / pn


def rpy_embed(psi, phi):
    """Point on the sphere at azimuth psi and elevation phi."""
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        [np.cos(psi) * np.cos(phi), np.sin(psi) * np.cos(phi), np.sin(phi)],
        axis=-1,
    )


def rpy_extract(g):
    """Inverse of rpy_embed for a single unit vector.

    At the poles the azimuth is undefined; we set psi = 0 there (the same
    convention atan2(0, 0) = 0 already gives at (1, 0, 0)).
    """
    g = check_unit(g, tol=1e-9)
    if g.ndim != 1:
        raise ValueError("rpy_extract expects a single vector")
    phi = math.asin(min(1.0, max(-1.0, g[2])))
    if math.cos(phi) < 1e-12:
        psi = 0.0
    else:
        psi = math.atan2(g[1], g[0])
        if psi == math.pi:
            psi = -math.pi
    return RpyAngles(psi=psi, phi=phi)


def frame_rotation_1(gamma):
    """In-plane spin about the z-axis (first rotation of the placement sequence)."""
    c, s = math.cos(gamma), math.sin(gamma)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def frame_rotation_2(phi):
    """Tilt taking the pole down to elevation phi.

    Not an elementary y-rotation: the corner diagonal entries are sin(phi),
    so the identity is reached at phi = pi/2 rather than 0.
    """
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[s, 0.0, c], [0.0, 1.0, 0.0], [-c, 0.0, s]])


def frame_rotation_3(psi):
    """Azimuth rotation about the z-axis (last rotation of the placement sequence)."""
    return frame_rotation_1(psi)


def uniform_sphere(rng, size=None):
    """Uniform point(s) on the sphere drawn from an existing Generator.

    size=None gives a single (3,) vector, otherwise shape (size, 3).
    """
    shape = (3,) if size is None else (size, 3)
    return normalized(rng.standard_normal(shape))


def sample_uniform_sphere(rng_seed):
    """Deterministic uniform point on the sphere for a given integer seed."""
    return uniform_sphere(np.random.default_rng(rng_seed))

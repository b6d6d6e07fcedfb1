"""Split of the 4-agent state into relative shape and rigid placement.

The shape part is the vector of six pairwise cosines (c12, c13, c14, c23,
c24, c34); the placement part is three angles (phi1, psi1, gamma) locating
agents 1 and 2 against the inertial frame.  The shape evolves autonomously
under the closed loop, which is what makes this change of coordinates
useful: the whole tetrahedron family collapses to the single shape point
(-1/3, ..., -1/3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sphere_geometry as sg
from .control_laws import GainFunction, check_ensemble

XI_TETRAHEDRON = np.full(6, -1.0 / 3.0)


@dataclass(frozen=True)
class XiCoordinates:
    """Shape cosines plus placement angles of a 4-agent ensemble."""

    xi_s: np.ndarray
    phi1: float
    psi1: float
    gamma: float

    def __post_init__(self):
        xi = np.asarray(self.xi_s, dtype=float)
        if xi.shape != (6,):
            raise ValueError("xi_s must have 6 components")
        if np.any(np.abs(xi) > 1.0 + 1e-12):
            raise ValueError("xi_s components must lie in [-1, 1]")
        object.__setattr__(self, "xi_s", np.clip(xi, -1.0, 1.0))

    @property
    def xi_c(self) -> np.ndarray:
        return np.array([self.phi1, self.psi1, self.gamma])


def phi_transform(state) -> XiCoordinates:
    """Coordinates of a 4-agent ensemble: six cosines plus (phi1, psi1, gamma).

    gamma is the in-plane spin angle of the placement sequence
    R3(psi1) R2(phi1) R1(gamma); it is read off agents 1 and 2 directly.
    Conventions at the undefined points: psi = 0 for an agent on the z-axis
    (and at the atan2(0,0) point (1,0,0)), gamma = 0 when agents 1 and 2
    coincide.
    """
    G = check_ensemble(state)
    if G.shape != (4, 3):
        raise ValueError("phi_transform expects a single 4-agent ensemble")
    c = np.clip(G @ G.T, -1.0, 1.0)
    xi_s = np.array([c[0, 1], c[0, 2], c[0, 3], c[1, 2], c[1, 3], c[2, 3]])
    psi1, phi1 = sg.rpy_extract(G[0])
    psi2, phi2 = sg.rpy_extract(G[1])
    if np.allclose(G[0], G[1], rtol=0.0, atol=1e-15):
        gamma = 0.0
    else:
        gamma_y = math.cos(phi2) * math.sin(psi2 - psi1)
        gamma_x = math.sin(phi1) * math.cos(phi2) * math.cos(psi2 - psi1) - math.cos(
            phi1
        ) * math.sin(phi2)
        gamma = math.atan2(gamma_y, gamma_x)
        if gamma == math.pi:
            gamma = -math.pi
    return XiCoordinates(xi_s=xi_s, phi1=phi1, psi1=psi1, gamma=gamma)


def gram_identity_residual(xi_s) -> np.ndarray | float:
    """Six-cosine compatibility residual; zero iff xi_s can come from four unit vectors.

    Evaluates the closed-form identity satisfied by the pairwise cosines of
    any four points on the sphere, minus one.  Broadcasts over leading axes.
    """
    x = np.asarray(xi_s, dtype=float)
    c12, c13, c14, c23, c24, c34 = (x[..., k] for k in range(6))
    val = (
        c12**2 + c13**2 + c14**2 + c23**2 + c24**2 + c34**2
        - c14**2 * c23**2
        - c13**2 * c24**2
        - c12**2 * c34**2
        - 2.0 * (c12 * c13 * c23 + c23 * c24 * c34 + c13 * c14 * c34 + c12 * c14 * c24)
        + 2.0 * (c13 * c14 * c23 * c24 + c12 * c13 * c24 * c34 + c12 * c14 * c23 * c34)
    )
    out = val - 1.0
    return float(out) if out.ndim == 0 else out


def reconstruct(xi: XiCoordinates, reflection: int = 1) -> np.ndarray:
    """Rebuild a 4-agent ensemble from coordinates.

    The cosines pin the shape only up to mirror image, so the caller picks
    the chirality: reflection=+1 places the normalized agent 3 at positive
    y, -1 at negative y.  The normalized frame puts agent 1 at the pole and
    agent 2 in the x >= 0 half of the XOZ plane; the placement angles then
    rotate the frame into position.  Raises ValueError when the cosines are
    not realizable or mutually inconsistent.
    """
    if reflection not in (1, -1):
        raise ValueError("reflection must be +1 or -1")
    x = np.asarray(xi.xi_s, dtype=float)
    res = abs(gram_identity_residual(x))
    if res >= 1e-6:
        raise ValueError(f"xi_s is not realizable: identity residual {res:.3e}")
    c12, c13, c14, c23, c24, c34 = x
    s12 = math.sqrt(max(0.0, 1.0 - c12 * c12))
    if s12 < 1e-9:
        raise ValueError("agents 1 and 2 aligned or antipodal: normalized frame undefined")
    g1 = np.array([0.0, 0.0, 1.0])
    g2 = np.array([s12, 0.0, c12])
    x3 = (c23 - c12 * c13) / s12
    y3sq = 1.0 - x3 * x3 - c13 * c13
    if y3sq < -1e-9:
        raise ValueError("cosine triple (c12, c13, c23) is not realizable")
    y3 = reflection * math.sqrt(max(0.0, y3sq))
    g3 = np.array([x3, y3, c13])
    x4 = (c24 - c12 * c14) / s12
    if abs(y3) > 1e-9:
        y4 = (c34 - x3 * x4 - c13 * c14) / y3
    else:
        y4sq = 1.0 - x4 * x4 - c14 * c14
        if y4sq < -1e-9:
            raise ValueError("cosine triple (c12, c14, c24) is not realizable")
        y4 = reflection * math.sqrt(max(0.0, y4sq))
    g4 = np.array([x4, y4, c14])
    norm_err = abs(float(np.linalg.norm(g4)) - 1.0)
    if norm_err > 1e-6:
        raise ValueError(f"cosines are mutually inconsistent (agent-4 defect {norm_err:.3e})")
    g4 /= np.linalg.norm(g4)
    R = sg.frame_rotation_3(xi.psi1) @ sg.frame_rotation_2(xi.phi1) @ sg.frame_rotation_1(xi.gamma)
    return np.stack([g1, g2, g3, g4]) @ R.T


def cosine_rate_matrix(xi_s) -> np.ndarray:
    """The symmetric 6x6 matrix M(xi) with d(xi_s)/dt = M(xi) Fhat(xi).

    Entry pattern: diagonal 2 xi_p^2 - 2; zero where the two pairs share no
    agent (the counterdiagonal); xi_p xi_q - xi_r elsewhere, with r the pair
    closing the triangle.  Broadcasts to (..., 6, 6).
    """
    x = np.asarray(xi_s, dtype=float)
    x1, x2, x3, x4, x5, x6 = (x[..., k] for k in range(6))
    z = np.zeros_like(x1)
    rows = [
        [2 * x1 * x1 - 2, x1 * x2 - x4, x1 * x3 - x5, x1 * x4 - x2, x1 * x5 - x3, z],
        [x1 * x2 - x4, 2 * x2 * x2 - 2, x2 * x3 - x6, x2 * x4 - x1, z, x2 * x6 - x3],
        [x1 * x3 - x5, x2 * x3 - x6, 2 * x3 * x3 - 2, z, x3 * x5 - x1, x3 * x6 - x2],
        [x1 * x4 - x2, x2 * x4 - x1, z, 2 * x4 * x4 - 2, x4 * x5 - x6, x4 * x6 - x5],
        [x1 * x5 - x3, z, x3 * x5 - x1, x4 * x5 - x6, 2 * x5 * x5 - 2, x5 * x6 - x4],
        [z, x2 * x6 - x3, x3 * x6 - x2, x4 * x6 - x5, x5 * x6 - x4, 2 * x6 * x6 - 2],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def xi_s_field(xi_s, gain: GainFunction) -> np.ndarray:
    """Time derivative of the shape cosines under the complete-graph closed loop.

    Takes no placement argument: the shape subsystem is autonomous.
    Broadcasts over leading axes of xi_s.
    """
    x = np.asarray(xi_s, dtype=float)
    F = gain.eval_cos(np.clip(x, -1.0, 1.0))
    M = cosine_rate_matrix(x)
    return np.einsum("...ij,...j->...i", M, F)


def write_xi_trace_csv(traj, path) -> None:
    """Per-sample shape cosines and placement angles of a single-run trajectory."""
    if traj.batched:
        raise ValueError("xi-trace export works on single-run trajectories")
    header = "t,c12,c13,c14,c23,c24,c34,phi1,psi1,gamma"
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for k in range(traj.n_samples):
            xi = phi_transform(traj.states[k])
            row = [traj.times[k], *xi.xi_s, xi.phi1, xi.psi1, xi.gamma]
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")

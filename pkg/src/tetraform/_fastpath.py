"""Jitted integration loop for the two named gain families.

The stepping math here mirrors simulator.integrate_step exactly (same
exponential update, same stage structure); tests pin the two paths against
each other.  Arbitrary callable gains stay on the numpy path.

Set TETRAFORM_NO_NUMBA=1 to force the numpy fallback.
"""

from __future__ import annotations

import math
import os

import numpy as np

GAIN_AFFINE = 0
GAIN_EXPONENTIAL = 1

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_NORM = 2

try:  # pragma: no cover - exercised implicitly everywhere
    if os.environ.get("TETRAFORM_NO_NUMBA"):
        raise ImportError("disabled via TETRAFORM_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _gain_value(kind, a, c):
    if kind == GAIN_AFFINE:
        return a * c + a
    c = min(1.0, max(-1.0, c))
    return math.exp(-math.acos(c))


@njit(cache=True)
def _omega(G, W, kind, a, om):
    B, n, _ = G.shape
    for b in range(B):
        for i in range(n):
            sx = 0.0
            sy = 0.0
            sz = 0.0
            for j in range(n):
                wij = W[i, j]
                if wij == 0.0:
                    continue
                c = G[b, i, 0] * G[b, j, 0] + G[b, i, 1] * G[b, j, 1] + G[b, i, 2] * G[b, j, 2]
                w = wij * _gain_value(kind, a, c)
                sx += w * G[b, j, 0]
                sy += w * G[b, j, 1]
                sz += w * G[b, j, 2]
            om[b, i, 0] = -(G[b, i, 1] * sz - G[b, i, 2] * sy)
            om[b, i, 1] = -(G[b, i, 2] * sx - G[b, i, 0] * sz)
            om[b, i, 2] = -(G[b, i, 0] * sy - G[b, i, 1] * sx)


@njit(cache=True)
def _exp_rotate(src, w, dt, dst):
    B, n, _ = src.shape
    for b in range(B):
        for i in range(n):
            wx = w[b, i, 0] * dt
            wy = w[b, i, 1] * dt
            wz = w[b, i, 2] * dt
            al = math.sqrt(wx * wx + wy * wy + wz * wz)
            vx = src[b, i, 0]
            vy = src[b, i, 1]
            vz = src[b, i, 2]
            if al == 0.0:
                dst[b, i, 0] = vx
                dst[b, i, 1] = vy
                dst[b, i, 2] = vz
                continue
            kx = wx / al
            ky = wy / al
            kz = wz / al
            ca = math.cos(al)
            sa = math.sin(al)
            kv = kx * vx + ky * vy + kz * vz
            cx = ky * vz - kz * vy
            cy = kz * vx - kx * vz
            cz = kx * vy - ky * vx
            dst[b, i, 0] = vx * ca + cx * sa + kx * kv * (1.0 - ca)
            dst[b, i, 1] = vy * ca + cy * sa + ky * kv * (1.0 - ca)
            dst[b, i, 2] = vz * ca + cz * sa + kz * kv * (1.0 - ca)


@njit(cache=True)
def _state_ok(G):
    B, n, _ = G.shape
    for b in range(B):
        for i in range(n):
            x = G[b, i, 0]
            y = G[b, i, 1]
            z = G[b, i, 2]
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
                return STATUS_NONFINITE
            if abs(math.sqrt(x * x + y * y + z * z) - 1.0) > 1e-9:
                return STATUS_NORM
    return STATUS_OK


@njit(cache=True)
def run_loop(G, W, kind, a, dt, nsteps, stride, use_rk4, rec):
    """Integrate in place, recording into rec at steps 0, stride, 2*stride, ...

    The final state after nsteps is written to the last rec slot.  Returns
    (status, step_index) where a nonzero status flags the first bad step.
    """
    B, n, _ = G.shape
    om = np.empty_like(G)
    k1 = np.empty_like(G)
    k2 = np.empty_like(G)
    k3 = np.empty_like(G)
    k4 = np.empty_like(G)
    tmp = np.empty_like(G)
    r = 0
    for s in range(nsteps):
        if s % stride == 0:
            rec[r] = G
            r += 1
        if use_rk4:
            _omega(G, W, kind, a, k1)
            _exp_rotate(G, k1, 0.5 * dt, tmp)
            _omega(tmp, W, kind, a, k2)
            _exp_rotate(G, k2, 0.5 * dt, tmp)
            _omega(tmp, W, kind, a, k3)
            _exp_rotate(G, k3, dt, tmp)
            _omega(tmp, W, kind, a, k4)
            for b in range(B):
                for i in range(n):
                    for d in range(3):
                        om[b, i, d] = (
                            k1[b, i, d] + 2.0 * k2[b, i, d] + 2.0 * k3[b, i, d] + k4[b, i, d]
                        ) / 6.0
        else:
            _omega(G, W, kind, a, om)
        _exp_rotate(G, om, dt, G)
        status = _state_ok(G)
        if status != STATUS_OK:
            rec[r] = G
            return status, s + 1
    rec[r] = G
    return STATUS_OK, nsteps


def gain_kind(gain) -> int | None:
    """Kernel code for a gain, or None when it must use the numpy path."""
    from .control_laws import AFFINE_COSINE, MONOTONE_POSITIVE

    if gain.family == AFFINE_COSINE:
        return GAIN_AFFINE
    if gain.family == MONOTONE_POSITIVE and gain.a is None:
        # the only built-in monotone gain is exp(-theta); verify cheaply
        probe = np.array([0.3, 1.7])
        if np.allclose(gain.eval(probe), np.exp(-probe), rtol=0, atol=1e-15):
            return GAIN_EXPONENTIAL
    return None

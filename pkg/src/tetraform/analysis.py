"""Numerical certification of the analytic claims behind the controller.

Everything here reduces a claimed spectrum, identity, or classification to
a finite computation: build the matrix, eigensolve, compare against the
closed-form prediction, report the pairing error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import sphere_geometry as sg
from . import xi_transform as xt
from .control_laws import (
    GainFunction,
    TETRAHEDRON_ANGLE,
    affine_cosine_gain,
    check_ensemble,
    closed_loop_field,
    exponential_gain,
    reference_tetrahedron_rpy,
    rpy_closed_loop_field,
)
from .formation_topology import WeightedTopology, complete_graph, rotating_tetrahedron_graph
from .simulator import formation_error

TAG_TETRAHEDRON = "Tetrahedron"
TAG_COPLANAR_GENERIC = "CoplanarGeneric"
TAG_CROSS_COPLANAR = "CrossCoplanar"
TAG_NOT_EQUILIBRIUM = "NotEquilibrium"


# ---------------------------------------------------------------------------
# structured matrices

def exchange_matrix(n: int) -> np.ndarray:
    """Permutation with ones on the counterdiagonal."""
    return np.fliplr(np.eye(n))


def lambda_matrix(n: int) -> np.ndarray:
    """All-ones matrix with the counterdiagonal zeroed."""
    if n < 2:
        raise ValueError("lambda_matrix needs n >= 2")
    return np.ones((n, n)) - exchange_matrix(n)


def lambda_spectrum_analytic(n: int) -> np.ndarray:
    """Closed-form eigenvalues {n-1} plus alternating (-1)^i, i = 2..n."""
    if n < 2:
        raise ValueError("lambda_spectrum_analytic needs n >= 2")
    vals = [float(n - 1)] + [(-1.0) ** i for i in range(2, n + 1)]
    return np.sort(np.asarray(vals))


def is_persymmetric(A, tol=1e-12) -> bool:
    """A equals J A^T J within tol (symmetry about the counterdiagonal)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("is_persymmetric expects a square matrix")
    J = exchange_matrix(A.shape[0])
    return bool(np.abs(A - J @ A.T @ J).max() <= tol)


def commutes_with_exchange(A, tol=1e-12) -> bool:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("commutes_with_exchange expects a square matrix")
    J = exchange_matrix(A.shape[0])
    return bool(np.abs(A @ J - J @ A).max() <= tol)


# ---------------------------------------------------------------------------
# spectra

@dataclass(frozen=True)
class SpectrumReport:
    """Analytic vs numeric eigenvalues paired on sorted real parts."""

    analytic: np.ndarray
    numeric: np.ndarray
    max_error: float
    matched: bool


def compare_spectra(analytic, numeric, tol) -> SpectrumReport:
    """Greedy pairing by sorted real part; imaginary residue counts as error."""
    analytic = np.sort(np.asarray(analytic, dtype=float))
    numeric = np.asarray(numeric, dtype=complex)
    order = np.argsort(numeric.real)
    numeric = numeric[order]
    if len(analytic) != len(numeric):
        raise ValueError("spectra have different sizes")
    pair_err = float(np.abs(numeric.real - analytic).max())
    imag_err = float(np.abs(numeric.imag).max())
    err = max(pair_err, imag_err)
    return SpectrumReport(
        analytic=analytic, numeric=numeric, max_error=err, matched=bool(err < tol)
    )


def numeric_jacobian(field, point, h=1e-5) -> np.ndarray:
    """Central-difference Jacobian of a vector field at a point."""
    if h <= 0:
        raise ValueError("step h must be > 0")
    x = np.asarray(point, dtype=float)
    f0 = np.asarray(field(x), dtype=float)
    J = np.empty((len(f0), len(x)))
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        fp = np.asarray(field(x + e), dtype=float)
        fm = np.asarray(field(x - e), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError(f"field returned non-finite values near coordinate {k}")
        J[:, k] = (fp - fm) / (2.0 * h)
    return J


def zeta_vector(psi, phi) -> np.ndarray:
    """Pack chart angles as [phi1, psi1, phi2, psi2, ...]."""
    z = np.empty(2 * len(psi))
    z[0::2] = phi
    z[1::2] = psi
    return z


def rpy_zeta_field(gain: GainFunction):
    """Complete-graph chart dynamics as a flat vector field on [phi, psi] pairs."""

    def field(z):
        phi = z[0::2]
        psi = z[1::2]
        psi_dot, phi_dot = rpy_closed_loop_field(np.stack([psi, phi], axis=-1), gain)
        out = np.empty_like(z)
        out[0::2] = phi_dot
        out[1::2] = psi_dot
        return out

    return field


def zeta_spectrum_analytic(gain: GainFunction) -> np.ndarray:
    """Eigenvalues of the full chart linearization at the reference tetrahedron.

    {2 sqrt(2) f'(theta*) twice, (4 sqrt(2)/3) f'(theta*) - (8/3) f(theta*)
    three times, 0 three times}; the three zeros span the rigid rotations.
    """
    th = TETRAHEDRON_ANGLE
    fs = float(gain.eval(th))
    if gain.deriv is not None:
        fps = float(gain.deriv(th))
    else:
        h = 1e-6
        fps = float((gain.eval(th + h) - gain.eval(th - h)) / (2 * h))
    lam12 = 2.0 * math.sqrt(2.0) * fps
    lam345 = 4.0 * math.sqrt(2.0) / 3.0 * fps - 8.0 / 3.0 * fs
    return np.sort(np.array([lam12] * 2 + [lam345] * 3 + [0.0] * 3))


def zeta_spectrum_numeric(gain: GainFunction, h=1e-5) -> np.ndarray:
    """Eigenvalues of the finite-difference 8x8 chart Jacobian at the tetrahedron."""
    psi, phi = reference_tetrahedron_rpy()
    J = numeric_jacobian(rpy_zeta_field(gain), zeta_vector(psi, phi), h=h)
    return np.linalg.eigvals(J)


def xi_s_spectrum_analytic(gain: GainFunction) -> np.ndarray:
    """Eigenvalues of the shape-subsystem linearization at the tetrahedron point.

    With F(c) = f(arccos c): {-8 F(-1/3), -(8/3) F'(-1/3) twice,
    -(8/3) F(-1/3) - (16/9) F'(-1/3) three times}.  All six are negative for
    any gain that is positive with negative slope at the tetrahedron angle.
    """
    c0 = -1.0 / 3.0
    F = float(gain.eval_cos(c0))
    Fp = float(gain.eval_cos_deriv(c0))
    vals = [-8.0 * F] + [-8.0 / 3.0 * Fp] * 2 + [-8.0 / 3.0 * F - 16.0 / 9.0 * Fp] * 3
    return np.sort(np.asarray(vals))


def xi_s_spectrum_numeric(gain: GainFunction, h=1e-5) -> np.ndarray:
    J = numeric_jacobian(lambda x: xt.xi_s_field(x, gain), xt.XI_TETRAHEDRON, h=h)
    return np.linalg.eigvals(J)


def equatorial_normal_jacobian(psi, gain: GainFunction, h=1e-5) -> np.ndarray:
    """Out-of-plane block of the linearization at an equatorial coplanar state.

    Agents sit at azimuths `psi` on the equator; the returned 4x4 matrix maps
    small elevations to elevation rates (the in-plane and out-of-plane blocks
    decouple there).  One positive eigenvalue certifies instability.
    """
    psi = np.asarray(psi, dtype=float)

    def field(phis):
        _, phi_dot = rpy_closed_loop_field(np.stack([psi, phis], axis=-1), gain)
        return phi_dot

    return numeric_jacobian(field, np.zeros_like(psi), h=h)


def cross_formation_normal_spectrum(gain: GainFunction, h=1e-5) -> np.ndarray:
    """Eigenvalues of the out-of-plane block at the cross formation ({+2a, -2a, 0, 0})."""
    psi = np.array([0.0, 0.5 * math.pi, math.pi, -0.5 * math.pi])
    return np.linalg.eigvals(equatorial_normal_jacobian(psi, gain, h=h))


# ---------------------------------------------------------------------------
# equilibria classification

@dataclass(frozen=True)
class EquilibriumClass:
    tag: str
    field_norm: float
    formation_error: float
    coplanarity: float


def classify_equilibrium(state, topo: WeightedTopology, gain: GainFunction) -> EquilibriumClass:
    """Sort a 4-agent state into the known equilibrium families.

    Threshold order: not an equilibrium if the field norm exceeds 1e-8;
    else tetrahedron (formation error < 1e-6); else cross (all cosines
    within 1e-6 of 0 or -1); else generically coplanar (third singular
    value of the stacked attitudes < 1e-6).  For equilibria of the
    complete-graph affine-cosine loop these cases are exhaustive.
    """
    G = check_ensemble(state)
    if G.shape != (4, 3):
        raise ValueError("classify_equilibrium expects a single 4-agent ensemble")
    fnorm = float(np.linalg.norm(closed_loop_field(G, topo, gain), axis=-1).max())
    ferr = formation_error(G)
    copl = float(np.linalg.svd(G, compute_uv=False)[2])
    if fnorm > 1e-8:
        tag = TAG_NOT_EQUILIBRIUM
    elif ferr < 1e-6:
        tag = TAG_TETRAHEDRON
    else:
        cos = xt.phi_transform(G).xi_s
        near_cross = np.all((np.abs(cos) < 1e-6) | (np.abs(cos + 1.0) < 1e-6))
        if near_cross:
            tag = TAG_CROSS_COPLANAR
        elif copl < 1e-6:
            tag = TAG_COPLANAR_GENERIC
        else:
            raise ValueError(
                "stationary state outside the known equilibrium families "
                f"(field {fnorm:.2e}, error {ferr:.2e}, coplanarity {copl:.2e})"
            )
    return EquilibriumClass(tag=tag, field_norm=fnorm, formation_error=ferr, coplanarity=copl)


# ---------------------------------------------------------------------------
# constrained-minimization oracle

def kkt_objective(X) -> float:
    """G(X) = sum of cos^2(x_i) + cos(x_i) over the four angles."""
    X = np.asarray(X, dtype=float)
    if X.shape != (4,):
        raise ValueError("objective takes exactly four angles")
    c = np.cos(X)
    return float(np.sum(c * c + c))


def kkt_minimize_oracle(grid_n: int = 60):
    """Global minimum of the objective over angles in [0, pi] summing to 2 pi.

    Brute force: exhaustive grid over (x1, x2, x3) with x4 eliminated by the
    sum constraint, followed by Nelder-Mead refinement from the best cell
    (infeasible points are given an infinite objective).  Returns
    (min_value, argmin) with the argmin as a 4-vector.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    ax = np.linspace(0.0, math.pi, grid_n)
    X1, X2, X3 = np.meshgrid(ax, ax, ax, indexing="ij")
    X4 = 2.0 * math.pi - X1 - X2 - X3
    feasible = (X4 >= 0.0) & (X4 <= math.pi)
    c1, c2, c3, c4 = np.cos(X1), np.cos(X2), np.cos(X3), np.cos(X4)
    G = c1 * c1 + c1 + c2 * c2 + c2 + c3 * c3 + c3 + c4 * c4 + c4
    G = np.where(feasible, G, np.inf)
    best = np.unravel_index(np.argmin(G), G.shape)
    x0 = np.array([X1[best], X2[best], X3[best]])

    def reduced(v):
        x4 = 2.0 * math.pi - v.sum()
        if np.any(v < -1e-12) or np.any(v > math.pi + 1e-12) or not (-1e-12 <= x4 <= math.pi + 1e-12):
            return np.inf
        c = np.cos(np.append(v, x4))
        return float(np.sum(c * c + c))

    res = minimize(reduced, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    v = res.x if res.fun <= G[best] else x0
    argmin = np.append(v, 2.0 * math.pi - v.sum())
    return float(min(res.fun, float(G[best]))), argmin


# ---------------------------------------------------------------------------
# verification suites (backing for the `verify` CLI subcommand)

def _entry(name, analytic, numeric, error, ok):
    def plain(x):
        if isinstance(x, np.ndarray):
            return [plain(v) for v in x.tolist()]
        if isinstance(x, complex):
            return [x.real, x.imag] if x.imag else x.real
        return x

    return {
        "name": name,
        "analytic": plain(analytic),
        "numeric": plain(numeric),
        "error": float(error),
        "pass": bool(ok),
    }


def verify_lambda(n_range=range(2, 13), tol=1e-9) -> list[dict]:
    out = []
    for n in n_range:
        rep = compare_spectra(lambda_spectrum_analytic(n), np.linalg.eigvals(lambda_matrix(n)), tol)
        out.append(_entry(f"lambda_spectrum_n{n}", rep.analytic, rep.numeric, rep.max_error, rep.matched))
        J = exchange_matrix(n)
        E = np.ones((n, n))
        comm = float(np.abs(E @ J - J @ E).max())
        out.append(_entry(f"allones_exchange_commute_n{n}", 0.0, comm, comm, comm <= tol))
    return out


def verify_spectra(tol_zeta=1e-5, tol_xi=1e-6) -> list[dict]:
    gains = {
        "affine_a1": affine_cosine_gain(1.0),
        "affine_a2": affine_cosine_gain(2.0),
        "exponential": exponential_gain(),
    }
    out = []
    for name, gain in gains.items():
        numeric = zeta_spectrum_numeric(gain)
        rep = compare_spectra(zeta_spectrum_analytic(gain), numeric, tol_zeta)
        out.append(_entry(f"zeta_spectrum_{name}", rep.analytic, rep.numeric, rep.max_error, rep.matched))
        nzero = int(np.sum(np.abs(numeric) < tol_zeta))
        out.append(_entry(f"zeta_center_dimension_{name}", 3, nzero, abs(nzero - 3), nzero == 3))
        rep6 = compare_spectra(xi_s_spectrum_analytic(gain), xi_s_spectrum_numeric(gain), tol_xi)
        out.append(_entry(f"xi_s_spectrum_{name}", rep6.analytic, rep6.numeric, rep6.max_error, rep6.matched))
        # transverse eigenvalue expressed in the two charts must agree
        th = TETRAHEDRON_ANGLE
        fp = gain.deriv(th) if gain.deriv is not None else None
        if fp is not None:
            via_theta = 4.0 * math.sqrt(2.0) / 3.0 * fp - 8.0 / 3.0 * gain.eval(th)
            via_cos = -8.0 / 3.0 * gain.eval_cos(-1 / 3) - 16.0 / 9.0 * gain.eval_cos_deriv(-1 / 3)
            err = abs(via_theta - via_cos)
            out.append(_entry(f"chart_consistency_{name}", via_theta, via_cos, err, err < 1e-12))
    rep = compare_spectra([-2.0, 0.0, 0.0, 2.0], cross_formation_normal_spectrum(gains["affine_a1"]), 1e-6)
    out.append(_entry("cross_normal_spectrum_affine_a1", rep.analytic, rep.numeric, rep.max_error, rep.matched))
    return out


def verify_identity(n_samples=10_000, seed=2024, tol=1e-12) -> list[dict]:
    rng = np.random.default_rng(seed)
    G = sg.normalized(rng.standard_normal((n_samples, 4, 3)))
    from .simulator import pair_cosines

    res = np.abs(xt.gram_identity_residual(pair_cosines(G)))
    worst = float(res.max())
    out = [_entry("identity_random_ensembles", 0.0, worst, worst, worst < tol)]
    bad = xt.gram_identity_residual(-np.ones(6))
    out.append(_entry("identity_nonrealizable_point", 16.0, bad, abs(bad - 16.0), abs(bad - 16.0) < tol))
    return out


def verify_kkt(grid_n=60) -> list[dict]:
    val, arg = kkt_minimize_oracle(grid_n)
    ok = abs(val) < 1e-8 and np.abs(np.sort(arg) - math.pi / 2).max() < 1e-3
    out = [_entry("kkt_global_minimum", 0.0, val, abs(val), ok)]
    st1 = kkt_objective(np.array([0.0, 2 * math.pi / 3, 2 * math.pi / 3, 2 * math.pi / 3]))
    out.append(_entry("kkt_stationary_one_zero", 1.25, st1, abs(st1 - 1.25), abs(st1 - 1.25) < 1e-12))
    st2 = kkt_objective(np.array([0.0, 0.0, math.pi, math.pi]))
    out.append(_entry("kkt_stationary_two_pairs", 4.0, st2, abs(st2 - 4.0), abs(st2 - 4.0) < 1e-12))
    return out


def verify_invariance(seed=7, tol_field=1e-10, tol_traj=1e-8) -> list[dict]:
    from .simulator import run
    from .control_laws import polar_tetrahedron

    rng = np.random.default_rng(seed)
    topo = complete_graph(4)
    gain = affine_cosine_gain(1.0)
    # the closed loop commutes with rigid rotations, field-level
    worst = 0.0
    for _ in range(10):
        G = sg.normalized(rng.standard_normal((10, 4, 3)))
        Q = sg.rodrigues_exp(sg.uniform_sphere(rng), rng.uniform(0.0, math.pi))
        lhs = closed_loop_field(G @ Q.T, topo, gain)
        rhs = closed_loop_field(G, topo, gain) @ Q.T
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    out = [_entry("field_rotation_equivariance", 0.0, worst, worst, worst < tol_field)]
    # trajectory-level, short horizon
    G0 = sg.normalized(rng.standard_normal((4, 3)))
    Q = sg.rodrigues_exp(sg.uniform_sphere(rng), rng.uniform(0.0, math.pi))
    t1 = run(G0, topo, gain, 1e-3, 5.0, integrator="euler", stride=100)
    t2 = run(G0 @ Q.T, topo, gain, 1e-3, 5.0, integrator="euler", stride=100)
    err = float(np.abs(t2.states - t1.states @ Q.T).max())
    out.append(_entry("trajectory_rotation_equivariance", 0.0, err, err, err < tol_traj))
    # the tetrahedron set is invariant under the rotating-formation law
    traj = run(
        polar_tetrahedron(),
        rotating_tetrahedron_graph(1, 1),
        gain,
        1e-3,
        100.0,
        integrator="rk4",
        stride=100,
    )
    drift = float(traj.formation_errors().max())
    out.append(_entry("tetrahedron_invariance_weighted", 0.0, drift, drift, drift < 1e-9))
    return out


VERIFY_SUITES = {
    "lambda": verify_lambda,
    "spectra": verify_spectra,
    "identity": verify_identity,
    "kkt": verify_kkt,
    "invariance": verify_invariance,
}


def run_verification(selector: str = "all") -> list[dict]:
    """Run one named suite or all of them; returns the flat check list."""
    if selector == "all":
        out = []
        for fn in VERIFY_SUITES.values():
            out.extend(fn())
        return out
    if selector not in VERIFY_SUITES:
        raise ValueError(f"unknown selector {selector!r}; choose all|{'|'.join(VERIFY_SUITES)}")
    return VERIFY_SUITES[selector]()

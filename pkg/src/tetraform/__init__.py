"""Intrinsic tetrahedron formations of reduced attitudes on the unit sphere.

Simulation of the repulsion-type closed loop, the shape/placement coordinate
split, and numerical certification of the spectra and identities that make
the stationary and rotating tetrahedron formations stable.
"""

from .control_laws import (
    TETRAHEDRON_ANGLE,
    TETRAHEDRON_COS,
    GainFunction,
    affine_cosine_gain,
    closed_loop_field,
    control_velocity,
    cross_formation,
    exponential_gain,
    polar_tetrahedron,
    random_ensemble,
    reference_tetrahedron,
)
from .formation_topology import (
    WeightedTopology,
    complete_graph,
    predecessor_skipping,
    rotating_tetrahedron_graph,
    successor_skipping,
)
from .simulator import (
    SimConfig,
    Trajectory,
    formation_error,
    integrate_step,
    lyapunov_value,
    rotation_rate_estimate,
    run,
    simulate,
)
from .xi_transform import XiCoordinates, gram_identity_residual, phi_transform, reconstruct, xi_s_field

__version__ = "0.1.0"

__all__ = [
    "GainFunction",
    "SimConfig",
    "TETRAHEDRON_ANGLE",
    "TETRAHEDRON_COS",
    "Trajectory",
    "WeightedTopology",
    "XiCoordinates",
    "affine_cosine_gain",
    "closed_loop_field",
    "complete_graph",
    "control_velocity",
    "cross_formation",
    "exponential_gain",
    "formation_error",
    "gram_identity_residual",
    "integrate_step",
    "lyapunov_value",
    "phi_transform",
    "polar_tetrahedron",
    "predecessor_skipping",
    "random_ensemble",
    "reconstruct",
    "reference_tetrahedron",
    "rotating_tetrahedron_graph",
    "rotation_rate_estimate",
    "run",
    "simulate",
    "successor_skipping",
    "xi_s_field",
]

"""Bures-Wasserstein geometry of 3D Gaussians and the state-consistency filter.

Matrices are 3x3 numpy arrays, means length-3 vectors, rotations unit
quaternions ordered (w, x, y, z). Covariances must be exactly symmetric and
positive definite; anything else raises ValueError.
"""

from ._core import (
    EPS_PD,
    CorrespondenceError,
    UndefinedMetric,
    compose_covariance,
    decompose_covariance,
    exp_map,
    geodesic,
    kalman_gain,
    linear_wr_loss,
    log_map,
    merge,
    preset_names,
    run_experiment,
    selftest,
    soa_loss,
    solve_sylvester,
    sqrt_spd,
    tangent_norm_squared,
    total_loss,
    track_sequence,
    w2_distance,
    w2_parts,
    w2_squared,
    w2_trace_term_decomposed,
    wr_loss,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

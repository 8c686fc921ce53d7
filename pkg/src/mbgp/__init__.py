"""Multi-bandwidth Gaussian-process priors and a numerical lab for their
approximation, small-ball and contraction-rate properties."""

from mbgp.gp_core import (
    Grid,
    GridField,
    ScaleVector,
    build_covariance_matrix,
    cholesky_with_jitter,
    covariance,
    sample_field,
    spectral_density,
    tensor_grid,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "GridField",
    "ScaleVector",
    "build_covariance_matrix",
    "cholesky_with_jitter",
    "covariance",
    "sample_field",
    "spectral_density",
    "tensor_grid",
]

"""Squared-exponential multi-bandwidth kernel and exact field sampling.

The rescaled field is ``W^a_t = W_{a*t}`` where ``W`` has covariance
``exp(-||t||^2)``.  Each inverse-bandwidth therefore enters the kernel
squared::

    k_a(s, t) = exp(-sum_j a_j^2 (s_j - t_j)^2)

A zero entry drops the corresponding coordinate from the kernel exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_GRID_NODES = 5000
JITTER_LADDER = tuple(10.0 ** k for k in range(-10, -1))  # 1e-10 ... 1e-2


class DimensionError(ValueError):
    """Point and scale dimensions disagree."""


class JitterError(np.linalg.LinAlgError):
    """Cholesky failed even with the largest jitter on the ladder."""


class GridTooLargeError(ValueError):
    """Grid exceeds the dense-Cholesky node cap."""


@dataclass(frozen=True)
class ScaleVector:
    """Inverse-bandwidths ``a_1..a_d`` plus the set of coordinates allowed to
    be active.  ``active_set`` holds 0-based indices; by default every
    coordinate with a positive value."""

    values: np.ndarray
    active_set: frozenset = None  # type: ignore[assignment]

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 1:
            raise DimensionError("scale vector needs at least one coordinate")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("scale entries must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.active_set is None:
            object.__setattr__(self, "active_set", frozenset(np.flatnonzero(v > 0).tolist()))
        else:
            act = frozenset(int(j) for j in self.active_set)
            if any(j < 0 or j >= v.size for j in act):
                raise DimensionError("active_set index out of range")
            object.__setattr__(self, "active_set", act)

    @property
    def d(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.d


def as_scale(a) -> np.ndarray:
    """Coerce a ScaleVector, sequence or scalar to a 1-d float array."""
    if isinstance(a, ScaleVector):
        return a.values
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if arr.ndim != 1:
        raise DimensionError("scale must be one-dimensional")
    return arr


@dataclass(frozen=True)
class Grid:
    """Tensor grid on the unit cube; ``points`` are in C (last-axis fastest) order."""

    axes: tuple

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(ax) for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        """Flattened tensor-product trapezoid weights."""
        w = np.ones(1)
        for ax in self.axes:
            h = np.diff(ax)
            wa = np.zeros(len(ax))
            wa[:-1] += h / 2
            wa[1:] += h / 2
            w = np.multiply.outer(w, wa).ravel()
        return w


def tensor_grid(d: int, m: int | Sequence[int]) -> Grid:
    """Equispaced tensor grid with ``m`` nodes per axis over [0, 1]^d."""
    ms = [int(m)] * d if np.isscalar(m) else [int(k) for k in m]
    if len(ms) != d or min(ms) < 1:
        raise ValueError("need a positive node count for every axis")
    return Grid(tuple(np.linspace(0.0, 1.0, k) if k > 1 else np.array([0.0]) for k in ms))


def covariance(s, t, a) -> float:
    """Kernel value ``exp(-sum_j a_j^2 (s_j - t_j)^2)``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    a = as_scale(a)
    if not (s.shape == t.shape == a.shape):
        raise DimensionError(f"dimension mismatch: s{s.shape}, t{t.shape}, a{a.shape}")
    return float(np.exp(-np.sum(a * a * (s - t) ** 2)))


def spectral_density(lam, a) -> float:
    """Spectral density of the rescaled field,
    ``prod(a)^-1 (2^d pi^(d/2))^-1 exp(-sum_j lam_j^2 / (4 a_j^2))``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    a = as_scale(a)
    if lam.shape != a.shape:
        raise DimensionError(f"dimension mismatch: lambda{lam.shape}, a{a.shape}")
    if np.any(a <= 0):
        raise ValueError("spectral density is degenerate when some a_j = 0")
    d = a.size
    norm = np.prod(a) * 2.0 ** d * np.pi ** (d / 2)
    return float(np.exp(-np.sum(lam ** 2 / (4 * a * a))) / norm)


def cross_covariance(X, Y, a) -> np.ndarray:
    """Kernel matrix between the rows of ``X`` and ``Y``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    a = as_scale(a)
    if X.shape[1] != a.size or Y.shape[1] != a.size:
        raise DimensionError("point dimension does not match scale dimension")
    q = np.zeros((X.shape[0], Y.shape[0]))
    for j in np.flatnonzero(a > 0):
        diff = X[:, j, None] - Y[None, :, j]
        q += (a[j] * diff) ** 2
    return np.exp(-q)


def build_covariance_matrix(points, a, noise_var: float = 0.0) -> np.ndarray:
    """Covariance of the field at ``points`` plus ``noise_var`` on the diagonal."""
    K = cross_covariance(points, points, a)
    if noise_var:
        K[np.diag_indices_from(K)] += noise_var
    return K


def cholesky_with_jitter(M) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``M + jitter*I``.

    Plain factorization is tried first (jitter 0); on failure the jitter climbs
    the x10 ladder 1e-10 ... 1e-2.  Raises :class:`JitterError` past 1e-2.
    """
    M = np.asarray(M, dtype=float)
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(M.shape[0])
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(M + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise JitterError("matrix is effectively indefinite: Cholesky failed with jitter up to 1e-2")


@dataclass
class GridField:
    grid: Grid
    values: np.ndarray
    scale: np.ndarray
    seed: int | None = None
    jitter: float = field(default=0.0)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


def check_grid_size(grid: Grid) -> None:
    if grid.size > MAX_GRID_NODES:
        raise GridTooLargeError(
            f"grid has {grid.size} nodes (cap {MAX_GRID_NODES}); use a coarser grid"
        )


def field_factor(grid: Grid, a) -> tuple[np.ndarray, float, list]:
    """Cholesky factor of the field restricted to the axes with ``a_j > 0``.

    Returns ``(L, jitter, active_axes)``.  Values on the full grid are
    ``expand_active(L @ z, grid, active_axes)``; with no active axis ``L`` is
    the 1x1 identity (a single N(0,1) value shared by every node).
    """
    a = as_scale(a)
    if a.size != grid.d:
        raise DimensionError("scale dimension does not match grid dimension")
    check_grid_size(grid)
    active = [j for j in range(grid.d) if a[j] > 0]
    if not active:
        return np.ones((1, 1)), 0.0, active
    sub = Grid(tuple(grid.axes[j] for j in active))
    K = build_covariance_matrix(sub.points, a[active])
    L, jitter = cholesky_with_jitter(K)
    return L, jitter, active


def expand_active(values: np.ndarray, grid: Grid, active: list) -> np.ndarray:
    """Broadcast draws on the active sub-grid to the full grid (last axis = draws
    when ``values`` is 2-d)."""
    values = np.asarray(values)
    extra = values.shape[1:]
    sub_shape = tuple(grid.shape[j] for j in active)
    v = values.reshape(sub_shape + extra)
    # insert singleton axes for inactive coordinates, then broadcast
    full_idx = [slice(None) if j in active else None for j in range(grid.d)]
    v = v[tuple(full_idx) + (slice(None),) * len(extra)]
    v = np.broadcast_to(v, grid.shape + extra)
    return np.ascontiguousarray(v).reshape((grid.size,) + extra)


def sample_field(grid: Grid, a, seed) -> GridField:
    """Exact draw of ``W^a`` on ``grid`` via Cholesky of the grid covariance."""
    L, jitter, active = field_factor(grid, a)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(L.shape[0])
    values = expand_active(L @ z, grid, active)
    return GridField(grid=grid, values=values, scale=as_scale(a).copy(), seed=seed, jitter=jitter)

"""Priors on the inverse-bandwidth vector and the deterministic minimax scalings.

Every prior samples and scores a :class:`BandwidthState`, the common currency
the samplers in :mod:`mbgp.inference` move around.  ``g`` is always a gamma
density with (shape, rate) hyperparameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from mbgp.gp_core import ScaleVector

DEFAULT_SHAPE = 2.0
DEFAULT_RATE = 1.0


@dataclass
class BandwidthState:
    """One draw of the bandwidth block.

    ``mask`` marks the coordinates scaled by the non-compact variable(s);
    ``theta`` is zero off the mask (``None`` for families without simplex
    weights); ``A`` and ``B`` are the shared scale and the compact base value
    for families that tie coordinates together.
    """

    a: np.ndarray
    mask: np.ndarray
    theta: np.ndarray | None = None
    A: float | None = None
    B: float | None = None

    def copy(self) -> "BandwidthState":
        return BandwidthState(
            a=self.a.copy(),
            mask=self.mask.copy(),
            theta=None if self.theta is None else self.theta.copy(),
            A=self.A,
            B=self.B,
        )

    @property
    def subset(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.mask))

    @property
    def bitmask(self) -> int:
        return int(sum(1 << j for j in np.flatnonzero(self.mask)))

    def scale(self) -> ScaleVector:
        return ScaleVector(self.a, active_set=self.subset)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def log_gamma_pdf(x, shape: float, rate: float):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = shape * math.log(rate) - gammaln(shape) + (shape - 1) * np.log(x) - rate * x
    return np.where((x > 0) & np.isfinite(x), out, -np.inf)


def log_dirichlet_pdf(theta, beta) -> float:
    """Dirichlet log density w.r.t. Lebesgue measure on the first k-1 weights."""
    theta = np.asarray(theta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if theta.size == 1:
        return 0.0
    return float(
        gammaln(beta.sum()) - gammaln(beta).sum() + np.sum((beta - 1) * np.log(theta))
    )


def log_conditional_scale(a, theta, shape: float, rate: float):
    """Log density of ``a`` when ``a^(1/theta) ~ gamma(shape, rate)``."""
    a = np.asarray(a, dtype=float)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        g = a ** (1.0 / theta)
    return log_gamma_pdf(g, shape, rate) - np.log(theta) + (1.0 / theta - 1.0) * np.log(a)


def log_power_scale(A: float, power: int, shape: float, rate: float) -> float:
    """Log density of ``A`` when ``A^power ~ gamma(shape, rate)``."""
    if A <= 0:
        return -math.inf
    return float(log_gamma_pdf(A ** power, shape, rate)) + math.log(power) + (power - 1) * math.log(A)


def _check_gamma(shape, rate):
    if not (shape > 0 and rate > 0):
        raise ValueError("gamma hyperparameters must be positive")


def _normalize_weights(w, d) -> np.ndarray:
    if w is None:
        return np.full(d, 1.0 / d)
    w = np.asarray(w, dtype=float)
    if w.shape != (d,) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("dim_weights must be d non-negative numbers")
    return w / w.sum()


def _log_subset_mass(weights: np.ndarray, k: int, d: int) -> float:
    if weights[k - 1] <= 0:
        return -math.inf
    return math.log(weights[k - 1]) - math.log(math.comb(d, k))


def _valid_simplex(theta) -> bool:
    theta = np.asarray(theta, dtype=float)
    return bool(np.all(theta > 0) and abs(theta.sum() - 1.0) < 1e-9)


@dataclass(frozen=True)
class AnisotropicPrior:
    """``theta ~ Dir(beta)``; given theta, ``a_j^(1/theta_j) ~ gamma`` independently."""

    d: int
    beta: tuple | None = None
    gamma_shape: float = DEFAULT_SHAPE
    gamma_rate: float = DEFAULT_RATE
    family: str = field(default="anisotropic", init=False)

    def __post_init__(self):
        beta = (1.0,) * self.d if self.beta is None else tuple(float(b) for b in self.beta)
        if len(beta) != self.d or min(beta) <= 0:
            raise ValueError("beta needs d positive entries")
        object.__setattr__(self, "beta", beta)
        _check_gamma(self.gamma_shape, self.gamma_rate)

    def sample_conditional(self, theta, rng) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        G = rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate, size=theta.size)
        return G ** theta

    def sample(self, rng) -> BandwidthState:
        rng = _rng(rng)
        theta = np.ones(1) if self.d == 1 else rng.dirichlet(self.beta)
        # Dirichlet draws with tiny concentration can underflow to exact 0
        theta = np.clip(theta, 1e-300, None)
        theta /= theta.sum()
        a = self.sample_conditional(theta, rng)
        return BandwidthState(a=a, mask=np.ones(self.d, bool), theta=theta)

    def log_prior(self, state: BandwidthState) -> float:
        return logdensity_anisotropic(self, state.theta, state.a, check=False)


@dataclass(frozen=True)
class DimensionReductionPrior:
    """Size ~ dim_weights, subset uniform given size, ``A^size ~ gamma``;
    ``a_j = A`` on the subset and ``B`` elsewhere."""

    d: int
    dim_weights: tuple | None = None
    gamma_shape: float = DEFAULT_SHAPE
    gamma_rate: float = DEFAULT_RATE
    base_value: float = 1.0
    base_interval: tuple | None = None
    family: str = field(default="dimension_reduction", init=False)

    def __post_init__(self):
        w = _normalize_weights(self.dim_weights, self.d)
        if np.any(w <= 0):
            raise ValueError("dim_weights must give every size positive mass")
        object.__setattr__(self, "dim_weights", tuple(w))
        _check_gamma(self.gamma_shape, self.gamma_rate)
        if self.base_value <= 0:
            raise ValueError("base_value must be positive")
        if self.base_interval is not None:
            lo, hi = self.base_interval
            if not 0 < lo < hi:
                raise ValueError("base_interval must satisfy 0 < lo < hi")

    def draw_base(self, rng) -> float:
        if self.base_interval is None:
            return float(self.base_value)
        return float(rng.uniform(*self.base_interval))

    def log_base(self, B: float) -> float:
        if self.base_interval is None:
            return 0.0 if B == self.base_value else -math.inf
        lo, hi = self.base_interval
        return -math.log(hi - lo) if lo <= B <= hi else -math.inf

    def sample(self, rng) -> BandwidthState:
        rng = _rng(rng)
        k = int(rng.choice(self.d, p=self.dim_weights)) + 1
        S = np.sort(rng.choice(self.d, size=k, replace=False))
        A = float(rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate) ** (1.0 / k))
        B = self.draw_base(rng)
        mask = np.zeros(self.d, bool)
        mask[S] = True
        a = np.where(mask, A, B)
        return BandwidthState(a=a, mask=mask, A=A, B=B)

    def log_prior(self, state: BandwidthState) -> float:
        k = int(state.mask.sum())
        if k < 1:
            return -math.inf
        w = np.asarray(self.dim_weights)
        return (
            _log_subset_mass(w, k, self.d)
            + log_power_scale(state.A, k, self.gamma_shape, self.gamma_rate)
            + self.log_base(state.B)
        )


@dataclass(frozen=True)
class UnifiedPrior:
    """Size ~ dim_weights, subset uniform, ``theta ~ Dir(beta_by_size[size])`` on
    the subset, ``a_j^(1/theta_j) ~ gamma`` on the subset and ``a_j = 0`` off it.

    ``symmetric_theta`` pins theta at ``1/size``; ``tied`` shares one gamma draw
    across the subset (``a_j = G^theta_j``), which with symmetric weights gives
    a gamma prior on ``A^size``.
    """

    d: int
    dim_weights: tuple | None = None
    beta_by_size: Mapping | None = None
    gamma_shape: float = DEFAULT_SHAPE
    gamma_rate: float = DEFAULT_RATE
    symmetric_theta: bool = False
    tied: bool = False
    family: str = field(default="unified", init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim_weights", tuple(_normalize_weights(self.dim_weights, self.d)))
        betas = {}
        for k in range(1, self.d + 1):
            b = None if self.beta_by_size is None else self.beta_by_size.get(k)
            b = (1.0,) * k if b is None else tuple(float(x) for x in b)
            if len(b) != k or min(b) <= 0:
                raise ValueError(f"beta_by_size[{k}] needs {k} positive entries")
            betas[k] = b
        object.__setattr__(self, "beta_by_size", betas)
        _check_gamma(self.gamma_shape, self.gamma_rate)

    def draw_theta(self, k: int, rng) -> np.ndarray:
        if k == 1:
            return np.ones(1)
        if self.symmetric_theta:
            return np.full(k, 1.0 / k)
        th = np.clip(rng.dirichlet(self.beta_by_size[k]), 1e-300, None)
        return th / th.sum()

    def sample(self, rng) -> BandwidthState:
        rng = _rng(rng)
        k = int(rng.choice(self.d, p=self.dim_weights)) + 1
        S = np.sort(rng.choice(self.d, size=k, replace=False))
        th = self.draw_theta(k, rng)
        if self.tied:
            G = np.full(k, rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate))
        else:
            G = rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate, size=k)
        a = np.zeros(self.d)
        theta = np.zeros(self.d)
        a[S] = G ** th
        theta[S] = th
        mask = np.zeros(self.d, bool)
        mask[S] = True
        return BandwidthState(a=a, mask=mask, theta=theta)

    def log_prior(self, state: BandwidthState) -> float:
        if self.tied:
            raise NotImplementedError("tied unified prior has no density on R^d")
        mask = state.mask
        k = int(mask.sum())
        if k < 1 or np.any(state.a[~mask] != 0):
            return -math.inf
        th = state.theta[mask]
        a = state.a[mask]
        if np.any(a <= 0) or not _valid_simplex(th):
            return -math.inf
        lp = _log_subset_mass(np.asarray(self.dim_weights), k, self.d)
        if k > 1 and not self.symmetric_theta:
            lp += log_dirichlet_pdf(th, self.beta_by_size[k])
        return float(lp + np.sum(log_conditional_scale(a, th, self.gamma_shape, self.gamma_rate)))


@dataclass(frozen=True)
class PartialMixturePrior:
    """``A_j ~ p_n A + (1 - p_n) B`` independently, ``A^d ~ gamma`` shared,
    with ``p_n^d = 1 - exp(-n^(-d*/(2 alpha + d*)))``."""

    d: int
    n: int
    alpha_star: float
    d_star: int
    gamma_shape: float = DEFAULT_SHAPE
    gamma_rate: float = DEFAULT_RATE
    base_value: float = 1.0
    family: str = field(default="partial_mixture", init=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("partial mixture prior needs n >= 2")
        if self.alpha_star <= 0 or not 1 <= self.d_star <= self.d:
            raise ValueError("need alpha_star > 0 and 1 <= d_star <= d")
        _check_gamma(self.gamma_shape, self.gamma_rate)

    @property
    def p_n(self) -> float:
        return mixture_weight(self.n, self.alpha_star, self.d_star, self.d)

    def sample(self, rng) -> BandwidthState:
        rng = _rng(rng)
        A = float(rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate) ** (1.0 / self.d))
        mask = rng.random(self.d) < self.p_n
        a = np.where(mask, A, self.base_value)
        return BandwidthState(a=a, mask=mask, A=A, B=float(self.base_value))

    def log_prior(self, state: BandwidthState) -> float:
        p = self.p_n
        k = int(state.mask.sum())
        return (
            k * math.log(p)
            + (self.d - k) * math.log1p(-p)
            + log_power_scale(state.A, self.d, self.gamma_shape, self.gamma_rate)
        )


@dataclass(frozen=True)
class SingleBandwidthPrior:
    """One shared scale ``A`` on every coordinate with ``A^d_star ~ gamma``."""

    d: int
    d_star: int | None = None
    gamma_shape: float = DEFAULT_SHAPE
    gamma_rate: float = DEFAULT_RATE
    family: str = field(default="single", init=False)

    def __post_init__(self):
        ds = self.d if self.d_star is None else int(self.d_star)
        if not 1 <= ds <= self.d:
            raise ValueError("d_star must lie in 1..d")
        object.__setattr__(self, "d_star", ds)
        _check_gamma(self.gamma_shape, self.gamma_rate)

    def sample(self, rng) -> BandwidthState:
        rng = _rng(rng)
        A = float(rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate) ** (1.0 / self.d_star))
        return BandwidthState(a=np.full(self.d, A), mask=np.ones(self.d, bool), A=A)

    def log_prior(self, state: BandwidthState) -> float:
        return log_power_scale(state.A, self.d_star, self.gamma_shape, self.gamma_rate)


@dataclass(frozen=True)
class DeterministicPrior:
    """Point mass at a fixed scale vector (e.g. the minimax bandwidths)."""

    a: tuple
    family: str = field(default="deterministic", init=False)

    def __post_init__(self):
        a = tuple(float(x) for x in np.atleast_1d(self.a))
        if min(a) < 0:
            raise ValueError("scales must be non-negative")
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return len(self.a)

    def sample(self, rng=None) -> BandwidthState:
        a = np.array(self.a)
        return BandwidthState(a=a, mask=a > 0)

    def log_prior(self, state: BandwidthState) -> float:
        return 0.0 if np.array_equal(state.a, np.array(self.a)) else -math.inf


BandwidthPrior = (
    AnisotropicPrior
    | DimensionReductionPrior
    | UnifiedPrior
    | PartialMixturePrior
    | SingleBandwidthPrior
    | DeterministicPrior
)


def sample_anisotropic(prior: AnisotropicPrior, seed) -> tuple[np.ndarray, np.ndarray]:
    s = prior.sample(seed)
    return s.theta, s.a


def logdensity_anisotropic(prior: AnisotropicPrior, theta, a, check: bool = True) -> float:
    """Joint log density of ``(theta, a)``: Dirichlet term plus the gamma
    density of ``a_j^(1/theta_j)`` with its change-of-variables Jacobian."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if theta.shape != (prior.d,) or a.shape != (prior.d,):
        raise ValueError("theta and a must have length d")
    if not _valid_simplex(theta) or np.any(a <= 0):
        if check:
            raise ValueError("theta must be strictly inside the simplex and a > 0")
        return -math.inf
    return float(
        log_dirichlet_pdf(theta, prior.beta)
        + np.sum(log_conditional_scale(a, theta, prior.gamma_shape, prior.gamma_rate))
    )


def sample_dimension_reduction(prior: DimensionReductionPrior, seed) -> tuple[tuple, np.ndarray]:
    s = prior.sample(seed)
    return s.subset, s.a


def sample_unified(prior: UnifiedPrior, seed) -> tuple[tuple, np.ndarray, np.ndarray]:
    s = prior.sample(seed)
    return s.subset, s.theta[s.mask], s.a


def sample_partial_mixture(prior: PartialMixturePrior, seed) -> np.ndarray:
    return prior.sample(seed).a


def sample_many(prior, size: int, seed) -> list[BandwidthState]:
    rng = _rng(seed)
    return [prior.sample(rng) for _ in range(size)]


def mixture_weight(n: int, alpha: float, d_star: int, d: int) -> float:
    """``p_n = (1 - exp(-c_n))^(1/d)`` with ``c_n = n^(-d*/(2 alpha + d*))``."""
    c_n = float(n) ** (-d_star / (2.0 * alpha + d_star))
    return float((-math.expm1(-c_n)) ** (1.0 / d))


def global_smoothness(alpha: Sequence[float]) -> float:
    """Harmonic aggregate ``(sum_j 1/alpha_j)^-1``; infinite entries drop out."""
    inv = sum(1.0 / float(x) for x in alpha)
    return math.inf if inv == 0 else 1.0 / inv


def minimax_bandwidths(n: int, alpha, active: Sequence[int] | None = None, d: int | None = None) -> ScaleVector:
    """Deterministic rate-optimal scalings.

    Without ``active``: anisotropic case, ``a_j = [n^(1/(2 a0 + 1))]^(a0/alpha_j)``.
    With ``active`` (0-based) and scalar ``alpha``: ``a_j = [n^(1/(2 alpha + d*))]^(1/d*)``
    on the active set and 1 elsewhere.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if active is None:
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if alpha.size == 0:
            raise ValueError("empty smoothness vector")
        if np.any(alpha <= 0):
            raise ValueError("smoothness must be positive")
        a0 = global_smoothness(alpha)
        base = float(n) ** (1.0 / (2 * a0 + 1))
        return ScaleVector(base ** (a0 / alpha))
    active = sorted(set(int(j) for j in active))
    if not active:
        raise ValueError("active set must be non-empty")
    if d is None:
        raise ValueError("ambient dimension d is required with an active set")
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError("smoothness must be positive")
    ds = len(active)
    val = (float(n) ** (1.0 / (2 * alpha + ds))) ** (1.0 / ds)
    a = np.ones(d)
    a[active] = val
    return ScaleVector(a)


FAMILIES = {
    "anisotropic": AnisotropicPrior,
    "dimension_reduction": DimensionReductionPrior,
    "unified": UnifiedPrior,
    "partial_mixture": PartialMixturePrior,
    "single": SingleBandwidthPrior,
    "deterministic": DeterministicPrior,
}

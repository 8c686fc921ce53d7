"""Posterior sampling for GP mean regression and logistic-GP density estimation.

Regression integrates the latent field out exactly and runs Metropolis-within-
Gibbs on the bandwidth block and the noise scale.  Density estimation keeps the
latent field on a grid in whitened form (``W = L_a z``), updates ``z`` by
elliptical slice sampling and the bandwidths by Metropolis-Hastings.

Move kernels
------------
log_a_j   random walk on ``log a_j`` for each active coordinate (per-coordinate
          families) or on ``log A`` (shared-scale families)
theta     random walk in additive-log-ratio coordinates of the simplex weights
subset    add / remove / swap one coordinate (probabilities 0.3 / 0.3 / 0.4);
          an added coordinate takes a Beta(1, k) stick-break of the simplex
flip      toggle one coordinate between A and B (partial-mixture prior)
log_B     reflecting random walk on the compact base value, when it is random
sigma     reflecting random walk on the noise scale inside its prior support
latent    elliptical slice update of the whitened field (density only)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from mbgp.gp_core import (
    Grid,
    build_covariance_matrix,
    check_grid_size,
    cholesky_with_jitter,
    cross_covariance,
)
from mbgp.bandwidth_priors import BandwidthState, log_conditional_scale

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2 * math.pi)
SUBSET_MOVE_PROBS = {"add": 0.3, "remove": 0.3, "swap": 0.4}
TARGET_ACCEPT = 0.25
# a move must be tried this often in the last burn-in window before zero
# acceptance counts as a stuck chain (rarely active coordinates are exempt)
MIN_WINDOW_PROPOSALS = 25
PER_COORD_FAMILIES = ("anisotropic", "unified")
SHARED_FAMILIES = ("single", "dimension_reduction", "partial_mixture")


class MCMCError(RuntimeError):
    pass


def _check_unit_cube(X, what):
    if X.size and (np.any(X < 0) or np.any(X > 1) or not np.all(np.isfinite(X))):
        raise ValueError(f"{what} must lie in the unit cube [0, 1]^d")


@dataclass
class RegressionModel:
    """``y_i = mu(x_i) + N(0, sigma^2)`` with ``mu ~ W^A`` and ``sigma ~ U[lo, hi]``.
    ``lo == hi`` fixes sigma."""

    design: np.ndarray
    responses: np.ndarray
    prior: object
    sigma_bounds: tuple = (0.01, 10.0)

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.responses = np.asarray(self.responses, dtype=float).ravel()
        if self.design.shape[0] != self.responses.size:
            raise ValueError("design and responses disagree in length")
        _check_unit_cube(self.design, "covariates")
        lo, hi = (float(x) for x in self.sigma_bounds)
        if not 0 < lo <= hi:
            raise ValueError("sigma bounds must satisfy 0 < lo <= hi")
        self.sigma_bounds = (lo, hi)
        if getattr(self.prior, "d", self.d) != self.d:
            raise ValueError("prior dimension does not match the design")
        self._sqdiff = [
            (self.design[:, j, None] - self.design[None, :, j]) ** 2 for j in range(self.d)
        ]

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]

    def kernel(self, a) -> np.ndarray:
        q = np.zeros((self.n, self.n))
        for j, aj in enumerate(np.asarray(a, dtype=float)):
            if aj > 0:
                q += (aj * aj) * self._sqdiff[j]
        return np.exp(-q)


@dataclass
class DensityModel:
    """Logistic GP: ``f = exp(W) / int exp(W)`` with ``W`` discretized on ``grid``."""

    data: np.ndarray
    grid: Grid
    prior: object

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, self.grid.d)
        _check_unit_cube(self.data, "data")
        check_grid_size(self.grid)
        if getattr(self.prior, "d", self.d) != self.d:
            raise ValueError("prior dimension does not match the grid")
        self.interp_index, self.interp_weight = interpolation_weights(self.grid, self.data)
        self.log_quad = np.log(self.grid.trapezoid_weights())
        self._points = self.grid.points

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.grid.d

    def at_data(self, W: np.ndarray) -> np.ndarray:
        return np.sum(W[self.interp_index] * self.interp_weight, axis=1)

    def log_normalizer(self, W: np.ndarray) -> float:
        return float(logsumexp(W + self.log_quad))

    def log_likelihood(self, W: np.ndarray) -> float:
        if self.n == 0:
            return 0.0
        return float(self.at_data(W).sum() - self.n * self.log_normalizer(W))

    def factor(self, a) -> np.ndarray:
        L, _ = cholesky_with_jitter(build_covariance_matrix(self._points, a))
        return L


def interpolation_weights(grid: Grid, X) -> tuple[np.ndarray, np.ndarray]:
    """Multilinear interpolation stencil: flat node indices and weights, each
    of shape ``(n, 2^d)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    lo_idx, frac = [], []
    for j, ax in enumerate(grid.axes):
        if len(ax) == 1:
            lo_idx.append(np.zeros(n, int))
            frac.append(np.zeros(n))
            continue
        i = np.clip(np.searchsorted(ax, X[:, j], side="right") - 1, 0, len(ax) - 2)
        lo_idx.append(i)
        frac.append((X[:, j] - ax[i]) / (ax[i + 1] - ax[i]))
    corners = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
    idx = np.zeros((n, len(corners)), int)
    wts = np.ones((n, len(corners)))
    for c, corner in enumerate(corners):
        multi = []
        for j in range(d):
            step = corner[j] if grid.shape[j] > 1 else 0
            multi.append(lo_idx[j] + step)
            wts[:, c] *= frac[j] if corner[j] else 1 - frac[j]
        idx[:, c] = np.ravel_multi_index(multi, grid.shape)
    return idx, wts


def log_marginal_likelihood(model: RegressionModel, a, sigma: float) -> float:
    """``log N(y; 0, K_a + sigma^2 I)`` via a (jittered) Cholesky factor."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    K = model.kernel(a)
    K[np.diag_indices_from(K)] += sigma * sigma
    L, _ = cholesky_with_jitter(K)
    v = solve_triangular(L, model.responses, lower=True, check_finite=False)
    return float(-0.5 * v @ v - np.log(np.diag(L)).sum() - 0.5 * model.n * LOG_2PI)


@dataclass
class Draw:
    iteration: int
    a: np.ndarray
    theta: np.ndarray
    mask: np.ndarray
    sigma: float
    log_post: float
    z: np.ndarray | None = None
    log_density: np.ndarray | None = None

    @property
    def bitmask(self) -> int:
        return int(sum(1 << int(j) for j in np.flatnonzero(self.mask)))


@dataclass
class PosteriorSampleSet:
    draws: list
    seed: object
    acceptance_rates: dict
    family: str
    d: int
    step_sizes: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.draws)

    @property
    def a(self) -> np.ndarray:
        return np.array([dr.a for dr in self.draws])

    @property
    def theta(self) -> np.ndarray:
        return np.array([dr.theta for dr in self.draws])

    @property
    def masks(self) -> np.ndarray:
        return np.array([dr.mask for dr in self.draws])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([dr.sigma for dr in self.draws])

    @property
    def log_post(self) -> np.ndarray:
        return np.array([dr.log_post for dr in self.draws])

    def inclusion_frequencies(self) -> np.ndarray:
        return self.masks.mean(axis=0)

    def rows(self) -> list:
        """One record per draw: iteration, a_1..a_d, theta_1..theta_d,
        subset bitmask, sigma, log_post."""
        out = []
        for dr in self.draws:
            out.append([dr.iteration, *dr.a.tolist(), *dr.theta.tolist(), dr.bitmask, dr.sigma, dr.log_post])
        return out

    def header(self) -> list:
        return (
            ["iteration"]
            + [f"a_{j + 1}" for j in range(self.d)]
            + [f"theta_{j + 1}" for j in range(self.d)]
            + ["subset", "sigma", "log_post"]
        )


class _Chain:
    """Mutable single-chain state shared by the move kernels."""

    def __init__(self, prior, loglik: Callable, rng, steps: dict, sigma_bounds=None):
        self.prior = prior
        self.family = prior.family
        self.loglik = loglik
        self.rng = rng
        self.steps = steps
        self.sigma_bounds = sigma_bounds
        self.stats: dict = {}
        self.window: dict = {}
        self.bw: BandwidthState = None  # type: ignore[assignment]
        self.sigma = math.nan
        self.z = None
        self.ll = 0.0
        self.lp = 0.0
        self.adapt = True

    def tally(self, name: str, accepted: bool):
        for book in (self.stats, self.window):
            acc, prop = book.get(name, (0, 0))
            book[name] = (acc + int(accepted), prop + 1)

    def mh(self, name: str, bw: BandwidthState, log_extra: float = 0.0, sigma=None, z=None,
           ll=None) -> bool:
        lp = self.prior.log_prior(bw)
        if not math.isfinite(lp):
            self.tally(name, False)
            return False
        sig = self.sigma if sigma is None else sigma
        zz = self.z if z is None else z
        if ll is None:
            ll = self.loglik(bw.a, sig, zz)
        log_ratio = ll + lp - self.ll - self.lp + log_extra
        ok = math.log(self.rng.random()) < log_ratio
        if ok:
            self.bw, self.ll, self.lp = bw, ll, lp
            if sigma is not None:
                self.sigma = sigma
            if z is not None:
                self.z = z
        self.tally(name, ok)
        return ok


def _safe_exp(x: float) -> float:
    # keeps a_j^2 finite in the kernel
    return math.exp(min(max(x, -300.0), 300.0))


def _rw_scale(chain: _Chain):
    bw = chain.bw
    if chain.family in PER_COORD_FAMILIES:
        for j in np.flatnonzero(bw.mask):
            name = f"log_a_{j}"
            step = chain.steps.setdefault(name, chain.steps.get("log_a", 0.5))
            eps = step * chain.rng.standard_normal()
            new = chain.bw.copy()
            new.a[j] = chain.bw.a[j] * _safe_exp(eps)
            if not 0 < new.a[j] < math.inf:
                chain.tally(name, False)
                continue
            chain.mh(name, new, log_extra=eps)
    elif chain.family in SHARED_FAMILIES:
        step = chain.steps.setdefault("log_A", chain.steps.get("log_a", 0.5))
        eps = step * chain.rng.standard_normal()
        new = bw.copy()
        new.A = bw.A * _safe_exp(eps)
        if not 0 < new.A < math.inf:
            chain.tally("log_A", False)
            return
        new.a = np.where(new.mask, new.A, new.a)
        chain.mh("log_A", new, log_extra=eps)


def _alr(theta):
    return np.log(theta[:-1]) - math.log(theta[-1])


def _alr_inv(y):
    e = np.concatenate([y, [0.0]])
    e = np.exp(e - e.max())
    return e / e.sum()


def _rw_theta(chain: _Chain):
    bw = chain.bw
    if bw.theta is None or getattr(chain.prior, "symmetric_theta", False):
        return
    idx = np.flatnonzero(bw.mask)
    if idx.size < 2:
        return
    step = chain.steps.setdefault("theta", 0.5)
    th = bw.theta[idx]
    th_new = _alr_inv(_alr(th) + step * chain.rng.standard_normal(idx.size - 1))
    if np.any(th_new <= 0):
        chain.tally("theta", False)
        return
    new = bw.copy()
    new.theta[idx] = th_new
    # symmetric walk in alr coordinates; Jacobian to simplex density is prod(theta)
    log_jac = np.log(th_new).sum() - np.log(th).sum()
    chain.mh("theta", new, log_extra=log_jac, ll=chain.ll)


def _subset_move_probs(k: int, d: int) -> dict:
    feas = {}
    if k < d:
        feas["add"] = SUBSET_MOVE_PROBS["add"]
        feas["swap"] = SUBSET_MOVE_PROBS["swap"]
    if k > 1:
        feas["remove"] = SUBSET_MOVE_PROBS["remove"]
    tot = sum(feas.values())
    return {m: p / tot for m, p in feas.items()}


def _log_beta1k(u: float, k: int) -> float:
    """Log density of Beta(1, k) at u."""
    return math.log(k) + (k - 1) * math.log1p(-u)


def _subset(chain: _Chain):
    prior = chain.prior
    if chain.family not in ("unified", "dimension_reduction"):
        return
    d = prior.d
    bw = chain.bw
    k = int(bw.mask.sum())
    probs = _subset_move_probs(k, d)
    if not probs:
        return
    moves = list(probs)
    move = moves[chain.rng.choice(len(moves), p=[probs[m] for m in moves])]
    rng = chain.rng
    inside = np.flatnonzero(bw.mask)
    outside = np.flatnonzero(~bw.mask)
    new = bw.copy()
    log_q = 0.0  # log [reverse proposal / forward proposal] incl. Jacobian
    with_theta = chain.family == "unified"
    symmetric = with_theta and prior.symmetric_theta
    shape, rate = prior.gamma_shape, prior.gamma_rate

    if move == "add":
        j = int(rng.choice(outside))
        log_q += math.log(_subset_move_probs(k + 1, d)["remove"] / (k + 1))
        log_q -= math.log(probs["add"] / (d - k))
        new.mask[j] = True
        if with_theta:
            if symmetric:
                u = 1.0 / (k + 1)
                new.theta[inside] = u
            else:
                u = float(rng.beta(1.0, k))
                if not 0 < u < 1:
                    chain.tally("subset", False)
                    return
                new.theta[inside] = bw.theta[inside] * (1 - u)
                log_q += (k - 1) * math.log1p(-u) - _log_beta1k(u, k)
            new.theta[j] = u
            g = rng.gamma(shape, 1.0 / rate)
            new.a[j] = g ** u
            if new.a[j] <= 0:
                chain.tally("subset", False)
                return
            log_q -= float(log_conditional_scale(new.a[j], u, shape, rate))
        else:
            new.a[j] = bw.A
    elif move == "remove":
        j = int(rng.choice(inside))
        log_q += math.log(_subset_move_probs(k - 1, d)["add"] / (d - k + 1))
        log_q -= math.log(probs["remove"] / k)
        new.mask[j] = False
        if with_theta:
            u = bw.theta[j]
            rest = np.flatnonzero(new.mask)
            if symmetric:
                new.theta[rest] = 1.0 / (k - 1)
            else:
                new.theta[rest] = bw.theta[rest] / (1 - u)
                log_q += _log_beta1k(u, k - 1) - (k - 2) * math.log1p(-u)
            log_q += float(log_conditional_scale(bw.a[j], u, shape, rate))
            new.theta[j] = 0.0
            new.a[j] = 0.0
        else:
            new.a[j] = bw.B
    else:  # swap
        i = int(rng.choice(inside))
        j = int(rng.choice(outside))
        new.mask[i], new.mask[j] = False, True
        if with_theta:
            th = bw.theta[i]
            new.theta[j], new.theta[i] = th, 0.0
            g = rng.gamma(shape, 1.0 / rate)
            new.a[j], new.a[i] = g ** th, 0.0
            if new.a[j] <= 0:
                chain.tally("subset", False)
                return
            log_q += float(log_conditional_scale(bw.a[i], th, shape, rate))
            log_q -= float(log_conditional_scale(new.a[j], th, shape, rate))
        else:
            new.a[j], new.a[i] = bw.A, bw.B
    chain.mh("subset", new, log_extra=log_q)


def _flip(chain: _Chain):
    if chain.family != "partial_mixture":
        return
    j = int(chain.rng.integers(chain.prior.d))
    new = chain.bw.copy()
    new.mask[j] = not new.mask[j]
    new.a[j] = new.A if new.mask[j] else new.B
    chain.mh("flip", new)


def _reflect(x: float, lo: float, hi: float) -> float:
    width = hi - lo
    y = (x - lo) % (2 * width)
    return lo + (y if y <= width else 2 * width - y)


def _rw_base(chain: _Chain):
    interval = getattr(chain.prior, "base_interval", None)
    if chain.family != "dimension_reduction" or interval is None:
        return
    lo, hi = interval
    step = chain.steps.setdefault("log_B", 0.1 * (hi - lo))
    new = chain.bw.copy()
    new.B = _reflect(chain.bw.B + step * chain.rng.standard_normal(), lo, hi)
    new.a = np.where(new.mask, new.a, new.B)
    chain.mh("log_B", new)


def _rw_sigma(chain: _Chain):
    lo, hi = chain.sigma_bounds
    if lo == hi:
        return
    step = chain.steps.setdefault("sigma", 0.1 * chain.sigma)
    prop = _reflect(chain.sigma + step * chain.rng.standard_normal(), lo, hi)
    chain.mh("sigma", chain.bw, sigma=prop)


def _adapt(chain: _Chain, final: bool):
    for name, (acc, prop) in chain.window.items():
        if name in ("subset", "flip", "latent") or prop == 0:
            continue
        rate = acc / prop
        if final and acc == 0 and prop >= MIN_WINDOW_PROPOSALS:
            raise MCMCError(
                f"move '{name}' accepted nothing over a full adaptation window "
                f"(step {chain.steps.get(name):.3g}); adjust its step size"
            )
        if chain.adapt and name in chain.steps:
            chain.steps[name] *= math.exp(2.0 * (rate - TARGET_ACCEPT))
    chain.window = {}


def _rates(chain: _Chain) -> dict:
    return {name: acc / prop for name, (acc, prop) in sorted(chain.stats.items()) if prop}


def _theta_vector(bw: BandwidthState) -> np.ndarray:
    if bw.theta is None:
        return np.full(bw.a.size, math.nan)
    return bw.theta.copy()


def _check_schedule(n_iter, burn_in, thin):
    if not (n_iter > burn_in >= 0) or thin < 1:
        raise ValueError("need n_iter > burn_in >= 0 and thin >= 1")


def _run(chain: _Chain, sweep, record, n_iter, burn_in, thin, adapt_window):
    draws = []
    last_window_end = (burn_in // adapt_window) * adapt_window
    for it in range(n_iter):
        sweep(chain)
        if it < burn_in and (it + 1) % adapt_window == 0:
            _adapt(chain, final=(it + 1) == last_window_end)
        elif it == burn_in - 1:
            chain.window = {}
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            draws.append(record(chain, it))
    return draws


def run_regression_mcmc(
    model: RegressionModel,
    n_iter: int,
    burn_in: int,
    thin: int = 1,
    seed=0,
    step_sizes: dict | None = None,
    adapt: bool = True,
    adapt_window: int = 50,
    init: BandwidthState | None = None,
) -> PosteriorSampleSet:
    """Metropolis-within-Gibbs over (bandwidths, simplex weights, subset, sigma)
    with the latent mean integrated out."""
    _check_schedule(n_iter, burn_in, thin)
    rng = np.random.default_rng(seed)
    lo, hi = model.sigma_bounds
    chain = _Chain(
        model.prior,
        lambda a, s, z: log_marginal_likelihood(model, a, s),
        rng,
        dict(step_sizes or {}),
        sigma_bounds=(lo, hi),
    )
    chain.adapt = adapt
    chain.bw = init.copy() if init is not None else model.prior.sample(rng)
    y_sd = float(np.std(model.responses)) if model.n > 1 else 1.0
    chain.sigma = float(np.clip(y_sd if y_sd > 0 else 1.0, lo, hi))
    chain.lp = model.prior.log_prior(chain.bw)
    chain.ll = chain.loglik(chain.bw.a, chain.sigma, None)
    log_sigma_prior = -math.log(hi - lo) if hi > lo else 0.0

    def sweep(c):
        _rw_scale(c)
        _rw_theta(c)
        _subset(c)
        _flip(c)
        _rw_base(c)
        _rw_sigma(c)

    def record(c, it):
        return Draw(
            iteration=it,
            a=c.bw.a.copy(),
            theta=_theta_vector(c.bw),
            mask=c.bw.mask.copy(),
            sigma=c.sigma,
            log_post=c.ll + c.lp + log_sigma_prior,
        )

    draws = _run(chain, sweep, record, n_iter, burn_in, thin, adapt_window)
    return PosteriorSampleSet(
        draws=draws, seed=seed, acceptance_rates=_rates(chain), family=chain.family,
        d=model.d, step_sizes=dict(chain.steps),
    )


def posterior_mean_function(samples: PosteriorSampleSet, model: RegressionModel, eval_points) -> np.ndarray:
    """Average over draws of the conditional GP mean ``K_*^T (K + sigma^2 I)^-1 y``."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    X = np.atleast_2d(np.asarray(eval_points, dtype=float))
    cache: dict = {}
    total = np.zeros(X.shape[0])
    for dr in samples.draws:
        key = dr.a.tobytes() + np.float64(dr.sigma).tobytes()
        if key not in cache:
            K = model.kernel(dr.a)
            K[np.diag_indices_from(K)] += dr.sigma ** 2
            L, _ = cholesky_with_jitter(K)
            alpha = solve_triangular(
                L.T, solve_triangular(L, model.responses, lower=True), lower=False
            )
            cache[key] = cross_covariance(X, model.design, dr.a) @ alpha
        total += cache[key]
    return total / len(samples)


def _elliptical_slice(chain: _Chain, model: DensityModel, L: np.ndarray):
    rng = chain.rng
    z = chain.z
    nu = rng.standard_normal(z.size)
    log_y = chain.ll + math.log(rng.random())
    phi = rng.uniform(0, 2 * math.pi)
    lo, hi = phi - 2 * math.pi, phi
    while True:
        zp = z * math.cos(phi) + nu * math.sin(phi)
        ll = model.log_likelihood(L @ zp)
        if ll > log_y:
            chain.z, chain.ll = zp, ll
            chain.tally("latent", True)
            return
        if phi > 0:
            hi = phi
        else:
            lo = phi
        if hi - lo < 1e-12:
            chain.tally("latent", False)
            return
        phi = rng.uniform(lo, hi)


def run_density_mcmc(
    model: DensityModel,
    n_iter: int,
    burn_in: int,
    thin: int = 1,
    seed=0,
    step_sizes: dict | None = None,
    adapt: bool = True,
    adapt_window: int = 50,
    init: BandwidthState | None = None,
    keep_latent: bool = True,
) -> PosteriorSampleSet:
    """Whitened elliptical-slice-within-Gibbs for the logistic GP density."""
    _check_schedule(n_iter, burn_in, thin)
    rng = np.random.default_rng(seed)
    factors: dict = {}

    def factor(a):
        key = np.asarray(a, dtype=float).tobytes()
        if key not in factors:
            if len(factors) > 8:
                factors.clear()
            factors[key] = model.factor(a)
        return factors[key]

    chain = _Chain(model.prior, lambda a, s, z: model.log_likelihood(factor(a) @ z), rng, dict(step_sizes or {}))
    chain.adapt = adapt
    chain.bw = init.copy() if init is not None else model.prior.sample(rng)
    chain.z = rng.standard_normal(model.grid.size)
    chain.lp = model.prior.log_prior(chain.bw)
    chain.ll = chain.loglik(chain.bw.a, None, chain.z)

    def sweep(c):
        _elliptical_slice(c, model, factor(c.bw.a))
        _rw_scale(c)
        _rw_theta(c)
        _subset(c)
        _flip(c)
        _rw_base(c)

    def record(c, it):
        W = factor(c.bw.a) @ c.z
        return Draw(
            iteration=it,
            a=c.bw.a.copy(),
            theta=_theta_vector(c.bw),
            mask=c.bw.mask.copy(),
            sigma=math.nan,
            log_post=c.ll + c.lp - 0.5 * float(c.z @ c.z) - 0.5 * c.z.size * LOG_2PI,
            z=c.z.copy() if keep_latent else None,
            log_density=W - model.log_normalizer(W),
        )

    draws = _run(chain, sweep, record, n_iter, burn_in, thin, adapt_window)
    return PosteriorSampleSet(
        draws=draws, seed=seed, acceptance_rates=_rates(chain), family=chain.family,
        d=model.d, step_sizes=dict(chain.steps),
    )


def posterior_mean_density(samples: PosteriorSampleSet) -> np.ndarray:
    """Grid values of the posterior mean density (average of normalized draws)."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    return np.mean([np.exp(dr.log_density) for dr in samples.draws], axis=0)

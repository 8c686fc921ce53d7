"""Small-ball probabilities, RKHS approximation cost and the concentration function.

``phi_a(eps) = inf_{h : |h - w0|_inf <= eps} |h|_H^2 - log P(|W^a|_inf <= eps)``,
with both sup-norms taken over grid nodes.

Two small-ball estimators are provided.  ``"mc"`` counts exact field draws
whose grid maximum stays below eps; one pool of draws serves every eps, so
estimates are exactly monotone.  ``"sequential"`` conditions node by node on
a pivoted Cholesky factor (the GHK simulator): each draw contributes the
product of the conditional interval probabilities, which keeps the relative
error bounded when the probability is far below ``1 / n_mc``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri
from scipy.stats import norm

from mbgp.bandwidth_priors import minimax_bandwidths
from mbgp.gp_core import Grid, as_scale, build_covariance_matrix, check_grid_size, field_factor
from mbgp.truths import TruthFunction, global_smoothness_active

BATCH = 5000
PIVOT_TOL = 1e-12
BISECT_ITERS = 60
Z95 = float(norm.ppf(0.975))


class BisectionError(RuntimeError):
    pass


@dataclass
class SmallBallEstimate:
    """``neg_log_p = -log P(max_grid |W| <= eps)``; ``flagged`` marks a
    one-sided bound (no successes)."""

    epsilon: float
    neg_log_p: float
    ci_low: float
    ci_high: float
    std_err: float
    n_mc: int
    successes: int
    flagged: bool
    method: str


def sup_norm_draws(a, grid: Grid, n_mc: int, seed) -> np.ndarray:
    """Grid sup of ``|W^a|`` for ``n_mc`` exact draws (fixed batch layout, so
    the same seed yields the same draws for every eps)."""
    L, _, _ = field_factor(grid, a)
    rng = np.random.default_rng(seed)
    out = np.empty(n_mc)
    for start in range(0, n_mc, BATCH):
        b = min(BATCH, n_mc - start)
        Z = rng.standard_normal((b, L.shape[0]))
        # broadcasting along inactive axes does not change the maximum
        out[start:start + b] = np.abs(Z @ L.T).max(axis=1)
    return out


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(centre - half, 0.0)
    hi = 1.0 if k == n else min(centre + half, 1.0)
    return lo, hi


def _from_counts(eps: float, k: int, n: int) -> SmallBallEstimate:
    if k == 0:
        bound = -math.log(3.0 / n)
        return SmallBallEstimate(eps, bound, bound, math.inf, math.nan, n, 0, True, "mc")
    p = k / n
    lo, hi = wilson_interval(k, n)
    se = math.sqrt((1 - p) / (n * p))
    return SmallBallEstimate(eps, -math.log(p), -math.log(hi), -math.log(lo) if lo > 0 else math.inf,
                             se, n, k, False, "mc")


def pivoted_cholesky(K: np.ndarray, tol: float = PIVOT_TOL) -> tuple[np.ndarray, list]:
    """Rank-revealing Cholesky: ``K ~= L L^T`` with columns added in order of
    the largest remaining diagonal; stops when it drops below ``tol``."""
    n = K.shape[0]
    diag = np.diag(K).astype(float).copy()
    L = np.zeros((n, n))
    piv: list = []
    for k in range(n):
        i = int(np.argmax(diag))
        if diag[i] < tol:
            break
        piv.append(i)
        col = K[:, i] - L[:, :k] @ L[i, :k]
        L[:, k] = col / math.sqrt(diag[i])
        diag -= L[:, k] ** 2
        diag[piv] = 0.0
    return L[:, :len(piv)], piv


def _sequential_logw(L, piv, eps: float, U: np.ndarray) -> np.ndarray:
    """Log importance weights of the GHK simulator for ``max |W| <= eps``."""
    r = len(piv)
    n = U.shape[0]
    Z = np.zeros((r, n))
    logw = np.zeros(n)
    for k, i in enumerate(piv):
        mu = L[i, :k] @ Z[:k]
        s = L[i, k]
        a_lo, a_hi = (-eps - mu) / s, (eps - mu) / s
        lo, hi = ndtr(a_lo), ndtr(a_hi)
        width = hi - lo
        # far tails: the difference of CDFs underflows, use the log form
        tiny = width < 1e-300
        lw = np.where(tiny, np.maximum(log_ndtr(a_hi), log_ndtr(-a_lo)) - 745.0, 0.0)
        lw[~tiny] = np.log(width[~tiny])
        logw += lw
        Z[k] = ndtri(np.clip(lo + U[:, k] * width, 1e-16, 1 - 1e-16))
    W = L @ Z
    ok = np.all(np.abs(W) <= eps * (1 + 1e-9), axis=0)
    return np.where(ok, logw, -np.inf)


def _log_mean_exp(x: np.ndarray) -> tuple[float, float]:
    m = float(np.max(x))
    if not math.isfinite(m):
        return -math.inf, math.nan
    w = np.exp(x - m)
    mean = float(w.mean())
    rel_se = float(w.std() / (mean * math.sqrt(x.size)))
    return m + math.log(mean), rel_se


def sequential_small_ball(a, eps_list, grid: Grid, n_mc: int, seed) -> list:
    a = as_scale(a)
    if a.size != grid.d:
        raise ValueError("scale dimension does not match grid dimension")
    check_grid_size(grid)
    active = [j for j in range(grid.d) if a[j] > 0]
    sub = Grid(tuple(grid.axes[j] for j in active)) if active else None
    K = build_covariance_matrix(sub.points, a[active]) if active else np.ones((1, 1))
    L, piv = pivoted_cholesky(K)
    out = []
    for eps in eps_list:
        rng = np.random.default_rng(seed)
        chunks = []
        for start in range(0, n_mc, BATCH):
            b = min(BATCH, n_mc - start)
            U = rng.random((b, len(piv)))
            chunks.append(_sequential_logw(L, piv, float(eps), U))
        logp, rel_se = _log_mean_exp(np.concatenate(chunks))
        if not math.isfinite(logp):
            bound = -math.log(3.0 / n_mc)
            out.append(SmallBallEstimate(float(eps), bound, bound, math.inf, math.nan, n_mc, 0, True, "sequential"))
            continue
        half = Z95 * rel_se
        out.append(SmallBallEstimate(
            float(eps), -logp, -logp - half, -logp + half, rel_se, n_mc, n_mc, False, "sequential",
        ))
    return out


def small_ball(a, epsilon, grid: Grid, n_mc: int, seed, method: str = "mc") -> SmallBallEstimate:
    """``-log P(max_grid |W^a| <= eps)`` with a 95% interval."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return small_ball_curve(a, [epsilon], grid, n_mc, seed, method)[0]


def small_ball_curve(a, eps_list, grid: Grid, n_mc: int, seed, method: str = "mc") -> list:
    """Small-ball estimates for several eps from one pool of random numbers."""
    eps_list = [float(e) for e in eps_list]
    if min(eps_list) <= 0:
        raise ValueError("epsilon must be positive")
    if method == "mc":
        sups = sup_norm_draws(a, grid, n_mc, seed)
        return [_from_counts(e, int(np.count_nonzero(sups <= e)), n_mc) for e in eps_list]
    if method == "sequential":
        return sequential_small_ball(a, eps_list, grid, n_mc, seed)
    raise ValueError(f"unknown small-ball method {method!r}")


@dataclass
class RkhsCost:
    cost: float
    penalty: float
    misfit: float


def rkhs_min_norm(w0: TruthFunction, a, epsilon: float, grid: Grid) -> RkhsCost:
    """Squared RKHS norm of a kernel-ridge fit whose grid misfit lies in
    ``[0.9 eps, eps]``; an upper bound on the infimum over the eps-ball."""
    a = as_scale(a)
    if any(a[j] <= 0 for j in w0.active):
        raise ValueError("a_j must be positive on every coordinate the truth uses")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    w = w0(grid.points)
    if np.max(np.abs(w), initial=0.0) <= epsilon:
        return RkhsCost(0.0, math.inf, float(np.max(np.abs(w), initial=0.0)))
    K = build_covariance_matrix(grid.points, a)
    k, V = np.linalg.eigh(K)
    k = np.clip(k, 0.0, None)
    c = V.T @ w

    def misfit(lam):
        return float(np.max(np.abs(V @ (lam / (k + lam) * c))))

    def cost(lam):
        return float(np.sum(k / (k + lam) ** 2 * c * c))

    top = float(k.max())
    lo, hi = math.log(top * 1e-15), math.log(top * 1e8)
    if misfit(math.exp(lo)) > epsilon:
        raise BisectionError(f"no ridge fit reaches sup misfit {epsilon:g} at this scale")
    if misfit(math.exp(hi)) <= epsilon:
        lo = hi
    for _ in range(BISECT_ITERS):
        m = misfit(math.exp(lo))
        if 0.9 * epsilon <= m <= epsilon:
            break
        mid = 0.5 * (lo + hi)
        if misfit(math.exp(mid)) <= epsilon:
            lo = mid
        else:
            hi = mid
    lam = math.exp(lo)
    m = misfit(lam)
    if not 0.9 * epsilon <= m <= epsilon:
        raise BisectionError(f"penalty bisection ended with misfit {m:.3g} outside [0.9, 1] x {epsilon:g}")
    return RkhsCost(cost(lam), lam, m)


@dataclass
class ConcentrationEstimate:
    a: np.ndarray
    epsilon: float
    neg_log_small_ball: float
    std_err: float
    ci_low: float
    ci_high: float
    flagged: bool
    rkhs_cost: float
    phi: float


def concentration_profile(w0: TruthFunction, a, eps_list, grid: Grid, n_mc: int, seed,
                          method: str = "mc") -> list:
    """``phi_a(eps) = rkhs cost + small-ball exponent`` for each eps."""
    a = as_scale(a)
    balls = small_ball_curve(a, eps_list, grid, n_mc, seed, method)
    out = []
    for sb in balls:
        rk = rkhs_min_norm(w0, a, sb.epsilon, grid)
        out.append(ConcentrationEstimate(
            a.copy(), sb.epsilon, sb.neg_log_p, sb.std_err, sb.ci_low, sb.ci_high, sb.flagged,
            rk.cost, rk.cost + sb.neg_log_p,
        ))
    return out


@dataclass
class TailCheck:
    M: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    C: float

    @property
    def holds(self) -> np.ndarray:
        return self.bound >= self.empirical


def _tail_shape(a_bar: float, M: float, d: int) -> tuple[float, float]:
    """``log(2 (a M)^d) - M^2/2`` and the multiplier of C."""
    s = math.sqrt(max(math.log(a_bar), 0.0)) + math.sqrt(max(math.log(M), 0.0))
    return math.log(2.0) + d * math.log(a_bar * M) - 0.5 * M * M, s


def sup_tail_check(a, M_list, grid: Grid, n_mc: int, seed) -> TailCheck:
    """Empirical ``P(max_grid |W^a| > M)`` against
    ``2 (a M)^d exp(-M^2/2 + C (sqrt(log a) + sqrt(log M)))``, with C the
    smallest value that makes the bound hold at the smallest positive M."""
    a = as_scale(a)
    a_bar = float(np.max(a)) if np.max(a) > 0 else 1.0
    a_bar = max(a_bar, 1.0)
    d = grid.d
    M = np.asarray(sorted(float(m) for m in M_list))
    sups = sup_norm_draws(a, grid, n_mc, seed)
    emp = np.array([np.mean(sups > m) for m in M])
    pos = M > 0
    C = 0.0
    if pos.any():
        m0 = float(M[pos][0])
        e0 = float(emp[pos][0])
        base, s = _tail_shape(a_bar, m0, d)
        if e0 > 0 and math.log(e0) > base:
            if s == 0:
                raise ValueError("cannot calibrate C: the bound has no free term at this (a, M)")
            C = (math.log(e0) - base) / s
    bound = np.ones_like(M)
    for i, m in enumerate(M):
        if m > 0:
            base, s = _tail_shape(a_bar, m, d)
            bound[i] = min(1.0, math.exp(base + C * s))
    return TailCheck(M, emp, bound, C)


@dataclass
class MinimaxPoint:
    n: int
    a: np.ndarray
    epsilon: float
    estimate: ConcentrationEstimate

    @property
    def ratio(self) -> float:
        """``phi / (n eps^2)``; bounded in n when the bandwidths are rate-optimal."""
        return self.estimate.phi / (self.n * self.epsilon ** 2)


def minimax_epsilon(n: int, alpha0: float) -> float:
    """``n^(-alpha0 / (2 alpha0 + 1))``, or ``n^-1/2`` for infinite smoothness."""
    if math.isinf(alpha0):
        return float(n) ** -0.5
    return float(n) ** (-alpha0 / (2 * alpha0 + 1))


def minimax_concentration(w0: TruthFunction, n_values, grid: Grid, n_mc: int, seed,
                          method: str = "sequential") -> list:
    """Concentration function at the rate-optimal bandwidths and radius for each n.

    Each n draws its small-ball sample from ``SeedSequence([seed, n])``."""
    a0 = global_smoothness_active(w0)
    out = []
    for n in n_values:
        n = int(n)
        a = np.asarray(minimax_bandwidths(n, w0.alpha), dtype=float)
        eps = minimax_epsilon(n, a0)
        ss = np.random.SeedSequence([int(seed), n])
        est = concentration_profile(w0, a, [eps], grid, n_mc, ss, method)[0]
        out.append(MinimaxPoint(n, a, eps, est))
    return out

"""Higher-order Gaussian kernels and numerical checks of kernel approximation.

``G_2r = Q_{2r-2} * phi`` with ``Q_{2r-2}(x) = sum_{i<r} c_2i x^2i`` has unit
mass and vanishing even moments up to order ``2r - 2``.  The tensor kernel
``psi_a(x) = prod_j a_j G_2r(a_j x_j)`` smooths a truth; its approximation
error shrinks like ``sum_j a_j^-alpha_j``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from mbgp.gp_core import Grid, as_scale
from mbgp.truths import Factor, TruthFunction, make_truth

MAX_ORDER = 6
QUAD_TOL = 1e-8
SQRT_2PI = math.sqrt(2 * math.pi)


class QuadratureError(RuntimeError):
    pass


def kernel_coeffs_exact(r: int) -> tuple:
    """``c_2i = (-1)^i 2^(i-2r+1) (2r)! / (r! (2i+1)! (r-i-1)!)`` as Fractions."""
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= MAX_ORDER:
        raise ValueError(f"kernel order r must be an integer in 1..{MAX_ORDER}, got {r!r}")
    r = int(r)
    out = []
    for i in range(r):
        num = Fraction(2) ** (i - 2 * r + 1) * math.factorial(2 * r)
        den = math.factorial(r) * math.factorial(2 * i + 1) * math.factorial(r - i - 1)
        out.append((-1) ** i * num / den)
    return tuple(out)


def kernel_coeffs(r: int) -> tuple:
    return tuple(float(c) for c in kernel_coeffs_exact(r))


@dataclass(frozen=True)
class HigherOrderKernel:
    r: int
    coeffs: tuple

    @classmethod
    def of_order(cls, r: int) -> "HigherOrderKernel":
        return cls(int(r), kernel_coeffs(r))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        q = np.zeros_like(x)
        for c in reversed(self.coeffs):
            q = q * x2 + c
        return q * np.exp(-0.5 * x2) / SQRT_2PI

    def scalar(self, x: float) -> float:
        x2 = x * x
        q = 0.0
        for c in reversed(self.coeffs):
            q = q * x2 + c
        return q * math.exp(-0.5 * x2) / SQRT_2PI

    @property
    def halfwidth(self) -> float:
        """Smallest integer T with ``|G(x)| < 1e-16`` for all ``|x| >= T``."""
        return _halfwidth(self.r)


@lru_cache(maxsize=None)
def _halfwidth(r: int) -> float:
    c = np.abs(kernel_coeffs(r))
    for T in range(6, 60):
        x = np.linspace(T, T + 20, 400)
        env = sum(ci * x ** (2 * i) for i, ci in enumerate(c)) * np.exp(-0.5 * x * x) / SQRT_2PI
        if env.max() < 1e-16:
            return float(T)
    raise RuntimeError("kernel tail bound not found")


def eval_tensor_kernel(r: int, a, x) -> float:
    """``(prod a_j) prod_j G_2r(a_j x_j)``."""
    a = as_scale(a)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != a.shape:
        raise ValueError("x and a must have the same length")
    if np.any(a <= 0):
        raise ValueError("tensor kernel needs every a_j > 0")
    G = HigherOrderKernel.of_order(r)
    return float(np.prod(a) * np.prod(G(a * x)))


def kernel_fourier(r: int, lam) -> float:
    """Closed form ``e^(-|lam|^2/2) prod_j sum_{s<r} lam_j^2s / (2^s s!)``."""
    if not 1 <= int(r) <= MAX_ORDER:
        raise ValueError(f"kernel order r must lie in 1..{MAX_ORDER}")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    poly = np.zeros_like(lam)
    for s in range(int(r)):
        poly += lam ** (2 * s) / (2.0 ** s * math.factorial(s))
    return float(np.exp(-0.5 * np.sum(lam * lam)) * np.prod(poly))


def scaled_kernel_fourier(r: int, a, lam) -> float:
    """Fourier transform of ``psi_a``: ``psi_hat(lam / a)``."""
    a = as_scale(a)
    return kernel_fourier(r, np.asarray(lam, dtype=float) / a)


def _quad(f, lo, hi, points=None, tol=QUAD_TOL):
    pts = None
    if points is not None:
        pts = sorted(p for p in set(points) if lo < p < hi) or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(f, lo, hi, points=pts, epsabs=tol, epsrel=0.0, limit=500,
                                        full_output=True)[:3]
    if err > 100 * tol:
        raise QuadratureError(f"adaptive quadrature did not converge (error estimate {err:.2e})")
    return val


def numerical_fourier(r: int, lam) -> float:
    """``int psi(x) cos(lam . x) dx`` by 1-d quadrature per coordinate (psi is a
    tensor product and even, so the transform factorizes and is real)."""
    G = HigherOrderKernel.of_order(r)
    T = G.halfwidth
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = 1.0
    for lj in lam:
        out *= _quad(lambda x: G.scalar(x) * math.cos(lj * x), -T, T, tol=1e-12)
    return out


def kernel_moment(r: int, j: int) -> float:
    """``int x^2j G_2r(x) dx`` over the truncated support."""
    G = HigherOrderKernel.of_order(r)
    T = max(G.halfwidth, 12.0)
    return _quad(lambda x: x ** (2 * j) * G.scalar(x), -T, T, tol=1e-12)


def convolve_factor(G: HigherOrderKernel, f: Factor, a: float, x: float) -> float:
    """``(G_a * f_ext)(x) = int G(s) f_ext(x - s/a) ds``."""
    if a <= 0:
        raise ValueError("scale must be positive")
    T = G.halfwidth
    kinks = [a * (x - k) for k in f.kinks]
    g, fs = G.scalar, f.scalar
    return _quad(lambda s: g(s) * fs(x - s / a), -T, T, points=kinks)


def convolution_values(truth: TruthFunction, r: int, a, grid: Grid) -> np.ndarray:
    """``psi_a * w_ext`` at every grid node (flattened, C order)."""
    a = as_scale(a)
    if a.size != truth.d or grid.d != truth.d:
        raise ValueError("dimension mismatch between truth, scale and grid")
    G = HigherOrderKernel.of_order(r)
    total = np.zeros(grid.shape)
    for term in truth.terms:
        by_coord = dict(term.factors)
        block = np.full((1,) * grid.d, float(term.coef))
        for j, ax in enumerate(grid.axes):
            f = by_coord.get(j)
            if f is None:
                vec = np.ones(len(ax))  # constant along j: convolution is exact
            else:
                if a[j] <= 0:
                    raise ValueError(f"a_{j + 1} must be positive on a coordinate the truth uses")
                vec = np.array([convolve_factor(G, f, a[j], float(x)) for x in ax])
            shape = [1] * grid.d
            shape[j] = len(ax)
            block = block * vec.reshape(shape)
        total = total + block
    return np.broadcast_to(total, grid.shape).ravel()


def convolution_error(truth: TruthFunction, r: int, a, grid: Grid) -> float:
    """Grid sup of ``|psi_a * w_ext - w|``."""
    conv = convolution_values(truth, r, a, grid)
    return float(np.max(np.abs(conv - truth(grid.points))))


def lower_bound_constant(box: float = 1.5) -> float:
    """``int_{-box}^{box} phi(s) |s|^1.5 ds``; times ``a^-1.5`` it bounds the
    error at the kink from below for ``a >= 1``."""
    G = HigherOrderKernel.of_order(1)
    return 2 * _quad(lambda s: G.scalar(s) * s ** 1.5, 0.0, box, tol=1e-13)


@dataclass
class LowerBoundReport:
    a: np.ndarray
    center_error: np.ndarray
    grid_sup: np.ndarray
    bound: np.ndarray
    slope: float
    intercept: float

    @property
    def C0(self) -> float:
        return math.exp(self.intercept)

    def rows(self) -> list:
        return [
            [float(a), float(e), float(s), float(b)]
            for a, e, s, b in zip(self.a, self.center_error, self.grid_sup, self.bound)
        ]


def fit_loglog(x, y) -> tuple[float, float]:
    """OLS slope and intercept of ``log y`` on ``log x``."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def lower_bound_check(a_values, grid_points: int = 401, with_grid_sup: bool = True) -> LowerBoundReport:
    """Error of the Gaussian smoother on ``|x - 0.5|^1.5`` (d=1, r=1) at the kink
    and over the grid, against the truncated-integral lower bound.

    The error at ``x = 0.5`` is ``int phi(s) w_ext(0.5 - s/a) ds``.  The
    extension is nonnegative and equals ``|s/a|^1.5`` for ``|s| <= 1.5 a``, so
    truncating to ``|s| <= 1.5`` gives ``a^-1.5 int_{|s|<=1.5} phi(s)|s|^1.5 ds``.
    """
    a_values = np.asarray(a_values, dtype=float)
    if np.any(a_values < 1) or np.any(np.diff(a_values) <= 0):
        raise ValueError("a_values must be increasing and >= 1")
    truth = make_truth("T1", d=1)
    G = HigherOrderKernel.of_order(1)
    f = truth.terms[0].factors[0][1]
    c = lower_bound_constant()
    center = np.array([convolve_factor(G, f, a, 0.5) for a in a_values])
    grid = Grid((np.linspace(0, 1, grid_points),))
    sup = np.array([convolution_error(truth, 1, [a], grid) for a in a_values]) if with_grid_sup else np.full(a_values.size, np.nan)
    slope, intercept = fit_loglog(a_values, center)
    return LowerBoundReport(a_values, center, sup, c * a_values ** -1.5, slope, intercept)

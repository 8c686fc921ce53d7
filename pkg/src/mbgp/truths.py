"""Catalog of test functions with known anisotropic smoothness.

Each truth is a finite sum of product terms ``c * prod_j f_j(x_j)``.  On
``[0, 1]^d`` the truth is the raw formula; on ``R^d`` every factor is multiplied
by a C-infinity bump that equals 1 on ``[-1, 2]`` and vanishes outside
``[-2, 3]``, which gives compact support without changing smoothness on the
cube.  Coordinates a term does not depend on are left unextended, so the
convolution along them is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

BUMP_FLAT = (-1.0, 2.0)
BUMP_SUPPORT = (-2.0, 3.0)


def _h(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    a, b = _h(t), _h(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def _step_scalar(t: float) -> float:
    if t <= 0:
        return 0.0
    if t >= 1:
        return 1.0
    a, b = math.exp(-1.0 / t), math.exp(-1.0 / (1.0 - t))
    return a / (a + b)


def bump_scalar(x: float) -> float:
    if -1.0 <= x <= 2.0:
        return 1.0
    return _step_scalar(x + 2.0) * _step_scalar(3.0 - x)


def bump(x):
    """Equals 1 on [-1, 2], 0 outside [-2, 3], smooth in between."""
    x = np.asarray(x, dtype=float)
    return smooth_step(x + 2.0) * smooth_step(3.0 - x)


@dataclass(frozen=True)
class Factor:
    """One-dimensional factor; ``kind`` in {abs_pow, square, sin, cos, const}."""

    kind: str
    center: float = 0.5
    power: float = 1.0
    freq: float = 1.0

    def raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "abs_pow":
            return np.abs(x - self.center) ** self.power
        if self.kind == "square":
            return (x - self.center) ** 2
        if self.kind == "sin":
            return np.sin(self.freq * x)
        if self.kind == "cos":
            return np.cos(self.freq * x)
        if self.kind == "const":
            return np.ones_like(x)
        raise ValueError(f"unknown factor kind {self.kind!r}")

    def __call__(self, x):
        return self.raw(x) * bump(x)

    def scalar(self, x: float) -> float:
        """Extended factor at one point, without numpy overhead (quadrature integrand)."""
        b = bump_scalar(x)
        if b == 0.0:
            return 0.0
        k = self.kind
        if k == "abs_pow":
            v = abs(x - self.center) ** self.power
        elif k == "square":
            v = (x - self.center) ** 2
        elif k == "sin":
            v = math.sin(self.freq * x)
        elif k == "cos":
            v = math.cos(self.freq * x)
        else:
            v = 1.0
        return v * b

    @property
    def kinks(self) -> tuple:
        pts = list(BUMP_SUPPORT) + list(BUMP_FLAT)
        if self.kind == "abs_pow":
            pts.append(self.center)
        return tuple(sorted(pts))

    def sup_on_cube(self) -> float:
        if self.kind == "abs_pow":
            return max(self.center, 1 - self.center) ** self.power
        if self.kind == "square":
            return max(self.center, 1 - self.center) ** 2
        return 1.0


@dataclass(frozen=True)
class Term:
    coef: float
    factors: tuple  # ((coord, Factor), ...)


@dataclass(frozen=True)
class TruthFunction:
    """``alpha[j]`` is the Hoelder exponent along coordinate j (``inf`` when the
    truth is analytic or constant there); ``active`` lists coordinates the
    truth depends on (0-based)."""

    id: str
    d: int
    terms: tuple
    alpha: tuple
    active: tuple
    description: str = ""

    def _eval(self, X, extended: bool):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected points with {self.d} coordinates")
        out = np.zeros(X.shape[0])
        for term in self.terms:
            v = np.full(X.shape[0], float(term.coef))
            for j, f in term.factors:
                v = v * (f(X[:, j]) if extended else f.raw(X[:, j]))
            out += v
        return out

    def __call__(self, X):
        """Raw formula (valid on the unit cube)."""
        return self._eval(X, extended=False)

    def extended(self, X):
        """Compactly supported extension to R^d (agrees with the raw formula on [-1, 2]^d)."""
        return self._eval(X, extended=True)

    def sup_bound(self) -> float:
        """Upper bound on ``sup |w|`` over the cube from the factor sups."""
        return float(sum(abs(t.coef) * math.prod(f.sup_on_cube() for _, f in t.factors) for t in self.terms))

    @property
    def alpha_active(self) -> tuple:
        return tuple(self.alpha[j] for j in self.active)


def _harmonic(alphas) -> float:
    inv = sum(1.0 / a for a in alphas)
    return math.inf if inv == 0 else 1.0 / inv


def global_smoothness_active(truth: TruthFunction) -> float:
    """``(sum_{j in I} 1/alpha_j)^-1`` over the active set."""
    return _harmonic(truth.alpha_active)


def _pad_alpha(d, given):
    a = [math.inf] * d
    for j, v in given.items():
        a[j] = v
    return tuple(a)


def make_truth(name: str, d: int = 2, value: float = 1.0) -> TruthFunction:
    """Build a catalog truth.

    ``T1``  ``|x1 - 0.5|^1.5``                      alpha_1 = 1.5, I = {1}
    ``T2``  ``sin(4 x1) cos(2 x2)``                 analytic, I = {1, 2}
    ``T3``  ``|x1 - 0.5|^1.5 + (x2 - 0.5)^2``       alpha = (1.5, inf), I = {1, 2}
    ``zero`` and ``constant`` (value ``value``, extended by the bump in every coordinate).
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    kink = Factor("abs_pow", 0.5, 1.5)
    if name == "T1":
        return TruthFunction("T1", d, (Term(1.0, ((0, kink),)),), _pad_alpha(d, {0: 1.5}), (0,),
                             "|x1 - 0.5|^1.5")
    if name == "T2":
        if d < 2:
            raise ValueError("T2 needs d >= 2")
        term = Term(1.0, ((0, Factor("sin", freq=4.0)), (1, Factor("cos", freq=2.0))))
        return TruthFunction("T2", d, (term,), _pad_alpha(d, {}), (0, 1), "sin(4 x1) cos(2 x2)")
    if name == "T3":
        if d < 2:
            raise ValueError("T3 needs d >= 2")
        terms = (Term(1.0, ((0, kink),)), Term(1.0, ((1, Factor("square", 0.5)),)))
        return TruthFunction("T3", d, terms, _pad_alpha(d, {0: 1.5}), (0, 1),
                             "|x1 - 0.5|^1.5 + (x2 - 0.5)^2")
    if name == "zero":
        return TruthFunction("zero", d, (), _pad_alpha(d, {}), (), "0")
    if name == "constant":
        term = Term(float(value), tuple((j, Factor("const")) for j in range(d)))
        return TruthFunction("constant", d, (term,), _pad_alpha(d, {}), (), f"{value!r}")
    raise ValueError(f"unknown truth {name!r}; choose from {sorted(CATALOG)}")


CATALOG = ("T1", "T2", "T3", "zero", "constant")


def density_normalizer(truth: TruthFunction) -> float:
    """``int_[0,1]^d exp(w(x)) dx`` by adaptive quadrature (kinks passed as breakpoints)."""
    pts = sorted({p for t in truth.terms for _, f in t.factors for p in f.kinks if 0 < p < 1})
    opts = {"epsabs": 1e-13, "epsrel": 1e-12, "limit": 200}
    if pts:
        opts["points"] = pts

    def f(*x):
        return math.exp(float(truth(np.array([x]))[0]))

    val, _ = integrate.nquad(f, [(0.0, 1.0)] * truth.d, opts=[opts] * truth.d)
    return float(val)


def kink_series_normalizer(n_terms: int = 60) -> float:
    """``int_0^1 exp(|x - 0.5|^1.5) dx = 2 sum_k 0.5^(1.5k+1) / (k! (1.5k+1))``."""
    return 2.0 * sum(0.5 ** (1.5 * k + 1) / (math.factorial(k) * (1.5 * k + 1)) for k in range(n_terms))

"""Empirical contraction-rate sweeps and paired prior comparisons.

A sweep fits one posterior per ``(n, replicate)`` cell, measures the error of
the posterior-mean estimate, and regresses log mean error on log n.  Data
and chain seeds for a cell come from ``SeedSequence([seed, n, replicate])``,
so two plans with the same seed see identical datasets.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from mbgp.gp_core import tensor_grid
from mbgp.inference import (
    DensityModel,
    PosteriorSampleSet,
    RegressionModel,
    posterior_mean_density,
    posterior_mean_function,
    run_density_mcmc,
    run_regression_mcmc,
)
from mbgp.bandwidth_priors import FAMILIES
from mbgp.report_io import loglog_figure, write_csv, write_json
from mbgp.truths import TruthFunction, density_normalizer, global_smoothness_active, make_truth

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
MIN_ACCEPT_RATE = 0.01
BOOTSTRAP_RESAMPLES = 2000


class PlanError(ValueError):
    pass


class PlanMismatchError(PlanError):
    pass


class InsufficientPointsError(PlanError):
    pass


def make_prior(family: str, d: int, n: int | None = None, **hyper):
    """Instantiate a prior family by name; ``n`` feeds the partial-mixture weight."""
    if family not in FAMILIES:
        raise PlanError(f"unknown prior family {family!r}; choose from {sorted(FAMILIES)}")
    cls = FAMILIES[family]
    kw = dict(hyper)
    for key in ("dim_weights", "beta", "base_interval", "a"):
        if key in kw and kw[key] is not None:
            kw[key] = tuple(kw[key])
    if "beta_by_size" in kw and kw["beta_by_size"] is not None:
        kw["beta_by_size"] = {int(k): tuple(v) for k, v in dict(kw["beta_by_size"]).items()}
    if family == "deterministic":
        return cls(**kw)
    if family == "partial_mixture":
        if n is None:
            raise PlanError("partial-mixture prior needs the sample size n")
        kw.setdefault("n", n)
    try:
        return cls(d=d, **kw)
    except TypeError as exc:
        raise PlanError(f"bad hyperparameters for {family}: {exc}") from None


@dataclass
class ExperimentPlan:
    truth: str
    d: int
    model: str
    prior: dict
    n_grid: tuple
    replicates: int
    seed: int
    sigma0: float = 0.1
    n_iter: int = 1200
    burn_in: int = 400
    thin: int = 8
    sigma_bounds: tuple = (0.01, 10.0)
    grid_points: int = 0  # density grid per axis; 0 picks 201 (d=1) or 41 (d=2)
    name: str = "plan"

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.sigma_bounds = tuple(float(s) for s in self.sigma_bounds)
        if self.model not in ("regression", "density"):
            raise PlanError("model must be 'regression' or 'density'")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise PlanError("n_grid must be strictly increasing")
        if len(self.n_grid) < MIN_FIT_POINTS:
            raise InsufficientPointsError(
                f"slope fit needs at least {MIN_FIT_POINTS} sample sizes, plan has {len(self.n_grid)}"
            )
        if min(self.n_grid) < 10:
            raise PlanError("every n must be >= 10")
        if self.replicates < 3:
            raise PlanError("replicates must be >= 3")
        if "family" not in self.prior:
            raise PlanError("prior needs a 'family' entry")
        make_truth(self.truth, self.d)
        make_prior(**self.prior, d=self.d, n=self.n_grid[0])

    @property
    def truth_fn(self) -> TruthFunction:
        return make_truth(self.truth, self.d)

    def density_grid(self):
        m = self.grid_points or (201 if self.d == 1 else 41)
        return tensor_grid(self.d, m)

    def pairing_key(self) -> tuple:
        return (self.truth, self.d, self.model, self.n_grid, self.replicates, self.seed, self.sigma0)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray | None = None


def cell_seeds(seed: int, n: int, rep: int) -> tuple:
    data_ss, chain_ss = np.random.SeedSequence([int(seed), int(n), int(rep)]).spawn(2)
    return data_ss, chain_ss


def generate_dataset(truth: TruthFunction, model: str, n: int, sigma0: float, seed) -> Dataset:
    """Regression: uniform design, ``y = w(x) + N(0, sigma0^2)``.  Density:
    rejection sampling from ``exp(w) / int exp(w)`` with a uniform proposal."""
    if n < 10:
        raise ValueError("n must be >= 10")
    rng = np.random.default_rng(seed)
    d = truth.d
    if model == "regression":
        X = rng.random((n, d))
        y = truth(X) + sigma0 * rng.standard_normal(n)
        return Dataset(X, y)
    if model != "density":
        raise ValueError("model must be 'regression' or 'density'")
    log_env = truth.sup_bound()
    accept = density_normalizer(truth) / math.exp(log_env)
    if accept < MIN_ACCEPT_RATE:
        raise ValueError(f"rejection sampler acceptance {accept:.2%} is below 1%")
    out = []
    need = n
    while need > 0:
        prop = rng.random((max(2 * need, 64), d))
        keep = rng.random(prop.shape[0]) < np.exp(truth(prop) - log_env)
        out.append(prop[keep][:need])
        need -= out[-1].shape[0]
    return Dataset(np.concatenate(out)[:n])


def hellinger(f: np.ndarray, g: np.ndarray, weights: np.ndarray) -> float:
    """``(int (sqrt f - sqrt g)^2)^(1/2)`` by quadrature with the given weights."""
    diff = np.sqrt(np.clip(f, 0, None)) - np.sqrt(np.clip(g, 0, None))
    return float(math.sqrt(max(float(weights @ (diff * diff)), 0.0)))


def truth_density_on_grid(truth: TruthFunction, grid) -> np.ndarray:
    return np.exp(truth(grid.points)) / density_normalizer(truth)


def measure_error(posterior: PosteriorSampleSet, truth: TruthFunction, model) -> float:
    """Regression: empirical L2 distance at the design points between the
    posterior mean and the truth.  Density: Hellinger distance between the
    posterior-mean density and the truth on the model grid."""
    if len(posterior) == 0:
        raise ValueError("empty posterior")
    if isinstance(model, RegressionModel):
        mu = posterior_mean_function(posterior, model, model.design)
        return float(math.sqrt(np.mean((mu - truth(model.design)) ** 2)))
    if isinstance(model, DensityModel):
        f_hat = posterior_mean_density(posterior)
        f0 = truth_density_on_grid(truth, model.grid)
        return hellinger(f_hat, f0, model.grid.trapezoid_weights())
    raise TypeError("model must be a RegressionModel or DensityModel")


@dataclass
class CellResult:
    n: int
    replicate: int
    error: float
    flagged: bool = False
    message: str = ""
    acceptance: dict = field(default_factory=dict)


def run_cell(plan: ExperimentPlan, n: int, rep: int) -> CellResult:
    truth = plan.truth_fn
    data_ss, chain_ss = cell_seeds(plan.seed, n, rep)
    data = generate_dataset(truth, plan.model, n, plan.sigma0, data_ss)
    prior = make_prior(**plan.prior, d=plan.d, n=n)
    try:
        if plan.model == "regression":
            model = RegressionModel(data.X, data.y, prior, sigma_bounds=plan.sigma_bounds)
            post = run_regression_mcmc(model, plan.n_iter, plan.burn_in, plan.thin, seed=chain_ss)
        else:
            model = DensityModel(data.X, plan.density_grid(), prior)
            post = run_density_mcmc(model, plan.n_iter, plan.burn_in, plan.thin, seed=chain_ss,
                                    keep_latent=False)
        err = measure_error(post, truth, model)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        logger.warning("cell n=%d rep=%d failed: %s", n, rep, exc)
        return CellResult(n, rep, math.nan, True, str(exc))
    return CellResult(n, rep, err, False, "", post.acceptance_rates)


def _run_cell_args(args):
    return run_cell(*args)


def target_exponent(truth: TruthFunction, family: str) -> float:
    """Rate exponent predicted for the prior family on this truth.

    Single-bandwidth priors adapt only to the smallest smoothness in the full
    dimension, ``-a / (2a + d)``; the others to the active-set aggregate,
    ``-a0I / (2 a0I + 1)``."""
    if family == "single":
        a = min(truth.alpha)
        return -0.5 if math.isinf(a) else -a / (2 * a + truth.d)
    a0 = global_smoothness_active(truth)
    return -0.5 if math.isinf(a0) else -a0 / (2 * a0 + 1)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    std_err: float


def fit_slope(n_values, mean_errors) -> SlopeFit:
    n_values = np.asarray(n_values, dtype=float)
    mean_errors = np.asarray(mean_errors, dtype=float)
    if n_values.size < MIN_FIT_POINTS:
        raise InsufficientPointsError(
            f"slope fit needs at least {MIN_FIT_POINTS} sample sizes with valid cells, got {n_values.size}"
        )
    res = stats.linregress(np.log(n_values), np.log(mean_errors))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr))


@dataclass
class RateReport:
    plan: ExperimentPlan
    cells: list
    fit: SlopeFit
    target: float

    def mean_errors(self) -> tuple[np.ndarray, np.ndarray]:
        ns, means = [], []
        for n in self.plan.n_grid:
            errs = [c.error for c in self.cells if c.n == n and not c.flagged]
            if errs:
                ns.append(n)
                means.append(float(np.mean(errs)))
        return np.array(ns), np.array(means)

    def cell_rows(self) -> list:
        return [[c.n, c.replicate, c.error, int(c.flagged)] for c in self.cells]

    def summary(self) -> dict:
        ns, means = self.mean_errors()
        return {
            "plan": asdict(self.plan),
            "slope": self.fit.slope,
            "slope_std_err": self.fit.std_err,
            "intercept": self.fit.intercept,
            "target_exponent": self.target,
            "mean_error": {str(int(n)): float(m) for n, m in zip(ns, means)},
            "flagged_cells": sum(c.flagged for c in self.cells),
        }

    def write(self, out_dir, stem: str = "rate") -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [
            write_csv(out / f"{stem}_cells.csv", ["n", "replicate", "error", "flagged"], self.cell_rows()),
        ]
        ns, means = self.mean_errors()
        paths.append(write_csv(out / f"{stem}_mean.csv", ["n", "mean_error"], zip(ns.tolist(), means.tolist())))
        paths.append(write_json(out / f"{stem}_summary.json", self.summary()))
        fitted = np.exp(self.fit.intercept) * ns ** self.fit.slope
        ref = means[0] * (ns / ns[0]) ** self.target
        paths.append(loglog_figure(
            out / f"{stem}_loglog.svg",
            [
                (ns, means, "mean error", "o"),
                (ns, fitted, f"fit slope {self.fit.slope:.3f}", "-"),
                (ns, ref, f"theory slope {self.target:.3f}", "--"),
            ],
            f"{self.plan.name}: {self.plan.truth} (d={self.plan.d}), {self.plan.prior['family']}",
            "n", "error",
        ))
        return paths


def run_rate_sweep(plan: ExperimentPlan, workers: int = 1) -> RateReport:
    """Run every (n, replicate) cell and fit log mean error on log n.

    Cells are independent; with ``workers > 1`` they run in a process pool.
    Results are assembled in (n, replicate) order, so the report does not
    depend on the worker count."""
    jobs = [(plan, n, rep) for n in plan.n_grid for rep in range(plan.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell_args, jobs))
    else:
        cells = [_run_cell_args(j) for j in jobs]
    report = RateReport(plan, cells, SlopeFit(math.nan, math.nan, math.nan),
                        target_exponent(plan.truth_fn, plan.prior["family"]))
    ns, means = report.mean_errors()
    report.fit = fit_slope(ns, means)
    return report


@dataclass
class RatioSummary:
    mean: float
    ci_low: float
    ci_high: float
    count: int


def bootstrap_mean_ci(x: np.ndarray, seed: int, resamples: int = BOOTSTRAP_RESAMPLES) -> RatioSummary:
    """Percentile bootstrap 95% interval for the mean."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    means = x[idx].mean(axis=1)
    lo, hi = np.quantile(means, [0.025, 0.975])
    return RatioSummary(float(x.mean()), float(lo), float(hi), int(x.size))


@dataclass
class Comparison:
    name_a: str
    name_b: str
    cells: list  # (n, replicate, error_a, error_b, ratio)
    overall: RatioSummary
    by_n: dict
    slope_a: float
    slope_b: float

    @property
    def slope_difference(self) -> float:
        return self.slope_a - self.slope_b

    def rows(self) -> list:
        return [list(c) for c in self.cells]

    def summary(self) -> dict:
        return {
            "plan_a": self.name_a,
            "plan_b": self.name_b,
            "mean_ratio": asdict(self.overall),
            "by_n": {str(n): asdict(s) for n, s in self.by_n.items()},
            "slope_a": self.slope_a,
            "slope_b": self.slope_b,
            "slope_difference": self.slope_difference,
        }

    def write(self, out_dir, stem: str = "compare") -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [write_csv(out / f"{stem}_cells.csv", ["n", "replicate", "error_a", "error_b", "ratio"], self.rows())]
        paths.append(write_json(out / f"{stem}_summary.json", self.summary()))
        ns = np.array(sorted(self.by_n))
        ea = np.array([np.mean([c[2] for c in self.cells if c[0] == n]) for n in ns])
        eb = np.array([np.mean([c[3] for c in self.cells if c[0] == n]) for n in ns])
        paths.append(loglog_figure(
            out / f"{stem}_loglog.svg",
            [(ns, ea, f"{self.name_a} (slope {self.slope_a:.3f})", "o-"),
             (ns, eb, f"{self.name_b} (slope {self.slope_b:.3f})", "s--")],
            f"{self.name_a} vs {self.name_b}", "n", "mean error",
        ))
        return paths


def check_paired(pa: ExperimentPlan, pb: ExperimentPlan) -> None:
    """Raise unless both plans generate identical datasets cell by cell."""
    names = ("truth", "d", "model", "n_grid", "replicates", "seed", "sigma0")
    diffs = [k for k, va, vb in zip(names, pa.pairing_key(), pb.pairing_key()) if va != vb]
    if diffs:
        raise PlanMismatchError(f"plans are not paired; they differ in: {', '.join(diffs)}")


def compare_priors(report_a: RateReport, report_b: RateReport, seed: int | None = None) -> Comparison:
    """Paired per-cell error ratios ``error_a / error_b`` with bootstrap
    intervals (overall and per n) and the slope difference ``slope_a - slope_b``."""
    pa, pb = report_a.plan, report_b.plan
    check_paired(pa, pb)
    seed = pa.seed if seed is None else seed
    b_cells = {(c.n, c.replicate): c for c in report_b.cells}
    cells = []
    for c in report_a.cells:
        o = b_cells[(c.n, c.replicate)]
        if c.flagged or o.flagged:
            continue
        cells.append((c.n, c.replicate, c.error, o.error, c.error / o.error))
    if not cells:
        raise RuntimeError("no paired cells without failures")
    ratios = np.array([c[4] for c in cells])
    by_n = {}
    for k, n in enumerate(pa.n_grid):
        r = np.array([c[4] for c in cells if c[0] == n])
        if r.size:
            by_n[n] = bootstrap_mean_ci(r, seed + 1 + k)
    return Comparison(pa.name, pb.name, cells, bootstrap_mean_ci(ratios, seed), by_n,
                      report_a.fit.slope, report_b.fit.slope)

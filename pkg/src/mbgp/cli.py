"""Command-line entry point.

Every subcommand reads an INI config (``--config``), validates it in full,
runs, and writes its artifacts under the output directory (``--out``, or
``[output] dir`` in the config).  Each artifact path is echoed on stdout.
Reruns with the same config and seed give byte-identical files.

Kernel convention: ``k_a(s, t) = exp(-sum_j a_j^2 (s_j - t_j)^2)``, i.e. the
base field ``exp(-|t|^2)`` evaluated at ``a * t``.  ``a_j = 0`` drops
coordinate ``j``.

Exit status: 0 success, 1 a verification check failed, 2 bad config or
input, 3 the computation itself failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from mbgp import concentration as conc
from mbgp import rkhs_lab
from mbgp.config import ConfigError, RunConfig, load_config, override_seed, parse_config
from mbgp.gp_core import GridTooLargeError, check_grid_size, tensor_grid
from mbgp.inference import (
    DensityModel,
    RegressionModel,
    posterior_mean_density,
    posterior_mean_function,
    run_density_mcmc,
    run_regression_mcmc,
)
from mbgp.rate_study import (
    ExperimentPlan,
    PlanError,
    check_paired,
    compare_priors,
    make_prior,
    run_rate_sweep,
)
from mbgp.report_io import DatasetError, line_figure, loglog_figure, read_dataset, write_csv, write_json
from mbgp.truths import make_truth

logger = logging.getLogger("mbgp")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_RUN = 0, 1, 2, 3
DENSITY_AUDIT_TOL = 1e-10
QUANTILES = (0.05, 0.5, 0.95)


class VerificationFailed(Exception):
    """Artifacts were written but at least one check failed."""


def _emit(paths) -> None:
    for p in paths:
        print(p)


def _quantile_table(x: np.ndarray) -> dict:
    qs = np.quantile(x, QUANTILES, axis=0)
    return {f"q{int(round(100 * q)):02d}": np.atleast_1d(v).tolist() for q, v in zip(QUANTILES, qs)}


def _default_axis_points(d: int, cap: int = 10_000) -> int:
    if d == 1:
        return 101
    return max(2, int(math.floor(cap ** (1.0 / d))))


def _prior_for(cfg: RunConfig, d: int, n: int):
    try:
        return make_prior(**cfg.prior_kwargs(), d=d, n=n)
    except (PlanError, ValueError) as exc:
        raise ConfigError(f"{cfg.where('prior', 'family')}: {exc}") from None


# fit-regression / fit-density ------------------------------------------

def cmd_fit_regression(cfg: RunConfig, out: Path, workers: int) -> list:
    X, y = read_dataset(cfg.resolve(cfg.get("data", "path")), with_response=True)
    n, d = X.shape
    if n == 0:
        raise DatasetError(f"{cfg.get('data', 'path')}: no data rows")
    prior = _prior_for(cfg, d, n)
    m = cfg.values["mcmc"]
    model = RegressionModel(X, y, prior, sigma_bounds=(m["sigma_min"], m["sigma_max"]))
    pts = cfg.get("prediction", "points") or _default_axis_points(d)
    grid = tensor_grid(d, pts)

    post = run_regression_mcmc(model, m["n_iter"], m["burn_in"], m["thin"], seed=m["seed"])
    mean = posterior_mean_function(post, model, grid.points)

    paths = [write_csv(out / "posterior.csv", post.header(), post.rows())]
    paths.append(write_csv(
        out / "posterior_mean.csv", [f"x{j + 1}" for j in range(d)] + ["mean"],
        [[*p.tolist(), v] for p, v in zip(grid.points, mean)],
    ))
    paths.append(write_json(out / "summary.json", {
        "command": "fit-regression",
        "data": Path(cfg.get("data", "path")).name,
        "n": n,
        "d": d,
        "prior": cfg.prior_kwargs(),
        "seed": m["seed"],
        "draws": len(post),
        "acceptance_rates": post.acceptance_rates,
        "step_sizes": post.step_sizes,
        "a_quantiles": _quantile_table(post.a),
        "sigma_quantiles": _quantile_table(post.sigma),
        "inclusion_frequencies": post.inclusion_frequencies().tolist(),
    }))
    return paths


def cmd_fit_density(cfg: RunConfig, out: Path, workers: int) -> list:
    X = read_dataset(cfg.resolve(cfg.get("data", "path")), with_response=False)
    n, d = X.shape
    if n == 0:
        raise DatasetError(f"{cfg.get('data', 'path')}: no data rows")
    prior = _prior_for(cfg, d, n)
    pts = cfg.get("grid", "points") or (201 if d == 1 else 41)
    grid = tensor_grid(d, pts)
    try:
        check_grid_size(grid)
    except GridTooLargeError as exc:
        raise ConfigError(f"{cfg.where('grid', 'points')}: {exc}") from None
    m = cfg.values["mcmc"]
    model = DensityModel(X, grid, prior)

    post = run_density_mcmc(model, m["n_iter"], m["burn_in"], m["thin"], seed=m["seed"],
                            keep_latent=m["save_latent"])
    f_hat = posterior_mean_density(post)
    integral = float(grid.trapezoid_weights() @ f_hat)
    audit_ok = abs(integral - 1.0) <= DENSITY_AUDIT_TOL

    paths = [write_csv(out / "posterior.csv", post.header(), post.rows())]
    paths.append(write_csv(
        out / "posterior_density.csv", [f"x{j + 1}" for j in range(d)] + ["density"],
        [[*p.tolist(), v] for p, v in zip(grid.points, f_hat)],
    ))
    if m["save_latent"]:
        path = out / "latent.npy"
        np.save(path, np.array([dr.z for dr in post.draws]))
        paths.append(path)
    paths.append(write_json(out / "summary.json", {
        "command": "fit-density",
        "data": Path(cfg.get("data", "path")).name,
        "n": n,
        "d": d,
        "grid_points_per_axis": pts,
        "prior": cfg.prior_kwargs(),
        "seed": m["seed"],
        "draws": len(post),
        "acceptance_rates": post.acceptance_rates,
        "step_sizes": post.step_sizes,
        "a_quantiles": _quantile_table(post.a),
        "inclusion_frequencies": post.inclusion_frequencies().tolist(),
        "normalization": {"integral": integral, "abs_error": abs(integral - 1.0),
                          "tolerance": DENSITY_AUDIT_TOL, "pass": audit_ok},
    }))
    if not audit_ok:
        _emit(paths)
        raise VerificationFailed(f"posterior-mean density integrates to {integral!r}, not 1 within {DENSITY_AUDIT_TOL}")
    return paths


# verify-kernels ---------------------------------------------------------

def cmd_verify_kernels(cfg: RunConfig, out: Path, workers: int) -> list:
    k = cfg.section("kernels")
    ap = cfg.section("approximation")
    failures = []

    moment_rows = []
    for r in range(k["r_min"], k["r_max"] + 1):
        for j in range(r):
            target = 1.0 if j == 0 else 0.0
            tol = k["mass_tol"] if j == 0 else k["moment_tol"]
            val = rkhs_lab.kernel_moment(r, j)
            err = abs(val - target)
            ok = err < tol
            moment_rows.append([r, j, val, target, err, tol, int(ok)])
            if not ok:
                failures.append(f"moment r={r} j={j}: error {err:.3e} >= {tol:g}")

    rng = np.random.default_rng(k["seed"])
    fourier_rows = []
    for r in k["fourier_orders"]:
        for d in k["fourier_dims"]:
            for _ in range(k["n_lambda"]):
                lam = rng.uniform(-k["lambda_max"], k["lambda_max"], size=d)
                closed = rkhs_lab.kernel_fourier(r, lam)
                num = rkhs_lab.numerical_fourier(r, lam)
                err = abs(closed - num)
                ok = err < k["fourier_tol"]
                fourier_rows.append([r, d, " ".join(repr(float(v)) for v in lam), closed, num, err, int(ok)])
                if not ok:
                    failures.append(f"fourier r={r} d={d}: error {err:.3e} >= {k['fourier_tol']:g}")

    rep = rkhs_lab.lower_bound_check(ap["a_values"], grid_points=ap["grid_points"])
    sup_slope, _ = rkhs_lab.fit_loglog(rep.a, rep.grid_sup)
    bound_ok = bool(np.all(rep.center_error > rep.bound))
    checks = {
        "approximation_slope": (sup_slope, ap["slope_min"], ap["slope_max"]),
        "lower_bound_slope": (rep.slope, ap["lower_slope_min"], ap["lower_slope_max"]),
    }
    for name, (v, lo, hi) in checks.items():
        if not lo <= v <= hi:
            failures.append(f"{name} {v:.4f} outside [{lo}, {hi}]")
    if not bound_ok:
        failures.append("kink error falls below the truncated-integral bound")

    paths = [
        write_csv(out / "moments.csv", ["r", "j", "moment", "target", "abs_error", "tolerance", "pass"], moment_rows),
        write_csv(out / "fourier.csv", ["r", "d", "lambda", "closed_form", "numerical", "abs_error", "pass"],
                  fourier_rows),
        write_csv(out / "approx.csv", ["a", "kink_error", "grid_sup_error", "lower_bound", "bound_holds"],
                  [[*row, int(row[1] > row[3])] for row in rep.rows()]),
        loglog_figure(out / "approx.svg", [
            (rep.a, rep.grid_sup, f"grid sup error (slope {sup_slope:.3f})", "o-"),
            (rep.a, rep.center_error, f"error at the kink (slope {rep.slope:.3f})", "s-"),
            (rep.a, rep.bound, "truncated-integral lower bound", "--"),
        ], "Gaussian smoother on |x - 0.5|^1.5", "a", "error"),
    ]
    paths.append(write_json(out / "summary.json", {
        "command": "verify-kernels",
        "approximation_slope": sup_slope,
        "lower_bound_slope": rep.slope,
        "lower_bound_C0": rep.C0,
        "checks": {name: {"value": v, "min": lo, "max": hi, "pass": lo <= v <= hi}
                   for name, (v, lo, hi) in checks.items()},
        "bound_holds": bound_ok,
        "failures": failures,
        "pass": not failures,
    }))
    if failures:
        _emit(paths)
        raise VerificationFailed("; ".join(failures))
    return paths


# small-ball / concentration --------------------------------------------

def _lab_grid(cfg: RunConfig, section: str, d: int):
    grid = tensor_grid(d, cfg.get(section, "grid_points"))
    try:
        check_grid_size(grid)
    except GridTooLargeError as exc:
        raise ConfigError(f"{cfg.where(section, 'grid_points')}: {exc}") from None
    return grid


def cmd_small_ball(cfg: RunConfig, out: Path, workers: int) -> list:
    s = cfg.section("small_ball")
    grid = _lab_grid(cfg, "small_ball", s["d"])
    rows, curves = [], {}
    for a in s["a_values"]:
        # the same seed for every a gives common random numbers across the sweep
        for est in conc.small_ball_curve([a] * s["d"], s["epsilon"], grid, s["n_mc"], s["seed"], s["method"]):
            rows.append([a, est.epsilon, est.neg_log_p, est.ci_low, est.ci_high, est.std_err, est.n_mc,
                         est.successes, int(est.flagged), est.method])
            curves.setdefault(est.epsilon, []).append((a, est.neg_log_p))
    slopes = {}
    for eps, pts in curves.items():
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        ok = (xs > 0) & (ys > 0) & np.isfinite(ys)
        if ok.sum() >= 2:
            slopes[repr(eps)] = rkhs_lab.fit_loglog(xs[ok], ys[ok])[0]
    paths = [write_csv(
        out / "small_ball.csv",
        ["a", "epsilon", "neg_log_p", "ci_low", "ci_high", "std_err", "n_mc", "successes", "flagged", "method"],
        rows,
    )]
    series = [(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), f"eps = {eps:g}", "o-")
              for eps, pts in curves.items()]
    fig = loglog_figure if all(a > 0 for a in s["a_values"]) else line_figure
    paths.append(fig(out / "small_ball.svg", series, f"small-ball exponent ({s['method']}, d={s['d']})",
                     "a", "-log P(sup |W^a| <= eps)"))
    paths.append(write_json(out / "summary.json", {
        "command": "small-ball", "settings": s, "loglog_slope_by_epsilon": slopes,
        "flagged_rows": sum(r[8] for r in rows),
    }))
    return paths


def cmd_concentration(cfg: RunConfig, out: Path, workers: int) -> list:
    c = cfg.section("concentration")
    try:
        truth = make_truth(c["truth"], c["d"])
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('concentration', 'truth')}: {exc}") from None
    grid = _lab_grid(cfg, "concentration", c["d"])
    d = c["d"]
    if c["mode"] == "minimax":
        pts = conc.minimax_concentration(truth, c["n_values"], grid, c["n_mc"], c["seed"], c["method"])
        rows = [[p.n, *p.a.tolist(), p.epsilon, p.estimate.rkhs_cost, p.estimate.neg_log_small_ball,
                 p.estimate.ci_low, p.estimate.ci_high, int(p.estimate.flagged), p.estimate.phi, p.ratio]
                for p in pts]
        header = (["n"] + [f"a_{j + 1}" for j in range(d)]
                  + ["epsilon", "rkhs_cost", "neg_log_small_ball", "ci_low", "ci_high", "flagged", "phi", "ratio"])
        ns = np.array([p.n for p in pts], dtype=float)
        ratios = np.array([p.ratio for p in pts])
        paths = [write_csv(out / "concentration.csv", header, rows)]
        paths.append(loglog_figure(out / "concentration.svg", [
            (ns, np.array([p.estimate.phi for p in pts]), "phi(eps_n)", "o-"),
            (ns, np.array([p.n * p.epsilon ** 2 for p in pts]), "n eps_n^2", "--"),
        ], f"concentration at rate-optimal bandwidths ({truth.id}, d={d})", "n", "value"))
        paths.append(write_json(out / "summary.json", {
            "command": "concentration", "settings": c, "ratios": ratios.tolist(),
            "ratio_spread": float(ratios.max() / ratios.min()),
        }))
        return paths
    ests = conc.concentration_profile(truth, c["a"], c["epsilon"], grid, c["n_mc"], c["seed"], c["method"])
    rows = [[e.epsilon, e.rkhs_cost, e.neg_log_small_ball, e.ci_low, e.ci_high, int(e.flagged), e.phi]
            for e in ests]
    eps = np.array([e.epsilon for e in ests])
    paths = [write_csv(out / "concentration.csv",
                       ["epsilon", "rkhs_cost", "neg_log_small_ball", "ci_low", "ci_high", "flagged", "phi"], rows)]
    series = [(eps, np.array([e.phi for e in ests]), "phi", "o-"),
              (eps, np.array([e.neg_log_small_ball for e in ests]), "small-ball exponent", "s--")]
    costs = np.array([e.rkhs_cost for e in ests])
    if np.all(costs > 0):
        series.append((eps, costs, "RKHS cost", "^:"))
    paths.append(loglog_figure(out / "concentration.svg", series,
                               f"concentration function ({truth.id}, a={list(c['a'])})", "eps", "value"))
    paths.append(write_json(out / "summary.json", {"command": "concentration", "settings": c}))
    return paths


# rate-study / compare -----------------------------------------------------

def plan_from_config(cfg: RunConfig) -> ExperimentPlan:
    p = cfg.section("plan")
    try:
        return ExperimentPlan(
            truth=p["truth"], d=p["d"], model=p["model"], prior=cfg.prior_kwargs(), n_grid=p["n_values"],
            replicates=p["replicates"], seed=p["seed"], sigma0=p["sigma0"], n_iter=p["n_iter"],
            burn_in=p["burn_in"], thin=p["thin"], sigma_bounds=(p["sigma_min"], p["sigma_max"]),
            grid_points=p["grid_points"], name=p["name"],
        )
    except (PlanError, ValueError) as exc:
        raise ConfigError(f"{cfg.path or '<config>'}: {exc}") from None


def cmd_rate_study(cfg: RunConfig, out: Path, workers: int) -> list:
    plan = plan_from_config(cfg)
    report = run_rate_sweep(plan, workers=workers)
    return report.write(out, "rate")


def cmd_compare(cfg: RunConfig, out: Path, workers: int) -> list:
    c = cfg.section("compare")
    plans = []
    for key in ("plan_a", "plan_b"):
        sub = load_config("rate-study", cfg.resolve(c[key]))
        if cfg.overridden_seed is not None:
            override_seed(sub, cfg.overridden_seed)
        plans.append(plan_from_config(sub))
    pa, pb = plans
    try:
        check_paired(pa, pb)
    except PlanError as exc:
        raise ConfigError(f"{cfg.path or '<config>'}: {exc}") from None
    ra = run_rate_sweep(pa, workers=workers)
    rb = run_rate_sweep(pb, workers=workers)
    cmp = compare_priors(ra, rb, seed=c["seed"])
    return ra.write(out, "a_rate") + rb.write(out, "b_rate") + cmp.write(out, "compare")


COMMANDS = {
    "fit-regression": (cmd_fit_regression, "posterior over bandwidths and noise for GP regression"),
    "fit-density": (cmd_fit_density, "logistic-GP density posterior on a tensor grid"),
    "verify-kernels": (cmd_verify_kernels, "higher-order kernel identities and smoother error rates"),
    "small-ball": (cmd_small_ball, "small-ball probabilities of the rescaled field"),
    "concentration": (cmd_concentration, "concentration function (RKHS cost plus small-ball exponent)"),
    "rate-study": (cmd_rate_study, "empirical error-vs-n sweep for one prior"),
    "compare": (cmd_compare, "paired comparison of two rate-study plans"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbgp",
        description="Multi-bandwidth Gaussian-process priors: posterior fits and numerical checks.",
        epilog="Kernel convention: k_a(s, t) = exp(-sum_j a_j^2 (s_j - t_j)^2).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="INI config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override the seed in the config (unsigned 64-bit)")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker processes for independent cells (default: available cores)")
    return parser


def _output_dir(cfg: RunConfig, args) -> Path:
    if args.out is not None:
        return args.out
    d = cfg.values["output"]["dir"]
    if d is None:
        raise ConfigError("no output directory: pass --out or set [output] dir")
    return cfg.resolve(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    func = COMMANDS[args.command][0]
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.config is not None:
            cfg = load_config(args.command, args.config)
        else:
            cfg = parse_config(args.command)
        cfg.overridden_seed = args.seed
        if args.seed is not None:
            override_seed(cfg, args.seed)
        out = _output_dir(cfg, args)
        out.mkdir(parents=True, exist_ok=True)
        paths = func(cfg, out, args.workers)
    except (ConfigError, DatasetError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except VerificationFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    _emit(paths)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

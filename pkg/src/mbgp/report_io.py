"""CSV and SVG writers whose output bytes depend only on their inputs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

matplotlib.use("Agg")

SVG_RC = {"svg.hashsalt": "mbgp", "svg.fonttype": "path", "font.family": "DejaVu Sans"}


class DatasetError(ValueError):
    pass


def fmt(x) -> str:
    """Shortest round-trip text for numbers; everything else via ``str``."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, np.integer):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "tolist"):
        return _jsonable(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def read_dataset(path, with_response: bool):
    """Parse a dataset CSV with header ``x1..xd`` (plus ``y`` for regression).

    Errors name the offending line (the header is line 1).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"{path}: cannot read dataset ({exc})") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise DatasetError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    n_x = len(header) - (1 if with_response else 0)
    expect = [f"x{j + 1}" for j in range(n_x)] + (["y"] if with_response else [])
    if n_x < 1 or header != expect:
        raise DatasetError(f"{path}: line 1: header must be {','.join(expect) if n_x >= 1 else 'x1,...'}; got {','.join(header)}")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise DatasetError(f"{path}: line {lineno}: not a number ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise DatasetError(f"{path}: line {lineno}: non-finite value")
        if any(not 0.0 <= v <= 1.0 for v in vals[:n_x]):
            raise DatasetError(f"{path}: line {lineno}: covariates must lie in [0, 1]")
        values.append(vals)
    arr = np.array(values, dtype=float).reshape(-1, len(header))
    if with_response:
        return arr[:, :n_x], arr[:, n_x]
    return arr


def new_figure(width=6.0, height=4.0) -> Figure:
    return Figure(figsize=(width, height))


def save_svg(fig: Figure, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    return path


def loglog_figure(path, series, title: str, xlabel: str, ylabel: str) -> Path:
    """``series``: iterable of ``(x, y, label, fmt)`` drawn on log-log axes."""
    with matplotlib.rc_context(SVG_RC):
        fig = new_figure()
        ax = fig.add_subplot()
        for x, y, label, style in series:
            ax.loglog(x, y, style, label=label)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize="small")
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
    return save_svg(fig, path)


def line_figure(path, series, title: str, xlabel: str, ylabel: str) -> Path:
    with matplotlib.rc_context(SVG_RC):
        fig = new_figure()
        ax = fig.add_subplot()
        for x, y, label, style in series:
            ax.plot(x, y, style, label=label)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize="small")
        fig.tight_layout()
    return save_svg(fig, path)

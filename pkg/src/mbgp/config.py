"""INI run configurations with a per-subcommand schema.

Every key is validated before any computation starts.  Unknown sections and
keys are errors, and error messages cite the line of the offending entry.
Relative paths in a config resolve against the directory of the config file.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from mbgp.bandwidth_priors import FAMILIES


class ConfigError(ValueError):
    pass


# parsers ---------------------------------------------------------------

def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float_list(text: str) -> tuple:
    items = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(t) for t in items)


def _int_list(text: str) -> tuple:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _beta_by_size(text: str) -> dict:
    """``1: 0.5; 2: 0.5, 0.5`` -> ``{1: (0.5,), 2: (0.5, 0.5)}``."""
    out = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        k, sep, v = part.partition(":")
        if not sep:
            raise ValueError("beta_by_size entries look like 'k: b1, ..., bk'")
        out[_int(k)] = _float_list(v)
    return out


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    check: Callable[[Any], str | None] | None = None


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _all_positive(v):
    return None if all(x > 0 for x in v) else "entries must be positive"


def _all_nonneg(v):
    return None if all(x >= 0 for x in v) else "entries must be >= 0"


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(options)}"
    return check


def _order_range(v):
    return None if 1 <= v <= 6 else "kernel order r must lie in 1..6"


def _orders_range(v):
    return next((m for m in map(_order_range, v) if m), None)


PRIOR_KEYS = {
    "family": Key(str, "unified", check=_choice(*sorted(FAMILIES))),
    "beta": Key(_float_list, check=_all_positive),
    "dim_weights": Key(_float_list, check=_all_nonneg),
    "beta_by_size": Key(_beta_by_size),
    "gamma_shape": Key(float, check=_positive),
    "gamma_rate": Key(float, check=_positive),
    "base_value": Key(float, check=_positive),
    "base_interval": Key(_float_list),
    "symmetric_theta": Key(_bool),
    "tied": Key(_bool),
    "alpha_star": Key(float, check=_positive),
    "d_star": Key(_int, check=_positive),
    "a": Key(_float_list, check=_all_nonneg),
}

# which optional prior keys each family accepts
FAMILY_KEYS = {
    "anisotropic": {"beta", "gamma_shape", "gamma_rate"},
    "dimension_reduction": {"dim_weights", "gamma_shape", "gamma_rate", "base_value", "base_interval"},
    "unified": {"dim_weights", "beta_by_size", "gamma_shape", "gamma_rate", "symmetric_theta", "tied"},
    "partial_mixture": {"alpha_star", "d_star", "gamma_shape", "gamma_rate", "base_value"},
    "single": {"d_star", "gamma_shape", "gamma_rate"},
    "deterministic": {"a"},
}

MCMC_KEYS = {
    "n_iter": Key(_int, 2000, check=_positive),
    "burn_in": Key(_int, 500, check=_nonneg),
    "thin": Key(_int, 1, check=_positive),
    "seed": Key(_int, 0, check=_nonneg),
}

OUTPUT_KEYS = {"dir": Key(str)}

SCHEMAS = {
    "fit-regression": {
        "data": {"path": Key(str, required=True)},
        "prior": PRIOR_KEYS,
        "mcmc": {**MCMC_KEYS, "sigma_min": Key(float, 0.01, check=_positive),
                 "sigma_max": Key(float, 10.0, check=_positive)},
        "prediction": {"points": Key(_int, 0, check=_nonneg)},
        "output": OUTPUT_KEYS,
    },
    "fit-density": {
        "data": {"path": Key(str, required=True)},
        "prior": PRIOR_KEYS,
        "mcmc": {**MCMC_KEYS, "save_latent": Key(_bool, False)},
        "grid": {"points": Key(_int, 0, check=_nonneg)},
        "output": OUTPUT_KEYS,
    },
    "verify-kernels": {
        "kernels": {
            "r_min": Key(_int, 1, check=_order_range),
            "r_max": Key(_int, 4, check=_order_range),
            "fourier_orders": Key(_int_list, (1, 2, 3), check=_orders_range),
            "fourier_dims": Key(_int_list, (1, 2), check=_all_positive),
            "n_lambda": Key(_int, 10, check=_positive),
            "lambda_max": Key(float, 4.0, check=_positive),
            "mass_tol": Key(float, 1e-8, check=_positive),
            "moment_tol": Key(float, 1e-6, check=_positive),
            "fourier_tol": Key(float, 1e-6, check=_positive),
            "seed": Key(_int, 0, check=_nonneg),
        },
        "approximation": {
            "a_values": Key(_float_list, (4.0, 8.0, 16.0, 32.0, 64.0), check=_all_positive),
            "grid_points": Key(_int, 401, check=_positive),
            "slope_min": Key(float, -1.7),
            "slope_max": Key(float, -1.3),
            "lower_slope_min": Key(float, -1.6),
            "lower_slope_max": Key(float, -1.4),
        },
        "output": OUTPUT_KEYS,
    },
    "small-ball": {
        "small_ball": {
            "d": Key(_int, 1, check=_positive),
            "a_values": Key(_float_list, (2.0, 4.0, 8.0), check=_all_nonneg),
            "epsilon": Key(_float_list, (0.3,), check=_all_positive),
            "n_mc": Key(_int, 10_000, check=_positive),
            "grid_points": Key(_int, 201, check=_positive),
            "method": Key(str, "mc", check=_choice("mc", "sequential")),
            "seed": Key(_int, 0, check=_nonneg),
        },
        "output": OUTPUT_KEYS,
    },
    "concentration": {
        "concentration": {
            "truth": Key(str, "T1"),
            "d": Key(_int, 1, check=_positive),
            "mode": Key(str, "minimax", check=_choice("minimax", "profile")),
            "n_values": Key(_int_list, (100, 1000, 10_000), check=_all_positive),
            "a": Key(_float_list, check=_all_nonneg),
            "epsilon": Key(_float_list, (0.05, 0.1, 0.2, 0.4), check=_all_positive),
            "n_mc": Key(_int, 100_000, check=_positive),
            "grid_points": Key(_int, 201, check=_positive),
            "method": Key(str, "sequential", check=_choice("mc", "sequential")),
            "seed": Key(_int, 0, check=_nonneg),
        },
        "output": OUTPUT_KEYS,
    },
    "rate-study": {
        "plan": {
            "name": Key(str, "plan"),
            "truth": Key(str, "T1"),
            "d": Key(_int, 2, check=_positive),
            "model": Key(str, "regression", check=_choice("regression", "density")),
            "n_values": Key(_int_list, (100, 200, 400, 800), check=_all_positive),
            "replicates": Key(_int, 10, check=_positive),
            "seed": Key(_int, 0, check=_nonneg),
            "sigma0": Key(float, 0.1, check=_nonneg),
            "n_iter": Key(_int, 1200, check=_positive),
            "burn_in": Key(_int, 400, check=_nonneg),
            "thin": Key(_int, 8, check=_positive),
            "sigma_min": Key(float, 0.01, check=_positive),
            "sigma_max": Key(float, 10.0, check=_positive),
            "grid_points": Key(_int, 0, check=_nonneg),
        },
        "prior": PRIOR_KEYS,
        "output": OUTPUT_KEYS,
    },
    "compare": {
        "compare": {
            "plan_a": Key(str, required=True),
            "plan_b": Key(str, required=True),
            "seed": Key(_int, check=_nonneg),
        },
        "output": OUTPUT_KEYS,
    },
}

# section and key that ``--seed`` overrides
SEED_KEYS = {
    "fit-regression": ("mcmc", "seed"),
    "fit-density": ("mcmc", "seed"),
    "verify-kernels": ("kernels", "seed"),
    "small-ball": ("small_ball", "seed"),
    "concentration": ("concentration", "seed"),
    "rate-study": ("plan", "seed"),
    "compare": ("compare", "seed"),
}


@dataclass
class RunConfig:
    command: str
    values: dict
    path: Path | None = None
    lines: dict = field(default_factory=dict)  # (section, key) -> line number
    overridden_seed: int | None = None

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path.cwd()

    def get(self, section: str, key: str):
        return self.values[section][key]

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def where(self, section: str, key: str) -> str:
        src = str(self.path) if self.path is not None else "<config>"
        line = self.lines.get((section, key))
        return f"{src}: line {line}" if line else f"{src}: [{section}] {key}"

    def prior_kwargs(self) -> dict:
        """Family plus the explicitly set hyperparameters."""
        sec = self.values["prior"]
        return {k: v for k, v in sec.items() if k == "family" or v is not None}


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` to the 1-based line where the key is set."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def parse_config(command: str, text: str = "", path: Path | None = None) -> RunConfig:
    """Parse and validate INI ``text`` against the schema of ``command``."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {command!r}")
    schema = SCHEMAS[command]
    src = str(path) if path is not None else "<config>"
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=src)
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        what = f"key '{exc.option}'" if hasattr(exc, "option") else f"section [{exc.section}]"
        raise ConfigError(f"{src}: line {exc.lineno}: duplicate {what}") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{src}: line {exc.lineno}: expected a [section] header before any key") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{src}: line {lineno}: cannot parse {line.strip()!r}") from None
    lines = _line_index(text)
    cfg = RunConfig(command, {}, path, lines)

    def fail(section, key, msg):
        if key is None:
            line = lines.get((section, None))
            loc = f"{src}: line {line}" if line else src
        else:
            loc = cfg.where(section, key)
        raise ConfigError(f"{loc}: {msg}")

    for section in cp.sections():
        if section not in schema:
            fail(section, None, f"unknown section [{section}] for {command}; expected one of "
                                f"{', '.join('[' + s + ']' for s in schema)}")
        for key in cp[section]:
            if key not in schema[section]:
                fail(section, key, f"unknown key '{key}' in [{section}]")
    for section, keys in schema.items():
        present = cp[section] if cp.has_section(section) else {}
        vals = {}
        for key, entry in keys.items():
            if key in present:
                raw = present[key]
                try:
                    v = entry.parse(raw)
                except (ValueError, TypeError) as exc:
                    fail(section, key, f"bad value for '{key}': {exc}")
                if entry.check is not None:
                    msg = entry.check(v)
                    if msg:
                        fail(section, key, f"'{key}' {msg}")
                vals[key] = v
            elif entry.required:
                fail(section, None, f"missing required key '{key}' in [{section}]")
            else:
                vals[key] = entry.default
        cfg.values[section] = vals
    if "prior" in schema:
        family = cfg.values["prior"]["family"]
        allowed = FAMILY_KEYS[family] | {"family"}
        for key in cp["prior"] if cp.has_section("prior") else ():
            if key not in allowed:
                fail("prior", key, f"'{key}' does not apply to the {family} prior "
                                   f"(accepted: {', '.join(sorted(allowed - {'family'}))})")
    _cross_checks(cfg, fail)
    return cfg


def _cross_checks(cfg: RunConfig, fail) -> None:
    v = cfg.values
    if "mcmc" in v and v["mcmc"]["burn_in"] >= v["mcmc"]["n_iter"]:
        fail("mcmc", "burn_in", "'burn_in' must be smaller than n_iter")
    if "plan" in v and v["plan"]["burn_in"] >= v["plan"]["n_iter"]:
        fail("plan", "burn_in", "'burn_in' must be smaller than n_iter")
    for sec in ("mcmc", "plan"):
        if sec in v and "sigma_min" in v[sec] and v[sec]["sigma_min"] >= v[sec]["sigma_max"]:
            fail(sec, "sigma_min", "'sigma_min' must be smaller than sigma_max")
    if cfg.command == "verify-kernels" and v["kernels"]["r_min"] > v["kernels"]["r_max"]:
        fail("kernels", "r_min", "'r_min' must not exceed r_max")
    if cfg.command == "concentration":
        c = v["concentration"]
        if c["mode"] == "profile" and c["a"] is None:
            fail("concentration", "mode", "profile mode needs the scale vector 'a'")
        if c["a"] is not None and len(c["a"]) != c["d"]:
            fail("concentration", "a", f"'a' has {len(c['a'])} entries but d = {c['d']}")


def load_config(command: str, path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from None
    return parse_config(command, text, path)


def override_seed(cfg: RunConfig, seed: int) -> None:
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    section, key = SEED_KEYS[cfg.command]
    cfg.values[section][key] = int(seed)

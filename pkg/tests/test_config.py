import pytest
from hypothesis import given
from hypothesis import strategies as st

from mbgp.config import SCHEMAS, ConfigError, override_seed, parse_config


@pytest.mark.parametrize("cmd", sorted(set(SCHEMAS) - {"fit-regression", "fit-density", "compare"}))
def test_defaults_parse(cmd):
    cfg = parse_config(cmd)
    assert set(cfg.values) == set(SCHEMAS[cmd])


def test_required_key_missing():
    with pytest.raises(ConfigError, match="path"):
        parse_config("fit-regression", "[mcmc]\nn_iter = 10\n")


def test_unknown_section_cites_line():
    with pytest.raises(ConfigError, match="line 3.*unknown section"):
        parse_config("small-ball", "[small_ball]\nn_mc = 10\n[extra]\nx = 1\n")


def test_unknown_key_cites_line():
    with pytest.raises(ConfigError, match="line 3: unknown key 'n_m'"):
        parse_config("small-ball", "[small_ball]\n# comment\nn_m = 10\n")


def test_bad_value_cites_line():
    with pytest.raises(ConfigError, match="line 2: bad value for 'n_mc'"):
        parse_config("small-ball", "[small_ball]\nn_mc = lots\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("small-ball", "[small_ball]\nn_mc = 10\nn_mc = 20\n")


def test_prior_key_must_fit_family():
    with pytest.raises(ConfigError, match="does not apply to the single prior"):
        parse_config("rate-study", "[prior]\nfamily = single\nbeta = 1, 1\n")


def test_prior_lists_and_tables():
    cfg = parse_config("rate-study", "[prior]\nfamily = unified\ndim_weights = 1, 2\nbeta_by_size = 1: 0.5; 2: 0.5, 0.5\ntied = yes\n")
    assert cfg.prior_kwargs() == {
        "family": "unified", "dim_weights": (1.0, 2.0), "beta_by_size": {1: (0.5,), 2: (0.5, 0.5)}, "tied": True,
    }


def test_burn_in_must_be_below_n_iter():
    with pytest.raises(ConfigError, match="burn_in"):
        parse_config("fit-density", "[data]\npath = x.csv\n[mcmc]\nn_iter = 10\nburn_in = 10\n")


def test_profile_mode_needs_scale():
    with pytest.raises(ConfigError, match="profile mode"):
        parse_config("concentration", "[concentration]\nmode = profile\n")
    with pytest.raises(ConfigError, match="d = 1"):
        parse_config("concentration", "[concentration]\nmode = profile\na = 1, 2\n")


def test_seed_override_range():
    cfg = parse_config("small-ball")
    override_seed(cfg, 2 ** 64 - 1)
    assert cfg.get("small_ball", "seed") == 2 ** 64 - 1
    with pytest.raises(ConfigError):
        override_seed(cfg, -1)


@given(st.integers(min_value=1, max_value=10 ** 6), st.integers(min_value=1, max_value=10 ** 6))
def test_integer_lists_roundtrip(a, b):
    cfg = parse_config("concentration", f"[concentration]\nn_values = {a}, {b}\n")
    assert cfg.get("concentration", "n_values") == (a, b)


def test_syntax_errors_cite_line():
    with pytest.raises(ConfigError, match="line 1: expected a \\[section\\]"):
        parse_config("small-ball", "n_mc = 10\n")
    with pytest.raises(ConfigError, match="line 2: cannot parse"):
        parse_config("small-ball", "[small_ball]\njust words\n")

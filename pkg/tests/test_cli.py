import json

import pytest

from mbgp.cli import EXIT_CHECK, EXIT_INPUT, EXIT_OK, main
from mbgp.config import SCHEMAS


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_fit_regression_two_rows_smoke(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("x1,y\n0.2,0.1\n0.7,0.3\n")
    (tmp_path / "c.ini").write_text("[data]\npath = d.csv\n[mcmc]\nn_iter = 10\nburn_in = 5\n")
    out = tmp_path / "out"
    assert main(["fit-regression", "--config", str(tmp_path / "c.ini"), "--out", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["posterior.csv", "posterior_mean.csv", "summary.json"]
    echoed = capsys.readouterr().out.split()
    assert sorted(echoed) == sorted(str(out / n) for n in names)
    rows = (out / "posterior.csv").read_text().splitlines()
    assert len(rows) == 1 + 5


def test_parse_error_names_line(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("x1,y\n0.5,abc\n")
    (tmp_path / "c.ini").write_text("[data]\npath = d.csv\n")
    rc = main(["fit-regression", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")])
    assert rc == EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_covariate_outside_cube_rejected(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("x1,y\n0.5,1\n1.5,2\n")
    (tmp_path / "c.ini").write_text("[data]\npath = d.csv\n")
    assert main(["fit-regression", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err


def test_density_parse_error(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("x1\n0.5\n0.2,0.3\n")
    (tmp_path / "c.ini").write_text("[data]\npath = d.csv\n")
    assert main(["fit-density", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err


def test_density_audit_and_latent(cli_workspace):
    root, cfgs = cli_workspace
    out = root / "o"
    assert main(["fit-density", "--config", str(cfgs["fit-density"]), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["normalization"]["pass"]
    assert abs(summary["normalization"]["integral"] - 1) <= 1e-10
    assert (out / "latent.npy").exists()


@pytest.mark.parametrize("cmd", sorted(SCHEMAS))
def test_rerun_byte_identical(cli_workspace, cmd):
    root, cfgs = cli_workspace
    runs = []
    for k in range(2):
        out = root / f"run{k}"
        assert main([cmd, "--config", str(cfgs[cmd]), "--out", str(out), "--workers", "1"]) == EXIT_OK
        runs.append(_files(out))
    assert runs[0] and runs[0] == runs[1]


def test_writes_only_inside_out(cli_workspace):
    root, cfgs = cli_workspace
    before = {p for p in root.rglob("*")}
    out = root / "only"
    assert main(["compare", "--config", str(cfgs["compare"]), "--out", str(out)]) == EXIT_OK
    new = {p for p in root.rglob("*")} - before
    assert new and all(p == out or out in p.parents for p in new)


def test_seed_flag_overrides_config(cli_workspace):
    root, cfgs = cli_workspace
    outs = []
    for seed in ("3", "4"):
        out = root / f"s{seed}"
        main(["fit-regression", "--config", str(cfgs["fit-regression"]), "--out", str(out), "--seed", seed])
        outs.append((out / "posterior.csv").read_bytes())
    base = root / "base"
    main(["fit-regression", "--config", str(cfgs["fit-regression"]), "--out", str(base)])
    assert outs[0] == (base / "posterior.csv").read_bytes()
    assert outs[0] != outs[1]


def test_kernel_order_seven_is_config_error(tmp_path, capsys):
    (tmp_path / "k.ini").write_text("[kernels]\nr_max = 7\n")
    assert main(["verify-kernels", "--config", str(tmp_path / "k.ini"), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "line 2" in err and "1..6" in err


def test_tight_tolerance_fails_verification(cli_workspace, capsys):
    root, cfgs = cli_workspace
    text = cfgs["verify-kernels"].read_text().replace("r_max = 2", "r_max = 4\nmoment_tol = 1e-15\nmass_tol = 1e-15")
    cfg = root / "tight.ini"
    cfg.write_text(text)
    out = root / "o"
    assert main(["verify-kernels", "--config", str(cfg), "--out", str(out)]) == EXIT_CHECK
    assert "moment" in capsys.readouterr().err
    assert json.loads((out / "summary.json").read_text())["pass"] is False


def test_default_verify_kernels_passes(tmp_path):
    out = tmp_path / "o"
    assert main(["verify-kernels", "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pass"] and summary["failures"] == []
    assert {"moments.csv", "fourier.csv", "approx.csv", "approx.svg"} <= {p.name for p in out.iterdir()}


def test_small_ball_minimal_has_ci_columns(cli_workspace):
    root, cfgs = cli_workspace
    out = root / "o"
    assert main(["small-ball", "--config", str(cfgs["small-ball"]), "--out", str(out)]) == EXIT_OK
    header = (out / "small_ball.csv").read_text().splitlines()[0].split(",")
    assert {"ci_low", "ci_high", "neg_log_p"} <= set(header)


def test_rate_study_two_n_values_refused(cli_workspace, capsys):
    root, _ = cli_workspace
    text = (root / "plan_a.ini").read_text().replace("n_values = 10, 15, 20, 30", "n_values = 10, 20")
    (root / "two.ini").write_text(text)
    assert main(["rate-study", "--config", str(root / "two.ini"), "--out", str(root / "o")]) == EXIT_INPUT
    assert "at least 4" in capsys.readouterr().err
    assert not any((root / "o").iterdir())


def test_compare_mismatched_seeds_refused(cli_workspace, capsys):
    root, _ = cli_workspace
    (root / "bad.ini").write_text("[compare]\nplan_a = plan_a.ini\nplan_b = plan_c.ini\n")
    assert main(["compare", "--config", str(root / "bad.ini"), "--out", str(root / "o")]) == EXIT_INPUT
    assert "seed" in capsys.readouterr().err


def test_missing_output_dir(tmp_path, capsys):
    assert main(["verify-kernels"]) == EXIT_INPUT
    assert "--out" in capsys.readouterr().err


def test_output_dir_from_config_is_relative_to_config(tmp_path):
    (tmp_path / "c.ini").write_text("[small_ball]\nn_mc = 50\ngrid_points = 21\n[output]\ndir = res\n")
    assert main(["small-ball", "--config", str(tmp_path / "c.ini")]) == EXIT_OK
    assert (tmp_path / "res" / "small_ball.csv").exists()

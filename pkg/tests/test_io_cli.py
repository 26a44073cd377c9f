import numpy as np
import pytest
from click.testing import CliRunner

from teloinv import io
from teloinv.cli import main
from teloinv.model import Gamma, Mixture, Nakagami, Uniform, Weibull


def test_default_config():
    config, digits = io.config_from_dict({})
    assert (config.b, config.N, digits) == (1.0, 40.0, 200)
    assert isinstance(config.law, Uniform) and config.law.delta == 1.0
    assert config.n0 == Gamma(25, 30)


def test_config_file(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text("# a comment\nN = 80\n\nn0.kind=weibull\nn0.params=11, 2\nprecision_digits=120  # inline\n")
    config, digits = io.load_config(path)
    assert config.N == 80 and digits == 120
    assert config.n0 == Weibull(11, 2)


@pytest.mark.parametrize("items, kind", [
    ({"n0.kind": "nakagami", "n0.params": "6,4"}, Nakagami),
    ({"n0.kind": "mixture", "n0.params": "0.5,8,8,0.5,11,3"}, Mixture),
])
def test_config_initial_laws(items, kind):
    config, _ = io.config_from_dict(items)
    assert isinstance(config.n0, kind)


@pytest.mark.parametrize("items", [
    {"colour": "red"},
    {"law.kind": "triangular"},
    {"n0.kind": "lognormal"},
    {"n0.kind": "mixture", "n0.params": "0.5,8"},
])
def test_config_rejects(items):
    with pytest.raises(ValueError):
        io.config_from_dict(items)


def test_malformed_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("N 40\n")
    with pytest.raises(ValueError, match="key=value"):
        io.read_keyvalue(path)


def test_config_round_trip(tmp_path):
    config, _ = io.config_from_dict({"n0.params": "9,12", "N": "33"})
    path = io.write_keyvalue(tmp_path / "c.cfg", io.config_items(config))
    again, _ = io.load_config(path)
    assert again == config


def test_csv_round_trip(tmp_path):
    x = np.linspace(0, 1, 7)
    y = np.sin(x) / 3
    path = io.write_csv(tmp_path / "f.csv", ["x", "value"], [x, y], {"t": 0.25, "K": 22})
    comments, cols = io.read_csv(path)
    assert comments == {"t": "0.25", "K": "22"}
    np.testing.assert_array_equal(cols["x"], x)
    np.testing.assert_array_equal(cols["value"], y)


def test_bound_check_csv(tmp_path):
    path = io.write_bound_check(tmp_path / "b.csv", 0.5, np.array([0.0, 1.0]), np.array([1.0, 3.0]),
                                np.array([2.0, 2.0]))
    _, cols = io.read_csv(path)
    np.testing.assert_array_equal(cols["ok"], [1, 0])
    np.testing.assert_array_equal(cols["t"], [0.5, 0.5])


def test_transform_csv(tmp_path):
    path = io.write_transform(tmp_path / "l.csv", [1 + 2j, 3.0], [0.5 - 0.25j, 0.1])
    _, cols = io.read_csv(path)
    np.testing.assert_array_equal(cols["Im(p)"], [2.0, 0.0])
    np.testing.assert_array_equal(cols["Im(L)"], [-0.25, 0.0])


def test_finite():
    assert io.finite([1.0, 2.0])
    assert not io.finite([1.0, np.nan])


def test_cli_lists_experiments():
    res = CliRunner().invoke(main, ["--help"])
    assert res.exit_code == 0
    for name in ("noise-free", "convergence", "small-variability", "noisy", "kernel-compare", "laplace-set",
                 "roundoff"):
        assert name in res.output


def test_cli_requires_out():
    res = CliRunner().invoke(main, ["kernel-compare"])
    assert res.exit_code != 0
    assert "--out" in res.output


def test_cli_kernel_compare(tmp_path):
    res = CliRunner().invoke(main, ["kernel-compare", "--out", str(tmp_path), "--seed", "3"])
    assert res.exit_code == 0, res.output
    assert "max_abs.star.0.2=" in res.output
    manifest = io.read_keyvalue(tmp_path / "manifest.txt")
    assert manifest["experiment"] == "kernel_compare"
    assert manifest["seed"] == "3"
    assert "digits_requested" in manifest
    for name in manifest["files"].split(","):
        assert (tmp_path / name).exists()


def test_cli_laplace_set_with_config(tmp_path):
    cfg = tmp_path / "model.cfg"
    cfg.write_text("N=40\nprecision_digits=50\n")
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["laplace-set", "--config", str(cfg), "--out", str(out)])
    assert res.exit_code == 0, res.output
    manifest = io.read_keyvalue(out / "manifest.txt")
    assert manifest["digits_requested"] == "50"
    assert manifest["result.symmetric.laplace_set_-1_-3"] == "True"
    assert manifest["result.full_columns.laplace_set_-2_-1"] == "0"
    assert (out / "laplace_set_-1_-3.svg").read_text().startswith("<svg")


def test_cli_is_deterministic(tmp_path):
    runner = CliRunner()
    for d in ("a", "b"):
        assert runner.invoke(main, ["kernel-compare", "--out", str(tmp_path / d)]).exit_code == 0
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_cli_reports_library_errors(tmp_path):
    res = CliRunner().invoke(main, ["noisy", "--out", str(tmp_path), "--nd", "5", "--bandwidth", "sj", "--K", "4",
                                    "--points", "5", "--digits", "30"])
    assert res.exit_code == 2
    assert "InsufficientPoints" in res.output

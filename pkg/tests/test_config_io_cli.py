import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stefan_control.cli import COMMANDS, dispatch, emit_plot_data, main
from stefan_control.config import RunConfig, config_from_dict, load_config
from stefan_control.errors import ConfigError
from stefan_control.io import read_csv, write_csv

FIXTURES = Path(__file__).parent / "fixtures"

SMALL = """
eps = 1e-3
seed = 3

[grid]
n_left = 40
n_right = 40
n_time = 80

[initial.left]
kind = "bump"
amplitude = 1.0
h1_norm = 0.05

[initial.right]
kind = "bump"
amplitude = -1.0
h1_norm = 0.02
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config ------------------------------------------------------------

def test_minimal_config_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, "eps = 1e-3\n"))
    assert cfg == RunConfig()
    assert cfg.geometry.ell_0 == 0.5 and cfg.scheme == "crank-nicolson"
    assert cfg.grid.n_left == 200 and cfg.grid.quad_order == 64


def test_corridor_violation_names_invariant():
    with pytest.raises(ConfigError, match="corridor ordering"):
        config_from_dict({"geometry": {"ell_0": 0.1}})


@pytest.mark.parametrize("data, where", [({"foo": 1}, "top level"), ({"grid": {"bogus": 1}}, "grid"),
                                         ({"initial": {"left": {"nope": 0}}}, "initial.left")])
def test_unknown_keys_rejected(data, where):
    with pytest.raises(ConfigError, match=f"unknown key.*{where}"):
        config_from_dict(data)


def test_bad_scheme_and_eps():
    with pytest.raises(ConfigError, match="scheme"):
        config_from_dict({"scheme": "leapfrog"})
    with pytest.raises(ConfigError, match="eps"):
        config_from_dict({"eps": 0.0})


def test_toml_parse_error_has_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        load_config(_write(tmp_path, "eps = 1e-3\nseed = \n"))


def test_json_config_equivalent(tmp_path):
    toml_cfg = load_config(_write(tmp_path, SMALL))
    js = _write(tmp_path, json.dumps(toml_cfg.to_dict()), "run.json")
    assert load_config(js) == toml_cfg


def test_golden_echo_byte_identical():
    cfg = load_config(FIXTURES / "golden_config.toml")
    assert cfg.echo() == (FIXTURES / "golden_echo.json").read_text()
    # the echo is itself a complete config
    assert config_from_dict(json.loads(cfg.echo())) == cfg


def test_initial_data_file(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    g = cfg.ref_grid()
    p0, q0 = cfg.initial_data(g)
    np.savez(tmp_path / "init.npz", p0=p0, q0=q0)
    cfg2 = config_from_dict({**cfg.to_dict(), "initial": {"file": str(tmp_path / "init.npz")}})
    a, b = cfg2.initial_data(g)
    np.testing.assert_array_equal(a, p0)
    np.testing.assert_array_equal(b, q0)
    np.savez(tmp_path / "bad.npz", p0=p0[:-1], q0=q0)
    cfg3 = config_from_dict({**cfg.to_dict(), "initial": {"file": str(tmp_path / "bad.npz")}})
    with pytest.raises(ConfigError, match="grid"):
        cfg3.initial_data(g)


# -- io ----------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_csv_round_trip_exact(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("csv") / "a.csv"
    v = np.array(values)
    write_csv(p, ["i", "v"], [np.arange(v.size), v])
    header, data = read_csv(p)
    assert header == ["i", "v"]
    np.testing.assert_array_equal(data[:, 1], v)


def test_csv_empty_is_header_only(tmp_path):
    p = write_csv(tmp_path / "e.csv", ["a", "b"], [[], []])
    assert p.read_text() == "a,b\n"
    header, data = read_csv(p)
    assert header == ["a", "b"] and data.shape == (0, 2)


# -- cli ---------------------------------------------------------------

def test_commands_listed():
    assert set(COMMANDS) == {"simulate", "control", "fixed-point", "eps-study", "negative-demo",
                             "observability-probe"}


def test_config_error_exit_code_and_manifest(tmp_path, capsys):
    bad = _write(tmp_path, "[grid]\nbogus = 1\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 2 and man["status"] == "failed"
    assert man["error"]["type"] == "ConfigError"
    assert "config error" in capsys.readouterr().err


def test_corridor_escape_exit_code(tmp_path):
    text = SMALL.replace("h1_norm = 0.05", "h1_norm = 40.0")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["error"]["type"] == "CorridorEscapeError"


def test_simulate_zero_data_constant_interface(tmp_path):
    cfg = config_from_dict({"grid": {"n_left": 40, "n_right": 40, "n_time": 80}})
    code, out = dispatch("simulate", cfg, tmp_path / "sim")
    assert code == 0
    _, iface = read_csv(out / "interface.csv")
    assert np.all(iface[:, 1] == cfg.geometry.ell_0)
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and "interface.csv" in man["artifacts"]
    assert man["config"] == cfg.to_dict()


def test_simulate_deterministic(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    _, a = dispatch("simulate", cfg, tmp_path / "a")
    _, b = dispatch("simulate", cfg, tmp_path / "b")
    for name in ("interface.csv", "p.csv", "q.csv", "residuals.csv", "stefan_residual.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_plot_data_header_only_when_missing(tmp_path):
    written = emit_plot_data(tmp_path)
    assert {p.name for p in written} == {"interface_long.csv", "residual_long.csv", "stefan_residual_long.csv",
                                         "heatmap_p.csv", "heatmap_q.csv", "optimization_long.csv"}
    assert (tmp_path / "plot" / "heatmap_p.csv").read_text() == "xi,t,value\n"


def test_fixed_point_cli_with_plot_data(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "fp"
    assert main(["fixed-point", "--config", str(cfg), "--out", str(out), "--plot-data", "--eps", "1e-2"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["eps"] == 1e-2
    assert man["metrics"]["terminal_norm"] <= 1e-2 * (1 + 1e-6)
    _, heat = read_csv(out / "plot" / "heatmap_p.csv")
    assert heat.shape == (81 * 42, 3)
    _, res = read_csv(out / "plot" / "residual_long.csv")
    assert res.shape[0] >= 1 and res[-1, 1] <= 1e-6


@pytest.mark.parametrize("command", ["control", "negative-demo", "observability-probe"])
def test_other_commands_run(tmp_path, command):
    text = SMALL + "\n[probe]\nn_samples = 5\nn_paths = 2\n\n[negative]\nh_l_amplitudes = [0.0, -1.0]\n"
    if command == "negative-demo":
        text = text.replace("[initial.left]", "[initial.left]\nsupport = [0.0, 1.0]").replace(
            'kind = "bump"', 'kind = "sine"')
    out = tmp_path / command
    assert main([command, "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    assert json.loads((out / "manifest.json").read_text())["status"] == "ok"

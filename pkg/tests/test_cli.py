import json

import pytest
import yaml

from coevo import config as cfgmod
from coevo.cli import main
from coevo.netgen import read_edgelist

SMALL = {
    "n": 30,
    "influence": {"family": "rr", "d": 4},
    "communication": {"family": "rr", "d": 2},
    "horizon": 2000,
    "replicates": 3,
    "lambda_grid": [0.0, 0.3],
    "mu_grid": [0.0, 0.05],
    "master_seed": 4,
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_generate(tmp_path, capsys):
    out = tmp_path / "g.edgelist"
    assert main(["generate", "--family", "ws", "--n", "40", "--d", "4", "--p", "0.1", "--out", str(out),
                 "--seed", "3"]) == 0
    layer = read_edgelist(out)
    assert layer.n == 40 and layer.m == 80
    assert "edges=80" in capsys.readouterr().out


def test_generate_bad_spec(tmp_path):
    assert main(["generate", "--family", "er", "--n", "10", "--d", "3", "--out-dir", str(tmp_path)]) == 1


def test_simulate_outputs(tmp_path, config_file):
    out = tmp_path / "o"
    assert main(["simulate", str(config_file), "--out-dir", str(out)]) == 0
    names = set(files(out))
    assert {"trajectory.csv", "final_state.csv", "influence.edgelist", "communication.edgelist",
            "result.json", "theory.json", "config.resolved.yaml"} <= names
    traj = (out / "trajectory.csv").read_text().splitlines()
    assert traj[0] == "t,avg_x,avg_y"
    assert traj[1].startswith("0,")
    assert traj[-1].startswith("2000,")
    assert read_edgelist(out / "communication.edgelist").row(0) == {0: 1.0}


def test_config_echo_round_trip(tmp_path, config_file):
    out = tmp_path / "o"
    assert main(["--seed", "11", "simulate", str(config_file), "--out-dir", str(out)]) == 0
    echoed = cfgmod.read(out / "config.resolved.yaml")
    assert echoed["master_seed"] == 11
    assert "replicate_seed" in echoed["derived"]
    again = tmp_path / "again"
    assert main(["simulate", str(out / "config.resolved.yaml"), "--out-dir", str(again)]) == 0
    for name in ("trajectory.csv", "final_state.csv", "result.json", "config.resolved.yaml"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_seed_flag_after_subcommand(tmp_path, config_file):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["--seed", "8", "simulate", str(config_file), "--out-dir", str(a)])
    main(["simulate", str(config_file), "--seed", "8", "--out-dir", str(b)])
    assert files(a) == files(b)


def test_estimate_threshold(tmp_path, config_file, capsys):
    out = tmp_path / "o"
    assert main(["estimate-threshold", str(config_file), "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["lambda_hat"] in (0.0, 0.3)
    assert (out / "variance.csv").read_text().startswith("lambda,variance,mean_fraction\n")
    rows = (out / "sweep.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 3
    assert "lambda_hat=" in capsys.readouterr().out


def test_sweep2d(tmp_path, config_file):
    out = tmp_path / "o"
    assert main(["sweep2d", str(config_file), "--out-dir", str(out), "--verbose"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["cells"]) == 4
    assert len(summary["modal_regimes"]) == 2
    assert len(list((out / "trajectories").iterdir())) == 12


def test_theory_check(tmp_path):
    path = tmp_path / "t.yaml"
    path.write_text(yaml.safe_dump({"n": 200, "influence": {"family": "er", "d": 8}, "theory_samples": 50}))
    out = tmp_path / "o"
    assert main(["theory-check", str(path), "--out-dir", str(out)]) == 0
    report = json.loads((out / "theory.json").read_text())
    assert set(report) >= {"d_star", "lambda_star", "condition_alpha_ok", "paradigm_shift_excluded",
                           "expected_lambda_star"}


def test_theory_check_needs_innovator(tmp_path):
    path = tmp_path / "t.yaml"
    path.write_text("innovator: null\n")
    assert main(["theory-check", str(path), "--out-dir", str(tmp_path)]) == 1


@pytest.mark.parametrize("text", [
    "bogus: 1\n",
    "beta: hot\n",
    "lambda: 1.5\n",
    "influence: {family: er, d: 3}\n",
    "influence: {family: xx}\n",
    "lambda_grid: {start: 0, stop: 1}\n",
    "n: 2.5\n",
    "[1, 2]\n",
    "a: [\n",
])
def test_config_errors_exit_1(tmp_path, text, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert main(["simulate", str(path), "--out-dir", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.yaml")]) == 1


def test_runtime_error_exit_2(tmp_path, monkeypatch):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    import coevo.cli as cli

    def boom(*a, **k):
        raise RuntimeError("disk full")

    monkeypatch.setattr(cli, "simulate_replicate", boom)
    assert main(["simulate", str(path), "--out-dir", str(tmp_path / "o")]) == 2


def test_config_grid_forms():
    cfg = cfgmod.resolve({"lambda_grid": {"start": 0, "stop": 0.1, "step": 0.02}, "mu_grid": 0.01})
    assert cfg["lambda_grid"] == [0.0, 0.02, 0.04, 0.06, 0.08, 0.1]
    assert cfg["mu_grid"] == [0.01]
    assert cfgmod.resolve({"beta": "INF"})["beta"] == "inf"
    assert cfgmod.resolve({"beta": float("inf")})["beta"] == "inf"


def test_config_error_names_key():
    with pytest.raises(cfgmod.ConfigError) as exc:
        cfgmod.resolve({"influence": {"family": "rr", "q": 1}})
    assert exc.value.key == "influence.q"

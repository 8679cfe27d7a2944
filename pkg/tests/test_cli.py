import json

import pytest

import trimlab as tl
from trimlab.cli import main
from trimlab.montecarlo import config_from_json


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def sim_doc():
    return {
        "family": "Normal",
        "params": {"mean": 0.0, "sd": 1.0},
        "rule": {"rule": "FixedFraction", "params": {"left": 0.1, "right": 0.1}},
        "n": 200,
        "replications": 1500,
        "seed": 9,
        "x_grid": [-1.0, 0.0, 1.0, 2.0],
        "c": 1.0,
        "A": 2.0,
        "normalization": "PopulationPair",
        "tails": "both",
    }


def test_simulate_json(tmp_path, sim_doc):
    cfg = write_json(tmp_path / "cfg.json", sim_doc)
    out = tmp_path / "report.json"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--workers", "1"]) == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"manifest", "report"}
    assert doc["manifest"]["config_hash"] == doc["report"]["config_hash"]
    assert len(doc["report"]["rows"]) == 8
    # config echo re-parses to the identical resolved config
    assert config_from_json(doc["report"]["config"]) == config_from_json(sim_doc)


def test_simulate_csv(tmp_path, sim_doc):
    cfg = write_json(tmp_path / "cfg.json", sim_doc)
    out = tmp_path / "report.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--format", "csv", "--workers", "1"]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "tail,x,count,p_hat,normal_tail,ratio,ci_lo,ci_hi,low_count_flag"
    assert len(lines) == 9
    manifest = json.loads((tmp_path / "report.csv.manifest.json").read_text())
    assert "config_hash" in manifest


def test_simulate_worker_count_invariance(tmp_path, sim_doc):
    sim_doc = dict(sim_doc, replications=9000)
    cfg = write_json(tmp_path / "cfg.json", sim_doc)
    bodies = []
    for w in ("1", "2"):
        out = tmp_path / f"report_{w}.json"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--workers", w]) == 0
        doc = json.loads(out.read_text())
        bodies.append(json.dumps(doc["report"], sort_keys=True))
    assert bodies[0] == bodies[1]


def test_simulate_unknown_field_exit_2(tmp_path, sim_doc, capsys):
    sim_doc["surprise"] = 1
    cfg = write_json(tmp_path / "cfg.json", sim_doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 2
    assert "surprise" in capsys.readouterr().err


def test_simulate_invalid_trim_exit_2(tmp_path, sim_doc, capsys):
    sim_doc["rule"] = {"rule": "FixedFraction", "params": {"left": 0.6, "right": 0.5}}
    cfg = write_json(tmp_path / "cfg.json", sim_doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 2
    assert "k_n" in capsys.readouterr().err


def test_simulate_degenerate_window_exit_3(tmp_path):
    doc = {
        "family": "TwoPointMixture",
        "params": {"x1": 0.0, "x2": 1.0, "w1": 0.8},
        "rule": {"rule": "FixedFraction", "params": {"left": 0.1, "right": 0.8}},
        "n": 100,
        "replications": 10,
        "seed": 1,
        "x_grid": [0.0, 1.0],
    }
    cfg = write_json(tmp_path / "cfg.json", doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 3


def test_seed_priority(tmp_path, sim_doc, monkeypatch):
    del sim_doc["seed"]
    cfg = write_json(tmp_path / "cfg.json", sim_doc)
    out = tmp_path / "r.json"
    # no seed anywhere: config error
    monkeypatch.delenv("TRIMLAB_SEED", raising=False)
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 2
    # env var is the lowest-priority source
    monkeypatch.setenv("TRIMLAB_SEED", "21")
    assert main(["simulate", "--config", cfg, "--out", str(out), "--workers", "1"]) == 0
    assert json.loads(out.read_text())["report"]["config"]["seed"] == 21
    # flag beats env
    assert main(["simulate", "--config", cfg, "--out", str(out), "--workers", "1", "--seed", "5"]) == 0
    assert json.loads(out.read_text())["report"]["config"]["seed"] == 5


def test_conditions_command(tmp_path):
    doc = {"rule": {"rule": "LogPower", "params": {"gamma_left": 4.0, "gamma_right": 4.0}}, "p": 10.0}
    cfg = write_json(tmp_path / "cfg.json", doc)
    out = tmp_path / "cond.json"
    assert main(["conditions", "--config", cfg, "--out", str(out)]) == 0
    reports = {r["condition"]: r for r in json.loads(out.read_text())["reports"]}
    assert reports["intermediate"]["verdict"] == "consistent"
    assert reports["c_an2"]["verdict"] == "inconsistent"
    assert reports["heavy"]["verdict"] == "inconsistent"


def test_conditions_small_grid_inconclusive(tmp_path):
    doc = {
        "rule": {"rule": "LogPower", "params": {"gamma_left": 4.0, "gamma_right": 4.0}},
        "p": 10.0,
        "n_grid": [1000, 2000, 3000],
        "checks": ["intermediate"],
    }
    out = tmp_path / "cond.json"
    assert main(["conditions", "--config", write_json(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["reports"][0]["verdict"] == "inconclusive"


def test_functionals_command(tmp_path):
    doc = {"family": "Uniform", "params": {"lo": 0.0, "hi": 1.0}, "window": [0.25, 0.75]}
    out = tmp_path / "fun.json"
    assert main(["functionals", "--config", write_json(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    vals = json.loads(out.read_text())["functionals"]
    assert vals["sigma2"] == pytest.approx(1 / 24, abs=1e-9)
    assert vals["winsor_mean"] == pytest.approx(0.5, abs=1e-12)


def test_functionals_inverted_window_exit_2(tmp_path):
    doc = {"family": "Uniform", "params": {"lo": 0.0, "hi": 1.0}, "window": [0.75, 0.25]}
    assert main(["functionals", "--config", write_json(tmp_path / "c.json", doc)]) == 2


def test_moment_bound_command(tmp_path):
    doc = {
        "family": "Uniform",
        "params": {"lo": 0.0, "hi": 1.0},
        "grid": [{"k": 2, "delta": 2, "i": 6, "n": 11}],
        "replications": 10000,
        "seed": 3,
    }
    out = tmp_path / "mb.json"
    assert main(["moment-bound", "--config", write_json(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    cells = json.loads(out.read_text())["cells"]
    assert len(cells) == 1
    assert cells[0]["margin"] > 1.0


def test_ci_command_spec_mode(tmp_path):
    doc = {
        "family": "Normal",
        "params": {"mean": 0.0, "sd": 1.0},
        "rule": {"rule": "PowerLaw", "params": {"rho_left": 0.4, "rho_right": 0.4}},
        "n": 500,
        "seed": 12,
        "p": 10.0,
    }
    out = tmp_path / "ci.json"
    assert main(["ci", "--config", write_json(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    interval = json.loads(out.read_text())["interval"]
    assert interval["lower"] < interval["center"] < interval["upper"]
    assert interval["warning"] is None


def test_ci_command_warning_field(tmp_path):
    doc = {
        "family": "Normal",
        "params": {"mean": 0.0, "sd": 1.0},
        "rule": {"rule": "LogPower", "params": {"gamma_left": 3.0, "gamma_right": 3.0}},
        "n": 2000,
        "seed": 12,
        "p": 10.0,
    }
    out = tmp_path / "ci.json"
    assert main(["ci", "--config", write_json(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["interval"]["warning"] is not None


def test_ci_command_data_mode(tmp_path):
    data = tmp_path / "data.txt"
    xs = tl.sample(tl.normal(0, 1), 5, 1000)
    data.write_text("\n".join(f"{v:.17g}" for v in xs))
    doc = {"data": str(data), "rule": {"rule": "PowerLaw", "params": {"rho_left": 0.4, "rho_right": 0.4}}}
    out = tmp_path / "ci.json"
    assert main(["ci", "--config", write_json(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    interval = json.loads(out.read_text())["interval"]
    assert interval["mode"] == "data"
    assert interval["lower"] < 0.0 < interval["upper"]


def test_ci_command_constant_data_exit_3(tmp_path):
    data = tmp_path / "data.txt"
    data.write_text("\n".join(["1.0"] * 200))
    doc = {"data": str(data), "rule": {"rule": "PowerLaw", "params": {"rho_left": 0.4, "rho_right": 0.4}}}
    assert main(["ci", "--config", write_json(tmp_path / "c.json", doc)]) == 3


def test_malformed_json_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.json")]) == 2

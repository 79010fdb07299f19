import csv
import json

import numpy as np
import pytest
from scipy import stats

from stdw import cli
from stdw.adapt import fit_supervised
from stdw.domains import write_idx_images, write_idx_labels
from stdw.errors import ConfigError, UsageError
from stdw.harness import (
    ExperimentConfig, ablate_schedules, parse_config_file, run_experiment, sweep_intermediates,
)
from stdw.metrics import evaluate, summarize
from stdw.nn_core import Layer, Model, OptimState, init_model

TINY = dict(n_domains=3, shift_end=20.0, samples_per_domain=24, epochs=1, batch_size=8,
            hidden=[6], source_epochs=2)


def tiny(**kw):
    return ExperimentConfig.from_dict({**TINY, **kw})


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_evaluate_separable_converged():
    r = np.random.default_rng(0)
    x = np.r_[r.normal(-2, 0.3, (25, 2)), r.normal(2, 0.3, (25, 2))]
    y = np.r_[np.zeros(25, int), np.ones(25, int)]
    m = fit_supervised(init_model([2, 8], 2, 0), OptimState("adam", 0.05), x, y, 40, 10, seed=0)
    assert evaluate(m, x, y) == (1.0, 0.0)


def test_evaluate_constant_predictor():
    m = Model([Layer(np.zeros((2, 2)), np.array([1.0, 0.0]), "identity")])
    acc, err = evaluate(m, np.zeros((10, 2)), np.arange(10) % 2)
    assert acc == 0.5 and err == 0.5


def test_evaluate_empty():
    with pytest.raises(UsageError):
        evaluate(init_model([2, 3], 2, 0), np.zeros((0, 2)), [])


def test_summarize_single_and_many():
    assert summarize([0.7])["sd"] is None and summarize([0.7])["ci95"] is None
    s = summarize([0.5, 0.7, 0.9])
    assert s["ci95"] == pytest.approx(stats.t.ppf(0.975, 2) * 0.2 / np.sqrt(3))


def test_single_repeat_report_has_null_sd():
    rep = run_experiment(tiny(repeats=1))
    assert rep.target["sd"] is None and rep.target["ci95"] is None
    assert len(rep.repeats) == 1
    for r in rep.repeats:
        assert all(a + e == 1.0 for a, e in zip(r["accuracy"], r["error_rate"]))
        assert all(0 <= a <= 1 for a in r["accuracy"])


def test_report_deterministic():
    a = run_experiment(tiny(repeats=2, seed=3)).to_json()
    b = run_experiment(tiny(repeats=2, seed=3)).to_json()
    a.pop("wall_seconds"), b.pop("wall_seconds")
    assert a == b


def test_repeats_use_consecutive_seeds():
    rep = run_experiment(tiny(repeats=3, seed=10))
    assert [r["seed"] for r in rep.repeats] == [10, 11, 12]
    alone = run_experiment(tiny(repeats=1, seed=11))
    assert alone.repeats[0]["accuracy"] == rep.repeats[1]["accuracy"]


@pytest.mark.parametrize("method", ["stdw", "gst", "direct"])
def test_outputs_and_snapshot_round_trip(tmp_path, method):
    rep = run_experiment(tiny(repeats=2, method=method, out=str(tmp_path)))
    data = json.loads((tmp_path / "report.json").read_text())
    again = run_experiment(ExperimentConfig.from_dict({**data["config"], "out": None}))
    assert [r["accuracy"] for r in again.repeats] == [r["accuracy"] for r in data["repeats"]]
    assert data["repeats"] == rep.repeats


def test_csv_schemas_and_aggregates(tmp_path):
    run_experiment(tiny(repeats=3, out=str(tmp_path)))
    data = json.loads((tmp_path / "report.json").read_text())
    rows = read_csv(tmp_path / "accuracy.csv")
    assert list(rows[0]) == ["repeat", "seed", "domain_t", "accuracy", "error_rate"]
    assert len(rows) == 3 * 3
    target = [float(r["accuracy"]) for r in rows if r["domain_t"] == "2"]
    sd = np.std(target, ddof=1)
    assert data["target"]["mean"] == pytest.approx(np.mean(target), abs=1e-15)
    assert data["target"]["sd"] == pytest.approx(sd, abs=1e-15)
    assert data["target"]["ci95"] == pytest.approx(stats.t.ppf(0.975, 2) * sd / np.sqrt(3), abs=1e-15)
    for r in rows:
        assert float(r["accuracy"]) + float(r["error_rate"]) == pytest.approx(1.0, abs=1e-15)
    trace = read_csv(tmp_path / "trace.csv")
    assert list(trace[0]) == ["repeat", "method", "domain_t", "rho", "step",
                              "loss_mixed", "loss_left", "loss_right"]
    for r in trace:
        rho = float(r["rho"])
        assert 0 <= rho <= 1
        mixed = (1 - rho) * float(r["loss_left"]) + rho * float(r["loss_right"])
        assert float(r["loss_mixed"]) == pytest.approx(mixed, abs=1e-12)


def test_unwritable_out_fails_before_training(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    called = []
    monkeypatch.setattr("stdw.harness.build_sequence", lambda *a: called.append(1))
    with pytest.raises(OSError):
        run_experiment(tiny(out=str(blocker / "sub")))
    assert not called


def test_config_validation():
    with pytest.raises(ConfigError):
        tiny(repeats=0).validate()
    with pytest.raises(ConfigError):
        tiny(dataset="idx").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_parse_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# experiment\nmethod = gst\nrepeats = 3  # three seeds\nhidden = [8, 8]\n"
                 "gst-drop-fraction = 0.2\nout = \"runs/a\"\n")
    d = parse_config_file(p)
    assert d == {"method": "gst", "repeats": 3, "hidden": [8, 8], "gst_drop_fraction": 0.2, "out": "runs/a"}
    cfg = ExperimentConfig.from_dict(d)
    assert cfg.adapt.hidden == (8, 8) and cfg.adapt.gst_drop_fraction == 0.2
    (tmp_path / "bad.cfg").write_text("method gst\n")
    with pytest.raises(ConfigError):
        parse_config_file(tmp_path / "bad.cfg")


def test_sweep_single_cell_degenerates(tmp_path):
    base = tiny(repeats=1, out=str(tmp_path))
    cells = sweep_intermediates(base, [2], [0])
    assert list(cells) == [(2, 0)]
    direct = run_experiment(tiny(repeats=1, n_domains=2, steps=0))
    assert cells[(2, 0)].repeats[0]["accuracy"] == direct.repeats[0]["accuracy"]
    grid = read_csv(tmp_path / "grid.csv")
    assert list(grid[0]) == ["given_domains", "s0_mean", "s0_ci95"]
    assert grid[0]["s0_ci95"] == ""


def test_sweep_grid_shape(tmp_path):
    base = tiny(repeats=2, samples_per_domain=20, out=str(tmp_path), source_epochs=1)
    cells = sweep_intermediates(base, [2, 3, 4, 5, 6], [0, 1, 2, 3, 4])
    assert len(cells) == 25
    grid = read_csv(tmp_path / "grid.csv")
    assert [r["given_domains"] for r in grid] == ["2", "3", "4", "5", "6"]
    for r in grid:
        for s in range(5):
            assert float(r[f"s{s}_ci95"]) >= 0
    cell = json.loads((tmp_path / "given_domains_4_s2" / "report.json").read_text())
    assert cell["config"]["n_domains"] == 4 and cell["config"]["steps"] == 2


def test_sweep_empty_lists():
    with pytest.raises(ConfigError):
        sweep_intermediates(tiny(), [], [1])


def test_ablate_fixed_and_sorted(tmp_path):
    base = tiny(repeats=1, out=str(tmp_path), n_domains=2)
    cells = ablate_schedules(base, ["fixed", "sorted"], [3])
    fixed = read_csv(tmp_path / "schedule_fixed_s3" / "trace.csv")
    assert {r["rho"] for r in fixed} == {"0.5"}
    srt = [float(r["rho"]) for r in read_csv(tmp_path / "schedule_sorted_s3" / "trace.csv")]
    assert np.all(np.diff(srt) >= 0)
    assert [r["schedule"] for r in read_csv(tmp_path / "grid.csv")] == ["fixed", "sorted"]
    assert cells[("fixed", 3)].config["schedule"] == "fixed"


# -- command line ------------------------------------------------------------------

def test_cli_generate(tmp_path, capsys):
    assert cli.main(["generate", "--n-domains", "3", "--samples-per-domain", "20",
                     "--out", str(tmp_path / "seq")]) == 0
    assert (tmp_path / "seq" / "manifest.json").exists()
    assert (tmp_path / "seq" / "domain_2_eval.csv").exists()


def test_cli_train_with_config(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("n_domains = 3\nsamples_per_domain = 24\nhidden = [6]\nsource_epochs = 2\n")
    rc = cli.main(["train", "--config", str(cfg), "--method", "gst", "--epochs", "1",
                   "--repeats", "2", "--out", str(tmp_path / "run"), "--gst-drop-fraction", "0.2"])
    assert rc == 0
    assert "target accuracy" in capsys.readouterr().out
    snap = json.loads((tmp_path / "run" / "report.json").read_text())["config"]
    assert snap["method"] == "gst" and snap["gst_drop_fraction"] == 0.2 and snap["repeats"] == 2


def test_cli_sweep_and_ablate(tmp_path):
    common = ["--samples-per-domain", "20", "--epochs", "1", "--batch-size", "10",
              "--config", str(tmp_path / "c.cfg")]
    (tmp_path / "c.cfg").write_text("hidden = [4]\nsource_epochs = 1\n")
    assert cli.main(["sweep", "--counts", "2,3", "--steps-list", "1", "--out",
                     str(tmp_path / "sw"), *common]) == 0
    assert len(read_csv(tmp_path / "sw" / "grid.csv")) == 2
    assert cli.main(["ablate", "--kinds", "equal,rand", "--step-counts", "1,2", "--n-domains", "2",
                     "--out", str(tmp_path / "ab"), *common]) == 0
    assert list(read_csv(tmp_path / "ab" / "grid.csv")[0]) == [
        "schedule", "s1_mean", "s1_ci95", "s2_mean", "s2_ci95"]


def test_cli_lyapunov(capsys):
    assert cli.main(["lyapunov", "--mu", "0.1", "--L", "1", "--eta", "0.15"]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == 0


def test_cli_errors_are_tagged(tmp_path, capsys):
    assert cli.main(["lyapunov", "--eta", "5"]) == 2
    assert capsys.readouterr().err.startswith("error[config]:")
    (tmp_path / "bad.idx").write_bytes(b"\x00\x00\x08\x01" + bytes(8))
    rc = cli.main(["train", "--idx-images", str(tmp_path / "bad.idx"),
                   "--idx-labels", str(tmp_path / "bad.idx")])
    assert rc == 2 and "error[format]" in capsys.readouterr().err
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert cli.main(["train", "--out", str(blocker / "x")]) == 3
    assert "error[io]" in capsys.readouterr().err


def test_cli_idx_training(tmp_path):
    r = np.random.default_rng(0)
    imgs = (r.uniform(size=(80, 6, 6)) * 255).astype(np.uint8)
    labels = (imgs.reshape(80, -1).mean(1) > 127).astype(np.uint8)
    write_idx_images(tmp_path / "i.idx", imgs)
    write_idx_labels(tmp_path / "l.idx", labels)
    rc = cli.main(["train", "--idx-images", str(tmp_path / "i.idx"), "--idx-labels",
                   str(tmp_path / "l.idx"), "--n-domains", "2", "--samples-per-domain", "40",
                   "--shift-end", "45", "--epochs", "1", "--out", str(tmp_path / "run")])
    assert rc == 0
    snap = json.loads((tmp_path / "run" / "report.json").read_text())["config"]
    assert snap["dataset"] == "idx"

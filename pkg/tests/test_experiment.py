import json
import math

import numpy as np
import pytest

from dppgd import cli
from dppgd import experiment as ex
from dppgd.metrics import COLUMNS, MetricsTrace, fit_rate
from dppgd.problems import make_problem


def small_cfg(**kw):
    base = dict(name="t", problem={"name": "nesterov_nonsmooth", "n": 2, "agents": 5, "seed": 2},
                graph={"kind": "cycle"}, epsilon={"policy": "manual", "value": 0.1},
                rounds=200, repetitions=3, seed=9)
    base.update(kw)
    return ex.ExperimentConfig.from_dict(base)


def test_problem_values():
    p1 = make_problem("nesterov_nonsmooth", 1, 4, seed=0)
    l = np.array(p1.params["l"])
    assert np.all((l >= 0.5) & (l <= 1.5))
    for c in p1.costs:
        assert c.evaluate(np.array([1.0])) == 0.0
    p2 = make_problem("nesterov_nonsmooth", 2, 4, seed=0)
    for li, c in zip(p2.params["l"], p2.costs):
        assert c.evaluate(np.zeros(2)) == pytest.approx(li + 1)
    p5 = make_problem("nesterov_nonsmooth", 5, 3)
    assert all(c.evaluate(np.ones(5)) == 0.0 for c in p5.costs)
    with pytest.raises(ValueError, match="unknown problem"):
        make_problem("rosenbrock", 2, 3)


def test_fit_rate_power_law():
    k = np.arange(1, 100_001)
    fit = fit_rate(k, 1 / np.sqrt(k), "one_over_sqrt")
    assert fit.exponent == pytest.approx(-0.5, abs=0.02) and fit.r2 > 0.999
    assert fit.window == (10_000, 100_000)


def test_fit_rate_log_model():
    k = np.arange(2, 100_001)
    fit = fit_rate(k, np.log(k) / np.sqrt(k), "lnt_over_sqrt")
    assert fit.log_coefficient == pytest.approx(1.0, abs=0.05)
    assert fit.exponent == pytest.approx(-0.5, abs=0.02)


def test_fit_rate_drops_nonpositive():
    k = np.arange(1, 1001, dtype=float)
    gap = 1 / np.sqrt(k)
    gap[::4] = -1.0
    fit = fit_rate(k, gap)
    assert fit.reliable and fit.dropped > 0 and fit.exponent == pytest.approx(-0.5, abs=1e-9)
    gap[::2] = 0.0
    gap[1::2] = np.where(np.arange(500) % 3 == 0, gap[1::2], -1.0)
    assert not fit_rate(k, gap).reliable
    with pytest.raises(ValueError):
        fit_rate(k, gap, "exp")


def test_config_roundtrip(tmp_path):
    cfg = small_cfg(smoothing={"p1": 1.5, "b": 3})
    assert cfg.smoothing_schedule().p2 == 4.5
    path = tmp_path / "c.yaml"
    import yaml
    path.write_text(yaml.safe_dump(cfg.to_dict()))
    assert ex.load_config(path) == cfg
    with pytest.raises(ValueError, match="unknown config keys"):
        ex.ExperimentConfig.from_dict({"rounds": 5, "bogus": 1})


def test_empty_trace_gives_header_only(tmp_path):
    tr = MetricsTrace("empty", np.empty((0, len(COLUMNS))))
    ex.export_csv([tr], tmp_path)
    assert (tmp_path / "empty.csv").read_text() == ",".join(COLUMNS) + "\n"


def test_ten_rounds_give_eleven_rows(tmp_path):
    ex.export_csv([ex.run(small_cfg(rounds=10, repetitions=1))], tmp_path)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",") == list(COLUMNS)
    assert [int(l.split(",")[0]) for l in lines[1:]] == list(range(11))


def test_rerun_and_sidecar_are_byte_identical(tmp_path):
    cfg = small_cfg()
    ex.export_csv([ex.run(cfg)], tmp_path / "a")
    ex.export_csv([ex.run(cfg)], tmp_path / "b")
    first = (tmp_path / "a" / "t.csv").read_bytes()
    assert first == (tmp_path / "b" / "t.csv").read_bytes()
    side = json.loads((tmp_path / "a" / "t.json").read_text())
    assert side["seed"] == 9 and side["columns"] == list(COLUMNS)
    again = ex.ExperimentConfig.from_dict(side)
    ex.export_csv([ex.run(again)], tmp_path / "c")
    assert first == (tmp_path / "c" / "t.csv").read_bytes()


def test_repetition_average_and_recomputable_metrics(tmp_path):
    cfg = small_cfg(per_rep=True)
    tr = ex.run(cfg)
    ex.export_csv([tr], tmp_path)
    reps = [ex.read_csv(tmp_path / "t_reps" / f"rep{i}.csv") for i in range(3)]
    np.testing.assert_allclose(tr.column("gap_hat"), np.mean([r["gap_hat"] for r in reps], axis=0),
                               rtol=1e-15, atol=0)
    # last-round consensus and surplus from the dumped terminal states
    cons, surp = [], []
    for fs in tr.final_states:
        x, y = np.array(fs["x"]), np.array(fs["y"])
        zbar = (x + y).sum(axis=0) / len(x)
        cons.append(np.linalg.norm(x - zbar, axis=1).max())
        surp.append(np.linalg.norm(y, axis=1).max())
    assert tr.column("consensus")[-1] == pytest.approx(np.mean(cons), rel=1e-12)
    assert tr.column("surplus")[-1] == pytest.approx(np.mean(surp), rel=1e-12)


def test_gap_is_never_below_optimum():
    tr = ex.run(small_cfg(rounds=3000, repetitions=2))
    assert np.all(tr.column("gap_hat") >= -1e-9)
    assert np.all(tr.column("gap_bar") >= -1e-9)
    assert np.all(tr.agent_gaps >= -1e-9)


def test_sweeps_emit_one_trace_per_setting():
    cfg = small_cfg(rounds=50, repetitions=1)
    st = ex.sweep_stepsize(cfg)
    assert [t.name for t in st] == ["t_a0", "t_a0.2", "t_a0.5", "t_a0.7", "t_a1"]
    assert st[0].column("alpha")[-1] == pytest.approx(0.1)
    assert st[-1].column("alpha")[-1] == pytest.approx(0.1 / 51)
    sb = ex.sweep_beta(cfg)
    assert len(sb) == 5
    assert sb[1].column("beta_tilde")[10] == pytest.approx(11.0 ** -3)
    cmp = ex.compare_baselines(cfg)
    assert [t.config["method"] for t in cmp] == ["dppgd", "ddps"]


def test_same_config_other_seed_differs():
    a = ex.run(small_cfg(rounds=500, repetitions=1))
    b = ex.run(small_cfg(rounds=500, repetitions=1, seed=10))
    assert not np.array_equal(a.rows, b.rows)
    for t in (a, b):
        g = t.column("gap_hat")
        assert g[-1] < g[0]


def test_graph_mismatch_is_an_error():
    with pytest.raises(ValueError, match="nodes"):
        ex.prepare(small_cfg(graph={"kind": "chorded_ring"}))


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(ex.OUTPUT_ENV, str(tmp_path / "env"))
    assert ex.output_dir() == tmp_path / "env"
    assert ex.output_dir("explicit") == ex.Path("explicit")
    monkeypatch.delenv(ex.OUTPUT_ENV)
    assert str(ex.output_dir()) == "results"


def write_cfg(tmp_path, **kw):
    import yaml
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(small_cfg(**kw).to_dict()))
    return str(path)


def test_cli_run_uses_env_output(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv(ex.OUTPUT_ENV, str(tmp_path / "out"))
    cfg = write_cfg(tmp_path)
    assert cli.main(["run", cfg, "--rounds", "20", "--repetitions", "1"]) == 0
    assert (tmp_path / "out" / "t.csv").exists()
    assert "gap_hat" in capsys.readouterr().out


@pytest.mark.parametrize("cmd, count", [("sweep-stepsize", 5), ("sweep-beta", 5), ("compare-baselines", 2)])
def test_cli_sweeps(tmp_path, cmd, count):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "o"
    assert cli.main([cmd, cfg, "--output", str(out), "--rounds", "20", "--repetitions", "1"]) == 0
    assert len(list(out.glob("*.csv"))) == count


def test_cli_svg(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = write_cfg(tmp_path)
    cli.main(["run", cfg, "--output", str(tmp_path), "--rounds", "30", "--repetitions", "1", "--svg"])
    assert (tmp_path / "t_run.svg").read_text().lstrip().startswith("<?xml")


def test_cli_spectra(tmp_path, capsys):
    cli.main(["spectra", "cycle:4", "--epsilon", "0.05"])
    out = json.loads(capsys.readouterr().out)
    assert out["nodes"] == 4 and out["epsilon"] == 0.05
    edge = tmp_path / "g.txt"
    edge.write_text("3\n1 2\n2 3\n3 1\n")
    cli.main(["spectra", str(edge), "--eps-grid"])
    text = capsys.readouterr().out
    assert "epsilon,gamma_fitted" in text
    assert len(text.split("epsilon,gamma_fitted")[1].strip().splitlines()) == 41


def test_cli_fit_rate(tmp_path, capsys):
    k = np.arange(0, 5001)
    rows = np.zeros((len(k), len(COLUMNS)))
    rows[:, 0] = k
    rows[:, COLUMNS.index("gap_hat")] = 3 / np.sqrt(k + 1.0)
    ex.export_csv([MetricsTrace("syn", rows)], tmp_path)
    cli.main(["fit-rate", str(tmp_path / "syn.csv"), "--window", "100", "5000"])
    out = json.loads(capsys.readouterr().out)
    assert out["exponent"] == pytest.approx(-0.5, abs=0.01) and out["window"] == [100, 5000]
    assert math.isfinite(out["r2"])

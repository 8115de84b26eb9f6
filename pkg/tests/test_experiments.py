"""Experiment config loading, artifact files, sweeps, comparisons, CLI."""
import json

import numpy as np
import pytest

from seqreason.cli import main
from seqreason.experiments import (
    ConfigError,
    ExperimentConfig,
    compare,
    load_config,
    read_csv,
    resolve_out_dir,
    run,
    save_config,
    sweep_alpha,
)
from seqreason.graphs import trace_from_json


def tiny_dict(**kw):
    base = {
        "schema_version": 1,
        "name": "smoke",
        "task_id": "bfs",
        "d": 8,
        "batch_size": 2,
        "steps": 2,
        "n_train": [4, 5],
        "eval_sizes": [4, 5],
        "eval_instances": 4,
        "seeds": [5, 18],
    }
    base.update(kw)
    return base


def tiny_cfg(**kw):
    return ExperimentConfig.from_dict(tiny_dict(**kw))


def write_cfg(tmp_path, name="cfg.json", **kw):
    path = tmp_path / name
    path.write_text(json.dumps(tiny_dict(**kw)))
    return path


# -- config ------------------------------------------------------------------------


def test_config_file_round_trip(tmp_path):
    cfg = tiny_cfg(gate="gnn_tanh_relu", alpha_grid=[[0.0, 0.5], [0.1]])
    path = tmp_path / "roundtrip.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_unknown_key_rejected(tmp_path):
    path = write_cfg(tmp_path, gate_swp=True)  # typo must not pass silently
    with pytest.raises(ConfigError, match="gate_swp"):
        load_config(path)


def test_missing_required_and_bad_version():
    with pytest.raises(ConfigError, match="missing"):
        ExperimentConfig.from_dict({"schema_version": 1, "name": "x"})
    with pytest.raises(ConfigError, match="schema_version"):
        ExperimentConfig.from_dict(tiny_dict(schema_version=99))


def test_parse_error_is_line_anchored(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  oops\n}\n')
    with pytest.raises(ConfigError, match=r"broken\.json:3"):
        load_config(path)


def test_ablation_switches_mutually_exclusive():
    with pytest.raises(ConfigError, match="mutually exclusive"):
        tiny_cfg(gate="gnn_tanh_relu", gate_swap=True, attention_preprocessor=True)


def test_attention_preprocessor_switch_selects_gate():
    cfg = tiny_cfg(attention_preprocessor=True)
    assert cfg.gate == "attention"
    with pytest.raises(ConfigError, match="conflicts"):
        tiny_cfg(attention_preprocessor=True, gate="gnn_tanh_relu")


def test_alpha_grid_domain_checks():
    with pytest.raises(ConfigError, match="outside"):
        tiny_cfg(alpha_grid=[[0.0, 1.5], [0.0]])
    with pytest.raises(ConfigError, match="two axes"):
        tiny_cfg(alpha_grid=[[0.0]])
    with pytest.raises(ConfigError, match="non-empty"):
        tiny_cfg(alpha_grid=[[], [0.0]])


def test_resolve_out_dir_priority(tmp_path, monkeypatch):
    cfg = tiny_cfg()
    monkeypatch.delenv("SEQREASON_OUT", raising=False)
    assert str(resolve_out_dir(cfg)).endswith("runs/smoke")
    monkeypatch.setenv("SEQREASON_OUT", str(tmp_path / "root"))
    assert resolve_out_dir(cfg) == tmp_path / "root" / "smoke"
    cfg2 = tiny_cfg(out_dir=str(tmp_path / "pinned"))
    assert resolve_out_dir(cfg2) == tmp_path / "pinned"
    assert resolve_out_dir(cfg2, tmp_path / "flag") == tmp_path / "flag"


# -- run ---------------------------------------------------------------------------


def test_run_emits_three_well_formed_files(tmp_path):
    outcome = run(tiny_cfg(), out_dir=tmp_path / "r")
    for fname in ("results.json", "metrics.csv", "timing.csv"):
        assert (tmp_path / "r" / fname).exists()
    results = json.loads((tmp_path / "r" / "results.json").read_text())
    assert 0.0 <= results["mean"] <= 1.0
    assert set(results["per_seed"]) == {"5", "18"}
    for v in results["per_seed"].values():
        assert 0.0 <= v <= 1.0
    rows = read_csv(tmp_path / "r" / "metrics.csv")
    assert all(0.0 <= float(r["value"]) <= 1.0 for r in rows)
    agg = [float(r["value"]) for r in rows if r["metric"] == "aggregate"]
    assert agg == [results["per_seed"]["5"], results["per_seed"]["18"]]
    timing = read_csv(tmp_path / "r" / "timing.csv")
    assert {r["phase"] for r in timing} == {"train", "eval"}
    assert all(float(r["seconds"]) > 0 for r in timing)


def test_run_results_are_byte_identical_on_repeat(tmp_path):
    run(tiny_cfg(), out_dir=tmp_path / "a")
    run(tiny_cfg(), out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "results.json").read_bytes()
    b = (tmp_path / "b" / "results.json").read_bytes()
    assert a == b
    ma = (tmp_path / "a" / "metrics.csv").read_bytes()
    mb = (tmp_path / "b" / "metrics.csv").read_bytes()
    assert ma == mb


def test_run_parallel_jobs_match_serial(tmp_path):
    run(tiny_cfg(), out_dir=tmp_path / "serial", jobs=1)
    run(tiny_cfg(), out_dir=tmp_path / "par", jobs=2)
    assert (tmp_path / "serial" / "results.json").read_bytes() == (
        tmp_path / "par" / "results.json"
    ).read_bytes()


# -- sweep -------------------------------------------------------------------------


def test_sweep_requires_grid(tmp_path):
    with pytest.raises(ConfigError, match="alpha_grid"):
        sweep_alpha(tiny_cfg(), out_dir=tmp_path)


def test_sweep_cardinality_1x1_and_3x3(tmp_path):
    cfg = tiny_cfg(seeds=[5], alpha_grid=[[0.5], [0.5]])
    outcome = sweep_alpha(cfg, out_dir=tmp_path / "one")
    assert len(outcome["rows"]) == 1
    grid3 = [[0.0, 0.5, 1.0], [0.0, 0.5, 1.0]]
    cfg3 = tiny_cfg(seeds=[5], alpha_grid=grid3, steps=1, eval_instances=2)
    outcome3 = sweep_alpha(cfg3, out_dir=tmp_path / "nine")
    assert len(outcome3["rows"]) == 9
    rows = read_csv(tmp_path / "nine" / "sweep.csv")
    assert len(rows) == 9
    grid = read_csv(tmp_path / "nine" / "sweep_grid.csv")
    assert len(grid) == 3
    assert set(grid[0]) == {"alpha1", "0.0", "0.5", "1.0"}
    # averaged grid agrees with the raw rows
    for g in grid:
        for a2 in ("0.0", "0.5", "1.0"):
            cell = [
                float(r["score"])
                for r in rows
                if r["alpha1"] == g["alpha1"] and r["alpha2"] == a2
            ]
            assert float(g[a2]) == pytest.approx(np.mean(cell))


def test_sweep_zero_cell_equals_disabled_baseline(tmp_path):
    base = run(tiny_cfg(seeds=[7]), out_dir=tmp_path / "base")
    swept = sweep_alpha(
        tiny_cfg(seeds=[7], alpha_grid=[[0.0], [0.0]]), out_dir=tmp_path / "sweep"
    )
    assert swept["rows"][0]["score"] == base["results"]["per_seed"]["7"]


# -- compare -----------------------------------------------------------------------


def fake_results(tmp_path, name, task, mean, std=0.0, train_seconds=None):
    d = tmp_path / name
    d.mkdir(parents=True)
    payload = {"schema_version": 1, "name": name, "task_id": task, "mean": mean, "std": std}
    (d / "results.json").write_text(json.dumps(payload))
    if train_seconds is not None:
        (d / "timing.csv").write_text(
            "seed,phase,seconds\n5,train,%s\n5,eval,0.1\n" % train_seconds
        )
    return d / "results.json"


def test_compare_self_is_all_zero(tmp_path):
    p = fake_results(tmp_path, "one", "bfs", 0.75, train_seconds=2.0)
    outcome = compare([p, p], tmp_path / "cmp")
    assert [r["delta"] for r in outcome["rows"]] == [0.0]
    assert outcome["rows"][0]["timing_ratio"] == 1.0
    assert (tmp_path / "cmp" / "comparison.csv").exists()
    assert (tmp_path / "cmp" / "comparison.png").exists()


def test_compare_hand_deltas_and_ordering(tmp_path):
    paths = [
        fake_results(tmp_path, "bfs_base", "bfs", 0.5, train_seconds=2.0),
        fake_results(tmp_path, "bfs_cef", "bfs", 0.8, train_seconds=3.0),
        fake_results(tmp_path, "min_base", "minimum", 0.9),
        fake_results(tmp_path, "min_cef", "minimum", 0.85),
    ]
    outcome = compare(paths, tmp_path / "cmp")
    rows = outcome["rows"]
    assert [r["task"] for r in rows] == ["bfs", "minimum"]  # descending delta
    assert rows[0]["delta"] == pytest.approx(0.3)
    assert rows[1]["delta"] == pytest.approx(-0.05)
    assert rows[0]["timing_ratio"] == pytest.approx(1.5)
    back = read_csv(tmp_path / "cmp" / "comparison.csv")
    assert [r["task"] for r in back] == ["bfs", "minimum"]
    assert float(back[0]["delta"]) == pytest.approx(0.3)


def test_compare_unpaired_task_rejected(tmp_path):
    p1 = fake_results(tmp_path, "a", "bfs", 0.5)
    p2 = fake_results(tmp_path, "b", "minimum", 0.6)
    with pytest.raises(ConfigError, match="exactly two"):
        compare([p1, p2], tmp_path / "cmp")


# -- cli ---------------------------------------------------------------------------


def test_cli_run_and_exit_codes(tmp_path):
    cfg_path = write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "results.json").exists()


def test_cli_invalid_config_exits_nonzero(tmp_path, capsys):
    bad = write_cfg(tmp_path, gate="bogus")
    code = main(["run", "--config", str(bad), "--out", str(tmp_path / "x")])
    assert code == 2
    err = capsys.readouterr().err
    assert "error:" in err and "bogus" in err


def test_cli_gen_writes_loadable_traces(tmp_path):
    out = tmp_path / "traces"
    assert main([
        "gen", "--task", "minimum", "--count", "3", "--n-min", "4", "--n-max", "5",
        "--seed", "1", "--out", str(out),
    ]) == 0
    files = sorted(out.glob("minimum_*.json"))
    assert len(files) == 3
    tr = trace_from_json(files[0].read_text())
    assert tr.T == tr.graph.n


def test_cli_train_then_eval(tmp_path):
    cfg_path = write_cfg(tmp_path, seeds=[5])
    out = tmp_path / "t"
    assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
    ckpt = out / "checkpoint_seed5.npz"
    assert ckpt.exists()
    assert (out / "train_log_seed5.csv").exists()
    assert main([
        "eval", "--config", str(cfg_path), "--params", str(ckpt), "--out", str(out),
    ]) == 0
    report = json.loads((out / "eval_report_seed5.json").read_text())
    assert 0.0 <= report["aggregate"] <= 1.0


def test_cli_sweep_and_compare(tmp_path):
    sweep_path = write_cfg(tmp_path, name="sweep_cfg.json", seeds=[5], alpha_grid=[[0.0], [0.0]])
    assert main([
        "sweep-alpha", "--config", str(sweep_path), "--out", str(tmp_path / "sw"),
    ]) == 0
    assert (tmp_path / "sw" / "sweep_grid.csv").exists()
    a = fake_results(tmp_path, "ra", "bfs", 0.4, train_seconds=1.0)
    b = fake_results(tmp_path, "rb", "bfs", 0.6, train_seconds=1.1)
    assert main(["compare", str(a), str(b), "--out", str(tmp_path / "cmp")]) == 0
    assert (tmp_path / "cmp" / "comparison.csv").exists()

import csv
import json

import numpy as np
import pytest

from gnncl.cli import (ConfigError, _mean_std, load_experiment_config, main,
                       resolve_dataset)
from gnncl.graph import class_homophily, load_graph_bundle


def write_config(path, **overrides):
    data = {
        "dataset": {"synthetic": {
            "num_nodes": 150, "num_classes": 3, "feature_dim": 5,
            "intra_class_edge_prob": 0.1, "inter_class_edge_prob": 0.02,
            "seed": 4,
        }},
        "train": {"hidden_dim": 8, "max_epochs": 8, "patience": 8, "seed": 7,
                  "variant": "gnn-cl"},
        "repeats": 2,
        "output_dir": "exp",
    }
    data.update(overrides)
    path.write_text(json.dumps(data))
    return data


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, extra_key=1)
    with pytest.raises(ConfigError, match="extra_key"):
        load_experiment_config(cfg)


def test_missing_dataset_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {}}))
    with pytest.raises(ConfigError, match="dataset"):
        load_experiment_config(cfg)


def test_bad_train_key_names_key(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, train={"hidden": 3})
    with pytest.raises(ConfigError, match="hidden"):
        load_experiment_config(cfg)


def test_missing_bundle_path_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    write_config(cfg, dataset={"bundle": str(tmp_path / "nowhere")})
    code = main(["train", "--config", str(cfg)])
    assert code == 1
    assert "dataset.bundle" in capsys.readouterr().err


def test_missing_config_file_exit_code(tmp_path, capsys):
    code = main(["train", "--config", str(tmp_path / "none.json")])
    assert code == 1


def test_mean_std_hand_values():
    mean, std = _mean_std([0.70, 0.72, 0.74, 0.71, 0.73])
    assert mean == pytest.approx(0.72, abs=1e-12)
    assert std == pytest.approx(0.014142135623730963, abs=1e-12)


# ---------------------------------------------------------------------------
# train command
# ---------------------------------------------------------------------------

def test_train_writes_expected_artifacts(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, repeats=5, train={"hidden_dim": 8, "max_epochs": 4,
                                        "patience": 4, "seed": 7})
    assert main(["train", "--config", str(cfg)]) == 0
    out = tmp_path / "exp"
    metric_files = sorted(out.glob("run_seed*/metrics.json"))
    assert len(metric_files) == 5
    assert {p.parent.name for p in metric_files} == {
        f"run_seed{s}" for s in range(7, 12)}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["repeats"] == 5
    # the summary is recomputable from the per-run metric files alone
    per_run = [json.loads(p.read_text())["cma"] for p in metric_files]
    mean, std = _mean_std(per_run)
    assert sorted(summary["cma"]["values"]) == sorted(per_run)
    assert summary["cma"]["mean"] == pytest.approx(mean, abs=1e-15)
    assert summary["cma"]["std"] == pytest.approx(std, abs=1e-15)
    report = json.loads(metric_files[0].read_text())
    assert set(report) == {"cma", "auc_macro", "per_class_recall", "confusion",
                           "classes_skipped"}
    assert (out / "run_seed7" / "checkpoint.json").exists()
    assert (out / "run_seed7" / "history.csv").exists()


def test_train_rerun_byte_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, repeats=1)
    assert main(["train", "--config", str(cfg)]) == 0
    first = {p.relative_to(tmp_path): p.read_bytes()
             for p in (tmp_path / "exp").rglob("*") if p.is_file()}
    assert main(["train", "--config", str(cfg)]) == 0
    second = {p.relative_to(tmp_path): p.read_bytes()
              for p in (tmp_path / "exp").rglob("*") if p.is_file()}
    assert first == second


def test_train_flag_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, repeats=1)
    assert main(["train", "--config", str(cfg), "--seed", "99",
                 "--variant", "origin", "--out", "other"]) == 0
    summary = json.loads((tmp_path / "other" / "summary.json").read_text())
    assert summary["variant"] == "origin"
    assert summary["runs"][0]["seed"] == 99


# ---------------------------------------------------------------------------
# sweep command
# ---------------------------------------------------------------------------

def test_sweep_emits_long_format(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, repeats=2,
                 sweep={"parameter": "mu", "values": [0.5, 1.0]})
    assert main(["sweep", "--config", str(cfg)]) == 0
    with open(tmp_path / "exp" / "sweep_results.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4
    assert [r["value"] for r in rows] == ["0.5", "0.5", "1.0", "1.0"]
    assert all(0.0 <= float(r["cma"]) <= 1.0 for r in rows)
    mirrored = json.loads((tmp_path / "exp" / "sweep_results.json").read_text())
    assert len(mirrored) == 4
    assert (tmp_path / "exp" / "mu=0.5" / "summary.json").exists()


def test_sweep_imbalance_ratio_changes_masks(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, repeats=1,
                 sweep={"parameter": "imbalance_ratio", "values": [0.2, 1.0]})
    assert main(["sweep", "--config", str(cfg)]) == 0
    rows = json.loads((tmp_path / "exp" / "sweep_results.json").read_text())
    assert {r["value"] for r in rows} == {0.2, 1.0}


def test_sweep_rejects_bad_parameter(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    write_config(cfg, sweep={"parameter": "dropout", "values": [0.1]})
    assert main(["sweep", "--config", str(cfg)]) == 1
    assert "sweep.parameter" in capsys.readouterr().err


def test_sweep_rejects_empty_values(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, sweep={"parameter": "mu", "values": []})
    assert main(["sweep", "--config", str(cfg)]) == 1


def test_sweep_parallel_jobs_match_serial(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, repeats=1, output_dir="serial",
                 sweep={"parameter": "gamma", "values": [0.0, 1.0]})
    assert main(["sweep", "--config", str(cfg)]) == 0
    write_config(cfg, repeats=1, output_dir="parallel",
                 sweep={"parameter": "gamma", "values": [0.0, 1.0]})
    assert main(["sweep", "--config", str(cfg), "--jobs", "2"]) == 0
    serial = (tmp_path / "serial" / "sweep_results.csv").read_text()
    parallel = (tmp_path / "parallel" / "sweep_results.csv").read_text()
    assert serial == parallel


# ---------------------------------------------------------------------------
# analyze + gen-data
# ---------------------------------------------------------------------------

def test_analyze_matches_homophily_oracle(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg)
    assert main(["analyze", "--config", str(cfg)]) == 0
    payload = json.loads((tmp_path / "exp" / "analysis.json").read_text())
    data = load_experiment_config(cfg)
    graph, masks = resolve_dataset(data)
    for entry in payload["per_class"]:
        assert entry["homophily"] == pytest.approx(
            class_homophily(graph, entry["class"]), abs=1e-12)
    assert payload["num_nodes"] == graph.num_nodes
    with open(tmp_path / "exp" / "class_stats.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == graph.num_classes


def test_gen_data_round_trips(tmp_path, monkeypatch):
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    write_config(cfg, output_dir="bundle")
    assert main(["gen-data", "--config", str(cfg)]) == 0
    graph, masks = load_graph_bundle(tmp_path / "bundle")
    data = load_experiment_config(cfg)
    direct_graph, direct_masks = resolve_dataset(data)
    assert np.array_equal(graph.edge_list(), direct_graph.edge_list())
    assert np.allclose(graph.features, direct_graph.features)
    assert np.array_equal(np.sort(masks.train), np.sort(direct_masks.train))


def test_gen_data_requires_synthetic(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    bundle_dir = tmp_path / "b"
    bundle_dir.mkdir()
    write_config(cfg, dataset={"bundle": str(bundle_dir)})
    assert main(["gen-data", "--config", str(cfg)]) == 1
    assert "synthetic" in capsys.readouterr().err


def test_runtime_failure_exit_code(tmp_path, monkeypatch, capsys):
    # a bundle directory that exists but holds a corrupt file -> runtime (2)
    bundle = tmp_path / "b"
    bundle.mkdir()
    for name in ("edges.tsv", "features.tsv", "labels.tsv"):
        (bundle / name).write_text("")
    (bundle / "splits.json").write_text("{not json")
    cfg = tmp_path / "c.json"
    write_config(cfg, dataset={"bundle": str(bundle)})
    monkeypatch.setenv("GNNCL_OUTPUT_ROOT", str(tmp_path))
    assert main(["train", "--config", str(cfg)]) == 2

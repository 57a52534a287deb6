import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gir.cli import main
from gir.datasets import BENCHMARKS, make_dataset, mirror_pair_dataset, write_dataset
from gir.graph import split_dataset
from gir.harness import (
    CSV_COLUMNS, ConfigError, ExperimentConfig, FusionConfig, aggregate_runs, message_graph, read_records_csv,
    records_csv, run_experiment, run_fusion, summary_csv,
)
from gir.metrics import accuracy, roc_auc, summarize
from gir.models import ModelConfig, forward, init_params


def auc_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.3] * 4, [0, 1, 0, 1]) == 0.5
    assert roc_auc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        roc_auc([0.1], [1, 0])


labelled_scores = st.integers(2, 40).flatmap(lambda m: st.tuples(
    st.lists(st.integers(-5, 5).map(float), min_size=m, max_size=m),
    st.lists(st.integers(0, 1), min_size=m, max_size=m).filter(lambda y: 0 < sum(y) < len(y))))


@given(labelled_scores)
def test_auc_matches_pairwise_oracle(data):
    scores, labels = data
    assert roc_auc(scores, labels) == pytest.approx(auc_oracle(scores, labels), abs=1e-12)


@given(labelled_scores)
def test_auc_monotone_invariance(data):
    scores, labels = data
    s = np.array(scores)
    assert roc_auc(np.exp(s / 3) * 7 - 2, labels) == roc_auc(s, labels)


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([1, 1, 0, 1], [1, 1, 0, 0]) == 0.75
    with pytest.raises(ValueError):
        accuracy([], [])


def test_summary_examples():
    assert summarize([0.7])["std"] == 0.0
    s = summarize([1.0, 3.0])
    assert s["mean"] == 2.0 and s["std"] == pytest.approx(math.sqrt(2))


def mirror_config(**kw):
    doc = {"dataset": {"mirror": {"arm_size": 40, "seed": 0}}, "variants": ["GCN", "GIR-A"], "layers": 9,
           "hidden": 16, "anchor_nodes": [1], "epochs": 150, "patience": 40, "seeds": [0, 1],
           "split_seeds": [0, 1, 2]}
    doc.update(kw)
    return ExperimentConfig.from_dict(doc)


@pytest.fixture(scope="module")
def mirror_run():
    return run_experiment(mirror_config())


def test_mirror_gcn_chance_and_gir_a_separates(mirror_run):
    summary = {r["variant"]: r for r in mirror_run.summary()}
    assert abs(summary["GCN"]["mean"] - 0.5) <= 0.05
    assert summary["GIR-A"]["mean"] >= 0.9


def test_mirror_gcn_positive_has_identically_scored_negative():
    ds, p = mirror_pair_dataset(40, 0)
    cfg = ModelConfig("GCN", 3, 16, 16)
    pos = ds.task.pairs[ds.task.pair_labels == 1]
    for seed in range(5):
        z = forward(cfg, init_params(cfg, 1, seed), ds.graph, None, ds.features.values)
        same = (z[pos[:, 0]] * z[pos[:, 1]]).sum(1)
        crossed = (z[pos[:, 0]] * z[p[pos[:, 1]]]).sum(1)
        assert np.allclose(same, crossed, rtol=0, atol=1e-12)


def test_records_sorted_and_schema(mirror_run):
    text = records_csv(mirror_run.records)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    keys = [(r[2], int(r[4]), int(r[3])) for r in rows[1:]]
    assert keys == sorted(keys) and len(keys) == 2 * 3 * 2


def test_aggregate_recomputable_from_csv(mirror_run, tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(records_csv(mirror_run.records))
    back = read_records_csv(path)
    for row in aggregate_runs(back):
        vals = [r.metric_value for r in back if r.variant == row["variant"]]
        assert row["n"] == len(vals)
        assert row["mean"] == pytest.approx(np.mean(vals), abs=0)
        assert row["std"] == pytest.approx(np.std(vals, ddof=1), rel=1e-12)
        assert row["min"] == min(vals) and row["max"] == max(vals)


def test_summary_column_order_stable(mirror_run):
    a = summary_csv(aggregate_runs(mirror_run.records)).splitlines()[0]
    b = summary_csv(aggregate_runs(list(reversed(mirror_run.records)))).splitlines()[0]
    assert a == b == "dataset,task,variant,metric_name,n,mean,std,min,max,n_diverged"


def test_rerun_is_bit_identical(mirror_run):
    again = run_experiment(mirror_config())
    strip = lambda recs: [r.row()[:-1] for r in recs]
    assert strip(again.records) == strip(mirror_run.records)


def test_gir_all_anchors_equals_sage_end_to_end():
    base = {"dataset": {"synthetic": "europe"}, "variants": ["GIR"], "epochs": 5, "seeds": [0], "split_seeds": [0]}
    ds = make_dataset("europe")
    cfg_all = ExperimentConfig.from_dict(dict(base, anchor_nodes=list(range(ds.graph.n)), mode="ego"))
    r_all = run_experiment(cfg_all)
    # the same run through an explicit all-edges schedule
    from gir.models import Hyper, model_inputs, train_model
    from gir.schedule import all_edges_schedule
    split = split_dataset(ds.task, 0)
    cfg = ModelConfig("GIR", 3, cfg_all.hidden, ds.task.num_classes)
    res = train_model(cfg, ds.graph, all_edges_schedule(ds.graph, 3), ds.task, split, Hyper(epochs=5),
                      model_inputs(cfg, ds.features))
    assert r_all.records[0].metric_value == res.best["test"]


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"dataset": {"synthetic": "email"}, "seeds": []})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"dataset": {"edges": str(tmp_path / "missing.txt"), "task": "lp"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"dataset": {"synthetic": "email"}, "bogus": 1})
    cfg = ExperimentConfig.from_dict({"dataset": {"synthetic": "europe"}})
    assert (cfg.hidden, cfg.anchors, cfg.anchor_sets) == (16, 8, 4)
    assert (len(cfg.seeds), len(cfg.split_seeds)) == (20, 5)
    assert (len(cfg.desk().seeds), len(cfg.desk().split_seeds)) == (5, 3)


def test_link_prediction_leakage_guard():
    ds = make_dataset("cele")
    split = split_dataset(ds.task, 0)
    g = message_graph(ds, split)
    held = np.concatenate([split.val, split.test])
    for u, v in ds.task.pairs[held][ds.task.pair_labels[held] == 1]:
        assert not g.has_edge(int(u), int(v))
    for u, v in ds.task.pairs[split.train][ds.task.pair_labels[split.train] == 1]:
        assert g.has_edge(int(u), int(v))


def test_file_dataset_round_trip(tmp_path):
    ds = make_dataset("cele")
    entry = write_dataset(tmp_path, ds)
    cfg = ExperimentConfig.from_dict({"dataset": entry, "variants": ["GIR-A"], "epochs": 3, "seeds": [0],
                                      "split_seeds": [0]})
    rec = run_experiment(cfg).records[0]
    assert rec.task == "lp" and 0 <= rec.metric_value <= 1


def test_benchmark_sizes():
    for name, spec in BENCHMARKS.items():
        ds = make_dataset(name)
        stored = spec.edges * (2 if spec.undirected else 1)
        assert ds.graph.n == spec.n and ds.graph.num_edges == stored


def test_fusion_runner_records():
    cfg = FusionConfig.from_dict({"dataset": {"two_view": {"cliques": 20}}, "variants": ["GCN-GIR"],
                                  "layers": 2, "hidden": 8, "anchors": 4, "epochs": 10, "seeds": [0]})
    names = {r.metric_name for r in run_fusion(cfg).records}
    assert {"accuracy", "ec", "expert0_accuracy", "expert1_accuracy"} <= names


# ---------------------------------------------------------------- command line

def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_cli_certify(tmp_path, capsys):
    assert main(["certify", "--random", "60", "--seed", "2"]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["ok"] and verdict["mismatches"] == 0
    out = tmp_path / "d.csv"
    assert main(["certify", "--distances", "per-anchor", "--random", "40", "--anchors", "4", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0].startswith("node,anchor_")


def test_cli_certify_failure_is_nonzero(tmp_path, capsys):
    edges = tmp_path / "p.edges"
    edges.write_text("0 1\n1 0\n1 2\n2 1\n2 3\n3 2\n")
    code = main(["certify", "--distances", "per-anchor", "--edges", str(edges), "--anchors", "2", "--mode", "bfs-shell"])
    err = capsys.readouterr().err.strip().splitlines()
    assert code == 1
    assert json.loads(err[-1])["error"] == "CertificateFailed"
    assert any(line.startswith("node=") for line in err)


def test_cli_bad_config(tmp_path, capsys):
    path = write_json(tmp_path / "c.json", {"dataset": {"synthetic": "email"}, "seeds": []})
    assert main(["sweep", "--config", path]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_cli_sweep_is_byte_identical(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"dataset": {"synthetic": "europe"}, "variants": ["GCN", "GIR-A"],
                                           "epochs": 8, "seeds": [0, 1], "split_seeds": [0]})
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.csv"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        outs.append([line.rsplit(",", 1)[0] for line in out.read_text().splitlines()])
        assert (tmp_path / f"r{i}.summary.csv").exists()
    assert outs[0] == outs[1] and len(outs[0]) == 5


def test_cli_train_exports(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"dataset": {"synthetic": "europe"}, "variants": ["GIR"],
                                           "epochs": 3, "seeds": [4], "split_seeds": [0]})
    emb, ck = tmp_path / "z.csv", tmp_path / "p.json"
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r.csv"), "--embeddings", str(emb),
                 "--checkpoint", str(ck), "--mode", "bfs-shell"]) == 0
    rows = emb.read_text().splitlines()
    assert rows[0].startswith("node,z0") and rows[1].startswith("0,") and len(rows) == 400
    assert "l1.W" in json.loads(ck.read_text())["params"]


def test_cli_ec(tmp_path, capsys):
    (tmp_path / "y.csv").write_text("node,label\n0,1\n1,1\n2,1\n3,1\n")
    (tmp_path / "a.csv").write_text("node,prediction\n0,1\n1,1\n2,0\n3,0\n")
    (tmp_path / "b.csv").write_text("node,prediction\n3,0\n2,1\n1,0\n0,0\n")
    assert main(["ec", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"), "--labels", str(tmp_path / "y.csv")]) == 0
    rows = dict(line.split(",") for line in capsys.readouterr().out.splitlines()[1:])
    assert abs(float(rows["ec"]) - 11 / 15) < 1e-12


def test_cli_fuse(tmp_path):
    cfg = write_json(tmp_path / "f.json", {"dataset": {"two_view": {"cliques": 20}}, "layers": 2, "hidden": 8,
                                           "anchors": 4, "epochs": 5, "seeds": [0]})
    out = tmp_path / "f.csv"
    assert main(["fuse", "--config", cfg, "--variants", "GCN-GIR-J", "--out", str(out)]) == 0
    assert "GCN-GIR-J" in out.read_text()

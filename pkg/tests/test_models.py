import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import digraphs
from gir import ndiff as nd
from gir.anchors import AnchorPartition, AnchorSet, partition_anchors, select_anchors
from gir.datasets import BENCHMARKS, make_dataset
from gir.graph import (
    NODE_TASK, LabeledTask, build_graph, make_mirror_graph, ones_features, random_digraph,
    random_tree_parents, split_dataset,
)
from gir.models import (
    Hyper, ModelConfig, ModelError, TrainingDiverged, augment_features, forward, init_params, model_inputs,
    pair_score, sage_gir_layer, train_model,
)
from gir.schedule import all_edges_schedule, build_schedule


def test_augment_examples():
    x = ones_features(3)
    assert augment_features(x, "anchor-onehot", [2])[:, 1].tolist() == [0, 0, 1]
    assert np.array_equal(augment_features(x, "node-onehot")[:, 1:], np.eye(3))
    assert augment_features(ones_features(920), "anchor-onehot", range(64)).shape == (920, 65)
    with pytest.raises(ModelError):
        augment_features(x, "anchor-onehot")


def test_anchor_onehot_follows_selection_order():
    out = augment_features(np.zeros((4, 1)), "anchor-onehot", [3, 1])
    assert out[3, 1] == 1 and out[1, 2] == 1 and out[:, 1:].sum() == 2


def test_pair_score_examples():
    assert pair_score([1, 0], [1, 0]) == 1
    assert pair_score([1, 0], [0, 1]) == 0
    assert pair_score([1, 2], [3, -1]) == 1
    with pytest.raises(ModelError):
        pair_score([1], [1, 2])


def test_gcn_regular_graph_rows_identical():
    g = build_graph([(i, (i + 1) % 7) for i in range(7)], 7, True)
    cfg = ModelConfig("GCN", 2, 5, 3)
    z = forward(cfg, init_params(cfg, 1, 0), g, None, np.ones((7, 1)))
    assert np.allclose(z, z[0])


def test_gcn_single_node_linear_identity():
    g = build_graph([], 1)
    cfg = ModelConfig("GCN", 1, 2, 2)
    x = np.array([[0.7, -1.3]])
    z = forward(cfg, {"l1.W": np.eye(2), "l1.b": np.zeros((1, 2))}, g, None, x)
    assert np.array_equal(z, x)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 15), st.integers(0, 1000), st.integers(0, 1000))
def test_mirror_symmetry_gcn_and_symmetric_gir(k, tree_seed, param_seed):
    g, p = make_mirror_graph(random_tree_parents(k, tree_seed))
    x = np.ones((g.n, 1))
    for variant, sched in (("GCN", None), ("GIR", build_schedule(g, [0], 3))):
        cfg = ModelConfig(variant, 3, 8, 4)
        z = forward(cfg, init_params(cfg, 1, param_seed), g, sched, x)
        assert np.allclose(z, z[p], atol=1e-12)


def test_mirror_asymmetric_anchor_breaks_symmetry():
    g, p = make_mirror_graph(random_tree_parents(6, 0))
    cfg = ModelConfig("GIR", 3, 8, 4)
    z = forward(cfg, init_params(cfg, 1, 0), g, build_schedule(g, [1], 3), np.ones((g.n, 1)))
    assert np.abs(z - z[p]).max() > 1e-3


def test_sage_layer_without_sources_is_mlp():
    rng = np.random.default_rng(0)
    tape = nd.Tape()
    h = tape.const(rng.normal(size=(4, 3)))
    W, b = tape.const(rng.normal(size=(6, 2))), tape.const(rng.normal(size=(1, 2)))
    out = sage_gir_layer(h, [[], [], [], []], W, b)
    expect = np.maximum(np.concatenate([h.value, np.zeros((4, 3))], 1) @ W.value + b.value, 0)
    assert np.allclose(out.value, expect)


def test_sage_layer_single_source_mean_is_that_row():
    tape = nd.Tape()
    h = tape.const(np.arange(8.0).reshape(4, 2))
    W = tape.const(np.concatenate([np.zeros((2, 2)), np.eye(2)]))
    out = sage_gir_layer(h, [[], [3], [], []], W, tape.const(np.zeros((1, 2))), activation=False)
    assert out.value[1].tolist() == h.value[3].tolist()
    assert out.value[0].tolist() == [0.0, 0.0]


@settings(max_examples=30, deadline=None)
@given(digraphs(min_n=2, max_n=20), st.integers(0, 100))
def test_gir_all_anchors_equals_sage(g, seed):
    cfg = ModelConfig("GIR", 3, 6, 3)
    x = np.random.default_rng(seed).normal(size=(g.n, 2))
    params = init_params(cfg, 2, seed)
    ego = forward(cfg, params, g, build_schedule(g, range(g.n), 3, "ego"), x)
    assert np.array_equal(ego, forward(cfg, params, g, all_edges_schedule(g, 3), x))


def test_mix_with_one_set_equals_gir():
    g = random_digraph(30, 3, 0)
    anchors = select_anchors(g, 4)
    part = AnchorPartition((AnchorSet(anchors.nodes),))
    mix = ModelConfig("GIR-MIX", 3, 8, 5, part)
    gir = ModelConfig("GIR", 3, 8, 5)
    params = init_params(mix, 1, 3)
    renamed = {k.replace(".s0", ""): v for k, v in params.items()}
    x = np.ones((g.n, 1))
    sched = build_schedule(g, anchors.nodes, 3)
    assert np.array_equal(forward(mix, params, g, [sched], x), forward(gir, renamed, g, sched, x))


def test_mix_europe_widths():
    ds = make_dataset("europe")
    spec = BENCHMARKS["europe"]
    anchors = select_anchors(ds.graph, spec.anchors)
    part = partition_anchors(anchors, spec.anchor_sets)
    cfg = ModelConfig("GIR-MIX", 3, spec.hidden, 4, part)
    params = init_params(cfg, 1, 0)
    assert [params[f"l1.s{j}.W"].shape[1] for j in range(4)] == [4, 4, 4, 4]
    assert params["l2.s0.W"].shape == (2 * 16, 4)
    scheds = [build_schedule(ds.graph, s.nodes, 3) for s in part]
    tape = nd.Tape()
    out = forward(cfg, params, ds.graph, scheds, np.ones((ds.graph.n, 1)), tape)
    hidden = [t for t in tape.nodes if t.grad_fn is not None and t.shape == (ds.graph.n, 16)]
    assert hidden and out.shape == (ds.graph.n, 4)


def test_mix_hidden_divisibility():
    part = partition_anchors(AnchorSet(tuple(range(6))), 3)
    with pytest.raises(ModelError):
        ModelConfig("GIR-MIX", 2, 16, 2, part)


def test_unreachable_node_depends_only_on_itself():
    g = build_graph([(0, 1), (1, 2), (2, 0), (3, 4)], 6)
    cfg = ModelConfig("GIR", 3, 6, 3)
    params = init_params(cfg, 2, 0)
    sched = build_schedule(g, [0], 3)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 2))
    base = forward(cfg, params, g, sched, x)
    for v in (3, 4, 5):
        y = rng.normal(size=(6, 2))
        y[v] = x[v]
        assert np.array_equal(forward(cfg, params, g, sched, y)[v], base[v])


def test_config_schedule_mismatch():
    g = random_digraph(10, 2, 0)
    cfg = ModelConfig("GIR", 3, 4, 2)
    with pytest.raises(ModelError):
        forward(cfg, init_params(cfg, 1, 0), g, build_schedule(g, [0], 2), np.ones((10, 1)))
    with pytest.raises(ModelError):
        forward(cfg, init_params(cfg, 1, 0), g, None, np.ones((10, 1)))


def node_fixture():
    ds = make_dataset("europe")
    split = split_dataset(ds.task, 0)
    cfg = ModelConfig("GIR-A", 3, 16, ds.task.num_classes)
    anchors = select_anchors(ds.graph, 8).nodes
    return ds, split, cfg, build_schedule(ds.graph, anchors, 3), model_inputs(cfg, ds.features, anchors)


def test_lr_zero_keeps_initial_params():
    ds, split, cfg, sched, x = node_fixture()
    res = train_model(cfg, ds.graph, sched, ds.task, split, Hyper(lr=0.0, epochs=5, seed=2), x)
    init = init_params(cfg, x.shape[1], 2)
    assert all(np.array_equal(res.params[k], init[k]) for k in init)
    assert len({t["loss"] for t in res.trace}) == 1


def test_training_is_deterministic():
    ds, split, cfg, sched, x = node_fixture()
    a = train_model(cfg, ds.graph, sched, ds.task, split, Hyper(epochs=15, seed=1), x)
    b = train_model(cfg, ds.graph, sched, ds.task, split, Hyper(epochs=15, seed=1), x)
    assert a.trace == b.trace
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_early_stopping_and_best_epoch():
    ds, split, cfg, sched, x = node_fixture()
    res = train_model(cfg, ds.graph, sched, ds.task, split, Hyper(epochs=200, patience=5, seed=0), x)
    vals = [t["val"] for t in res.trace]
    assert res.best["val"] == max(vals)
    assert res.best_epoch == vals.index(max(vals))
    assert res.epochs_run - res.best_epoch <= 5 or res.epochs_run == 200


@pytest.mark.parametrize("name", list(BENCHMARKS))
def test_best_epoch_loss_not_above_initial(name):
    ds = make_dataset(name)
    split = split_dataset(ds.task, 0)
    out_dim = 8 if ds.task.is_pair_task else ds.task.num_classes
    cfg = ModelConfig("GIR-A", 2, 8, out_dim)
    anchors = select_anchors(ds.graph, 8).nodes
    res = train_model(cfg, ds.graph, build_schedule(ds.graph, anchors, 2), ds.task, split,
                      Hyper(epochs=20, patience=20), model_inputs(cfg, ds.features, anchors))
    assert res.best["loss"] <= res.trace[0]["loss"]


def test_divergence_is_reported():
    g = build_graph([(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 5, True)
    task = LabeledTask(NODE_TASK, node_labels=np.array([0, 1, 0, 1, 0]))
    cfg = ModelConfig("GCN", 2, 4, 2)
    with np.errstate(all="ignore"), pytest.raises(TrainingDiverged) as info:
        train_model(cfg, g, None, task, split_dataset(task, 0), Hyper(lr=1e300, epochs=5), np.ones((5, 1)))
    assert info.value.epoch >= 1

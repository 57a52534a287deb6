"""Synthetic graphs and tasks.

The public position-aware benchmarks cannot be fetched here, so each one has
a planted-community stand-in with the same node count, edge count and task
type. Edge counts of undirected graphs are read as undirected edges, each
stored in both directions. Labels depend on community membership, i.e. on where a
node sits in the graph rather than on its (placeholder) attributes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import (
    LINK_TASK, NODE_TASK, PAIR_TASK, Graph, LabeledTask, NodeFeatures, build_graph,
    make_mirror_graph, ones_features, random_tree_parents, sample_negative_pairs, write_edge_list,
    write_labels,
)


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    n: int
    edges: int
    task: str
    undirected: bool
    blocks: int
    p_intra: float
    hidden: int
    anchors: int
    anchor_sets: int


# node/edge counts, task type and per-dataset model sizes of the original benchmarks
BENCHMARKS = {
    "email": DatasetSpec("email", 920, 14402, PAIR_TASK, False, 10, 0.8, 32, 64, 8),
    "europe": DatasetSpec("europe", 399, 5995, NODE_TASK, True, 4, 0.85, 16, 8, 4),
    "usa": DatasetSpec("usa", 1190, 13599, NODE_TASK, True, 4, 0.85, 32, 64, 8),
    "cele": DatasetSpec("cele", 297, 2148, LINK_TASK, False, 6, 0.8, 16, 16, 8),
    "ns": DatasetSpec("ns", 1461, 2742, LINK_TASK, True, 120, 0.95, 32, 64, 8),
    "pb": DatasetSpec("pb", 1222, 16714, LINK_TASK, False, 2, 0.9, 32, 64, 8),
}


@dataclass(frozen=True)
class Dataset:
    name: str
    graph: Graph
    features: NodeFeatures
    task: LabeledTask
    undirected: bool
    communities: np.ndarray | None = None


def planted_partition(n: int, n_edges: int, blocks: int, p_intra: float, seed: int,
                      undirected: bool = False) -> tuple[Graph, np.ndarray]:
    """Degree-heterogeneous planted partition graph with exactly ``n_edges`` edges.

    Undirected graphs get ``n_edges`` distinct undirected edges, stored in both
    directions.
    """
    rng = np.random.default_rng(seed)
    comm = np.sort(rng.integers(0, blocks, size=n))
    comm[:blocks] = np.arange(blocks)  # no empty block
    comm = comm[rng.permutation(n)]
    weight = rng.pareto(2.5, size=n) + 1.0
    members = [np.flatnonzero(comm == c) for c in range(blocks)]
    target = n_edges
    keys: set[int] = set()
    p_all = weight / weight.sum()
    while len(keys) < target:
        batch = target - len(keys)
        us = rng.choice(n, size=batch, p=p_all)
        intra = rng.random(batch) < p_intra
        for u, inside in zip(us, intra):
            if inside or blocks == 1:
                pool = members[comm[u]]
            else:
                pool = np.flatnonzero(comm != comm[u])
            if pool.size < 2 and inside:
                continue
            w = weight[pool]
            v = int(pool[np.searchsorted(np.cumsum(w), rng.random() * w.sum())])
            if v == u:
                continue
            a, b = (min(u, v), max(u, v)) if undirected else (u, v)
            keys.add(int(a) * n + int(b))
            if len(keys) == target:
                break
    arr = np.fromiter(sorted(keys), dtype=np.int64, count=len(keys))
    g = build_graph(np.stack([arr // n, arr % n], axis=1), n, undirected_as_bidirected=undirected)
    return g, comm


def positive_pairs(g: Graph, undirected: bool) -> np.ndarray:
    e = g.edges()
    return e[e[:, 0] < e[:, 1]] if undirected else e


def link_prediction_task(g: Graph, undirected: bool, seed: int) -> LabeledTask:
    """Graph edges as positives, an equal number of sampled non-edges as negatives."""
    pos = positive_pairs(g, undirected)
    neg = sample_negative_pairs(g, len(pos), seed)
    if undirected:
        neg = np.sort(neg, axis=1)
        _, keep = np.unique(neg, axis=0, return_index=True)
        neg = neg[np.sort(keep)]
    pairs = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos), np.int64), np.zeros(len(neg), np.int64)])
    return LabeledTask(LINK_TASK, pairs=pairs, pair_labels=labels)


def community_pair_task(comm: np.ndarray, count: int, seed: int) -> LabeledTask:
    """Balanced node pairs labelled 1 when both ends share a community."""
    rng = np.random.default_rng(seed)
    n = comm.shape[0]
    want = count // 2
    same, diff = set(), set()
    while len(same) < want or len(diff) < want:
        u, v = (int(t) for t in rng.integers(0, n, size=2))
        if u == v:
            continue
        bucket = same if comm[u] == comm[v] else diff
        if len(bucket) < want:
            bucket.add((min(u, v), max(u, v)))
    pairs = np.array(sorted(same) + sorted(diff), dtype=np.int64)
    labels = np.array([1] * len(same) + [0] * len(diff), dtype=np.int64)
    return LabeledTask(PAIR_TASK, pairs=pairs, pair_labels=labels)


def make_dataset(name: str, seed: int = 0) -> Dataset:
    spec = BENCHMARKS[name]
    g, comm = planted_partition(spec.n, spec.edges, spec.blocks, spec.p_intra, seed, spec.undirected)
    if spec.task == NODE_TASK:
        task = LabeledTask(NODE_TASK, node_labels=comm.astype(np.int64))
    elif spec.task == PAIR_TASK:
        task = community_pair_task(comm, 2000, seed + 1)
    else:
        task = link_prediction_task(g, spec.undirected, seed + 1)
    return Dataset(name, g, ones_features(g.n), task, spec.undirected, comm)


def write_dataset(directory: str | Path, ds: Dataset) -> dict:
    """Write edge and label files; returns the matching config ``dataset`` entry."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edges = directory / f"{ds.name}.edges"
    write_edge_list(edges, ds.graph, header=f"synthetic stand-in for {ds.name}")
    entry = {"name": ds.name, "edges": str(edges), "nodes": ds.graph.n,
             "undirected": False, "task": ds.task.kind}
    if ds.task.kind != LINK_TASK:
        labels = directory / f"{ds.name}.labels"
        write_labels(labels, ds.task)
        entry["labels"] = str(labels)
    return entry


def two_view_fixture(seed: int = 0, cliques: int = 80, size: int = 10, noise: float = 2.0) -> Dataset:
    """Binary node classification whose signal is split across two views.

    Nodes live in disjoint cliques, each with a hidden bit. Half the nodes
    ("structural") carry the clique bit as label and only a noisy copy of it
    as attribute, so the label is recoverable by averaging over the clique.
    The other half ("attribute") carry a random label written exactly into
    their own attribute; averaging over the clique washes it out. Column 0 of
    the features is the exact attribute (0 for structural nodes) and column 1
    the noisy clique signal.
    """
    rng = np.random.default_rng(seed)
    n = cliques * size
    clique = np.repeat(np.arange(cliques), size)
    bit = rng.integers(0, 2, size=cliques)[clique]
    structural = rng.random(n) < 0.5
    labels = np.where(structural, bit, rng.integers(0, 2, size=n))
    exact = np.where(structural, 0.0, 2.0 * labels - 1.0)
    signal = (2.0 * bit - 1.0) + noise * rng.standard_normal(n)
    edges = [(c * size + i, c * size + j) for c in range(cliques)
             for i in range(size) for j in range(i + 1, size)]
    g = build_graph(edges, n, undirected_as_bidirected=True)
    x = NodeFeatures(np.stack([exact, signal], axis=1))
    return Dataset("two-view", g, x, LabeledTask(NODE_TASK, node_labels=labels.astype(np.int64)), True,
                   structural.astype(np.int64))


def mirror_pair_dataset(arm_size: int = 12, seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Mirror fixture with pairs of non-bridge nodes labelled 1 when on the same side."""
    g, pairing = make_mirror_graph(random_tree_parents(arm_size, seed))
    side = np.zeros(g.n, dtype=np.int64)
    side[arm_size + 1:] = 1
    nodes = np.arange(1, g.n)
    iu, iv = np.triu_indices(len(nodes), k=1)
    pairs = np.stack([nodes[iu], nodes[iv]], axis=1)
    labels = (side[pairs[:, 0]] == side[pairs[:, 1]]).astype(np.int64)
    task = LabeledTask(PAIR_TASK, pairs=pairs, pair_labels=labels)
    return Dataset("mirror", g, ones_features(g.n), task, True, side), pairing

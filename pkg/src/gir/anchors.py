"""Anchor selection heuristics and anchor-set partitioning."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph

STRATEGIES = ("greedy-cover", "top-degree", "random")


class AnchorError(ValueError):
    pass


@dataclass(frozen=True)
class AnchorSet:
    nodes: tuple[int, ...]
    strategy: str = "given"
    seed: int | None = None

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise AnchorError("duplicate anchors")

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.nodes, dtype=np.int64)


@dataclass(frozen=True)
class AnchorPartition:
    sets: tuple[AnchorSet, ...]

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)


def _total_degree(g: Graph) -> np.ndarray:
    return g.out_degree() + g.in_degree()


def select_anchors(g: Graph, m: int, strategy: str = "greedy-cover", seed: int = 0) -> AnchorSet:
    """Pick ``m`` anchors.

    greedy-cover favours central nodes that are spread out: take the
    uncovered node of largest total degree (smallest id on ties), mark it and
    its undirected 1-hop neighbourhood covered, and reset coverage once
    everything is covered.
    """
    if m <= 0:
        raise AnchorError("need at least one anchor")
    if m > g.n:
        raise AnchorError(f"cannot pick {m} anchors from {g.n} nodes")
    deg = _total_degree(g)
    # stable sort on -degree keeps smaller ids first among ties
    by_degree = np.argsort(-deg, kind="stable")
    if strategy == "top-degree":
        picked = [int(v) for v in by_degree[:m]]
    elif strategy == "random":
        rng = np.random.default_rng(seed)
        picked = [int(v) for v in rng.choice(g.n, size=m, replace=False)]
    elif strategy == "greedy-cover":
        chosen = np.zeros(g.n, dtype=bool)
        covered = np.zeros(g.n, dtype=bool)
        picked = []
        while len(picked) < m:
            if covered.all():
                covered = chosen.copy()
            cand = by_degree[~covered[by_degree]]
            v = int(cand[0])
            picked.append(v)
            chosen[v] = True
            covered[v] = True
            covered[g.out_neighbors(v)] = True
            covered[g.in_neighbors(v)] = True
    else:
        raise AnchorError(f"unknown strategy {strategy!r}")
    return AnchorSet(tuple(picked), strategy, seed)


def partition_anchors(anchors: AnchorSet, k: int) -> AnchorPartition:
    """Split the ordered anchors into ``k`` contiguous equal chunks of size >= 2."""
    if k <= 0 or len(anchors) % k:
        raise AnchorError(f"{len(anchors)} anchors cannot be split into {k} equal sets")
    size = len(anchors) // k
    if size < 2:
        raise AnchorError("each anchor set needs more than one node")
    nodes = anchors.nodes
    return AnchorPartition(tuple(
        AnchorSet(nodes[i * size:(i + 1) * size], anchors.strategy, anchors.seed)
        for i in range(k)
    ))


def save_anchors(path: str | Path, anchors: AnchorSet) -> None:
    Path(path).write_text("".join(f"{v}\n" for v in anchors.nodes), encoding="utf-8")


def load_anchors(path: str | Path, strategy: str = "file") -> AnchorSet:
    lines = Path(path).read_text(encoding="utf-8").split()
    return AnchorSet(tuple(int(t) for t in lines), strategy)

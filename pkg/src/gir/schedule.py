"""Per-layer message sources and active edges grown from the anchors.

Three frontier semantics are available:

``literal``
    SRC_1 is the anchor set and SRC_{l+1} = successors(SRC_l). Sources may be
    revisited on cycles.
``bfs-shell``
    SRC_l = {v : d(v, anchors) = l - 1}; each node is a source exactly once,
    when messages first arrive along a shortest path.
``ego``
    SRC_l = {v : d(v, anchors) <= l - 1}; every node already reached keeps
    sending, so layer l sees the (l-1)-hop ego graph of the anchors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .graph import Graph, multi_source_bfs

MODES = ("literal", "bfs-shell", "ego")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Schedule:
    anchors: tuple[int, ...]
    mode: str
    sources: tuple[np.ndarray, ...]
    edges: tuple[np.ndarray, ...]
    n: int
    _ops: dict = field(default_factory=dict, repr=False)

    @property
    def layers(self) -> int:
        return len(self.sources)

    def active_sources(self, layer: int) -> list[np.ndarray]:
        """Per target node, its in-neighbours that send on ``layer`` (1-based)."""
        e = self.edges[layer - 1]
        order = np.argsort(e[:, 1], kind="stable")
        e = e[order]
        cuts = np.searchsorted(e[:, 1], np.arange(self.n + 1))
        return [e[cuts[v]:cuts[v + 1], 0] for v in range(self.n)]

    def mean_operator(self, layer: int) -> sp.csr_matrix:
        """Sparse (n, n) matrix averaging active in-neighbour rows; empty rows stay zero."""
        if layer not in self._ops:
            e = self.edges[layer - 1]
            self._ops[layer] = mean_matrix(self.n, e[:, 1], e[:, 0])
        return self._ops[layer]

    def dump(self) -> str:
        lines = [f"mode {self.mode}", f"layers {self.layers}",
                 "anchors " + " ".join(map(str, self.anchors))]
        for l, (src, e) in enumerate(zip(self.sources, self.edges), 1):
            lines.append(f"layer {l} sources {len(src)} edges {len(e)} ids "
                         + " ".join(map(str, src.tolist())))
        return "\n".join(lines) + "\n"


def mean_matrix(n: int, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    counts = np.bincount(rows, minlength=n).astype(float)
    data = 1.0 / counts[rows] if rows.size else np.zeros(0)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def _edges_from(g: Graph, src: np.ndarray) -> np.ndarray:
    if src.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    deg = g.out_degree()[src]
    starts = g.out_offsets[src]
    u = np.repeat(src, deg)
    idx = np.repeat(starts - (np.cumsum(deg) - deg), deg) + np.arange(deg.sum())
    return np.stack([u, g.out_indices[idx]], axis=1).astype(np.int64)


def build_schedule(g: Graph, anchors: Iterable[int], layers: int, mode: str = "literal") -> Schedule:
    anchors = tuple(int(a) for a in anchors)
    if layers < 1:
        raise ScheduleError("need at least one layer")
    if not anchors:
        raise ScheduleError("anchor set must be nonempty")
    if min(anchors) < 0 or max(anchors) >= g.n:
        raise ScheduleError("anchor id out of range")
    if mode not in MODES:
        raise ScheduleError(f"unknown schedule mode {mode!r}")

    sources = []
    if mode == "literal":
        src = np.unique(np.asarray(anchors, dtype=np.int64))
        for _ in range(layers):
            sources.append(src)
            nxt = _edges_from(g, src)[:, 1]
            src = np.unique(nxt)
    else:
        dist = multi_source_bfs(g, anchors).hops()
        for l in range(1, layers + 1):
            if mode == "bfs-shell":
                sources.append(np.flatnonzero(dist == l - 1))
            else:
                sources.append(np.flatnonzero((dist >= 0) & (dist <= l - 1)))
    edges = tuple(_edges_from(g, s) for s in sources)
    return Schedule(anchors, mode, tuple(sources), edges, g.n)


def all_edges_schedule(g: Graph, layers: int) -> Schedule:
    """Every edge active on every layer (plain message passing).

    With all nodes as anchors the ego schedule is identical; the literal one
    only when every node has an in-neighbour.
    """
    if layers < 1:
        raise ScheduleError("need at least one layer")
    nodes = np.arange(g.n)
    e = g.edges()
    return Schedule(tuple(range(g.n)), "all-edges", (nodes,) * layers, (e,) * layers, g.n)


def coverage_report(schedule: Schedule, g: Graph) -> tuple[set[int], set[int]]:
    """Nodes touched by the schedule (anchors or targets of an active edge) and the rest."""
    reached = np.zeros(g.n, dtype=bool)
    reached[list(schedule.anchors)] = True
    for e in schedule.edges:
        reached[e[:, 1]] = True
    return set(np.flatnonzero(reached).tolist()), set(np.flatnonzero(~reached).tolist())

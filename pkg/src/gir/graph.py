"""Graph storage, file ingestion, synthetic generators, splits and the BFS oracle."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NODE_TASK = "node-classification"
LINK_TASK = "link-prediction"
PAIR_TASK = "node-pair-classification"
TASK_KINDS = (NODE_TASK, LINK_TASK, PAIR_TASK)

# short names used in configs and CSV output
TASK_ALIASES = {"nc": NODE_TASK, "lp": LINK_TASK, "npc": PAIR_TASK}


class GraphError(ValueError):
    pass


class _Unreachable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNREACHABLE"

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, dst[order].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed graph in compressed adjacency form.

    ``out_offsets/out_indices`` hold successor lists and ``in_offsets/in_indices``
    hold in-neighbour lists; both sorted ascending per node.
    """

    n: int
    out_offsets: np.ndarray
    out_indices: np.ndarray
    in_offsets: np.ndarray
    in_indices: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_edges(self) -> int:
        return int(self.out_indices.shape[0])

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.out_indices[self.out_offsets[u]:self.out_offsets[u + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.in_indices[self.in_offsets[v]:self.in_offsets[v + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_offsets)

    def edges(self) -> np.ndarray:
        """All edges as an (m, 2) array sorted by (src, dst)."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree())
        return np.stack([src, self.out_indices], axis=1)

    def edge_keys(self) -> np.ndarray:
        # sorted, since edges() is sorted by (src, dst)
        if "keys" not in self._cache:
            e = self.edges()
            self._cache["keys"] = e[:, 0] * self.n + e[:, 1]
        return self._cache["keys"]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.out_neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < nbrs.shape[0] and nbrs[i] == v)

    def undirected_neighbors(self, v: int) -> np.ndarray:
        return np.union1d(self.out_neighbors(v), self.in_neighbors(v))

    def same_structure(self, other: "Graph") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.out_offsets, other.out_offsets)
            and np.array_equal(self.out_indices, other.out_indices)
            and np.array_equal(self.in_offsets, other.in_offsets)
            and np.array_equal(self.in_indices, other.in_indices)
        )


def build_graph(edges: Iterable[Sequence[int]] | np.ndarray, n: int,
                undirected_as_bidirected: bool = False) -> Graph:
    """Build a canonical graph; self-loops are dropped and duplicates collapsed."""
    if n <= 0:
        raise GraphError("graph must have at least one node")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphError("edges must be pairs")
    if e.size and (e.min() < 0 or e.max() >= n):
        raise GraphError(f"edge endpoint out of range [0, {n})")
    if undirected_as_bidirected:
        e = np.concatenate([e, e[:, ::-1]], axis=0)
    e = e[e[:, 0] != e[:, 1]]
    keys = np.unique(e[:, 0] * n + e[:, 1])
    src, dst = keys // n, keys % n
    out_offsets, out_indices = _csr(n, src, dst)
    in_offsets, in_indices = _csr(n, dst, src)
    return Graph(n, out_offsets, out_indices, in_offsets, in_indices)


def read_edge_list(path: str | Path, n: int | None = None,
                   undirected_as_bidirected: bool = False) -> Graph:
    """Read a whitespace separated edge list; '#' lines are comments."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphError(f"{path}:{lineno}: expected two node ids")
            pairs.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(p) for p in pairs), default=-1)
    return build_graph(pairs, n, undirected_as_bidirected)


def write_edge_list(path: str | Path, g: Graph, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"# nodes {g.n}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


@dataclass(frozen=True)
class NodeFeatures:
    values: np.ndarray
    placeholder: bool = False

    def __post_init__(self):
        if self.values.ndim != 2:
            raise GraphError("features must be a matrix")
        if not np.all(np.isfinite(self.values)):
            raise GraphError("features must be finite")

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def ones_features(n: int) -> NodeFeatures:
    return NodeFeatures(np.ones((n, 1)), placeholder=True)


@dataclass(frozen=True)
class LabeledTask:
    """Node labels for node classification, or labelled (u, v) pairs."""

    kind: str
    node_labels: np.ndarray | None = None
    pairs: np.ndarray | None = None
    pair_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise GraphError(f"unknown task kind {self.kind!r}")
        if self.kind == NODE_TASK:
            if self.node_labels is None:
                raise GraphError("node task needs labels")
            classes = np.unique(self.node_labels)
            if classes.size and not np.array_equal(classes, np.arange(classes.size)):
                raise GraphError("class labels must be contiguous from 0")
        elif self.pairs is None or self.pair_labels is None:
            raise GraphError("pair task needs pairs and labels")

    @property
    def is_pair_task(self) -> bool:
        return self.kind != NODE_TASK

    @property
    def num_items(self) -> int:
        return len(self.pairs) if self.is_pair_task else len(self.node_labels)

    @property
    def num_classes(self) -> int:
        if self.is_pair_task:
            return 2
        return int(self.node_labels.max()) + 1

    def validate(self, n: int) -> None:
        ids = self.pairs if self.is_pair_task else np.arange(len(self.node_labels))
        if self.is_pair_task and ids.size and (ids.min() < 0 or ids.max() >= n):
            raise GraphError("pair references an invalid node id")
        if not self.is_pair_task and len(self.node_labels) != n:
            raise GraphError("node label count must equal node count")


def read_labels(path: str | Path, kind: str) -> LabeledTask:
    """Read "u label" (node tasks) or "u v label" (pair tasks) lines."""
    kind = TASK_ALIASES.get(kind, kind)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([int(t) for t in line.split()])
    if kind == NODE_TASK:
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 2)
        labels = np.full(arr[:, 0].max() + 1, -1, dtype=np.int64)
        labels[arr[:, 0]] = arr[:, 1]
        if (labels < 0).any():
            raise GraphError("every node needs a label")
        return LabeledTask(kind, node_labels=labels)
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    return LabeledTask(kind, pairs=arr[:, :2], pair_labels=arr[:, 2])


def write_labels(path: str | Path, task: LabeledTask) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if task.is_pair_task:
            for (u, v), y in zip(task.pairs, task.pair_labels):
                fh.write(f"{u} {v} {y}\n")
        else:
            for u, y in enumerate(task.node_labels):
                fh.write(f"{u} {y}\n")


@dataclass(frozen=True)
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def split_dataset(task: LabeledTask, seed: int) -> SplitSpec:
    """Uniform random split: 60/20/20 for node tasks, 80/10/10 for pair tasks."""
    m = task.num_items
    if m < 5:
        raise GraphError("need at least 5 labelled items to split")
    frac = 0.1 if task.is_pair_task else 0.2
    n_hold = int(frac * m)
    perm = np.random.default_rng(seed).permutation(m)
    val = np.sort(perm[:n_hold])
    test = np.sort(perm[n_hold:2 * n_hold])
    train = np.sort(perm[2 * n_hold:])
    return SplitSpec(train, val, test, seed)


def sample_negative_pairs(g: Graph, count: int, seed: int) -> np.ndarray:
    """Uniform ordered non-edges (u != v) without repetition."""
    n = g.n
    available = n * (n - 1) - g.num_edges
    if count > available:
        raise GraphError(f"graph has only {available} non-edges, {count} requested")
    rng = np.random.default_rng(seed)
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if 2 * count > available or n * n <= 250_000:
        adj = np.zeros((n, n), dtype=bool)
        e = g.edges()
        adj[e[:, 0], e[:, 1]] = True
        np.fill_diagonal(adj, True)
        keys = np.flatnonzero(~adj.ravel())
        chosen = rng.choice(keys, size=count, replace=False)
    else:
        edge_keys = g.edge_keys()
        picked: dict[int, None] = {}
        while len(picked) < count:
            batch = rng.integers(0, n * n, size=2 * (count - len(picked)) + 16)
            for k in batch:
                k = int(k)
                u, v = divmod(k, n)
                if u == v or k in picked:
                    continue
                i = np.searchsorted(edge_keys, k)
                if i < edge_keys.shape[0] and edge_keys[i] == k:
                    continue
                picked[k] = None
                if len(picked) == count:
                    break
        chosen = np.fromiter(picked, dtype=np.int64)
    return np.stack([chosen // n, chosen % n], axis=1)


class DistanceVector:
    """Hop distances with an explicit UNREACHABLE sentinel."""

    def __init__(self, dist: np.ndarray):
        # -1 marks unreachable internally; never exposed as an integer distance
        self._dist = np.asarray(dist, dtype=np.int64)

    def __len__(self) -> int:
        return self._dist.shape[0]

    def __getitem__(self, v: int):
        d = int(self._dist[v])
        return UNREACHABLE if d < 0 else d

    def __eq__(self, other) -> bool:
        if isinstance(other, DistanceVector):
            return np.array_equal(self._dist, other._dist)
        return NotImplemented

    def __repr__(self) -> str:
        return f"DistanceVector({self.to_list()})"

    @property
    def reachable(self) -> np.ndarray:
        return self._dist >= 0

    def hops(self) -> np.ndarray:
        """Distances as a masked-free int array; only valid where ``reachable``."""
        return self._dist.copy()

    def to_list(self) -> list:
        return [self[v] for v in range(len(self))]


def multi_source_bfs(g: Graph, sources: Iterable[int]) -> DistanceVector:
    """Hop distance from the nearest source, following out-edges."""
    srcs = list(dict.fromkeys(int(s) for s in sources))
    if not srcs:
        raise GraphError("source set must be nonempty")
    dist = np.full(g.n, -1, dtype=np.int64)
    queue = deque()
    for s in srcs:
        if not 0 <= s < g.n:
            raise GraphError(f"source {s} out of range")
        dist[s] = 0
        queue.append(s)
    off, idx = g.out_offsets, g.out_indices
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in idx[off[u]:off[u + 1]]:
            if dist[v] < 0:
                dist[v] = du
                queue.append(v)
    return DistanceVector(dist)


def make_mirror_graph(arm_parents: Sequence[int]) -> tuple[Graph, np.ndarray]:
    """Two copies of a rooted tree joined through a bridge node.

    ``arm_parents[i]`` is the parent of arm node ``i`` (entry 0, the root, is
    ignored). Node 0 is the bridge, copy A occupies ids ``1..k`` and copy B
    ``k+1..2k``. Edges are bidirected. Returns the graph and the automorphism
    swapping the copies as a permutation array.
    """
    k = len(arm_parents)
    if k == 0:
        raise GraphError("arm must have at least one node")
    for i in range(1, k):
        if not 0 <= arm_parents[i] < i:
            raise GraphError("arm parents must precede children (connected tree)")
    edges = []
    for offset in (1, k + 1):
        edges.append((0, offset))
        for i in range(1, k):
            edges.append((offset + arm_parents[i], offset + i))
    g = build_graph(edges, 2 * k + 1, undirected_as_bidirected=True)
    pairing = np.empty(2 * k + 1, dtype=np.int64)
    pairing[0] = 0
    pairing[1:k + 1] = np.arange(k + 1, 2 * k + 1)
    pairing[k + 1:] = np.arange(1, k + 1)
    return g, pairing


def random_tree_parents(k: int, seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return [-1] + [int(rng.integers(0, i)) for i in range(1, k)]


def random_digraph(n: int, mean_degree: float, seed: int) -> Graph:
    """Uniform random digraph with about ``n * mean_degree`` distinct edges."""
    rng = np.random.default_rng(seed)
    m = min(int(round(n * mean_degree)), n * (n - 1))
    keys: set[int] = set()
    while len(keys) < m:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            keys.add(int(u) * n + int(v))
    arr = np.fromiter(sorted(keys), dtype=np.int64, count=len(keys))
    return build_graph(np.stack([arr // n, arr % n], axis=1), n)

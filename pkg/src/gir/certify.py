"""Exact-arithmetic versions of the distance-retaining GIR constructions.

The constructed layer functions are run directly (no learning) and their
decoded coordinates are compared against BFS. Integer state only.

The set-distance state per node is (spd, depth); the per-anchor state is an
spd vector, a reachability bit vector (one slot per anchor) and depth.
Anchors and never-reached nodes both leave spd at 0 in the set-distance
construction, so anchors are tracked with an explicit flag outside the state
vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import UNREACHABLE, DistanceVector, Graph, multi_source_bfs
from .schedule import build_schedule


class CertificationError(RuntimeError):
    pass


def fd(spd, depth, ind):
    """Distance update: keep spd unless a message arrives for the first time."""
    spd = np.asarray(spd)
    depth = np.asarray(depth)
    ind = np.asarray(ind)
    out = np.where(ind == 0, spd, np.where(spd == 0, depth + 1, spd))
    return out.item() if out.ndim == 0 else out


def to_ind(x):
    x = np.asarray(x)
    out = (x > 0).astype(np.int64)
    return out.item() if out.ndim == 0 else out


def reach_ind_update(ind_v, neighbor_inds) -> np.ndarray:
    """to_ind(own bits + mean of the active in-neighbours' bits)."""
    ind_v = np.asarray(ind_v, dtype=np.float64)
    nb = np.asarray(neighbor_inds, dtype=np.float64).reshape(-1, ind_v.shape[-1])
    mean = nb.mean(axis=0) if nb.shape[0] else np.zeros_like(ind_v)
    return to_ind(ind_v + mean)


@dataclass
class CertReport:
    kind: str  # "set" or "per-anchor"
    anchors: tuple[int, ...]
    layers: int
    mode: str
    decoded: np.ndarray  # -1 where the construction reports unreachable
    expected: np.ndarray  # -1 where BFS reports unreachable
    mismatches: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    @property
    def unreachable(self) -> np.ndarray:
        if self.decoded.ndim == 1:
            return np.flatnonzero(self.decoded < 0)
        return np.flatnonzero((self.decoded < 0).all(axis=1))

    def decoded_list(self) -> list:
        if self.decoded.ndim == 1:
            return DistanceVector(self.decoded).to_list()
        return [DistanceVector(row).to_list() for row in self.decoded]

    def to_text(self) -> str:
        """One mismatch per line; empty string when the certificate holds."""
        def fmt(d):
            return "UNREACHABLE" if d < 0 else str(int(d))
        lines = []
        for m in self.mismatches:
            if self.kind == "set":
                node, exp, got = m
                lines.append(f"node={node} expected={fmt(exp)} got={fmt(got)}")
            else:
                node, anchor, exp, got = m
                lines.append(f"node={node} anchor={anchor} expected={fmt(exp)} got={fmt(got)}")
        return "".join(line + "\n" for line in lines)


def _ops(g: Graph, anchors: Sequence[int], layers: int, mode: str):
    # one extra layer to detect a frontier that is still active after `layers`
    sched = build_schedule(g, anchors, layers + 1, mode)
    return [sched.mean_operator(l) for l in range(1, layers + 2)]


def run_set_distance(g: Graph, anchors: Sequence[int], layers: int, mode: str = "bfs-shell") -> np.ndarray:
    """Decoded set distances (-1 unreachable) from the constructed layers."""
    ops = _ops(g, anchors, layers, mode)
    is_anchor = np.zeros(g.n, dtype=bool)
    is_anchor[list(anchors)] = True
    # placeholder input attributes: a single channel of ones
    presence = np.ones(g.n)
    spd = np.zeros(g.n, dtype=np.int64)
    depth = np.zeros(g.n, dtype=np.int64)
    for l in range(1, layers + 1):
        ind = to_ind(ops[l - 1] @ presence)
        if l == 1:
            spd = fd(np.zeros(g.n, np.int64), np.zeros(g.n, np.int64), ind)
        else:
            spd = fd(spd, depth, ind)
        depth = depth + 1
        presence = depth.astype(np.float64)
    pending = to_ind(ops[layers] @ presence).astype(bool) & (spd == 0) & ~is_anchor
    if pending.any():
        raise CertificationError(
            f"{layers} layers do not cover the graph: node {int(np.flatnonzero(pending)[0])} "
            "would still receive its first message")
    return np.where(is_anchor, 0, np.where(spd > 0, spd, -1))


def run_anchor_distances(g: Graph, anchors: Sequence[int], layers: int, mode: str = "ego") -> np.ndarray:
    """Decoded (n, |anchors|) per-anchor distances (-1 unreachable).

    Layer 1 stores the anchor one-hot in the spd slots, so a column holds
    distance + 1 for reached nodes and 0 otherwise; decoding subtracts one.
    The reachability bits lag the distance by one layer, so ``layers`` must
    exceed the largest anchor eccentricity.
    """
    anchors = list(anchors)
    k = len(anchors)
    ops = _ops(g, anchors, layers, mode)
    ind = np.zeros((g.n, k), dtype=np.int64)
    ind[anchors, np.arange(k)] = 1
    spd = ind.copy()
    depth = np.ones(g.n, dtype=np.int64)
    for l in range(2, layers + 1):
        ind = to_ind(ind + ops[l - 1] @ ind)
        spd = fd(spd, depth[:, None], ind)
        depth = depth + 1
    nxt = to_ind(ind + ops[layers] @ ind)
    if np.any(nxt != ind):
        v, a = np.argwhere(nxt != ind)[0]
        raise CertificationError(
            f"{layers} layers do not cover the graph: node {int(v)} is still being "
            f"reached from anchor {anchors[a]}")
    return spd - 1


def _deep_enough(run, g: Graph, anchors, layers: int | None, mode: str) -> tuple[np.ndarray, int]:
    """Run with the given depth, or double from 2 until the construction settles."""
    if layers is not None:
        return run(g, anchors, layers, mode), layers
    layers = 2
    while True:
        try:
            return run(g, anchors, layers, mode), layers
        except CertificationError:
            if layers > 2 * g.n:
                raise
            layers *= 2


def certify_set_distance(g: Graph, anchors: Sequence[int], layers: int | None = None,
                     mode: str = "bfs-shell") -> CertReport:
    anchors = tuple(int(a) for a in anchors)
    decoded, layers = _deep_enough(run_set_distance, g, anchors, layers, mode)
    expected = multi_source_bfs(g, anchors).hops()
    bad = np.flatnonzero(decoded != expected)
    mismatches = [(int(v), int(expected[v]), int(decoded[v])) for v in bad]
    return CertReport("set", anchors, layers, mode, decoded, expected, mismatches)


def certify_anchor_distances(g: Graph, anchors: Sequence[int], layers: int | None = None,
                     mode: str = "ego") -> CertReport:
    anchors = tuple(int(a) for a in anchors)
    decoded, layers = _deep_enough(run_anchor_distances, g, anchors, layers, mode)
    expected = np.stack([multi_source_bfs(g, [a]).hops() for a in anchors], axis=1)
    mismatches = [(int(v), anchors[j], int(expected[v, j]), int(decoded[v, j]))
                  for v, j in np.argwhere(decoded != expected)]
    return CertReport("per-anchor", anchors, layers, mode, decoded, expected, mismatches)


def decode_distance(report: CertReport, node: int, anchor: int | None = None):
    """Coordinate projection of the decoded state, with UNREACHABLE for -1."""
    if report.kind == "set":
        d = int(report.decoded[node])
    else:
        d = int(report.decoded[node, report.anchors.index(anchor)])
    return UNREACHABLE if d < 0 else d

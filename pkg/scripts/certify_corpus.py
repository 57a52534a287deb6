"""Certify both distance constructions on random digraphs and the benchmark stand-ins."""
import argparse
import time

from gir.anchors import select_anchors
from gir.certify import certify_anchor_distances, certify_set_distance
from gir.datasets import BENCHMARKS, make_dataset
from gir.graph import random_digraph


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--graphs", type=int, default=50, help="number of random digraphs")
    p.add_argument("--max-n", type=int, default=200)
    p.add_argument("--mean-degree", type=float, default=3.0)
    p.add_argument("--set-mode", default="bfs-shell")
    p.add_argument("--anchor-mode", default="ego")
    args = p.parse_args()

    corpus = [(f"random-{s}", random_digraph(20 + (37 * s) % (args.max_n - 19), args.mean_degree, s))
              for s in range(args.graphs)]
    corpus += [(name, make_dataset(name).graph) for name in BENCHMARKS]
    print(f"{'graph':12s} {'n':>5s} {'m':>6s} {'set':>9s} {'per-anchor 4':>13s} {'per-anchor 16':>14s}")
    failures = 0
    t0 = time.perf_counter()
    for i, (name, g) in enumerate(corpus):
        cols = []
        r = certify_set_distance(g, select_anchors(g, min(1 + i % 16, g.n), seed=i).nodes, mode=args.set_mode)
        cols.append(r)
        for k in (4, 16):
            cols.append(certify_anchor_distances(g, select_anchors(g, min(k, g.n)).nodes, mode=args.anchor_mode))
        failures += sum(not c.ok for c in cols)
        cells = [("ok" if c.ok else f"{len(c.mismatches)} bad") + f"/L{c.layers}" for c in cols]
        print(f"{name:12s} {g.n:5d} {g.num_edges:6d} {cells[0]:>9s} {cells[1]:>13s} {cells[2]:>14s}")
    print(f"{len(corpus)} graphs, {failures} failing certificates, {time.perf_counter() - t0:.1f} s")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()

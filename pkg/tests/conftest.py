import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path
from hypothesis import strategies as st

from gir.graph import build_graph


def apsp(g):
    """All-pairs hop distances by Floyd-Warshall; -1 for no path."""
    e = g.edges()
    adj = sp.csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(g.n, g.n))
    d = shortest_path(adj, method="FW", unweighted=True)
    return np.where(np.isinf(d), -1, d).astype(np.int64)


def set_distance(d, sources):
    """Row-minimum over sources of the all-pairs matrix, ignoring unreachable."""
    sub = d[list(sources)].astype(float)
    sub[sub < 0] = np.inf
    m = sub.min(axis=0)
    return np.where(np.isinf(m), -1, m).astype(np.int64)


@st.composite
def digraphs(draw, min_n=1, max_n=30, bidirected=None):
    n = draw(st.integers(min_n, max_n))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4 * n))
    flag = draw(st.booleans()) if bidirected is None else bidirected
    return build_graph(pairs, n, undirected_as_bidirected=flag)


@st.composite
def graphs_with_sources(draw, max_n=30):
    g = draw(digraphs(max_n=max_n))
    src = draw(st.lists(st.integers(0, g.n - 1), min_size=1, max_size=min(5, g.n), unique=True))
    return g, src


def numeric_grads(loss_fn, params, eps=1e-6):
    """Central finite differences of ``loss_fn(params) -> float`` for every entry."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            hi = loss_fn(params)
            p[idx] = old - eps
            lo = loss_fn(params)
            p[idx] = old
            g[idx] = (hi - lo) / (2 * eps)
        out[name] = g
    return out


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale < 1e-12 else float(np.linalg.norm(a - b) / scale)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

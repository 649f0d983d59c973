"""Independent oracles used by the test suite.

These deliberately avoid the library's own code paths: the transport oracle
enumerates basic feasible solutions of the transportation polytope, and the
feature oracle recomputes the 20 features in one straight line.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _spanning_trees(m: int, n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All spanning trees of the complete bipartite graph K_{m,n}, as tuples
    of (row, col) edges. Basic feasible solutions of the balanced
    transportation problem live on these trees."""
    cells = [(i, j) for i in range(m) for j in range(n)]
    size = m + n - 1
    trees = []
    for subset in itertools.combinations(cells, size):
        parent = list(range(m + n))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        acyclic = True
        for i, j in subset:
            ra, rb = find(i), find(m + j)
            if ra == rb:
                acyclic = False
                break
            parent[ra] = rb
        if acyclic:
            trees.append(subset)
    return tuple(trees)


def _solve_tree(
    tree: tuple[tuple[int, int], ...], supply: np.ndarray, demand: np.ndarray
) -> np.ndarray | None:
    """Flows on a spanning tree, peeling leaves; None if any flow < 0."""
    m, n = supply.size, demand.size
    remaining_supply = supply.astype(float).copy()
    remaining_demand = demand.astype(float).copy()
    edges = set(tree)
    flows: dict[tuple[int, int], float] = {}
    degree = Counter()
    for i, j in edges:
        degree[("r", i)] += 1
        degree[("c", j)] += 1
    while edges:
        leaf_edge = None
        for i, j in edges:
            if degree[("r", i)] == 1:
                leaf_edge = (i, j, "r")
                break
            if degree[("c", j)] == 1:
                leaf_edge = (i, j, "c")
                break
        assert leaf_edge is not None, "spanning tree must keep a leaf"
        i, j, side = leaf_edge
        flow = remaining_supply[i] if side == "r" else remaining_demand[j]
        flows[(i, j)] = flow
        remaining_supply[i] -= flow
        remaining_demand[j] -= flow
        edges.remove((i, j))
        degree[("r", i)] -= 1
        degree[("c", j)] -= 1
    if any(f < -1e-12 for f in flows.values()):
        return None
    plan = np.zeros((m, n))
    for (i, j), f in flows.items():
        plan[i, j] = max(f, 0.0)
    return plan


def transport_bruteforce(supply, demand, cost) -> float:
    """Exact optimum by enumerating every spanning-tree basic solution."""
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = supply.size, demand.size
    best = math.inf
    for tree in _spanning_trees(m, n):
        plan = _solve_tree(tree, supply, demand)
        if plan is None:
            continue
        best = min(best, float((plan * cost).sum()))
    return best


def transport_linprog(supply, demand, cost) -> float:
    """LP-solver route for instances too large to enumerate."""
    from scipy.optimize import linprog

    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = supply.size, demand.size
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    result = linprog(
        cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([supply, demand]), method="highs"
    )
    assert result.status == 0, f"linprog failed: {result.message}"
    return float(result.fun)


def features_straightline(point, candidate, store, bm25_stats) -> np.ndarray:
    """Second implementation of the 20-feature vector, written flat.

    Independent of counterranker.features: its own tokenizer-call order,
    its own metric compositions, its own transport call only for WMD.
    """
    import re

    def tok(text):
        return re.findall(r"[^\W_]+", text.lower())

    def tf(tokens):
        c = Counter(tokens)
        return {t: k / len(tokens) for t, k in c.items()}

    def man(a, b):
        keys = set(a) | set(b)
        return 1.0 / (1.0 + sum(abs(a.get(t, 0) - b.get(t, 0)) for t in keys))

    def cos(a, b):
        num = sum(a[t] * b.get(t, 0.0) for t in a)
        na = math.sqrt(sum(v * v for v in a.values()))
        nb = math.sqrt(sum(v * v for v in b.values()))
        if na == 0 or nb == 0:
            return 0.0
        return num / (na * nb)

    def bm25(query, doc):
        counts = Counter(doc)
        score = 0.0
        seen = []
        for t in query:
            if t in seen:
                continue
            seen.append(t)
            f = counts.get(t, 0)
            if f == 0:
                continue
            df = bm25_stats.doc_freq.get(t, 0)
            idf = math.log(1 + (bm25_stats.doc_count - df + 0.5) / (df + 0.5))
            denom = f + 1.2 * (1 - 0.75 + 0.75 * len(doc) / bm25_stats.avg_len)
            score += idf * f * 2.2 / denom
        return score

    def bag(tokens):
        counts = Counter(t for t in tokens if t in store)
        total = sum(counts.values())
        if total == 0:
            return [], []
        vecs = [np.asarray(store.get(t), dtype=float) for t in counts]
        weights = [c / total for c in counts.values()]
        return vecs, weights

    def wmd(tokens_a, tokens_b):
        va, wa = bag(tokens_a)
        vb, wb = bag(tokens_b)
        if not va or not vb:
            return 0.0
        cost = np.array([[np.linalg.norm(x - y) for y in vb] for x in va])
        dist = transport_linprog(np.array(wa), np.array(wb), cost)
        return 1.0 / (1.0 + dist)

    def dcos(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            return 0.0
        return float(u @ v / (nu * nv))

    cl, pr = tok(point.conclusion), tok(point.premise)
    cand = tok(candidate.conclusion + " " + candidate.premise)
    tf_cl, tf_pr, tf_c = tf(cl), tf(pr), tf(cand)
    doc = dcos(store.get("doc:" + point.id), store.get("doc:" + candidate.id))
    metric_pairs = [
        (man(tf_cl, tf_c), man(tf_pr, tf_c)),
        (wmd(cl, cand), wmd(pr, cand)),
        (cos(tf_cl, tf_c), cos(tf_pr, tf_c)),
        (bm25(cl, cand), bm25(pr, cand)),
        (doc, doc),
    ]
    out = []
    for a, b in metric_pairs:
        out.extend([min(a, b), max(a, b), a * b, a + b])
    return np.array(out)


def finite_difference(fn, params: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function over a flat vector."""
    grad = np.zeros_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        plus = fn(params)
        params[i] = orig - h
        minus = fn(params)
        params[i] = orig
        grad[i] = (plus - minus) / (2 * h)
    return grad

"""Pairwise text metrics and the exact optimal-transport solver behind
Earth-Mover similarity.

All similarity outputs are bounded: inverse-distance metrics map d to
1/(1+d), cosines return 0 for degenerate zero vectors.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .textrep import VectorBag

BM25_K1 = 1.2
BM25_B = 0.75

# WMD bags larger than this are truncated to the highest-weight entries.
WMD_MAX_TOKENS = 256


class TransportError(ValueError):
    """Unbalanced or otherwise invalid transportation instance."""


class AggKind(str, Enum):
    min = "min"
    max = "max"
    product = "product"
    sum = "sum"


AGG_ORDER: tuple[AggKind, ...] = (AggKind.min, AggKind.max, AggKind.product, AggKind.sum)


def aggregate(val_cl: float, val_pr: float, kind: AggKind) -> float:
    if kind is AggKind.min:
        return min(val_cl, val_pr)
    if kind is AggKind.max:
        return max(val_cl, val_pr)
    if kind is AggKind.product:
        return val_cl * val_pr
    return val_cl + val_pr


def manhattan_sim(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Inverse Manhattan distance 1/(1+d) over the union of supports."""
    d = 0.0
    for tok in a.keys() | b.keys():
        d += abs(a.get(tok, 0.0) - b.get(tok, 0.0))
    return 1.0 / (1.0 + d)


def cosine_tf_sim(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Cosine of two sparse term-frequency vectors; 0 if either is zero."""
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(v * b[tok] for tok, v in a.items() if tok in b)
    return dot / (na * nb)


@dataclass(frozen=True)
class Bm25Stats:
    """Collection statistics for BM25: size, document frequencies, mean length."""

    doc_count: int
    doc_freq: Mapping[str, int]
    avg_len: float


def build_bm25_stats(docs: Iterable[Sequence[str]]) -> Bm25Stats:
    doc_freq: Counter[str] = Counter()
    n_docs = 0
    total_len = 0
    for tokens in docs:
        n_docs += 1
        total_len += len(tokens)
        doc_freq.update(set(tokens))
    avg_len = total_len / n_docs if n_docs else 0.0
    return Bm25Stats(doc_count=n_docs, doc_freq=dict(doc_freq), avg_len=avg_len)


def bm25_score(
    query: Sequence[str], doc: Sequence[str], stats: Bm25Stats
) -> float:
    """Okapi BM25 with k1=1.2, b=0.75 over distinct query terms.

    idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)); terms unseen in the
    collection use df = 0.
    """
    if not query or not doc:
        return 0.0
    counts = Counter(doc)
    length_norm = BM25_K1 * (1.0 - BM25_B + BM25_B * len(doc) / stats.avg_len)
    score = 0.0
    for term in dict.fromkeys(query):
        f = counts.get(term, 0)
        if f == 0:
            continue
        df = stats.doc_freq.get(term, 0)
        idf = math.log(1.0 + (stats.doc_count - df + 0.5) / (df + 0.5))
        score += idf * f * (BM25_K1 + 1.0) / (f + length_norm)
    return score


def solve_transport(
    supply: Sequence[float] | np.ndarray,
    demand: Sequence[float] | np.ndarray,
    cost: Sequence[Sequence[float]] | np.ndarray,
    tol: float = 1e-9,
) -> tuple[float, np.ndarray]:
    """Exact optimum of the balanced transportation problem.

    min sum(x * cost) subject to row sums = supply, column sums = demand,
    x >= 0.  Solved by successive shortest paths with node potentials
    (min-cost flow on the complete bipartite graph); each augmentation
    saturates a supply, a demand, or drains a reverse arc exactly, so the
    returned plan is feasible to float rounding.
    """
    a = np.array(supply, dtype=np.float64)
    b = np.array(demand, dtype=np.float64)
    c = np.asarray(cost, dtype=np.float64)
    m, n = a.size, b.size
    if c.shape != (m, n):
        raise TransportError(f"cost shape {c.shape} does not match ({m}, {n})")
    if (a < 0).any() or (b < 0).any():
        raise TransportError("negative supply or demand")
    if abs(a.sum() - 1.0) > tol or abs(b.sum() - 1.0) > tol:
        raise TransportError("unbalanced transport problem: weights must sum to 1")
    if not np.isfinite(c).all() or (c < 0).any():
        raise TransportError("cost entries must be finite and non-negative")

    x = np.zeros((m, n))
    # node potentials, rows 0..m-1 then columns m..m+n-1
    pot = np.zeros(m + n)
    guard = 4 * (m + n + 1) * (m * n + 1)
    for _ in range(guard):
        sources = np.nonzero(a > 0)[0]
        if sources.size == 0:
            break
        dist = np.full(m + n, np.inf)
        dist[sources] = 0.0
        prev = np.full(m + n, -1, dtype=np.int64)
        done = np.zeros(m + n, dtype=bool)
        for _settled in range(m + n):
            pending = np.nonzero(~done)[0]
            if pending.size == 0:
                break
            node = pending[np.argmin(dist[pending])]
            if not np.isfinite(dist[node]):
                break
            done[node] = True
            if node < m:
                # forward arcs row -> every column
                reduced = np.maximum(c[node] + pot[node] - pot[m:], 0.0)
                cand = dist[node] + reduced
                better = ~done[m:] & (cand < dist[m:])
                dist[m:][better] = cand[better]
                prev[m:][better] = node
            else:
                j = node - m
                rows = np.nonzero(x[:, j] > 0)[0]
                if rows.size:
                    reduced = np.maximum(-c[rows, j] + pot[node] - pot[rows], 0.0)
                    cand = dist[node] + reduced
                    better = ~done[rows] & (cand < dist[rows])
                    rows = rows[better]
                    dist[rows] = (cand[better])
                    prev[rows] = node

        targets = np.nonzero(b > 0)[0]
        if targets.size == 0:
            break  # residual imbalance inside tolerance
        t = m + targets[np.argmin(dist[m + targets])]
        if not np.isfinite(dist[t]):
            raise TransportError("no augmenting path (numerically infeasible)")
        pot += np.minimum(dist, dist[t])

        # walk predecessors back to a source row, collecting path arcs
        path: list[tuple[int, int, bool]] = []
        node = t
        while prev[node] != -1:
            parent = int(prev[node])
            if parent < m:
                path.append((parent, node - m, True))
            else:
                path.append((node, parent - m, False))
            node = parent
        src = node

        delta = min(a[src], b[t - m])
        for i, j, forward in path:
            if not forward:
                delta = min(delta, x[i, j])
        for i, j, forward in path:
            if forward:
                x[i, j] += delta
            else:
                x[i, j] -= delta
        a[src] -= delta
        b[t - m] -= delta
    else:
        raise TransportError("transport solver failed to terminate")

    return float((x * c).sum()), x


def _truncate_bag(bag: VectorBag) -> VectorBag:
    if len(bag) <= WMD_MAX_TOKENS:
        return bag
    order = np.argsort(-bag.weights, kind="stable")[:WMD_MAX_TOKENS]
    weights = bag.weights[order]
    return VectorBag(bag.vectors[order], weights / weights.sum())


def wmd_sim(bag_a: VectorBag, bag_b: VectorBag) -> float:
    """Inverse Word Mover's distance 1/(1+WMD) with Euclidean ground cost.

    Returns 0 if either bag is empty (degenerate text).
    """
    if bag_a.is_empty() or bag_b.is_empty():
        return 0.0
    bag_a = _truncate_bag(bag_a)
    bag_b = _truncate_bag(bag_b)
    diff = bag_a.vectors[:, None, :] - bag_b.vectors[None, :, :]
    cost = np.sqrt((diff * diff).sum(axis=2))
    wmd, _ = solve_transport(bag_a.weights, bag_b.weights, cost)
    return 1.0 / (1.0 + wmd)


def emb_cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of two dense vectors; 0 if either has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)

"""Evaluation metrics and trace preprocessing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import PrecisionGraph


@dataclass(frozen=True)
class MetricsRecord:
    method: str
    replication: int
    frobenius_error: float
    infinity_error: float
    f1: float
    runtime_seconds: float
    convergence_flag: bool

    def __post_init__(self):
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError("f1 must lie in [0, 1]")
        if min(self.frobenius_error, self.infinity_error,
               self.runtime_seconds) < 0:
            raise ValueError("errors and runtime must be nonnegative")


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a - b


def frobenius_error(sigma_tilde, sigma_star):
    d = _pair(sigma_tilde, sigma_star)
    return float(np.sqrt(np.sum(d * d)))


def infinity_error(sigma_tilde, sigma_star):
    """Largest absolute entry of the difference (the max norm)."""
    return float(np.max(np.abs(_pair(sigma_tilde, sigma_star)), initial=0.0))


def _undirected(edges):
    return {(min(i, j), max(i, j)) for i, j in edges if i != j}


def edge_scores(estimated, truth):
    """Precision, recall and F1 of an estimated edge set.

    Returns a dict with keys ``precision``, ``recall``, ``f1`` and
    ``both_empty``; two empty sets score F1 = 1 with ``both_empty`` set.
    """
    est = _undirected(estimated)
    tru = _undirected(truth)
    hit = len(est & tru)
    if not est and not tru:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0, "both_empty": True}
    prec = hit / len(est) if est else 0.0
    rec = hit / len(tru) if tru else 0.0
    f1 = 0.0 if hit == 0 else 2 * prec * rec / (prec + rec)
    return {"precision": prec, "recall": rec, "f1": f1, "both_empty": False}


def f1_score(estimated, truth):
    return edge_scores(estimated, truth)["f1"]


def degrees(edges, p):
    deg = np.zeros(p, dtype=int)
    for i, j in _undirected(edges):
        deg[i] += 1
        deg[j] += 1
    return deg


def top_hubs(edges, p, k):
    """k highest-degree nodes; equal degrees go to the lower node index."""
    deg = degrees(edges, p)
    order = np.lexsort((np.arange(p), -deg))
    return set(order[:k].tolist())


def hub_overlap(graph_a, graph_b, k=25, p=None):
    """Share of the top-k hubs of `graph_a` that are also top-k in `graph_b`.

    Graphs are :class:`PrecisionGraph` objects or edge collections (then
    `p` is required).
    """
    def unpack(g):
        if isinstance(g, PrecisionGraph):
            return g.edges(), g.p
        return g, p

    ea, pa = unpack(graph_a)
    eb, pb = unpack(graph_b)
    if pa is None or pb is None or pa != pb:
        raise ValueError("graphs must share a known node universe")
    if k > pa or k < 1:
        raise ValueError(f"k must lie in [1, {pa}]")
    return len(top_hubs(ea, pa, k) & top_hubs(eb, pb, k)) / k


def preprocess_traces(raw):
    """First-difference each trace, then center and scale every column.

    Columns with zero variance after differencing are only centered.

    Returns
    -------
    out : (n - 1, p) array
    zero_variance : list of int
        Columns left unscaled.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 3:
        raise ValueError("need a 2-d array with at least 3 rows")
    d = np.diff(raw, axis=0)
    d = d - d.mean(axis=0)
    sd = d.std(axis=0)
    flat = sd <= 1e-12 * np.maximum(1.0, np.abs(raw).max(axis=0))
    d[:, ~flat] /= sd[~flat]
    d[:, flat] = d[:, flat] - d[:, flat].mean(axis=0)
    return d, np.flatnonzero(flat).tolist()


def standardize(x):
    """Center and scale columns of a data matrix (population sd)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return x / sd


def to_correlation(cov):
    cov = np.asarray(cov, dtype=float)
    d = np.sqrt(np.clip(np.diag(cov), 1e-300, None))
    out = cov / np.outer(d, d)
    return (out + out.T) / 2.0

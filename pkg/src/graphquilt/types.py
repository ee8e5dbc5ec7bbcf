"""Domain types shared by every stage of the quilting pipeline.

Node indices are 0-based in memory. File formats use 1-based node ids and
the conversion happens in :mod:`graphquilt.io`.

All containers are frozen dataclasses whose array fields are copied and
marked read-only on construction, so they can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EXACT = "exact"
SPIKED = "spiked"
MODEL_KINDS = (EXACT, SPIKED)

DEFAULT_EDGE_TOL = 1e-8


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def symmetrize(m):
    """Return ``(m + m.T) / 2``.

    Raises
    ------
    ValueError
        If `m` is not a square 2-d array.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return (m + m.T) / 2.0


def _check_square(name, m):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def _check_symmetric(name, m, atol=0.0):
    if atol == 0.0:
        ok = np.array_equal(m, m.T, equal_nan=True)
    else:
        ok = np.allclose(m, m.T, atol=atol, rtol=0.0, equal_nan=True)
    if not ok:
        raise ValueError(f"{name} is not symmetric")


@dataclass(frozen=True)
class BlockDesign:
    """Observation pattern: which nodes are jointly recorded in each block.

    Parameters
    ----------
    node_sets : sequence of int arrays
        ``node_sets[k]`` lists the (0-based) nodes observed in block k, in
        the column order of that block's data.
    sample_counts : sequence of int, optional
        Samples per block. ``None`` when the design only describes a mask
        (for example when masking a covariance that is already available).
    p : int
        Total number of nodes.
    """

    node_sets: tuple
    sample_counts: Optional[tuple]
    p: int

    def __post_init__(self):
        sets = tuple(_frozen(np.asarray(v, dtype=int).ravel(), dtype=int)
                     for v in self.node_sets)
        object.__setattr__(self, "node_sets", sets)
        if not sets:
            raise ValueError("design needs at least one block")
        p = int(self.p)
        object.__setattr__(self, "p", p)
        covered = np.zeros(p, dtype=bool)
        for k, v in enumerate(sets):
            if v.size < 1:
                raise ValueError(f"block {k} is empty")
            if v.min() < 0 or v.max() >= p:
                raise ValueError(f"block {k} has node ids outside [0, {p})")
            if np.unique(v).size != v.size:
                raise ValueError(f"block {k} repeats a node")
            covered[v] = True
        if not covered.all():
            missing = np.flatnonzero(~covered)
            raise ValueError(f"nodes never observed: {missing.tolist()}")
        if self.sample_counts is not None:
            counts = tuple(int(n) for n in self.sample_counts)
            if len(counts) != len(sets):
                raise ValueError("one sample count per block required")
            if min(counts) < 2:
                raise ValueError("every block needs at least 2 samples")
            object.__setattr__(self, "sample_counts", counts)

    @property
    def K(self):
        return len(self.node_sets)

    @property
    def block_sizes(self):
        return tuple(v.size for v in self.node_sets)

    def mask(self):
        """Boolean p x p indicator of the observed pair set."""
        m = np.zeros((self.p, self.p), dtype=bool)
        for v in self.node_sets:
            m[np.ix_(v, v)] = True
        return m

    def with_counts(self, counts):
        return BlockDesign(self.node_sets, counts, self.p)

    @classmethod
    def from_mask(cls, mask):
        """Recover blocks as the maximal cliques of the observed-pair graph.

        Cliques are returned in a chaining order: start from the clique
        holding node 0, then repeatedly take the clique with the largest
        overlap with everything placed so far (ties to the lowest sorted
        node tuple).
        """
        import networkx as nx

        mask = np.asarray(mask, dtype=bool)
        _check_square("mask", mask)
        _check_symmetric("mask", mask)
        if not mask.diagonal().all():
            raise ValueError("mask diagonal must be fully observed")
        p = mask.shape[0]
        g = nx.Graph()
        g.add_nodes_from(range(p))
        ii, jj = np.nonzero(np.triu(mask, 1))
        g.add_edges_from(zip(ii.tolist(), jj.tolist()))
        cliques = sorted(tuple(sorted(c)) for c in nx.find_cliques(g))
        order = [next(c for c in cliques if 0 in c)]
        placed = set(order[0])
        rest = [c for c in cliques if c != order[0]]
        while rest:
            best = max(rest, key=lambda c: (len(placed.intersection(c)),
                                            [-x for x in c]))
            order.append(best)
            placed.update(best)
            rest.remove(best)
        return cls(tuple(np.array(c) for c in order), None, p)


@dataclass(frozen=True)
class ObservedCovariance:
    """Sample covariance known only on the observed pair set.

    ``values`` holds NaN outside the mask; the mask is authoritative.
    """

    values: np.ndarray
    mask: np.ndarray
    design: Optional[BlockDesign] = None
    first_moments: Optional[np.ndarray] = None

    def __post_init__(self):
        mask = _frozen(self.mask, dtype=bool)
        _check_square("mask", mask)
        _check_symmetric("mask", mask)
        if not mask.diagonal().all():
            raise ValueError("mask diagonal must be fully observed")
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != mask.shape:
            raise ValueError("values and mask shapes differ")
        if not np.isfinite(vals[mask]).all():
            raise ValueError("observed entries must be finite")
        vals[~mask] = np.nan
        _check_symmetric("values", vals)
        vals.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", vals)
        if self.design is not None:
            if self.design.p != mask.shape[0]:
                raise ValueError("design size does not match the matrix")
            if not np.array_equal(self.design.mask(), mask):
                raise ValueError("mask does not match the design's pair set")
        if self.first_moments is not None:
            object.__setattr__(self, "first_moments",
                               _frozen(self.first_moments))

    @property
    def p(self):
        return self.mask.shape[0]

    def blocks(self):
        """Block design, inferred from the mask when none was attached."""
        if self.design is not None:
            return self.design
        return BlockDesign.from_mask(self.mask)

    def filled(self, fill=0.0):
        out = np.array(self.values, copy=True)
        out[~self.mask] = fill
        return out

    def diagonal(self):
        return np.array(self.values.diagonal(), copy=True)

    def with_mask(self, mask):
        """Same values restricted to a smaller mask (design dropped)."""
        mask = np.asarray(mask, dtype=bool)
        if (mask & ~self.mask).any():
            raise ValueError("new mask must be a subset of the observed set")
        return ObservedCovariance(self.values, mask)

    @classmethod
    def from_full(cls, cov, design):
        """Mask a fully known covariance to a design's pair set."""
        cov = np.asarray(cov, dtype=float)
        mask = design.mask()
        vals = np.where(mask, cov, np.nan)
        return cls(vals, mask, design)


@dataclass(frozen=True)
class CompletedCovariance:
    """Full imputed covariance plus the metadata of the solver that made it."""

    sigma_tilde: np.ndarray
    model_kind: str
    rank_used: int
    sigma2_hat: float = 0.0
    factor: Optional[np.ndarray] = None
    low_rank_part: Optional[np.ndarray] = None
    converged: bool = True
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = _frozen(self.sigma_tilde)
        _check_square("sigma_tilde", s)
        _check_symmetric("sigma_tilde", s)
        object.__setattr__(self, "sigma_tilde", s)
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        if self.rank_used < 0:
            raise ValueError("rank_used must be nonnegative")
        if self.sigma2_hat < 0:
            raise ValueError("sigma2_hat must be nonnegative")
        if self.model_kind == EXACT and self.sigma2_hat != 0:
            raise ValueError("exact model carries no noise level")
        if self.factor is not None:
            f = _frozen(self.factor)
            if f.ndim != 2 or f.shape[0] != s.shape[0]:
                raise ValueError("factor must have p rows")
            object.__setattr__(self, "factor", f)
            if self.model_kind == EXACT:
                err = np.max(np.abs(s - f @ f.T), initial=0.0)
                if err > 1e-10 * max(1.0, np.max(np.abs(s), initial=0.0)):
                    raise ValueError("sigma_tilde differs from factor product")
        if self.low_rank_part is not None:
            object.__setattr__(self, "low_rank_part",
                               _frozen(self.low_rank_part))

    @property
    def p(self):
        return self.sigma_tilde.shape[0]


@dataclass(frozen=True)
class PrecisionGraph:
    """Sparse precision estimate and the edge set it encodes."""

    theta: np.ndarray
    lam: float
    edge_tolerance: float = DEFAULT_EDGE_TOL
    converged: bool = True
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = _frozen(self.theta)
        _check_square("theta", t)
        _check_symmetric("theta", t)
        if self.lam < 0 or self.edge_tolerance < 0:
            raise ValueError("lambda and edge tolerance must be nonnegative")
        if np.linalg.eigvalsh(t)[0] <= 0:
            raise ValueError("theta is not positive definite")
        object.__setattr__(self, "theta", t)

    @property
    def p(self):
        return self.theta.shape[0]

    def edges(self):
        return edges_from_matrix(self.theta, self.edge_tolerance)


def edges_from_matrix(theta, tol=0.0):
    """Set of pairs ``(i, j)``, ``i < j``, with ``|theta[i, j]| > tol``."""
    ii, jj = np.nonzero(np.triu(np.abs(np.asarray(theta)) > tol, 1))
    return frozenset(zip(ii.tolist(), jj.tolist()))


@dataclass(frozen=True)
class SpikedPart:
    low_rank: np.ndarray
    sigma2: float
    rank: int


@dataclass(frozen=True)
class GroundTruth:
    """Simulation truth: precision, covariance, edge set, optional spike."""

    theta_star: np.ndarray
    sigma_star: np.ndarray
    edges: frozenset
    spiked: Optional[SpikedPart] = None

    def __post_init__(self):
        t = _frozen(self.theta_star)
        s = _frozen(self.sigma_star)
        _check_square("theta_star", t)
        _check_symmetric("theta_star", t)
        _check_symmetric("sigma_star", s)
        p = t.shape[0]
        if np.max(np.abs(t @ s - np.eye(p))) > 1e-8:
            raise ValueError("sigma_star is not the inverse of theta_star")
        if np.linalg.eigvalsh(t)[0] <= 0:
            raise ValueError("theta_star is not positive definite")
        edges = frozenset(self.edges)
        if edges != edges_from_matrix(t, 0.0):
            raise ValueError("edge set disagrees with theta_star support")
        if self.spiked is not None:
            lr = _frozen(self.spiked.low_rank)
            if np.max(np.abs(lr + self.spiked.sigma2 * np.eye(p) - s)) > 1e-8:
                raise ValueError("sigma_star != low-rank part + sigma2 * I")
            object.__setattr__(self, "spiked",
                               SpikedPart(lr, float(self.spiked.sigma2),
                                          int(self.spiked.rank)))
        object.__setattr__(self, "theta_star", t)
        object.__setattr__(self, "sigma_star", s)
        object.__setattr__(self, "edges", edges)

    @property
    def p(self):
        return self.theta_star.shape[0]

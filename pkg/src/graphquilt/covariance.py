"""Observed covariance from block data, noise level, PSD repair.

Covariances use the moment form with 1/n normalization: every observed
entry is the pooled cross-moment of the two nodes minus the product of
their pooled means, pooling over all blocks that contain the node (or the
pair).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .types import BlockDesign, ObservedCovariance, symmetrize


class DegeneratePairError(ValueError):
    """A pair of nodes has fewer than two pooled joint samples."""


@dataclass(frozen=True)
class Block:
    data: np.ndarray
    node_ids: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim == 1:
            data = data[:, None]
        ids = np.asarray(self.node_ids, dtype=int).ravel()
        if data.ndim != 2 or data.shape[1] != ids.size:
            raise ValueError(
                f"block has {data.shape[-1]} columns but {ids.size} node ids")
        if np.unique(ids).size != ids.size:
            raise ValueError("node ids within a block must be distinct")
        data.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "node_ids", ids)

    @property
    def n(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class BlockData:
    """Raw recordings: one ``(n_k x p_k)`` matrix per block plus node ids."""

    blocks: tuple
    p: int

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, Block) else Block(*b)
                       for b in self.blocks)
        if not blocks:
            raise ValueError("need at least one block")
        top = max(int(b.node_ids.max()) for b in blocks)
        if top >= self.p or min(int(b.node_ids.min()) for b in blocks) < 0:
            raise ValueError(f"node ids must lie in [0, {self.p})")
        object.__setattr__(self, "blocks", blocks)

    @property
    def K(self):
        return len(self.blocks)

    def design(self):
        counts = [b.n for b in self.blocks]
        return BlockDesign(tuple(b.node_ids for b in self.blocks),
                           counts if min(counts) >= 2 else None, self.p)

    def subsample(self, ratio, rng):
        """Keep a random ``ratio`` share of rows within every block."""
        out = []
        for b in self.blocks:
            m = max(2, int(round(ratio * b.n)))
            rows = np.sort(rng.choice(b.n, size=min(m, b.n), replace=False))
            out.append(Block(b.data[rows], b.node_ids))
        return BlockData(tuple(out), self.p)

    @classmethod
    def from_full(cls, x, design):
        """Split a complete ``n x p`` data matrix into design blocks.

        Rows are dealt out to blocks consecutively using the design's sample
        counts, so blocks never share samples.
        """
        x = np.asarray(x, dtype=float)
        if design.sample_counts is None:
            raise ValueError("design needs sample counts to split data")
        if sum(design.sample_counts) > x.shape[0]:
            raise ValueError("not enough rows for the design's sample counts")
        start = 0
        blocks = []
        for v, n in zip(design.node_sets, design.sample_counts):
            blocks.append(Block(x[start:start + n][:, v], v))
            start += n
        return cls(tuple(blocks), design.p)


def compute_block_covariance(data):
    """Observed covariance by pooling moments across blocks.

    For every observed pair ``(i, j)``::

        S_ij = m_ij - m_i * m_j

    where ``m_ij`` averages ``x_i * x_j`` over every sample of every block
    containing both nodes and ``m_i`` averages ``x_i`` over every block
    containing ``i``.

    Raises
    ------
    DegeneratePairError
        If some observed pair has fewer than two pooled joint samples.
    """
    p = data.p
    cross = np.zeros((p, p))
    pair_n = np.zeros((p, p))
    first = np.zeros(p)
    node_n = np.zeros(p)
    for b in data.blocks:
        v = b.node_ids
        ix = np.ix_(v, v)
        cross[ix] += b.data.T @ b.data
        pair_n[ix] += b.n
        first[v] += b.data.sum(axis=0)
        node_n[v] += b.n
    mask = pair_n > 0
    low = np.argwhere(mask & (pair_n < 2))
    if low.size:
        i, j = low[0]
        raise DegeneratePairError(
            f"pair ({i}, {j}) has {int(pair_n[i, j])} joint sample(s)")
    means = first / node_n
    with np.errstate(invalid="ignore", divide="ignore"):
        m2 = cross / pair_n
    cov = symmetrize(np.where(mask, m2 - np.outer(means, means), 0.0))
    zero_var = np.flatnonzero(cov.diagonal() <= 0)
    if zero_var.size:
        warnings.warn(f"zero-variance nodes: {zero_var.tolist()}",
                      RuntimeWarning, stacklevel=2)
    values = np.where(mask, cov, np.nan)
    return ObservedCovariance(values, mask, data.design(), means)


def estimate_noise_variance(obs):
    """Median of the observed diagonal, the usual spiked-model noise estimate."""
    return float(np.median(obs.diagonal()))


def effective_rank(cov):
    """Trace over largest eigenvalue of a PSD matrix."""
    cov = np.asarray(cov, dtype=float)
    top = np.linalg.eigvalsh(symmetrize(cov))[-1]
    if top <= 0:
        raise ValueError("effective rank is undefined for a zero matrix")
    return float(np.trace(cov) / top)


def _clip_psd(x, floor):
    w, q = np.linalg.eigh(x)
    return symmetrize((q * np.maximum(w, floor)) @ q.T)


def project_psd(obs, floor=None, max_iter=200, tol=1e-10):
    """Repair an indefinite observed covariance.

    Finds the matrix supported on the observed set that is closest in
    Frobenius norm to the zero-filled input and whose smallest eigenvalue
    is at least `floor`, by Dykstra's alternating projections between the
    eigenvalue-floored cone and the subspace of matrices vanishing off the
    mask. A final diagonal shift enforces the floor exactly (the diagonal is
    always observed, so the mask is preserved).

    Parameters
    ----------
    obs : ObservedCovariance
    floor : float, optional
        Eigenvalue floor. Defaults to ``1e-6`` times the mean diagonal.

    Returns
    -------
    ObservedCovariance
        `obs` itself when it already satisfies the floor.
    """
    x0 = obs.filled(0.0)
    if floor is None:
        floor = 1e-6 * float(np.mean(obs.diagonal()))
    scale = max(1.0, float(np.max(np.abs(x0))))
    if np.linalg.eigvalsh(x0)[0] >= floor - 1e-12 * scale:
        return obs
    mask = obs.mask
    x = x0.copy()
    inc_cone = np.zeros_like(x)
    inc_sub = np.zeros_like(x)
    for _ in range(max_iter):
        y = _clip_psd(x + inc_cone, floor)
        inc_cone = x + inc_cone - y
        x_new = np.where(mask, y + inc_sub, 0.0)
        inc_sub = y + inc_sub - x_new
        done = np.max(np.abs(x_new - x)) < tol * scale
        x = x_new
        if done:
            break
    x = symmetrize(x)
    shift = floor - np.linalg.eigvalsh(x)[0]
    if shift > 0:
        x = x + shift * np.eye(obs.p)
    return ObservedCovariance(np.where(mask, x, np.nan), mask, obs.design,
                              obs.first_moments)

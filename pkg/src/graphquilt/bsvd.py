"""Sequential block eigendecomposition completion with Procrustes stitching."""

from __future__ import annotations

import warnings

import numpy as np

from .covariance import estimate_noise_variance
from .types import EXACT, SPIKED, CompletedCovariance, symmetrize


class InsufficientOverlapError(ValueError):
    """A block shares fewer than ``r`` nodes with the blocks before it."""


def procrustes_align(a, b):
    """Orthogonal ``W`` minimizing ``||a - b @ W||_F``.

    Closed form: with ``b.T @ a = U S V^T``, ``W = U V^T``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    u, _, vt = np.linalg.svd(b.T @ a)
    return u @ vt


def block_factor(sub, r):
    """Rank-``r`` square-root factor of a symmetric block.

    Negative eigenvalues are clipped to zero. Returns the ``m x r`` factor
    and the number of strictly positive eigenvalues kept.
    """
    w, q = np.linalg.eigh(symmetrize(sub))
    order = np.argsort(w)[::-1][:r]
    w = np.maximum(w[order], 0.0)
    f = q[:, order] * np.sqrt(w)
    if f.shape[1] < r:
        f = np.hstack([f, np.zeros((f.shape[0], r - f.shape[1]))])
    tol = 1e-12 * max(w.max(initial=0.0), 1e-300) * sub.shape[0]
    return f, int(np.sum(w > tol))


def chain_order(node_sets, r, reorder=False):
    """Block processing order, checking each step overlaps by at least r.

    With ``reorder`` the next block is the one with the largest overlap with
    all nodes placed so far (ties to manifest order).
    """
    remaining = list(range(len(node_sets)))
    order = [remaining.pop(0)]
    placed = set(node_sets[order[0]].tolist())
    while remaining:
        if reorder:
            k = max(remaining,
                    key=lambda j: (len(placed.intersection(node_sets[j].tolist())), -j))
        else:
            k = remaining[0]
        overlap = len(placed.intersection(node_sets[k].tolist()))
        if overlap < r:
            raise InsufficientOverlapError(
                f"block {k} overlaps earlier blocks in {overlap} node(s); "
                f"rank {r} needs at least {r}")
        remaining.remove(k)
        order.append(k)
        placed.update(node_sets[k].tolist())
    return order


def bsvd_complete(obs, r, mode=EXACT, sigma2=None, preserve_observed=False,
                  reorder=False, first_rotation=None):
    """Complete a block-observed covariance by stitching block factors.

    Each block's observed principal submatrix is factored as
    ``A_k A_k^T`` (top-``r`` eigenpairs, clipped at zero). The first block's
    factor seeds the global factor ``U``; each later block is rotated onto
    the rows of ``U`` it shares (all nodes already placed, not just the
    previous block) and contributes only its new rows.

    Parameters
    ----------
    obs : ObservedCovariance
    r : int
        Target rank.
    mode : {"exact", "spiked"}
        In spiked mode ``sigma2 * I`` is removed before factoring and added
        back to the output.
    sigma2 : float, optional
        Noise level for spiked mode, default the median observed variance.
    preserve_observed : bool
        Copy the observed entries over the output.
    reorder : bool
        Greedy max-overlap ordering instead of manifest order.
    first_rotation : (r, r) array, optional
        Orthogonal matrix applied to the first block's factor. The output
        does not depend on it; exposed for testing rotation invariance.
    """
    if r < 1:
        raise ValueError("rank must be positive")
    if mode not in (EXACT, SPIKED):
        raise ValueError(f"unknown mode {mode!r}")
    p = obs.p
    design = obs.blocks()
    node_sets = design.node_sets
    order = chain_order(node_sets, r, reorder=reorder)

    adjusted = obs.filled(0.0)
    s2 = 0.0
    if mode == SPIKED:
        s2 = estimate_noise_variance(obs) if sigma2 is None else float(sigma2)
        if s2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        adjusted = adjusted - s2 * np.eye(p)
        if np.any(adjusted.diagonal() < -1e-10):
            warnings.warn("noise estimate exceeds some observed variances; "
                          "adjusted eigenvalues clipped at zero",
                          RuntimeWarning, stacklevel=2)

    u = np.zeros((p, r))
    placed = np.zeros(p, dtype=bool)
    deficient = []
    for step, k in enumerate(order):
        v = node_sets[k]
        a, kept = block_factor(adjusted[np.ix_(v, v)], r)
        if kept < r:
            deficient.append(int(k))
        if step == 0:
            if first_rotation is not None:
                a = a @ np.asarray(first_rotation, dtype=float)
            u[v] = a
        else:
            old = placed[v]
            w = procrustes_align(u[v[old]], a[old])
            u[v[~old]] = a[~old] @ w
        placed[v] = True
    if deficient:
        warnings.warn(f"blocks {deficient} have numerical rank below {r}; "
                      "factor truncated to the available rank",
                      RuntimeWarning, stacklevel=2)

    low = symmetrize(u @ u.T)
    sigma = low + s2 * np.eye(p) if mode == SPIKED else low
    if preserve_observed:
        sigma = np.where(obs.mask, obs.filled(0.0), sigma)
        sigma = symmetrize(sigma)
    # once observed entries are copied back the factor no longer reproduces
    # the matrix, so it is only attached when it does
    factor = None if preserve_observed else u
    return CompletedCovariance(
        sigma, mode, r, s2, factor=factor,
        info={"method": "bsvd", "order": order, "rank_deficient": deficient})

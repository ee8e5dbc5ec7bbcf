"""Ground-truth generators, Gaussian sampling and block patterns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .types import BlockDesign, GroundTruth, SpikedPart, edges_from_matrix, symmetrize


class CoverageError(ValueError):
    """Block windows cannot cover all nodes with overlapping neighbours."""


def make_pd(theta_draft, margin=0.1):
    """Shift the diagonal so the smallest eigenvalue is at least `margin`."""
    theta = symmetrize(theta_draft)
    c = max(0.0, margin - np.linalg.eigvalsh(theta)[0])
    return theta + c * np.eye(theta.shape[0])


def _signed(w, sign, rng):
    if sign == "positive":
        return w
    if sign == "negative":
        return -w
    if sign == "random":
        return w * rng.choice([-1.0, 1.0], size=w.shape)
    raise ValueError(f"unknown sign convention {sign!r}")


def _assemble(adj_upper, rng, weight_range, diag_range, margin, sign):
    """Weighted symmetric precision from a boolean upper-triangular support."""
    p = adj_upper.shape[0]
    w = rng.uniform(*weight_range, size=(p, p))
    w = _signed(w, sign, rng)
    theta = np.where(adj_upper, w, 0.0)
    theta = theta + theta.T
    theta[np.diag_indices(p)] = rng.uniform(*diag_range, size=p)
    return _truth_from_precision(make_pd(theta, margin))


def _truth_from_precision(theta, spiked=None):
    sigma = symmetrize(np.linalg.inv(theta))
    return GroundTruth(theta, sigma, edges_from_matrix(theta, 0.0), spiked)


def community_labels(p, communities):
    """Equal consecutive communities; the remainder joins the last one."""
    size = p // communities
    if size < 1:
        raise ValueError("more communities than nodes")
    return np.minimum(np.arange(p) // size, communities - 1)


def gen_sbm_precision(p, communities=5, within_prob=0.8, seed=None,
                      weight_range=(0.0, 2.0), diag_range=(1.0, 2.0),
                      margin=0.1, sign="positive"):
    """Block-diagonal random graph precision.

    Within-community pairs are edges with probability `within_prob`;
    there are no edges across communities. Edge weights are uniform on
    `weight_range` with sign set by `sign` ("positive", "negative" or
    "random"); the diagonal is uniform on `diag_range` before the
    positive-definiteness shift.
    """
    rng = np.random.default_rng(seed)
    lab = community_labels(p, communities)
    same = lab[:, None] == lab[None, :]
    coin = rng.random((p, p)) < within_prob
    adj = np.triu(same & coin, 1)
    return _assemble(adj, rng, weight_range, diag_range, margin, sign)


def gen_multistar_precision(p, hubs=4, seed=None, weight_range=(0.0, 2.0),
                            diag_range=(1.0, 2.0), margin=0.1,
                            sign="positive"):
    """Hubs are nodes ``0..hubs-1``; every other node links to one hub."""
    if not 1 <= hubs < p:
        raise ValueError("need 1 <= hubs < p")
    rng = np.random.default_rng(seed)
    adj = np.zeros((p, p), dtype=bool)
    owner = rng.integers(hubs, size=p - hubs)
    adj[owner, np.arange(hubs, p)] = True
    return _assemble(adj, rng, weight_range, diag_range, margin, sign)


def gen_er_precision(p, edge_prob=0.02, seed=None, weight_range=(0.0, 2.0),
                     diag_range=(1.0, 2.0), margin=0.1, sign="positive"):
    """Erdos-Renyi support with independent edges on the upper triangle."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    adj = np.triu(rng.random((p, p)) < edge_prob, 1)
    return _assemble(adj, rng, weight_range, diag_range, margin, sign)


def gen_spiked_precision(p, r, c=1.0, structure="sbm", seed=None,
                         spike_range=(0.55, 0.9)):
    """Precision ``c I - L0`` with ``L0`` PSD of rank r.

    The r nonzero eigenvalues of ``L0`` are drawn from
    ``c * spike_range`` (strictly between ``c/2`` and ``c``), so the
    covariance is exactly ``L + I/c`` with L PSD of rank r.

    structure="sbm" makes ``L0`` block-constant on r equal communities
    (every within-community pair is an edge); structure="dense" uses a
    random orthonormal basis.
    """
    rng = np.random.default_rng(seed)
    lo, hi = spike_range
    if not 0.5 < lo <= hi < 1.0:
        raise ValueError("spike_range must lie strictly inside (0.5, 1)")
    mu = c * rng.uniform(lo, hi, size=r)
    if structure == "sbm":
        lab = community_labels(p, r)
        l0 = np.zeros((p, p))
        for k in range(r):
            idx = np.flatnonzero(lab == k)
            l0[np.ix_(idx, idx)] = mu[k] / idx.size
    elif structure == "dense":
        q, _ = np.linalg.qr(rng.standard_normal((p, r)))
        l0 = (q * mu) @ q.T
    else:
        raise ValueError(f"unknown structure {structure!r}")
    theta = c * np.eye(p) - symmetrize(l0)
    sigma = symmetrize(np.linalg.inv(theta))
    low = sigma - np.eye(p) / c
    return GroundTruth(theta, sigma, edges_from_matrix(theta, 0.0),
                       SpikedPart(low, 1.0 / c, r))


def sample_ggm(truth, n, seed=None):
    """``n`` i.i.d. rows from ``N(0, Sigma*)`` via the Cholesky factor."""
    sigma = truth.sigma_star if isinstance(truth, GroundTruth) else np.asarray(truth)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Sigma* is not positive definite") from exc
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, sigma.shape[0]))
    return z @ chol.T


def window_overlaps(p, K, o):
    """Consecutive-window overlaps, spread as evenly as possible.

    The total overlap ``K * o - p`` is split over the ``K - 1`` junctions,
    remainder one per junction from the first.
    """
    if o > p:
        raise CoverageError(f"window size {o} exceeds p={p}")
    if K == 1:
        if o != p:
            raise CoverageError("a single window must cover all nodes")
        return []
    total = K * o - p
    if total < K - 1:
        raise CoverageError(
            f"{K} windows of size {o} cannot cover {p} nodes with overlaps")
    base, rem = divmod(total, K - 1)
    ov = [base + (1 if j < rem else 0) for j in range(K - 1)]
    if max(ov) >= o:
        raise CoverageError("overlap as large as a window")
    return ov


def make_block_pattern(p, K, o, shuffle_seed=None, n=None):
    """K consecutive windows of size o over the nodes, optionally shuffled.

    Parameters
    ----------
    n : int or sequence of int, optional
        Per-block sample counts to record on the design.
    """
    ov = window_overlaps(p, K, o)
    starts = [0]
    for x in ov:
        starts.append(starts[-1] + o - x)
    labels = np.arange(p)
    if shuffle_seed is not None:
        labels = np.random.default_rng(shuffle_seed).permutation(p)
    sets = tuple(labels[s:s + o].copy() for s in starts)
    counts = None
    if n is not None:
        counts = [int(n)] * K if np.isscalar(n) else list(n)
    return BlockDesign(sets, counts, p)


@dataclass
class SpikedCheck:
    """Outcome of :func:`verify_spiked_decomposition`."""

    ok: bool
    low_rank: np.ndarray
    diag_level: float
    failures: list = field(default_factory=list)


def verify_spiked_decomposition(theta, c, r, tol=1e-8):
    """Check that ``inv(theta) - I/c`` is PSD of rank r with ``lambda_r > 1/c``.

    Also checks the premise: ``c I - theta`` PSD of rank r with r-th
    eigenvalue above ``c/2``. Failures are listed, never raised.
    """
    theta = symmetrize(theta)
    p = theta.shape[0]
    failures = []
    l0_eigs = np.linalg.eigvalsh(c * np.eye(p) - theta)[::-1]
    scale0 = max(abs(c), np.max(np.abs(l0_eigs)))
    if l0_eigs[-1] < -tol * scale0:
        failures.append("premise: c*I - theta is not PSD")
    if int(np.sum(l0_eigs > tol * scale0)) != r:
        failures.append(f"premise: c*I - theta does not have rank {r}")
    if r >= 1 and not l0_eigs[r - 1] > c / 2:
        failures.append(f"premise: lambda_{r}(c*I - theta) = "
                        f"{l0_eigs[r - 1]:.6g} is not above c/2 = {c / 2:.6g}")

    sigma = symmetrize(np.linalg.inv(theta))
    low = sigma - np.eye(p) / c
    eigs = np.linalg.eigvalsh(low)[::-1]
    scale = max(1.0 / abs(c), np.max(np.abs(eigs)))
    if eigs[-1] < -tol * scale:
        failures.append("conclusion: L is not PSD")
    if int(np.sum(eigs > tol * scale)) != r:
        failures.append(f"conclusion: L does not have rank {r}")
    if r >= 1 and not eigs[r - 1] > 1.0 / c:
        failures.append(f"conclusion: lambda_{r}(L) = {eigs[r - 1]:.6g} "
                        f"is not above 1/c = {1.0 / c:.6g}")
    return SpikedCheck(not failures, low, 1.0 / c, failures)

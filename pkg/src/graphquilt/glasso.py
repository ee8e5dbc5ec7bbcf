"""Graphical lasso by blockwise coordinate descent, plus zero imputation.

Minimizes ``tr(S Theta) - log det Theta + lam * sum_{i != j} |Theta_ij|``.
The diagonal is unpenalized, so the working covariance keeps ``W_jj = S_jj``
throughout. Columns are swept in the fixed order ``0..p-1``; each column is
a lasso problem solved by cyclic coordinate descent.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .types import (DEFAULT_EDGE_TOL, EXACT, CompletedCovariance,
                    PrecisionGraph)


@njit(cache=True)
def _lasso_pass(s, w, b, v, j, lam, active_only):
    p = s.shape[0]
    delta = 0.0
    for k in range(p):
        if k == j:
            continue
        bk = b[k, j]
        if active_only and bk == 0.0:
            continue
        wkk = w[k, k]
        r = s[k, j] - v[k] + wkk * bk
        if r > lam:
            nb = (r - lam) / wkk
        elif r < -lam:
            nb = (r + lam) / wkk
        else:
            nb = 0.0
        d = nb - bk
        if d != 0.0:
            b[k, j] = nb
            for l in range(p):
                v[l] += w[l, k] * d
            ad = abs(d) * wkk
            if ad > delta:
                delta = ad
    return delta


@njit(cache=True)
def _polish(s, w, b, v, j, lam):
    """Solve the column lasso exactly on its current support and signs.

    Returns False (leaving ``b`` untouched) if the solution flips a sign.
    """
    p = s.shape[0]
    m = 0
    idx = np.empty(p, dtype=np.int64)
    for k in range(p):
        if k != j and b[k, j] != 0.0:
            idx[m] = k
            m += 1
    if m == 0:
        return False
    a = np.empty((m, m))
    rhs = np.empty(m)
    for x in range(m):
        kx = idx[x]
        rhs[x] = s[kx, j] - lam * np.sign(b[kx, j])
        for y in range(m):
            a[x, y] = w[kx, idx[y]]
    sol = np.linalg.solve(a, rhs)
    cur = np.empty(m)
    for x in range(m):
        cur[x] = b[idx[x], j]
        if not np.isfinite(sol[x]) or sol[x] * cur[x] <= 0.0:
            return False
    # on a fixed sign pattern the lasso objective is this quadratic
    f_new = 0.5 * sol @ (a @ sol) - rhs @ sol
    f_cur = 0.5 * cur @ (a @ cur) - rhs @ cur
    if not f_new <= f_cur:
        return False
    for x in range(m):
        k = idx[x]
        d = sol[x] - b[k, j]
        if d != 0.0:
            b[k, j] = sol[x]
            for l in range(p):
                v[l] += w[l, k] * d
    return True


@njit(cache=True)
def _sweep(s, w, b, lam, inner_tol, max_inner):
    p = s.shape[0]
    v = np.empty(p)
    for j in range(p):
        # v = W_{-j,-j} beta_j, accumulated over the active coordinates only
        for k in range(p):
            v[k] = 0.0
        for l in range(p):
            bl = b[l, j]
            if l != j and bl != 0.0:
                for k in range(p):
                    v[k] += w[k, l] * bl
        # coordinate passes find the support; an exact solve on it removes
        # the slow tail of coordinate descent on ill-conditioned blocks
        for it in range(max_inner):
            if _lasso_pass(s, w, b, v, j, lam, False) < inner_tol:
                break
            if it >= 1:
                _polish(s, w, b, v, j, lam)
        for k in range(p):
            if k != j:
                w[k, j] = v[k]
                w[j, k] = v[k]


MAX_INNER = 1000


def _precision(w, b):
    wb = np.einsum("ij,ij->j", w, b)
    d = 1.0 / (np.diag(w) - wb)
    theta = -b * d[None, :]
    np.fill_diagonal(theta, d)
    return (theta + theta.T) / 2.0


def glasso_kkt_residual(s, theta, lam):
    """Largest violation of the graphical lasso stationarity conditions.

    With ``R = S - inv(Theta)``: diagonal ``|R_ii|``; active off-diagonal
    ``|R_ij + lam * sign(Theta_ij)|``; inactive ``max(0, |R_ij| - lam)``.
    """
    r = s - np.linalg.inv(theta)
    r = (r + r.T) / 2.0
    res = np.where(theta != 0, np.abs(r + lam * np.sign(theta)),
                   np.maximum(np.abs(r) - lam, 0.0))
    np.fill_diagonal(res, np.abs(np.diag(r)))
    return float(res.max())


def ridge_for(sigma, rel=1e-4):
    """Diagonal shift making `sigma` safely positive definite."""
    lo = np.linalg.eigvalsh(sigma)[0]
    return max(0.0, rel * float(np.mean(np.diag(sigma))) - lo)


def _solve(s, w, b, lam, tol, max_iter, inner_tol):
    """Sweep until the KKT residual drops to `tol`; None on breakdown."""
    kkt = np.inf
    theta = None
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        _sweep(s, w, b, float(lam), inner_tol, MAX_INNER)
        theta = _precision(w, b)
        if not np.all(np.isfinite(theta)):
            return None
        try:
            kkt = glasso_kkt_residual(s, theta, lam)
        except np.linalg.LinAlgError:
            return None
        if kkt <= tol:
            converged = True
            break
    try:
        np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        return None
    return theta, kkt, sweeps, converged, w, b


def graphical_lasso(sigma, lam, tol=1e-6, max_iter=1000,
                    edge_tolerance=DEFAULT_EDGE_TOL, warm_start=None):
    """Sparse precision estimate from a (completed) covariance.

    Parameters
    ----------
    sigma : (p, p) array
        Symmetric covariance. A ridge ``delta * I`` with
        ``delta = max(0, 1e-4 * mean(diag) - min eigenvalue)`` is added
        first and reported as ``info["ridge"]``.
    lam : float
        Off-diagonal l1 penalty.
    tol : float
        Exit once the stationarity residual is at most `tol`.
    max_iter : int
        Maximum number of column sweeps.
    warm_start : PrecisionGraph, optional
        Earlier solution on the same input whose working covariance and
        regression coefficients seed this solve.

    Returns
    -------
    PrecisionGraph
        ``converged`` is False when sweeps ran out; ``info["kkt"]`` holds
        the final residual either way.
    """
    if isinstance(sigma, CompletedCovariance):
        sigma = sigma.sigma_tilde
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("sigma must be square")
    if np.max(np.abs(s - s.T)) > 1e-10 * max(1.0, float(np.max(np.abs(s)))):
        raise ValueError("sigma must be symmetric")
    s = (s + s.T) / 2.0
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    p = s.shape[0]
    delta = ridge_for(s)
    s = s + delta * np.eye(p)
    scale = float(np.mean(np.diag(s)))
    inner_tol = 0.1 * min(tol, 1e-6) * scale
    run = None
    if warm_start is not None and "state" in warm_start.info:
        w0, b0 = warm_start.info["state"]
        # pull the old working covariance into the new feasible box
        w = s + np.clip(w0 - s, -lam, lam)
        np.fill_diagonal(w, np.diag(s))
        try:
            np.linalg.cholesky(w)
            run = _solve(s, w, np.array(b0, copy=True), lam, tol, max_iter,
                         inner_tol)
        except np.linalg.LinAlgError:
            run = None
    if run is None:
        run = _solve(s, s.copy(), np.zeros((p, p)), lam, tol, max_iter,
                     inner_tol)
    if run is None:
        raise np.linalg.LinAlgError("working covariance lost positive "
                                    "definiteness")
    theta, kkt, sweeps, converged, w, b = run
    info = {"ridge": delta, "kkt": kkt, "n_sweeps": sweeps,
            "state": (w, b)}
    return PrecisionGraph(theta, float(lam), edge_tolerance,
                          converged=converged, info=info)


def edge_set(graph):
    """Sorted list of pairs ``(i, j)``, ``i < j``, with ``|Theta_ij| > tol``."""
    return sorted(graph.edges())


def max_offdiag(sigma):
    """Smallest penalty that empties the graph."""
    a = np.abs(np.asarray(sigma, dtype=float))
    np.fill_diagonal(a, 0.0)
    return float(a.max())


def zero_impute(obs):
    """Fill every unobserved covariance entry with zero."""
    return CompletedCovariance(obs.filled(0.0), EXACT, obs.p, 0.0,
                               info={"method": "zero"})

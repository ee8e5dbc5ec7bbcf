"""Low-rank factor completion by gradient descent with backtracking."""

from __future__ import annotations

import numpy as np

from .types import EXACT, SPIKED, CompletedCovariance, symmetrize


def factor_objective(u, s, mask, sigma2=0.0):
    """``0.5 * ||(U U^T + sigma2 I - S)_O||_F^2``."""
    r = np.where(mask, u @ u.T + sigma2 * np.eye(u.shape[0]) - s, 0.0)
    return 0.5 * float(np.sum(r * r))


def factor_gradient(u, s, mask, sigma2=0.0):
    """Gradient of :func:`factor_objective` in ``U``: ``2 (M * R) U``."""
    r = np.where(mask, u @ u.T + sigma2 * np.eye(u.shape[0]) - s, 0.0)
    return 2.0 * symmetrize(r) @ u


def sigma2_update(u, s):
    """Best noise level for a fixed factor, floored at zero."""
    return max(0.0, float(np.mean(s.diagonal() - np.einsum("ij,ij->i", u, u))))


def truncated_factor(m, r):
    """``p x r`` factor from the top-r eigenpairs of `m` (clipped at 0)."""
    w, q = np.linalg.eigh(symmetrize(np.asarray(m, dtype=float)))
    idx = np.argsort(w)[::-1][:r]
    f = q[:, idx] * np.sqrt(np.maximum(w[idx], 0.0))
    if f.shape[1] < r:
        f = np.hstack([f, np.zeros((f.shape[0], r - f.shape[1]))])
    return f


def _initial_factor(obs, r, init, mode):
    from .bsvd import bsvd_complete

    if init is None:
        init = bsvd_complete(obs, r, mode=mode)
    if isinstance(init, CompletedCovariance):
        s2 = init.sigma2_hat if mode == SPIKED else 0.0
        if init.factor is not None and init.factor.shape[1] == r:
            u = np.array(init.factor, copy=True)
        else:
            u = truncated_factor(init.sigma_tilde - init.sigma2_hat * np.eye(obs.p), r)
        if mode == SPIKED and init.model_kind != SPIKED:
            s2 = None
        return u, s2
    u = np.array(init, dtype=float, copy=True)
    if u.shape != (obs.p, r):
        raise ValueError(f"initial factor must have shape {(obs.p, r)}")
    return u, None


def _descend(obs, r, init, mode, tol, max_iter, step0, armijo, max_halvings,
             patience, gtol, keep_history):
    s = obs.filled(0.0)
    mask = obs.mask
    u, s2 = _initial_factor(obs, r, init, mode)
    if mode == SPIKED:
        s2 = sigma2_update(u, s) if s2 is None else s2
    else:
        s2 = 0.0
    obj = factor_objective(u, s, mask, s2)
    history = [obj]
    step = step0
    quiet = 0
    converged = False
    it = 0
    g = factor_gradient(u, s, mask, s2)
    while it < max_iter:
        gnorm2 = float(np.sum(g * g))
        if obj == 0.0 or np.sqrt(gnorm2) <= gtol:
            converged = True
            break
        it += 1
        t = min(step0, 2.0 * step)
        for _ in range(max_halvings + 1):
            cand = u - t * g
            new = factor_objective(cand, s, mask, s2)
            if new <= obj - armijo * t * gnorm2:
                break
            t /= 2.0
        else:
            # no acceptable step along the gradient: numerically stationary
            converged = True
            break
        step = t
        u = cand
        if mode == SPIKED:
            s2 = sigma2_update(u, s)
            new = factor_objective(u, s, mask, s2)
        dec = obj - new
        obj = new
        if keep_history:
            history.append(obj)
        quiet = quiet + 1 if dec <= tol * max(abs(obj), 1e-300) else 0
        g = factor_gradient(u, s, mask, s2)
        if quiet >= patience:
            converged = True
            break
    info = {"method": "lrf", "n_iter": it, "objective": obj,
            "grad_norm": float(np.linalg.norm(g))}
    if keep_history:
        info["history"] = history
    return u, s2, converged, info


def lrf_complete_exact(obs, r, init=None, tol=1e-9, max_iter=20000,
                       step0=1e-2, armijo=1e-4, max_halvings=50, patience=5,
                       gtol=1e-10, keep_history=False):
    """Minimize ``0.5 * ||(U U^T)_O - S_O||_F^2`` over ``p x r`` factors.

    Parameters
    ----------
    obs : ObservedCovariance
    r : int
    init : CompletedCovariance or (p, r) array, optional
        Starting point; a completed covariance is used through its factor
        or its top-r eigenpairs. Defaults to the block-SVD completion.
    tol : float
        Stop once the relative objective decrease stays below `tol` for
        `patience` consecutive iterations.
    step0 : float
        Largest trial step; each iteration starts from
        ``min(step0, 2 * previous step)`` and halves until the Armijo
        condition with constant `armijo` holds.
    """
    u, _, converged, info = _descend(obs, r, init, EXACT, tol, max_iter, step0,
                                     armijo, max_halvings, patience, gtol,
                                     keep_history)
    sigma = symmetrize(u @ u.T)
    return CompletedCovariance(sigma, EXACT, r, 0.0, factor=u,
                               converged=converged, info=info)


def lrf_complete_spiked(obs, r, init=None, tol=1e-9, max_iter=20000,
                        step0=1e-2, armijo=1e-4, max_halvings=50, patience=5,
                        gtol=1e-10, keep_history=False):
    """Minimize ``0.5 * ||(H H^T + s2 I)_O - S_O||_F^2`` over ``H`` and ``s2 >= 0``.

    Gradient steps in ``H`` alternate with the closed-form ``s2`` update.
    """
    h, s2, converged, info = _descend(obs, r, init, SPIKED, tol, max_iter,
                                      step0, armijo, max_halvings, patience,
                                      gtol, keep_history)
    sigma = symmetrize(h @ h.T + s2 * np.eye(obs.p))
    return CompletedCovariance(sigma, SPIKED, r, s2, factor=h,
                               converged=converged, info=info)

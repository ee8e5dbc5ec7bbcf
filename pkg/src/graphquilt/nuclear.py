"""Nuclear-norm penalized completion by proximal gradient (soft-impute).

The smooth part ``0.5 * ||(X - S)_O||_F^2`` has a gradient that is
1-Lipschitz, so a unit step is always valid and the gradient step reduces
to overwriting the observed entries with the data.
"""

from __future__ import annotations

import numpy as np

from .types import EXACT, SPIKED, CompletedCovariance, symmetrize


def _shrink(w, threshold):
    return np.sign(w) * np.maximum(np.abs(w) - threshold, 0.0)


def _svt_eig(m, threshold):
    w, q = np.linalg.eigh(m)
    ws = _shrink(w, threshold)
    return symmetrize((q * ws) @ q.T), ws


def svt(m, threshold):
    """Singular value soft-thresholding of a symmetric matrix.

    Eigenvalues move toward zero by `threshold` and stop at zero; for a
    symmetric matrix this is the proximal map of ``threshold * ||.||_*``.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    m = np.asarray(m, dtype=float)
    if threshold == 0:
        return m.copy()
    return _svt_eig(symmetrize(m), threshold)[0]


def nuclear_objective(x, s, mask, nu, sigma2=0.0):
    """``0.5 * ||(X + sigma2 I - S)_O||_F^2 + nu * ||X||_*``."""
    r = np.where(mask, x + sigma2 * np.eye(x.shape[0]) - s, 0.0)
    return 0.5 * float(np.sum(r * r)) + nu * float(
        np.sum(np.abs(np.linalg.eigvalsh(symmetrize(x)))))


def nuclear_kkt_residual(x, grad, nu, rel=1e-9):
    """Distance of ``-grad`` from ``nu`` times the nuclear-norm subdifferential.

    With ``x = Q diag(w) Q^T`` and active set ``|w| > rel * max|w|``, the
    optimality conditions are ``Qa^T G Qa = nu * diag(sign(wa))``,
    ``Qa^T G Qp = 0`` and ``||Qp^T G Qp||_2 <= nu`` for ``G = -grad``.
    Returns the largest violation.
    """
    g = -symmetrize(grad)
    w, q = np.linalg.eigh(symmetrize(x))
    cut = rel * max(np.max(np.abs(w)), 1e-300)
    act = np.abs(w) > cut
    qa, qp = q[:, act], q[:, ~act]
    r1 = np.max(np.abs(qa.T @ g @ qa - nu * np.diag(np.sign(w[act]))),
                initial=0.0)
    r2 = np.max(np.abs(qa.T @ g @ qp), initial=0.0)
    if qp.shape[1]:
        r3 = max(0.0, np.max(np.abs(np.linalg.eigvalsh(qp.T @ g @ qp))) - nu)
    else:
        r3 = 0.0
    return float(max(r1, r2, r3))


def _numerical_rank(w, rel=1e-9):
    a = np.abs(w)
    return int(np.sum(a > rel * max(a.max(initial=0.0), 1e-300)))


def _prox_gradient(s, mask, nu, noise_level, tol, max_iter, keep_history,
                   accelerate):
    """Unit-step proximal gradient on ``X -> f(X) + nu * ||X||_*``.

    ``noise_level(X)`` returns the optimal diagonal offset for ``X`` (zero
    in exact mode), so ``f`` is the smooth part with that offset profiled
    out; its gradient is the masked residual and stays 1-Lipschitz.

    With `accelerate`, steps are taken from an extrapolated point and the
    momentum is dropped whenever such a step would raise the objective, in
    which case a plain step from the current iterate is taken instead.
    Accepted iterates therefore never increase the objective.
    """
    eye = np.eye(s.shape[0])

    def step(y):
        x, w = _svt_eig(np.where(mask, s - noise_level(y) * eye, y), nu)
        s2 = noise_level(x)
        r = np.where(mask, x + s2 * eye - s, 0.0)
        return x, 0.5 * float(np.sum(r * r)) + nu * float(np.sum(np.abs(w)))

    x = np.where(mask, s - noise_level(s) * eye, 0.0)
    obj = nuclear_objective(x, s, mask, nu, noise_level(x))
    history = [obj]
    y, t = x, 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z, new = step(y)
        if new > obj and y is not x:
            z, new = step(x)
            t = 1.0
        if keep_history:
            history.append(new)
        dec = obj - new
        if accelerate:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = z + ((t - 1.0) / t_next) * (z - x)
            t = t_next
        else:
            y = z
        x, obj = z, new
        if dec <= tol * max(abs(obj), 1e-300):
            converged = True
            break
    return x, obj, it, converged, history


def nn_complete_exact(obs, nu, tol=1e-8, max_iter=10000, keep_history=False,
                      accelerate=True):
    """Minimize ``0.5 * ||(X - S)_O||_F^2 + nu * ||X||_*`` over symmetric X.

    Starts from the zero-filled observations and stops when the relative
    objective decrease falls below `tol`. ``accelerate=False`` gives the
    plain unit-step iteration.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    s = obs.filled(0.0)
    mask = obs.mask
    x, obj, it, converged, history = _prox_gradient(
        s, mask, nu, lambda x: 0.0, tol, max_iter, keep_history, accelerate)
    grad = np.where(mask, x - s, 0.0)
    w = np.linalg.eigvalsh(x)
    info = {"method": "nn", "nu": nu, "n_iter": it, "objective": obj,
            "kkt": nuclear_kkt_residual(x, grad, nu)}
    if keep_history:
        info["history"] = history
    return CompletedCovariance(x, EXACT, _numerical_rank(w), 0.0,
                               converged=converged, info=info)


def nn_complete_spiked(obs, nu, tol=1e-8, max_iter=10000, keep_history=False,
                       accelerate=True):
    """Minimize ``0.5 * ||(L + s2 I - S)_O||_F^2 + nu * ||L||_*``.

    Each proximal gradient step in ``L`` is paired with the exact update
    ``s2 = max(0, mean_i(S_ii - L_ii))``, which minimizes over ``s2`` for
    the current ``L``. Returns ``L + s2 I``.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    s = obs.filled(0.0)
    mask = obs.mask
    p = obs.p
    diag = s.diagonal()

    def noise_level(low):
        return max(0.0, float(np.mean(diag - low.diagonal())))

    low, obj, it, converged, history = _prox_gradient(
        s, mask, nu, noise_level, tol, max_iter, keep_history, accelerate)
    s2 = noise_level(low)
    grad = np.where(mask, low + s2 * np.eye(p) - s, 0.0)
    info = {"method": "nn", "nu": nu, "n_iter": it, "objective": obj,
            "kkt": nuclear_kkt_residual(low, grad, nu)}
    if keep_history:
        info["history"] = history
    sigma = symmetrize(low + s2 * np.eye(p))
    return CompletedCovariance(sigma, SPIKED,
                               _numerical_rank(np.linalg.eigvalsh(low)), s2,
                               low_rank_part=low, converged=converged,
                               info=info)

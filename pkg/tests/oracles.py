"""Independent reference computations used as test oracles.

Nothing here imports the package; each routine is a deliberately naive
implementation of the quantity it checks.
"""

import itertools
import math

import numpy as np


def pooled_covariance_bruteforce(blocks, p):
    """Pooled moment covariance by explicit enumeration of every sum.

    `blocks` is a list of ``(rows, node_ids)`` with rows a list of lists.
    Returns a p x p array with nan for never-jointly-observed pairs.
    """
    out = np.full((p, p), np.nan)
    for i in range(p):
        for j in range(p):
            cross_sum, cross_n = 0.0, 0
            sum_i, n_i, sum_j, n_j = 0.0, 0, 0.0, 0
            for rows, ids in blocks:
                ids = list(ids)
                if i in ids:
                    a = ids.index(i)
                    for row in rows:
                        sum_i += row[a]
                        n_i += 1
                if j in ids:
                    b = ids.index(j)
                    for row in rows:
                        sum_j += row[b]
                        n_j += 1
                if i in ids and j in ids:
                    a, b = ids.index(i), ids.index(j)
                    for row in rows:
                        cross_sum += row[a] * row[b]
                        cross_n += 1
            if cross_n:
                out[i, j] = cross_sum / cross_n - (sum_i / n_i) * (sum_j / n_j)
    return out


def alternating_psd_projection(x, mask, floor=0.0, tol=1e-10, max_iter=100000):
    """Plain alternating projections: eigenvalue clipping, then zeroing
    entries outside the mask, until the iterate stops moving."""
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        w, q = np.linalg.eigh((x + x.T) / 2)
        y = q @ np.diag(np.maximum(w, floor)) @ q.T
        z = np.where(mask, y, 0.0)
        if np.max(np.abs(z - x)) < tol:
            return z
        x = z
    return x


def rotation_grid_procrustes(a, b, steps=20000):
    """Smallest ||a - b W||_F over 2x2 rotations and reflections.

    A fine angle grid is refined by golden-section search around the best
    grid point for each family.
    """
    def rot(t, flip):
        c, s = math.cos(t), math.sin(t)
        return np.array([[c, -s], [s, c]]) if not flip else np.array([[c, s], [s, -c]])

    def f(t, flip):
        return float(np.linalg.norm(a - b @ rot(t, flip)))

    best = math.inf
    for flip in (False, True):
        grid = np.linspace(0, 2 * math.pi, steps, endpoint=False)
        vals = [f(t, flip) for t in grid]
        k = int(np.argmin(vals))
        lo, hi = grid[k] - 2 * math.pi / steps, grid[k] + 2 * math.pi / steps
        g = (math.sqrt(5) - 1) / 2
        for _ in range(200):
            m1, m2 = hi - g * (hi - lo), lo + g * (hi - lo)
            if f(m1, flip) < f(m2, flip):
                hi = m2
            else:
                lo = m1
        best = min(best, f((lo + hi) / 2, flip), vals[k])
    return best


def svt_by_svd(m, threshold):
    """Singular-value-space shrinkage of a symmetric matrix.

    Uses a general SVD and restores signs through the eigenvector
    correlation, independent of an eigendecomposition-based routine.
    """
    u, s, vt = np.linalg.svd(m)
    shrunk = np.maximum(s - threshold, 0.0)
    return (u * shrunk) @ vt


def nn_objective(x, s, mask, nu, sigma2=0.0):
    r = np.where(mask, x + sigma2 * np.eye(len(x)) - s, 0.0)
    return 0.5 * float(np.sum(r * r)) + nu * float(np.sum(np.abs(np.linalg.eigvalsh(x))))


def nn_subgradient(s, mask, nu, iters=1_000_000, step0=0.5):
    """Projected-free subgradient descent on the symmetric nuclear-norm
    completion objective with a 1/sqrt(k) step; returns the best value."""
    x = np.where(mask, s, 0.0)
    best = nn_objective(x, s, mask, nu)
    for k in range(1, iters + 1):
        w, q = np.linalg.eigh(x)
        g = np.where(mask, x - s, 0.0) + nu * (q * np.sign(w)) @ q.T
        x = x - step0 / math.sqrt(k) * g
        x = (x + x.T) / 2
        if k % 10 == 0 or k < 1000:
            val = nn_objective(x, s, mask, nu)
            if val < best:
                best = val
    return best


def nn_cvxpy(s, mask, nu, spiked=False):
    """Convex reference solution of the nuclear-norm completion problem."""
    import cvxpy as cp

    p = s.shape[0]
    x = cp.Variable((p, p), symmetric=True)
    m = mask.astype(float)
    if spiked:
        t = cp.Variable(nonneg=True)
        resid = cp.multiply(m, x + t * np.eye(p) - s)
    else:
        resid = cp.multiply(m, x - s)
    obj = 0.5 * cp.sum_squares(resid) + nu * cp.normNuc(x)
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10,
               tol_feas=1e-10)
    return float(prob.value)


def glasso_2x2(s, lam):
    """2x2 graphical lasso by solving the stationarity system numerically.

    For a fixed off-diagonal ``t`` the diagonal stationarity conditions
    ``s11 = t22 / det`` and ``s22 = t11 / det`` have the closed-form solution
    ``t11 = s22 a``, ``t22 = s11 a`` with ``s11 s22 a^2 - a - t^2 = 0``. The
    remaining condition ``s12 + t / det + lam sign(t) = 0`` (or the zero
    subgradient condition ``|s12| <= lam``) is solved by bisection.
    """
    s11, s12, s22 = s[0, 0], s[0, 1], s[1, 1]

    def diag_for(t):
        a = (1 + math.sqrt(1 + 4 * s11 * s22 * t * t)) / (2 * s11 * s22)
        return s22 * a, s11 * a

    if abs(s12) <= lam:
        t11, t22 = diag_for(0.0)
        return np.array([[t11, 0.0], [0.0, t22]])
    sgn = -math.copysign(1.0, s12)

    def g(t):
        t11, t22 = diag_for(t)
        return s12 + t / (t11 * t22 - t * t) + lam * sgn

    lo, hi = 0.0, sgn * 1.0
    while g(hi) * g(lo) > 0:
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if g(mid) * g(lo) > 0:
            lo = mid
        else:
            hi = mid
    t = (lo + hi) / 2
    t11, t22 = diag_for(t)
    return np.array([[t11, t], [t, t22]])


def frobenius_double_loop(a, b):
    total = 0.0
    for i in range(len(a)):
        for j in range(len(a[0])):
            total += (a[i][j] - b[i][j]) ** 2
    return math.sqrt(total)


def max_abs_double_loop(a, b):
    best = 0.0
    for i in range(len(a)):
        for j in range(len(a[0])):
            best = max(best, abs(a[i][j] - b[i][j]))
    return best


def central_difference_gradient(f, u, h=1e-5):
    g = np.zeros_like(u)
    for idx in itertools.product(*map(range, u.shape)):
        e = np.zeros_like(u)
        e[idx] = h
        g[idx] = (f(u + e) - f(u - e)) / (2 * h)
    return g


def spiked_alternating(s, mask, nu, iters=1_000_000, step0=0.5):
    """Subgradient steps in L alternated with the exact noise-level update;
    returns the best objective seen."""
    p = len(s)
    eye = np.eye(p)
    diag = np.diag(s)
    low = np.where(mask, s, 0.0)
    s2 = max(0.0, float(np.mean(diag - np.diag(low))))
    best = nn_objective(low, s, mask, nu, s2)
    for k in range(1, iters + 1):
        w, q = np.linalg.eigh(low)
        g = np.where(mask, low + s2 * eye - s, 0.0) + nu * (q * np.sign(w)) @ q.T
        low = low - step0 / math.sqrt(k) * g
        low = (low + low.T) / 2
        s2 = max(0.0, float(np.mean(diag - np.diag(low))))
        if k % 10 == 0 or k < 1000:
            val = nn_objective(low, s, mask, nu, s2)
            if val < best:
                best = val
    return best


# -- fixed test instances shared by the freezing script and the tests --------

COV_BLOCKS = [
    ([[1, 2, 0], [3, -1, 2], [0, 1, 4], [2, 2, -2]], [0, 1, 2]),
    ([[5, 1, 0], [-1, 0, 3], [2, -3, 1], [1, 2, 2]], [2, 3, 4]),
]


def psd_instance():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(5, 5))
    return (a + a.T) / 2


def masked_psd_instance():
    a = psd_instance()
    mask = np.zeros((5, 5), dtype=bool)
    mask[:3, :3] = True
    mask[2:, 2:] = True
    return np.where(mask, a, 0.0), mask


def procrustes_instance():
    rng = np.random.default_rng(11)
    return rng.normal(size=(5, 2)), rng.normal(size=(5, 2))


def nn_instance(noise=0.0):
    rng = np.random.default_rng(3)
    u = rng.normal(size=(5, 2))
    s = u @ u.T + noise * np.eye(5)
    mask = np.zeros((5, 5), dtype=bool)
    mask[:3, :3] = True
    mask[2:, 2:] = True
    return np.where(mask, s, 0.0), mask


NN_NU = 0.05
GLASSO_S = np.array([[1.0, 0.5], [0.5, 1.0]])
GLASSO_LAM = 0.1

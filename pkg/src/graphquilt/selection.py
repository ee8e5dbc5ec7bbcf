"""Hyperparameter selection: rank by BIC, nuclear penalty by held-out
entries, graph sparsity by edge-selection stability."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bsvd import InsufficientOverlapError, bsvd_complete
from .covariance import BlockData, compute_block_covariance
from .factor import lrf_complete_exact, lrf_complete_spiked
from .glasso import graphical_lasso, max_offdiag, zero_impute
from .metrics import f1_score
from .nuclear import nn_complete_exact, nn_complete_spiked
from .types import EXACT, SPIKED, ObservedCovariance


def observed_rss(sigma, obs):
    """Squared residual over distinct observed entries (upper triangle
    including the diagonal) and the number of such entries."""
    up = np.triu(obs.mask)
    r = (np.asarray(sigma) - obs.filled(0.0))[up]
    return float(np.sum(r * r)), int(up.sum())


def rank_param_count(p, r, mode=EXACT):
    """Free parameters of a symmetric rank-r factorization (+1 for s2)."""
    k = p * r - r * (r - 1) // 2
    return k + 1 if mode == SPIKED else k


def select_rank_bic(obs, ranks, mode=EXACT, solver="bsvd", nuclear=False,
                    rss_floor=1e-12, **solver_kw):
    """Pick the rank minimizing ``N log(RSS/N) + k(r) log N``.

    ``N`` counts the distinct observed entries and ``RSS`` their squared
    residual. RSS is floored at ``rss_floor`` times the total observed sum
    of squares so exact fits do not send the score to minus infinity. With
    ``nuclear=True`` the parameter count uses the soft rank
    ``||L||_* / ||L||_2`` of the fitted low-rank part instead of r.
    Infeasible candidates (for example too little block overlap) are
    skipped and noted. Ties go to the smaller rank.

    Returns
    -------
    best : int
    table : list of dict
        One row per candidate: rank, rss, n_obs, k, score, feasible, note.
    """
    if solver not in ("bsvd", "lrf"):
        raise ValueError("solver must be 'bsvd' or 'lrf'")
    ranks = sorted(set(int(r) for r in ranks))
    if not ranks:
        raise ValueError("no candidate ranks")
    total = float(np.sum(obs.filled(0.0)[np.triu(obs.mask)] ** 2))
    table = []
    for r in ranks:
        row = {"rank": r, "rss": np.nan, "n_obs": 0, "k": np.nan,
               "score": np.inf, "feasible": True, "note": ""}
        try:
            if solver == "bsvd":
                fit = bsvd_complete(obs, r, mode=mode, **solver_kw)
            else:
                f = lrf_complete_spiked if mode == SPIKED else lrf_complete_exact
                fit = f(obs, r, **solver_kw)
        except InsufficientOverlapError as exc:
            row.update(feasible=False, note=str(exc))
            table.append(row)
            continue
        rss, n = observed_rss(fit.sigma_tilde, obs)
        if nuclear:
            w = np.abs(np.linalg.eigvalsh(fit.sigma_tilde - fit.sigma2_hat * np.eye(obs.p)))
            soft = float(w.sum() / max(w.max(), 1e-300))
            k = obs.p * soft - soft * (soft - 1) / 2 + (1 if mode == SPIKED else 0)
        else:
            k = rank_param_count(obs.p, r, mode)
        floor = rss_floor * max(total, 1e-300)
        score = n * np.log(max(rss, floor) / n) + k * np.log(n)
        row.update(rss=rss, n_obs=n, k=k, score=float(score))
        table.append(row)
    feasible = [row for row in table if row["feasible"]]
    if not feasible:
        raise ValueError("no feasible candidate rank")
    best = min(feasible, key=lambda row: (row["score"], row["rank"]))["rank"]
    return best, table


def offdiag_pairs(mask):
    ii, jj = np.nonzero(np.triu(mask, 1))
    return np.stack([ii, jj], axis=1)


def holdout_folds(obs, holdout_fraction, folds, seed):
    """Held-out observed off-diagonal pairs for each fold.

    Folds are disjoint whenever ``folds * holdout_fraction <= 1``.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie strictly between 0 and 1")
    if folds < 1:
        raise ValueError("need at least one fold")
    pairs = offdiag_pairs(obs.mask)
    if len(pairs) == 0:
        raise ValueError("no observed off-diagonal pairs to hold out")
    rng = np.random.default_rng(seed)
    h = max(1, int(round(holdout_fraction * len(pairs))))
    out = []
    if folds * h <= len(pairs):
        perm = rng.permutation(len(pairs))
        for f in range(folds):
            out.append(pairs[perm[f * h:(f + 1) * h]])
    else:
        for f in range(folds):
            out.append(pairs[rng.choice(len(pairs), size=h, replace=False)])
    return out


def _drop_pairs(mask, pairs):
    m = mask.copy()
    m[pairs[:, 0], pairs[:, 1]] = False
    m[pairs[:, 1], pairs[:, 0]] = False
    return m


def cv_errors(obs, nu_grid, folds_pairs, mode=EXACT, **nn_kw):
    """Held-out squared error for every (nu, fold)."""
    solve = nn_complete_spiked if mode == SPIKED else nn_complete_exact
    full = obs.filled(0.0)
    errs = np.zeros((len(nu_grid), len(folds_pairs)))
    for f, pairs in enumerate(folds_pairs):
        reduced = obs.with_mask(_drop_pairs(obs.mask, pairs))
        for a, nu in enumerate(nu_grid):
            fit = solve(reduced, nu, **nn_kw)
            d = fit.sigma_tilde[pairs[:, 0], pairs[:, 1]] - full[pairs[:, 0], pairs[:, 1]]
            errs[a, f] = float(np.mean(d * d))
    return errs


def select_nu_cv(obs, nu_grid, holdout_fraction=0.05, folds=5, seed=0,
                 mode=EXACT, **nn_kw):
    """Choose the nuclear penalty by held-out observed entries.

    Each fold hides a random share of observed off-diagonal pairs
    (symmetrically), refits on the rest and scores squared error on the
    hidden pairs. Ties go to the larger penalty.

    Returns
    -------
    best : float
    table : list of dict
        ``nu``, ``mean_error`` and per-fold ``errors``.
    """
    nu_grid = [float(v) for v in nu_grid]
    if not nu_grid:
        raise ValueError("empty nu grid")
    fp = holdout_folds(obs, holdout_fraction, folds, seed)
    errs = cv_errors(obs, nu_grid, fp, mode=mode, **nn_kw)
    means = errs.mean(axis=1)
    lo = means.min()
    tied = [a for a in range(len(nu_grid))
            if means[a] <= lo + 1e-12 * max(abs(lo), 1e-300)]
    best = max(nu_grid[a] for a in tied)
    table = [{"nu": nu_grid[a], "mean_error": float(means[a]),
              "errors": errs[a].tolist()} for a in range(len(nu_grid))]
    return best, table


@dataclass
class StabilityResult:
    lam: float
    lambdas: list
    instability: list
    monotone: list
    warning: bool = False
    edge_frequency: dict = field(default_factory=dict)


def _edge_matrix(graph):
    return np.triu(np.abs(graph.theta) > graph.edge_tolerance, 1)


def _path(sigma, lambdas, **glasso_kw):
    """Graphs along a decreasing penalty path, warm-started."""
    out = {}
    prev = None
    for lam in sorted(lambdas, reverse=True):
        prev = graphical_lasso(sigma, lam, warm_start=prev, **glasso_kw)
        out[lam] = prev
    return out


def instability_curve(edge_stacks):
    """Mean of ``2 q (1 - q)`` over node pairs, q the selection frequency."""
    out = []
    for stack in edge_stacks:
        q = np.mean(stack, axis=0)
        p = q.shape[0]
        iu = np.triu_indices(p, 1)
        out.append(float(np.mean(2 * q[iu] * (1 - q[iu]))) if len(iu[0]) else 0.0)
    return out


def _resample(source, rng, ratio, jackknife_fraction):
    if isinstance(source, BlockData):
        return compute_block_covariance(source.subsample(ratio, rng))
    pairs = offdiag_pairs(source.mask)
    h = int(round(jackknife_fraction * len(pairs)))
    drop = pairs[rng.choice(len(pairs), size=h, replace=False)] if h else pairs[:0]
    return source.with_mask(_drop_pairs(source.mask, drop))


def select_lambda_stability(source, lambda_grid, complete=None,
                            subsample_count=20, ratio=0.8, threshold=0.05,
                            seed=0, jackknife_fraction=0.05,
                            post_completion=False, **glasso_kw):
    """StARS-style sparsity selection.

    Parameters
    ----------
    source : BlockData or ObservedCovariance
        With block data every subsample keeps `ratio` of the rows of each
        block and recomputes the observed covariance. With only an observed
        covariance each resample deletes `jackknife_fraction` of the
        observed off-diagonal pairs.
    complete : callable, optional
        Maps an ObservedCovariance to a CompletedCovariance; defaults to
        zero imputation. It runs inside every resample unless
        `post_completion` is set, in which case the source is completed
        once and its imputed values fill the unobserved entries of every
        resample.
    threshold : float
        Largest tolerated instability.

    Returns
    -------
    StabilityResult
        ``lam`` is the smallest penalty whose monotonized instability
        (the maximum over all larger penalties) stays within `threshold`,
        i.e. the densest stable graph. If even the largest penalty is
        unstable it is returned with ``warning`` set.
    """
    complete = complete or zero_impute
    lambdas = sorted(float(v) for v in lambda_grid)
    if not lambdas:
        raise ValueError("empty lambda grid")
    rng = np.random.default_rng(seed)
    base_fill = None
    if post_completion:
        base = (compute_block_covariance(source)
                if isinstance(source, BlockData) else source)
        base_fill = complete(base).sigma_tilde
    stacks = {lam: [] for lam in lambdas}
    for _ in range(subsample_count):
        obs = _resample(source, rng, ratio, jackknife_fraction)
        if base_fill is not None:
            sigma = np.where(obs.mask, obs.filled(0.0), base_fill)
        else:
            sigma = complete(obs).sigma_tilde
        for lam, g in _path(sigma, lambdas, **glasso_kw).items():
            stacks[lam].append(_edge_matrix(g))
    curve = instability_curve([np.array(stacks[lam]) for lam in lambdas])
    mono = [max(curve[i:]) for i in range(len(curve))]
    ok = [i for i, d in enumerate(mono) if d <= threshold]
    warn = not ok
    if warn:
        warnings.warn("every penalty exceeds the instability threshold; "
                      "returning the largest", RuntimeWarning, stacklevel=2)
        pick = len(lambdas) - 1
    else:
        pick = ok[0]
    freq = {lam: np.mean(stacks[lam], axis=0) for lam in lambdas}
    return StabilityResult(lambdas[pick], lambdas, curve, mono, warn, freq)


def edge_count(graph):
    return int(np.count_nonzero(_edge_matrix(graph)))


def lambda_grid(sigma, num=30, min_ratio=1e-2):
    """Log-spaced decreasing penalties from the empty-graph threshold."""
    top = max_offdiag(sigma)
    if top <= 0:
        return np.array([0.0])
    return top * np.logspace(0.0, np.log10(min_ratio), num)


def best_f1_lambda(sigma, true_edges, grid=None, stop_factor=3.0, **glasso_kw):
    """Penalty on `grid` whose graph has the best F1 against `true_edges`.

    The path is walked from the largest penalty down with warm starts and
    abandoned once the graph holds more than ``stop_factor`` times the true
    number of edges (plus p). Ties go to the larger penalty.

    Returns
    -------
    graph : PrecisionGraph
    f1 : float
    """
    if grid is None:
        grid = lambda_grid(sigma)
    truth = set(true_edges)
    p = np.asarray(sigma).shape[0]
    cap = stop_factor * len(truth) + p
    best, best_f1, prev = None, -1.0, None
    for lam in sorted(grid, reverse=True):
        g = graphical_lasso(sigma, lam, warm_start=prev, **glasso_kw)
        f = f1_score(g.edges(), truth)
        if f > best_f1:
            best, best_f1 = g, f
        prev = g
        if edge_count(g) > cap:
            break
    return best, best_f1


def match_edge_count(sigma, target, shrink=0.5, min_ratio=1e-3,
                     search_steps=12, **glasso_kw):
    """Graph whose edge count is as close as possible to `target`.

    Walks down a geometric penalty path (warm-started) until the count
    reaches `target`, then narrows the last bracket by interpolating the
    count linearly in log-penalty (kept away from the bracket ends).
    Among equally close graphs the larger penalty wins.
    """
    top = max_offdiag(sigma)
    g = graphical_lasso(sigma, top, **glasso_kw)
    if target <= edge_count(g) or top <= 0:
        return g

    def closer(a, b):
        da, db = abs(edge_count(a) - target), abs(edge_count(b) - target)
        if da != db:
            return a if da < db else b
        return a if a.lam >= b.lam else b

    upper, lam = g, top
    while True:
        lam *= shrink
        lower = graphical_lasso(sigma, lam, warm_start=upper, **glasso_kw)
        if edge_count(lower) >= target or lam < top * min_ratio:
            break
        upper = lower
    best = closer(upper, lower)
    for _ in range(search_steps):
        cu, cl = edge_count(upper), edge_count(lower)
        if edge_count(best) == target or cl < target:
            break
        t = 0.5 if cl == cu else (target - cu) / (cl - cu)
        t = min(max(t, 0.1), 0.9)
        mid = float(np.exp(np.log(upper.lam) + t * (np.log(lower.lam) - np.log(upper.lam))))
        if not lower.lam < mid < upper.lam:
            break
        g = graphical_lasso(sigma, mid, warm_start=upper, **glasso_kw)
        if edge_count(g) < target:
            upper = g
        else:
            lower = g
        best = closer(best, g)
    return best

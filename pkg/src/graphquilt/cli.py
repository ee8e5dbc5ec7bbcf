"""Command-line interface.

Every subcommand exits 0 on success. On failure it prints one line
``error: <kind>: <message>`` to stderr and exits 2 for malformed input
files or configs, 1 otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings

import numpy as np

from . import harness, io
from .bsvd import bsvd_complete
from .covariance import compute_block_covariance, project_psd
from .factor import lrf_complete_exact, lrf_complete_spiked
from .glasso import graphical_lasso, zero_impute
from .metrics import edge_scores, frobenius_error, hub_overlap, infinity_error
from .nuclear import nn_complete_exact, nn_complete_spiked
from .selection import (lambda_grid, match_edge_count, select_lambda_stability,
                        select_nu_cv, select_rank_bic)
from .types import EXACT, SPIKED


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _scenario(args):
    if args.config:
        cfg = harness.load_config(args.config, args.scenario)
    else:
        cfg = harness.preset(args.preset or "sbm")
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "correlation", None) is not None:
        over["correlation"] = args.correlation
    return dataclasses.replace(cfg, **over) if over else cfg


def _add_scenario_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", help="scenario config file")
    g.add_argument("--preset", choices=sorted(harness.PRESETS),
                   help="built-in scenario instead of a config file")
    p.add_argument("--scenario", help="section of the config (default: first)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--correlation", action=argparse.BooleanOptionalAction,
                   default=None,
                   help="standardize data first and score against the true "
                        "correlation (default: config value)")


def cmd_simulate(args):
    cfg = _scenario(args)
    out = io.ensure_dir(args.out)
    rep = harness.make_replicate(cfg, args.replication)
    io.write_observed(out / "cov.csv", rep.obs, out / "mask.csv")
    io.write_matrix(out / "full_cov.csv", rep.full)
    io.write_design(out / "design.csv", rep.obs.blocks())
    if rep.data is not None:
        io.write_manifest(out / "manifest.csv", rep.data)
    if rep.truth is not None:
        io.write_matrix(out / "theta_star.csv", rep.truth.theta_star)
        io.write_matrix(out / "sigma_star.csv", rep.reference_cov)
    io.write_edges(out / "truth_edges.csv", rep.true_edges)
    (out / "scenario.cfg").write_text(harness.config_text(cfg))
    print(f"p={rep.obs.p} blocks={rep.obs.blocks().K} "
          f"true_edges={len(rep.true_edges)} out={out}")


def cmd_estimate_cov(args):
    data = io.read_manifest(args.manifest)
    obs = compute_block_covariance(data)
    if args.psd_project:
        obs = project_psd(obs, floor=args.floor)
    io.write_observed(args.out, obs, args.mask_out)
    print(f"p={obs.p} observed_fraction={obs.mask.mean():.6g}")


def _method(args):
    name = args.method
    if "-" in name:
        family, mode = name.split("-", 1)
    else:
        family, mode = name, args.mode
    if family not in ("bsvd", "nn", "lrf", "zero") or mode not in (EXACT, SPIKED):
        raise ValueError(f"unknown method {args.method!r}")
    return family, mode


def cmd_complete(args):
    obs = io.read_observed(args.input, args.mask)
    family, mode = _method(args)
    if family != "zero" and family != "nn" and args.rank is None:
        raise ValueError(f"--rank is required for {family}")
    if family == "zero":
        res = zero_impute(obs)
    elif family == "bsvd":
        res = bsvd_complete(obs, args.rank, mode=mode, sigma2=args.sigma2,
                            reorder=args.reorder)
    elif family == "lrf":
        init = bsvd_complete(obs, args.rank, mode=mode, sigma2=args.sigma2,
                             reorder=True)
        solve = lrf_complete_spiked if mode == SPIKED else lrf_complete_exact
        res = solve(obs, args.rank, init=init, tol=args.tol or 1e-9,
                    max_iter=args.max_iter or 20000)
    else:
        src = project_psd(obs) if args.psd_project else obs
        if args.nu == "auto":
            if args.rank is None:
                raise ValueError("--nu auto needs --rank")
            nu = harness.auto_nu(obs, args.rank, mode)
        else:
            nu = float(args.nu)
        solve = nn_complete_spiked if mode == SPIKED else nn_complete_exact
        res = solve(src, nu, tol=args.tol or 1e-8, max_iter=args.max_iter or 10000)
    io.write_matrix(args.out, res.sigma_tilde)
    print(f"method={family}-{mode} rank_used={res.rank_used} "
          f"sigma2_hat={res.sigma2_hat!r} converged={res.converged}")


def cmd_graph(args):
    sigma = io.read_matrix(args.input)
    if args.edges_target is not None:
        g = match_edge_count(sigma, args.edges_target, tol=args.tol)
    else:
        g = graphical_lasso(sigma, args.lam, tol=args.tol, max_iter=args.max_iter)
    io.write_edges(args.out_edges, g.edges(), g.theta)
    if args.out_theta:
        io.write_matrix(args.out_theta, g.theta)
    print(f"lambda={g.lam!r} edges={len(g.edges())} converged={g.converged} "
          f"kkt={g.info['kkt']:.3g} ridge={g.info['ridge']:.3g}")


def cmd_select(args):
    if args.what == "rank":
        obs = io.read_observed(args.input, args.mask)
        best, table = select_rank_bic(obs, _ints(args.grid), mode=args.mode,
                                      solver=args.solver, nuclear=args.nuclear)
        header = ["rank", "rss", "n_obs", "k", "score", "feasible", "note"]
        rows = [[r[h] for h in header] for r in table]
    elif args.what == "nu":
        obs = io.read_observed(args.input, args.mask)
        best, table = select_nu_cv(obs, _floats(args.grid), args.holdout,
                                   args.folds, args.seed, mode=args.mode)
        header = ["nu", "mean_error"] + [f"fold{f + 1}" for f in range(args.folds)]
        rows = [[r["nu"], r["mean_error"], *r["errors"]] for r in table]
    else:
        if args.manifest:
            source = io.read_manifest(args.manifest)
            base = compute_block_covariance(source)
        else:
            source = io.read_observed(args.input, args.mask)
            base = source
        cfg = harness.ScenarioConfig(rank=args.rank or 1, nu=args.nu)
        if args.method != "zero" and args.rank is None:
            raise ValueError("--rank is required unless --method zero")

        def complete(o):
            return harness.complete_with(args.method, o, cfg)

        grid = (_floats(args.grid) if args.grid else
                lambda_grid(complete(base).sigma_tilde, num=15, min_ratio=0.05))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = select_lambda_stability(
                source, grid, complete=complete,
                subsample_count=args.subsamples, threshold=args.threshold,
                seed=args.seed, post_completion=not args.full_refit)
        best = res.lam
        header = ["lambda", "instability", "monotone"]
        rows = [[l, d, m] for l, d, m in zip(res.lambdas, res.instability, res.monotone)]
        if res.warning:
            print("warning: no penalty met the instability threshold", file=sys.stderr)
    if args.out:
        header = header + ["selected"]
        rows = [row + [int(row[0] == best)] for row in rows]
        io.write_table(args.out, header, rows)
    print(f"selected_{args.what}={best!r}")


def cmd_evaluate(args):
    est = io.read_edges(args.est)
    truth = io.read_edges(args.truth)
    sc = edge_scores(est, truth)
    parts = [f"f1={sc['f1']!r}", f"precision={sc['precision']!r}",
             f"recall={sc['recall']!r}", f"est_edges={len(est)}",
             f"true_edges={len(truth)}"]
    if sc["both_empty"]:
        parts.append("both_empty=True")
    if args.sigma and args.sigma_star:
        a, b = io.read_matrix(args.sigma), io.read_matrix(args.sigma_star)
        parts.append(f"frobenius_error={frobenius_error(a, b)!r}")
        parts.append(f"infinity_error={infinity_error(a, b)!r}")
    if args.hub_k:
        p = args.p or (max(max(e) for e in est | truth) + 1 if est | truth else 1)
        parts.append(f"hub_overlap={hub_overlap(truth, est, k=args.hub_k, p=p)!r}")
    print(" ".join(parts))


def cmd_pipeline(args):
    cfg = _scenario(args)
    res = harness.run_pipeline(cfg, args.method, args.out, args.replication,
                               timestamp=not args.no_timestamp)
    v = res.values
    print(f"method={args.method} f1={v['f1']!r} edges={int(v['edges'])} "
          f"lambda={v['lambda']!r} out={args.out}")


def cmd_replicate(args):
    cfg = _scenario(args)
    methods = tuple(args.methods.split(",")) if args.methods else None
    table = harness.run_replications(cfg, methods, args.replications,
                                     workers=args.workers,
                                     timing=not args.no_timestamp)
    harness.write_metrics(args.out, table, timestamp=not args.no_timestamp)
    for m in table.methods:
        flag = " FAILED" if m in table.failed_methods else ""
        print(f"{m}: mean_f1={table.mean(m, 'f1'):.4f} "
              f"mean_frobenius={table.mean(m, 'frobenius_error'):.4f}{flag}")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="graphquilt",
        description="Low-rank graph quilting: block covariance estimation, "
                    "low-rank completion and graphical lasso.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one replication of a scenario")
    _add_scenario_args(p)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-cov", help="pooled covariance from block data")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="covariance CSV (nan = unobserved)")
    p.add_argument("--mask-out", help="optional mask CSV")
    p.add_argument("--psd-project", action="store_true",
                   help="repair an indefinite observed covariance")
    p.add_argument("--floor", type=float, default=None)
    p.set_defaults(func=cmd_estimate_cov)

    p = sub.add_parser("complete", help="complete an observed covariance")
    p.add_argument("--method", required=True,
                   help="bsvd, nn, lrf or zero, optionally suffixed -exact/-spiked")
    p.add_argument("--mode", choices=(EXACT, SPIKED), default=EXACT)
    p.add_argument("--rank", type=int)
    p.add_argument("--nu", default="auto", help="nuclear penalty or 'auto'")
    p.add_argument("--sigma2", type=float, help="noise level for spiked bsvd")
    p.add_argument("--reorder", action="store_true",
                   help="greedy max-overlap block order")
    p.add_argument("--psd-project", action=argparse.BooleanOptionalAction,
                   default=True, help="PSD repair before nn (default on)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mask")
    p.add_argument("--out", default="sigma_tilde.csv")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("graph", help="graphical lasso on a completed covariance")
    p.add_argument("--in", dest="input", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--edges-target", type=int,
                   help="choose the penalty to match this edge count")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--out-edges", default="edges.csv")
    p.add_argument("--out-theta")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("select", help="rank, nuclear penalty or sparsity selection")
    p.add_argument("what", choices=("rank", "nu", "lambda"))
    p.add_argument("--in", dest="input")
    p.add_argument("--mask")
    p.add_argument("--manifest", help="block data for row subsampling (lambda)")
    p.add_argument("--grid", help="comma-separated candidates")
    p.add_argument("--mode", choices=(EXACT, SPIKED), default=EXACT)
    p.add_argument("--solver", choices=("bsvd", "lrf"), default="bsvd")
    p.add_argument("--nuclear", action="store_true",
                   help="soft-rank parameter count in the BIC")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--holdout", type=float, default=0.05)
    p.add_argument("--method", default="zero", choices=harness.METHODS,
                   help="completion used inside stability selection")
    p.add_argument("--rank", type=int)
    p.add_argument("--nu", default="auto")
    p.add_argument("--subsamples", type=int, default=20)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--full-refit", action="store_true",
                   help="re-run the completion inside every subsample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="score table CSV")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="score an edge list against the truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--sigma", help="estimated covariance CSV")
    p.add_argument("--sigma-star", help="true covariance CSV")
    p.add_argument("--hub-k", type=int, help="also report top-k hub overlap")
    p.add_argument("--p", type=int, help="number of nodes (for hub overlap)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="simulate, complete, select and score")
    _add_scenario_args(p)
    p.add_argument("--method", required=True, choices=harness.METHODS)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the timestamp line and zero runtimes")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("replicate", help="run all replications of a scenario")
    _add_scenario_args(p)
    p.add_argument("--methods", help="comma-separated subset of methods")
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="tidy metrics CSV")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_replicate)
    return ap


def _one_line(exc):
    return " ".join(str(exc).split())


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (io.ParseError, harness.ConfigError) as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError, KeyError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

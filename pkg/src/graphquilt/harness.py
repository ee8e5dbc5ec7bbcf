"""Scenario configs, method dispatch, replication runner and pipeline."""

from __future__ import annotations

import configparser
import dataclasses
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .bsvd import bsvd_complete
from .covariance import Block, BlockData, compute_block_covariance, project_psd
from .factor import lrf_complete_exact, lrf_complete_spiked
from .glasso import graphical_lasso, zero_impute
from .metrics import (MetricsRecord, edge_scores, frobenius_error, hub_overlap,
                      infinity_error, preprocess_traces, standardize,
                      to_correlation)
from .nuclear import nn_complete_exact, nn_complete_spiked
from .selection import (best_f1_lambda, lambda_grid, match_edge_count,
                        select_lambda_stability)
from .simulate import (gen_er_precision, gen_multistar_precision,
                       gen_sbm_precision, gen_spiked_precision,
                       make_block_pattern, sample_ggm)
from .types import EXACT, SPIKED, CompletedCovariance, ObservedCovariance

METHODS = ("bsvd-exact", "bsvd-spiked", "nn-exact", "nn-spiked",
           "lrf-exact", "lrf-spiked", "zero")
LOW_RANK_METHODS = METHODS[:6]
GRAPHS = ("sbm", "multistar", "er", "spiked-sbm", "spiked-dense", "covariance")
LAMBDA_POLICIES = ("oracle", "best-f1", "stability", "fixed")
METRIC_NAMES = ("frobenius_error", "infinity_error", "f1", "precision",
                "recall", "runtime_seconds", "convergence_flag", "lambda",
                "edges", "rank_used", "sigma2_hat", "hub_overlap")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names file and line."""


@dataclass
class ScenarioConfig:
    """One simulation or masking scenario.

    ``graph`` picks the truth generator; ``"covariance"`` instead masks a
    covariance read from ``covariance_path`` (or computed from the traces
    in ``traces_path``) and treats its glasso graph at ``truth_lambda`` as
    the reference. ``sampling="shared"`` draws ``n`` rows for all nodes and
    masks their covariance; ``"split"`` draws ``n`` fresh rows per block.
    """

    name: str = "scenario"
    graph: str = "sbm"
    p: int = 100
    n: int = 2000
    K: int = 2
    o: int = 60
    rank: int = 5
    seed: int = 0
    replications: int = 50
    communities: int = 5
    within_prob: float = 0.8
    hubs: int = 4
    edge_prob: float = 0.02
    sign: str = "negative"
    margin: float = 0.1
    spike_c: float = 1.0
    shuffle: bool = True
    sampling: str = "shared"
    correlation: bool = False
    methods: tuple = METHODS
    nu: str = "auto"
    sigma2: str = "median"
    psd_project: bool = True
    lambda_policy: str = "oracle"
    lam: float = 0.1
    glasso_tol: float = 1e-4
    stability_subsamples: int = 20
    stability_threshold: float = 0.05
    hub_k: int = 25
    covariance_path: str = ""
    traces_path: str = ""
    truth_lambda: float = 0.1

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = tuple(m.strip() for m in self.methods.split(",") if m.strip())
        self.methods = tuple(self.methods)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.graph not in GRAPHS:
            raise ValueError(f"graph must be one of {GRAPHS}")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ValueError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
        if self.sampling not in ("shared", "split"):
            raise ValueError("sampling must be 'shared' or 'split'")
        if self.nu != "auto":
            float(self.nu)
        if self.sigma2 not in ("median", "oracle"):
            float(self.sigma2)
        if min(self.p, self.n, self.K, self.o, self.rank) < 1:
            raise ValueError("p, n, K, o and rank must be positive")
        if self.graph == "covariance" and not (self.covariance_path or self.traces_path):
            raise ValueError("graph=covariance needs covariance_path or traces_path")


PRESETS = {
    "sbm": dict(graph="sbm", p=100, n=2000, K=2, o=60, rank=5,
                correlation=True),
    "multistar": dict(graph="multistar", p=100, n=2000, K=2, o=60, rank=4,
                      correlation=True),
    "er": dict(graph="er", p=100, n=2000, K=2, o=60, rank=20,
               correlation=True),
    "spiked": dict(graph="spiked-sbm", p=60, n=10000, K=2, o=40, rank=5,
                   methods=("bsvd-spiked",)),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kw = dict(PRESETS[name], name=name)
    kw.update(overrides)
    return ScenarioConfig(**kw)


def _convert(default, text):
    if isinstance(default, bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(t.strip() for t in text.split(",") if t.strip())
    return text.strip()


def _line_of(lines, section, key):
    current = None
    for no, line in enumerate(lines, start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].strip() == key:
            return no
    return 1


def parse_config(text, source="<config>"):
    """Scenarios from ``key = value`` text with one section per scenario.

    A ``preset`` key starts the section from a named preset; all other
    keys are :class:`ScenarioConfig` fields.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None
    lines = text.splitlines()
    defaults = {f.name: f.default for f in dataclasses.fields(ScenarioConfig)}
    out = {}
    for section in cp.sections():
        kw = {"name": section}
        items = dict(cp.items(section))
        if "preset" in items:
            name = items.pop("preset")
            if name not in PRESETS:
                raise ConfigError(f"{source}:{_line_of(lines, section, 'preset')}: "
                                  f"unknown preset {name!r}")
            kw.update(PRESETS[name])
        for key, value in items.items():
            if key not in defaults:
                raise ConfigError(f"{source}:{_line_of(lines, section, key)}: "
                                  f"unknown key {key!r}")
            try:
                kw[key] = _convert(defaults[key], value)
            except ValueError as exc:
                raise ConfigError(f"{source}:{_line_of(lines, section, key)}: "
                                  f"{key}: {exc}") from None
        try:
            out[section] = ScenarioConfig(**kw)
        except ValueError as exc:
            named = [k for k in items
                     if re.search(rf"\b{re.escape(k)}\b", str(exc))]
            no = (_line_of(lines, section, max(named, key=len)) if named
                  else _line_of(lines, section, ""))
            raise ConfigError(f"{source}:{no}: [{section}] {exc}") from None
    if not out:
        raise ConfigError(f"{source}:1: no scenario sections")
    return out


def load_config(path, scenario=None):
    """Read a config file and return one scenario (default the first)."""
    scenarios = parse_config(Path(path).read_text(), source=str(path))
    if scenario is None:
        return next(iter(scenarios.values()))
    if scenario not in scenarios:
        raise ConfigError(f"{path}:1: no scenario named {scenario!r}")
    return scenarios[scenario]


def config_text(cfg):
    """Serialize a scenario as a config section."""
    lines = [f"[{cfg.name}]"]
    for f in dataclasses.fields(cfg):
        if f.name == "name":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def replication_seeds(seed, replication):
    """Truth, sampling and shuffle seeds derived from ``seed + replication``."""
    ss = np.random.SeedSequence(seed + replication)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(3)]


@dataclass
class Replicate:
    """Everything one replication feeds to the methods."""

    obs: ObservedCovariance
    full: np.ndarray
    reference_cov: np.ndarray
    true_edges: set
    truth: object = None
    data: BlockData | None = None
    reference_graph: object = None
    sigma2_star: float | None = None


def make_truth(cfg, seed):
    kw = dict(seed=seed, margin=cfg.margin, sign=cfg.sign)
    if cfg.graph == "sbm":
        return gen_sbm_precision(cfg.p, cfg.communities, cfg.within_prob, **kw)
    if cfg.graph == "multistar":
        return gen_multistar_precision(cfg.p, cfg.hubs, **kw)
    if cfg.graph == "er":
        return gen_er_precision(cfg.p, cfg.edge_prob, **kw)
    if cfg.graph in ("spiked-sbm", "spiked-dense"):
        return gen_spiked_precision(cfg.p, cfg.rank, c=cfg.spike_c,
                                    structure=cfg.graph.split("-")[1], seed=seed)
    raise ValueError(f"graph {cfg.graph!r} has no generator")


def _empirical(x):
    x = x - x.mean(axis=0)
    c = x.T @ x / x.shape[0]
    return (c + c.T) / 2.0


def load_reference_covariance(cfg):
    if cfg.covariance_path:
        cov = io.read_matrix(cfg.covariance_path)
        cov = (cov + cov.T) / 2.0
    else:
        x, _ = preprocess_traces(io.read_matrix(cfg.traces_path))
        cov = _empirical(x)
    return to_correlation(cov) if cfg.correlation else cov


def make_replicate(cfg, replication, reference=None):
    """Truth, observed covariance and reference graph for one replication."""
    s_truth, s_data, s_shuffle = replication_seeds(cfg.seed, replication)
    shuffle = s_shuffle if cfg.shuffle else None
    if cfg.graph == "covariance":
        full = reference if reference is not None else load_reference_covariance(cfg)
        design = make_block_pattern(full.shape[0], cfg.K, cfg.o, shuffle_seed=shuffle)
        obs = ObservedCovariance.from_full(full, design)
        g = graphical_lasso(full, cfg.truth_lambda, tol=cfg.glasso_tol)
        return Replicate(obs, full, full, g.edges(), reference_graph=g)

    truth = make_truth(cfg, s_truth)
    design = make_block_pattern(cfg.p, cfg.K, cfg.o, shuffle_seed=shuffle, n=cfg.n)
    ref = truth.sigma_star
    if cfg.correlation:
        ref = to_correlation(ref)
    data = None
    if cfg.sampling == "shared":
        x = sample_ggm(truth, cfg.n, s_data)
        if cfg.correlation:
            x = standardize(x)
        full = _empirical(x)
        obs = ObservedCovariance.from_full(full, design)
        data = BlockData(tuple(Block(x[:, v], v) for v in design.node_sets),
                         cfg.p)
    else:
        x = sample_ggm(truth, cfg.n * cfg.K, s_data)
        if cfg.correlation:
            x = standardize(x)
        full = _empirical(x)
        data = BlockData.from_full(x, design)
        obs = compute_block_covariance(data)
    s2 = None
    if truth.spiked is not None:
        s2 = truth.spiked.sigma2
        if cfg.correlation:
            s2 = None
    return Replicate(obs, full, ref, set(truth.edges), truth=truth, data=data,
                     sigma2_star=s2)


def auto_nu(obs, r, mode=EXACT):
    """Penalty between the r-th and (r+1)-th eigenvalues of a filled matrix.

    Unobserved entries are filled from the rank-r block-SVD completion and
    the penalty is the geometric mean of the two eigenvalues (after
    removing the median-variance noise floor in spiked mode). This places
    the thresholding cut at the configured rank.
    """
    try:
        base = bsvd_complete(obs, r, mode=mode).sigma_tilde
    except ValueError:
        base = np.zeros((obs.p, obs.p))
    z = np.where(obs.mask, obs.filled(0.0), base)
    w = np.sort(np.linalg.eigvalsh((z + z.T) / 2.0))[::-1]
    if mode == SPIKED:
        w = w - float(np.median(obs.diagonal()))
    hi = w[r - 1] if r - 1 < len(w) else w[-1]
    lo = w[r] if r < len(w) else 0.0
    if hi <= 0:
        return float(max(w[0], 1e-12)) / 2.0
    if lo <= 0:
        return float(hi) / 2.0
    return float(np.sqrt(hi * lo))


def complete_with(method, obs, cfg, sigma2_star=None):
    """Run one completion method on an observed covariance."""
    if method == "zero":
        return zero_impute(obs)
    family, mode = method.split("-")
    r = cfg.rank
    sigma2 = None
    if mode == SPIKED and cfg.sigma2 != "median":
        sigma2 = sigma2_star if cfg.sigma2 == "oracle" else float(cfg.sigma2)
    if family == "bsvd":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return bsvd_complete(obs, r, mode=mode, sigma2=sigma2)
    if family == "nn":
        src = project_psd(obs) if cfg.psd_project else obs
        nu = auto_nu(obs, r, mode) if cfg.nu == "auto" else float(cfg.nu)
        solve = nn_complete_spiked if mode == SPIKED else nn_complete_exact
        out = solve(src, nu)
        out.info["nu"] = nu
        return out
    if family == "lrf":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            init = bsvd_complete(obs, r, mode=mode, sigma2=sigma2)
        solve = lrf_complete_spiked if mode == SPIKED else lrf_complete_exact
        return solve(obs, r, init=init)
    raise ValueError(f"unknown method {method!r}")


def reference_target(cfg, rep):
    """Edge count the quilted graphs must match under the oracle policy."""
    if rep.reference_graph is None:
        rep.reference_graph, _ = best_f1_lambda(rep.full, rep.true_edges,
                                                tol=cfg.glasso_tol)
    return len(rep.reference_graph.edges())


def choose_graph(cfg, rep, method, completed):
    sigma = completed.sigma_tilde
    tol = cfg.glasso_tol
    if cfg.lambda_policy == "fixed":
        return graphical_lasso(sigma, cfg.lam, tol=tol)
    if cfg.lambda_policy == "oracle":
        return match_edge_count(sigma, reference_target(cfg, rep), tol=tol)
    if cfg.lambda_policy == "best-f1":
        g, _ = best_f1_lambda(sigma, rep.true_edges, tol=tol)
        return g
    fill = completed.sigma_tilde
    source = rep.data if rep.data is not None else rep.obs
    grid = lambda_grid(sigma, num=15, min_ratio=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = select_lambda_stability(
            source, grid, complete=lambda o: _fixed_fill(o, fill),
            subsample_count=cfg.stability_subsamples,
            threshold=cfg.stability_threshold, seed=cfg.seed,
            post_completion=True, tol=tol)
    return graphical_lasso(sigma, res.lam, tol=tol)


def _fixed_fill(obs, fill):
    z = np.where(obs.mask, obs.filled(0.0), fill)
    return CompletedCovariance((z + z.T) / 2.0, EXACT, obs.p)


@dataclass
class MethodResult:
    record: MetricsRecord | None
    values: dict = field(default_factory=dict)
    error: str = ""
    completed: object = None
    graph: object = None


def evaluate_method(cfg, rep, method, replication, timing=True):
    """Complete, select a graph and score one method; failures are caught."""
    t0 = time.perf_counter()
    try:
        completed = complete_with(method, rep.obs, cfg, rep.sigma2_star)
        graph = choose_graph(cfg, rep, method, completed)
    except Exception as exc:  # recorded, the run continues
        return MethodResult(None, error=f"{type(exc).__name__}: {exc}")
    runtime = time.perf_counter() - t0 if timing else 0.0
    sc = edge_scores(graph.edges(), rep.true_edges)
    conv = bool(completed.converged and graph.converged)
    values = {
        "frobenius_error": frobenius_error(completed.sigma_tilde, rep.reference_cov),
        "infinity_error": infinity_error(completed.sigma_tilde, rep.reference_cov),
        "f1": sc["f1"], "precision": sc["precision"], "recall": sc["recall"],
        "runtime_seconds": runtime, "convergence_flag": float(conv),
        "lambda": graph.lam, "edges": float(len(graph.edges())),
        "rank_used": float(completed.rank_used),
        "sigma2_hat": float(completed.sigma2_hat),
    }
    p = rep.obs.p
    if rep.reference_graph is not None:
        values["hub_overlap"] = hub_overlap(rep.reference_graph, graph,
                                            k=min(cfg.hub_k, p))
    else:
        values["hub_overlap"] = hub_overlap(rep.true_edges, graph.edges(),
                                            k=min(cfg.hub_k, p), p=p)
    rec = MetricsRecord(method, replication, values["frobenius_error"],
                        values["infinity_error"], sc["f1"], runtime, conv)
    return MethodResult(rec, values, completed=completed, graph=graph)


def _one_replication(args):
    cfg, replication, methods, timing, reference = args
    rep = make_replicate(cfg, replication, reference)
    if cfg.lambda_policy == "oracle":
        reference_target(cfg, rep)
    return [(m, evaluate_method(cfg, rep, m, replication, timing)) for m in methods]


@dataclass
class ReplicationTable:
    """Per-replication results plus the tidy long-format rows."""

    results: dict
    methods: tuple
    replications: int
    failed_methods: tuple = ()

    def records(self):
        return [r.record for m in self.methods for r in self.results[m]
                if r.record is not None]

    def values(self, method, metric):
        return np.array([r.values[metric] for r in self.results[method]
                         if r.record is not None])

    def mean(self, method, metric):
        v = self.values(method, metric)
        return float(np.mean(v)) if v.size else float("nan")

    def rows(self):
        """Tidy rows ``(method, replication, metric, value)``.

        Summary rows use replication labels ``mean``, ``sd`` and
        ``failures``; a failed method also gets ``failed = 1``.
        """
        out = []
        for m in self.methods:
            for i, r in enumerate(self.results[m]):
                if r.record is None:
                    out.append((m, i, "error", r.error))
                    continue
                out.extend((m, i, k, float(r.values[k])) for k in METRIC_NAMES)
            for k in METRIC_NAMES:
                v = self.values(m, k)
                out.append((m, "mean", k, float(np.mean(v)) if v.size else float("nan")))
                out.append((m, "sd", k, float(np.std(v, ddof=1)) if v.size > 1 else float("nan")))
            fails = sum(r.record is None for r in self.results[m])
            out.append((m, "failures", "count", fails))
            out.append((m, "failed", "flag", int(m in self.failed_methods)))
        return out


def run_replications(cfg, methods=None, replications=None, seed=None,
                     workers=1, timing=True):
    """Run every method on every replication of a scenario.

    Parameters
    ----------
    cfg : ScenarioConfig
    methods, replications, seed : optional
        Override the config values.
    workers : int
        Process pool size; results are ordered by method and replication
        regardless.
    timing : bool
        Record wall-clock runtimes; when False they are 0 so tables are
        reproducible byte for byte.

    Returns
    -------
    ReplicationTable
    """
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    methods = tuple(methods or cfg.methods)
    n_rep = cfg.replications if replications is None else replications
    reference = load_reference_covariance(cfg) if cfg.graph == "covariance" else None
    jobs = [(cfg, i, methods, timing, reference) for i in range(n_rep)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            per_rep = list(ex.map(_one_replication, jobs))
    else:
        per_rep = [_one_replication(j) for j in jobs]
    results = {m: [] for m in methods}
    for rows in per_rep:
        for m, res in rows:
            results[m].append(res)
    failed = tuple(m for m in methods
                   if sum(r.record is None for r in results[m]) > n_rep / 2)
    return ReplicationTable(results, methods, n_rep, failed)


def write_metrics(path, table, timestamp=True):
    comment = None
    if timestamp:
        comment = "generated " + time.strftime("%Y-%m-%dT%H:%M:%S")
    io.write_table(path, ["method", "replication", "metric", "value"],
                   table.rows(), comment=comment)


def run_pipeline(cfg, method, out_dir, replication=0, timestamp=True):
    """Chain simulation (or masking), completion, graph selection and
    scoring for one method and write the artifacts to `out_dir`.

    Writes ``sigma_tilde.csv``, ``theta.csv``, ``edges.csv`` and
    ``metrics.csv``; runtimes are zeroed when `timestamp` is False so two
    runs with the same config are byte-identical.
    """
    out = io.ensure_dir(out_dir)
    rep = make_replicate(cfg, replication)
    if cfg.lambda_policy == "oracle":
        reference_target(cfg, rep)
    res = evaluate_method(cfg, rep, method, replication, timing=timestamp)
    if res.record is None:
        raise RuntimeError(f"{method} failed: {res.error}")
    io.write_matrix(out / "sigma_tilde.csv", res.completed.sigma_tilde)
    io.write_matrix(out / "theta.csv", res.graph.theta)
    io.write_edges(out / "edges.csv", res.graph.edges(), res.graph.theta)
    table = ReplicationTable({method: [res]}, (method,), 1)
    rows = [r for r in table.rows() if r[1] == replication]
    comment = "generated " + time.strftime("%Y-%m-%dT%H:%M:%S") if timestamp else None
    io.write_table(out / "metrics.csv", ["method", "replication", "metric", "value"],
                   rows, comment=comment)
    return res

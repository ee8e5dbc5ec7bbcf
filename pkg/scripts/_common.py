"""Shared helpers for the experiment scripts."""

import argparse
import warnings

import numpy as np


def parser(description, replications=50):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--replications", type=int, default=replications)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", help="optional tidy metrics CSV")
    return ap


def summarize(table, metric="f1"):
    """Print mean and standard error of `metric` per method."""
    for m in table.methods:
        v = table.values(m, metric)
        if v.size == 0:
            print(f"{m:12s} failed")
            continue
        se = v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else float("nan")
        print(f"{m:12s} {metric}={v.mean():.4f} se={se:.4f} n={v.size}")


def quiet():
    warnings.simplefilter("ignore", RuntimeWarning)

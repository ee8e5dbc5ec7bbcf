"""Plain-text file formats.

* matrices: header-free CSV, row-major, ``nan`` marks unobserved entries;
* masks: header-free CSV of 0/1;
* edge lists: CSV with header ``i,j,weight`` and 1-based node ids;
* block data: one CSV per block plus a manifest CSV with header
  ``path,node_ids`` where node ids are 1-based and space separated;
* tables: CSV with a header row, optionally preceded by ``#`` comment lines.

Lines starting with ``#`` are skipped by every reader.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .covariance import Block, BlockData
from .types import BlockDesign, ObservedCovariance


class ParseError(ValueError):
    """Malformed input file; the message names the file and line."""


def _rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def read_matrix(path):
    rows = []
    for lineno, row in _rows(path):
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"{path}:{lineno}: expected {len(rows[0])} "
                             f"columns, got {len(rows[-1])}")
    if not rows:
        raise ParseError(f"{path}:1: empty matrix file")
    return np.array(rows)


def write_matrix(path, m, fmt="%.17g"):
    np.savetxt(path, np.asarray(m, dtype=float), delimiter=",", fmt=fmt)


def read_mask(path):
    m = read_matrix(path)
    if not np.isin(m, (0.0, 1.0)).all():
        raise ParseError(f"{path}:1: mask entries must be 0 or 1")
    return m.astype(bool)


def write_mask(path, mask):
    np.savetxt(path, np.asarray(mask, dtype=int), delimiter=",", fmt="%d")


def read_observed(cov_path, mask_path=None):
    """Observed covariance from a NaN-marked CSV and an optional mask CSV."""
    vals = read_matrix(cov_path)
    if vals.shape[0] != vals.shape[1]:
        raise ParseError(f"{cov_path}:1: covariance must be square")
    mask = read_mask(mask_path) if mask_path else np.isfinite(vals)
    if mask.shape != vals.shape:
        raise ParseError(f"{mask_path}:1: mask shape {mask.shape} does not "
                         f"match covariance shape {vals.shape}")
    try:
        return ObservedCovariance(np.where(mask, vals, np.nan), mask)
    except ValueError as exc:
        raise ParseError(f"{cov_path}:1: {exc}") from None


def write_observed(path, obs, mask_path=None):
    write_matrix(path, obs.values)
    if mask_path:
        write_mask(mask_path, obs.mask)


def write_edges(path, edges, theta=None):
    """Edge list with 1-based ids; weight is ``theta[i, j]`` or 1."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "weight"])
        for i, j in sorted(edges):
            wt = 1.0 if theta is None else float(theta[i, j])
            w.writerow([i + 1, j + 1, repr(wt)])


def read_edges(path):
    edges = set()
    for lineno, row in _rows(path):
        if row[:2] == ["i", "j"]:
            continue
        try:
            i, j = int(row[0]) - 1, int(row[1]) - 1
        except (ValueError, IndexError):
            raise ParseError(f"{path}:{lineno}: expected 'i,j[,weight]'") from None
        if i < 0 or j < 0:
            raise ParseError(f"{path}:{lineno}: node ids are 1-based")
        if i != j:
            edges.add((min(i, j), max(i, j)))
    return edges


def read_manifest(path):
    """Block data listed in a manifest; paths are relative to the manifest."""
    base = Path(path).parent
    blocks = []
    for lineno, row in _rows(path):
        if row[:2] == ["path", "node_ids"]:
            continue
        if len(row) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'path,node_ids'")
        try:
            ids = np.array([int(t) for t in row[1].split()]) - 1
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad node id list") from None
        if ids.size == 0 or ids.min() < 0:
            raise ParseError(f"{path}:{lineno}: node ids are 1-based")
        data = read_matrix(base / row[0])
        if data.shape[1] != ids.size:
            raise ParseError(f"{path}:{lineno}: {row[0]} has {data.shape[1]} "
                             f"columns but {ids.size} node ids")
        blocks.append(Block(data, ids))
    if not blocks:
        raise ParseError(f"{path}:1: manifest lists no blocks")
    p = max(int(b.node_ids.max()) for b in blocks) + 1
    return BlockData(tuple(blocks), p)


def write_manifest(path, data, prefix="block"):
    base = Path(path).parent
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "node_ids"])
        for k, b in enumerate(data.blocks, start=1):
            name = f"{prefix}{k}.csv"
            write_matrix(base / name, b.data)
            w.writerow([name, " ".join(str(i + 1) for i in b.node_ids)])


def write_design(path, design):
    """Manifest-like listing of a design without data (``n`` column)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["block", "n", "node_ids"])
        counts = design.sample_counts or [""] * design.K
        for k, (v, n) in enumerate(zip(design.node_sets, counts), start=1):
            w.writerow([k, n, " ".join(str(i + 1) for i in v)])


def read_design(path, p=None):
    sets, counts = [], []
    for lineno, row in _rows(path):
        if row[:1] == ["block"]:
            continue
        try:
            sets.append(np.array([int(t) for t in row[2].split()]) - 1)
            counts.append(int(row[1]) if row[1] else None)
        except (ValueError, IndexError):
            raise ParseError(f"{path}:{lineno}: expected 'block,n,node_ids'") from None
    if not sets:
        raise ParseError(f"{path}:1: no blocks")
    p = p or max(int(v.max()) for v in sets) + 1
    return BlockDesign(tuple(sets), None if None in counts else counts, p)


def write_table(path, header, rows, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def read_table(path):
    rows = [row for _, row in _rows(path)]
    if not rows:
        raise ParseError(f"{path}:1: empty table")
    return rows[0], rows[1:]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)

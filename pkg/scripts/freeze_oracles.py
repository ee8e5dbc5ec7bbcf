"""Recompute the frozen oracle values in tests/data/oracle_values.json.

The subgradient runs take a few minutes; the values only need refreshing
when an instance in tests/oracles.py changes.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles as o  # noqa: E402


def main(iters=1_000_000):
    out = {}
    pooled = o.pooled_covariance_bruteforce(o.COV_BLOCKS, 5)
    out["pooled_covariance"] = [[None if np.isnan(x) else x for x in row] for row in pooled]

    a = o.psd_instance()
    proj = o.alternating_psd_projection(a, np.ones((5, 5), dtype=bool))
    out["psd_full_change"] = float(np.max(np.abs(proj - a)))
    a, mask = o.masked_psd_instance()
    proj = o.alternating_psd_projection(a, mask)
    out["psd_masked_change_fro"] = float(np.linalg.norm(proj - a))

    a, b = o.procrustes_instance()
    out["procrustes_min"] = o.rotation_grid_procrustes(a, b)

    s, mask = o.nn_instance()
    t = time.time()
    out["nn_exact_cvx"] = o.nn_cvxpy(s, mask, o.NN_NU)
    out["nn_exact_subgradient"] = o.nn_subgradient(s, mask, o.NN_NU, iters=iters)
    s, mask = o.nn_instance(noise=0.3)
    out["nn_spiked_cvx"] = o.nn_cvxpy(s, mask, o.NN_NU, spiked=True)
    out["nn_spiked_alternating"] = o.spiked_alternating(s, mask, o.NN_NU, iters=iters)
    print(f"nuclear-norm oracles: {time.time() - t:.0f} s", file=sys.stderr)

    out["glasso_2x2"] = o.glasso_2x2(o.GLASSO_S, o.GLASSO_LAM).tolist()

    path = ROOT / "tests" / "data" / "oracle_values.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000)

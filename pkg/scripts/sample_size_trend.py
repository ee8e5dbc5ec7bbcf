"""Max-entry covariance error of spiked block-SVD completion versus n."""

import numpy as np

from graphquilt.harness import ScenarioConfig, complete_with, make_replicate
from graphquilt.metrics import infinity_error

from _common import parser, quiet


def main():
    ap = parser(__doc__, replications=20)
    ap.add_argument("--sizes", default="500,1000,2000,4000,8000")
    ap.add_argument("--sigma2", default="median", help="median, oracle or a number")
    args = ap.parse_args()
    quiet()
    for n in (int(x) for x in args.sizes.split(",")):
        cfg = ScenarioConfig(graph="spiked-dense", p=60, rank=3, K=2, o=36, n=n,
                             seed=args.seed, sigma2=args.sigma2,
                             methods=("bsvd-spiked",))
        errs = []
        for r in range(args.replications):
            rep = make_replicate(cfg, r)
            fit = complete_with("bsvd-spiked", rep.obs, cfg, rep.sigma2_star)
            errs.append(infinity_error(fit.sigma_tilde, rep.reference_cov))
        print(f"n={n:6d} median max error={np.median(errs):.4f} "
              f"iqr=({np.percentile(errs, 25):.4f}, {np.percentile(errs, 75):.4f})")


if __name__ == "__main__":
    main()

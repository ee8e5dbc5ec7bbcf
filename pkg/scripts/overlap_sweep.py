"""Mean F1 of the low-rank methods as the block size grows."""

from graphquilt.harness import LOW_RANK_METHODS, preset, run_replications

from _common import parser, quiet, summarize


def main():
    ap = parser(__doc__)
    ap.add_argument("--sizes", default="55,60,65")
    args = ap.parse_args()
    quiet()
    for o in (int(x) for x in args.sizes.split(",")):
        print(f"-- block size {o}")
        cfg = preset("sbm", o=o, seed=args.seed, methods=LOW_RANK_METHODS)
        summarize(run_replications(cfg, replications=args.replications,
                                   workers=args.workers))


if __name__ == "__main__":
    main()

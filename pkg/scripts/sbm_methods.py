"""Compare the completion methods and zero imputation on the SBM scenario."""

from graphquilt.harness import preset, run_replications, write_metrics

from _common import parser, quiet, summarize


def main():
    ap = parser(__doc__)
    ap.add_argument("--graph", default="sbm", choices=["sbm", "multistar"])
    args = ap.parse_args()
    quiet()
    cfg = preset(args.graph, seed=args.seed)
    table = run_replications(cfg, replications=args.replications,
                             workers=args.workers)
    summarize(table)
    if args.out:
        write_metrics(args.out, table)


if __name__ == "__main__":
    main()

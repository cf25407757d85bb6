"""Command-line interface: simulate / aggregate / validate."""
from __future__ import annotations

import argparse
import sys

from .harness import (
    ExperimentConfig,
    aggregate,
    parse_config_file,
    run_experiment,
    validate,
)


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run a batch of experiment cells")
    p.add_argument("--config", help="flat key = value config file; flags override")
    p.add_argument("--truth", choices=["sigmoid1d", "step1d", "skewnormal2d", "block2d"])
    p.add_argument("--prior", choices=["laplace", "gaussian", "both"])
    p.add_argument("--n", help="comma-separated sample sizes, e.g. 50,200,1000,5000")
    p.add_argument("--reps", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--adapt", choices=["on", "off"])
    p.add_argument("--delta1", type=float)
    p.add_argument("--delta2", type=float)
    p.add_argument("--laplace-scale", type=float, dest="laplace_scale")
    p.add_argument("--workers", type=int)
    p.add_argument(
        "--paper-scale", action="store_true",
        help="full protocol: 50 replications",
    )


def _build_config(args) -> ExperimentConfig:
    merged: dict[str, str] = {}
    if args.config:
        merged.update(parse_config_file(args.config))
    cli_map = {
        "truth": args.truth,
        "prior": args.prior,
        "n": args.n,
        "reps": args.reps,
        "iters": args.iters,
        "burnin": args.burnin,
        "thin": args.thin,
        "seed": args.seed,
        "out": args.out,
        "adapt": args.adapt,
        "delta1": args.delta1,
        "delta2": args.delta2,
        "laplace_scale": args.laplace_scale,
        "workers": args.workers,
        "paper_scale": True if args.paper_scale else None,
    }
    for key, val in cli_map.items():
        if val is not None:
            merged[key] = str(val)

    if "truth" not in merged:
        raise SystemExit("simulate: --truth is required (flag or config file)")
    prior = merged.get("prior", "both")
    priors = ("laplace", "gaussian") if prior == "both" else (prior,)
    paper_scale = merged.get("paper_scale", "false").lower() in ("true", "1", "on")
    kwargs = dict(
        truth=merged["truth"],
        priors=priors,
        replications=int(merged.get("reps", 50 if paper_scale else 10)),
    )
    if "n" in merged:
        kwargs["n_list"] = tuple(int(tok) for tok in merged["n"].split(","))
    if "iters" in merged:
        kwargs["iterations"] = int(merged["iters"])
    if "burnin" in merged:
        kwargs["burn_in"] = int(merged["burnin"])
    if "thin" in merged:
        kwargs["thinning"] = int(merged["thin"])
    if "seed" in merged:
        kwargs["master_seed"] = int(merged["seed"])
    if "out" in merged:
        kwargs["out_dir"] = merged["out"]
    if "adapt" in merged:
        kwargs["adapt"] = merged["adapt"].lower() in ("on", "true", "1")
    for key in ("delta1", "delta2", "laplace_scale"):
        if key in merged:
            kwargs[key] = float(merged[key])
    if "workers" in merged:
        kwargs["workers"] = int(merged["workers"])
    return ExperimentConfig(**kwargs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="besovclass",
        description="Hierarchical Besov-Laplace vs Gaussian-process binary "
        "classification experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)

    agg = sub.add_parser("aggregate", help="summarize a results file into a table")
    agg.add_argument("--in", dest="inp", required=True, help="results dir or csv")
    agg.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="run a derived-oracle property suite")
    val.add_argument(
        "--mode", required=True,
        choices=["roundtrip", "whitening", "prior-recovery", "oracle"],
    )

    args = parser.parse_args(argv)
    if args.command == "simulate":
        path = run_experiment(_build_config(args))
        print(path)
        return 0
    if args.command == "aggregate":
        inp = args.inp
        if not inp.endswith(".csv"):
            inp = f"{inp}/results.csv"
        print(aggregate(inp, args.out))
        return 0
    return 0 if validate(args.mode) else 1


if __name__ == "__main__":
    sys.exit(main())

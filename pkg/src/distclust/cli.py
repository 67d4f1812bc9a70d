"""Command-line interface.

Subcommands cover the full pipeline: generate synthetic data, extract SAR
features, build Gram or distance matrices, cluster, score against labels,
select K, run a whole replicated experiment from a config file, and
aggregate per-replication score files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 too many
failed replications.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from .errors import ConfigError, InputError, ReplicationFailure
from .experiment import (ExperimentConfig, MethodSpec, _geometry_for,
                         aggregate_rows, build_gram, run_experiment,
                         select_k_proportions)
from .gram import GramMatrix
from .kmeans import Partition, kernel_kmeans, wasserstein_kmeans
from .sar import SarFeatureConfig, ingest_dataset
from .validity import CRITERIA, accuracy, adjusted_rand_index
from .wasserstein import pairwise_wasserstein

logger = logging.getLogger(__name__)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", type=str, default=None, help="output file or directory")


def _cmd_simulate(args) -> int:
    from . import simgen

    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0, 0)))
    if args.model.startswith("univariate"):
        variation = "default"
        if "-" in args.model:
            variation = args.model.split("-", 1)[1]
        cfg = simgen.UnivariateModelConfig.variation(variation, args.merge_lambda, n=args.n)
        records = simgen.generate_univariate(cfg, rng)
    elif args.model == "bivariate-independent":
        cfg = simgen.BivariateModelConfig.independent(args.n_per_cluster, args.n_obs)
        records = simgen.generate_bivariate_independent(cfg, rng)
    elif args.model == "bivariate-dependent":
        cfg = simgen.BivariateModelConfig.dependent(args.rho, args.n_per_cluster, args.n_obs)
        records = simgen.generate_bivariate_dependent(cfg, rng)
    else:
        raise ConfigError(f"unknown model {args.model!r}")
    manifest = dio.save_records(records, args.out or ".")
    print(manifest)
    return 0


def _cmd_sar_extract(args) -> int:
    cfg = SarFeatureConfig(intensity_levels=args.levels, filter_levels=args.filter_levels,
                           include_derivative=args.bivariate, pixel_cap=args.pixel_cap)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 1)))
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    records = ingest_dataset(args.root, args.classes.split(","), args.per_class, cfg, rng,
                             manifest_out=outdir / "ingest_manifest.json")
    manifest = dio.save_records(records, outdir)
    print(manifest)
    return 0


def _cmd_gram(args) -> int:
    method = MethodSpec.parse(args.kernel)
    records = dio.load_manifest(args.manifest)
    sidecar = {"manifest_hash": dio.manifest_hash(args.manifest)}
    out = Path(args.out or "gram.bin")
    if method.metric == "wasserstein":
        values = pairwise_wasserstein(records, alpha=method.order, grid=method.grid)
        dio.write_matrix(out, values, "wass", sidecar=sidecar)
    else:
        gram = build_gram(records, method.kernel, jobs=args.jobs)
        dio.write_matrix(out, gram.values, gram.mode, gram.kernel, sidecar=sidecar)
        values = gram.values
    if args.csv:
        dio.write_matrix_csv(out.with_suffix(".csv"), values)
    print(out)
    return 0


def _cmd_cluster(args) -> int:
    if args.gram:
        values, mode, kernel, _ = dio.read_matrix(args.gram)
        if mode == "wass":
            raise ConfigError("cannot run kernel K-means on a distance container")
        gram = GramMatrix(values, mode, kernel)
        part = kernel_kmeans(gram, args.k, restarts=args.restarts, seed=args.seed)
    elif args.manifest:
        records = dio.load_manifest(args.manifest)
        method = MethodSpec.parse(args.method)
        if method.metric == "mmd":
            gram = build_gram(records, method.kernel, jobs=args.jobs)
            part = kernel_kmeans(gram, args.k, restarts=args.restarts, seed=args.seed)
        else:
            part = wasserstein_kmeans(records, args.k, restarts=args.restarts,
                                      seed=args.seed, centroid_mode=args.centroid_mode)
    else:
        raise ConfigError("cluster needs --gram or --manifest")
    out = Path(args.out or "partition.json")
    out.write_text(json.dumps(part.to_json(), indent=1) + "\n")
    if args.csv:
        with open(out.with_suffix(".csv"), "w") as fh:
            fh.write("index,cluster\n")
            for i, a in enumerate(part.assignments):
                fh.write(f"{i},{a}\n")
    print(out)
    return 0


def _cmd_score(args) -> int:
    part = Partition.from_json(json.loads(Path(args.partition).read_text()))
    records = dio.load_manifest(args.manifest)
    truth = [r.label for r in records]
    if any(t is None for t in truth):
        raise InputError("manifest records carry no labels to score against")
    result = {"accuracy": accuracy(part, truth),
              "ari": adjusted_rand_index(part, truth)}
    text = json.dumps(result, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_select_k(args) -> int:
    records = dio.load_manifest(args.manifest)
    method = MethodSpec.parse(args.method)
    gram = build_gram(records, method.kernel, jobs=args.jobs) \
        if method.metric == "mmd" else None
    geo = _geometry_for(method, records, gram)
    k_range = sorted(int(k) for k in args.k_range.split(","))
    criteria = list(CRITERIA) if args.criterion == "all" else [args.criterion]
    result = {}
    parts = {}
    for k in k_range:
        if method.metric == "mmd":
            parts[k] = kernel_kmeans(gram, k, restarts=args.restarts, seed=args.seed)
        else:
            parts[k] = wasserstein_kmeans(records, k, restarts=args.restarts,
                                          seed=args.seed,
                                          centroid_mode=args.centroid_mode)
    for crit in criteria:
        index_fn, sign = CRITERIA[crit]
        scores = {k: index_fn(geo, parts[k]) for k in k_range}
        best = max(k_range, key=lambda k: (sign * scores[k], -k))
        result[crit] = {"chosen_k": best, "scores": scores}
    text = json.dumps(result, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_run(args) -> int:
    cfg_data = json.loads(Path(args.config).read_text())
    k_selection = cfg_data.pop("k_selection", None)
    config = ExperimentConfig.from_json(cfg_data, seed=args.seed_override,
                                        jobs=args.jobs_override, out=args.out)
    if k_selection:
        rows = select_k_proportions(config, k_range=k_selection.get("k_range", (2, 3, 4)),
                                    criteria=k_selection.get("criteria",
                                                             tuple(CRITERIA)))
        out = Path(config.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        (out / "k_selection.json").write_text(json.dumps(rows, indent=1) + "\n")
        with open(out / "k_selection.csv", "w") as fh:
            fh.write("setting,method,criterion,k,proportion\n")
            for row in rows:
                fh.write(f"{row['setting']},{row['method']},{row['criterion']},"
                         f"{row['k']},{row['proportion']}\n")
        print(out / "k_selection.json")
        return 0
    table = run_experiment(config)
    for row in table.rows:
        print(f"{row['setting']:>16s}  {row['method']:>14s}  "
              f"acc={row['mean_accuracy']:.4f}  ari={row['mean_ari']:.4f}")
    return 0


def _cmd_report(args) -> int:
    rows = []
    for path in args.inputs:
        with open(path) as fh:
            rows.extend(json.loads(line) for line in fh if line.strip())
    table = aggregate_rows(rows)
    out = Path(args.out or "report.csv")
    table.write_csv(out)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distclust",
        description="Cluster samples of probability distributions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset manifest")
    p.add_argument("--model", default="univariate",
                   choices=["univariate", "univariate-variation1", "univariate-variation2",
                            "bivariate-independent", "bivariate-dependent"])
    p.add_argument("--lambda", dest="merge_lambda", type=float, default=0.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--n-per-cluster", type=int, default=50)
    p.add_argument("--n-obs", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.9)
    _add_common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("sar-extract", help="turn a SAR image tree into records")
    p.add_argument("--root", required=True)
    p.add_argument("--classes", required=True, help="comma-separated class directories")
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--levels", type=int, default=256)
    p.add_argument("--filter-levels", type=int, default=200)
    p.add_argument("--bivariate", action="store_true")
    p.add_argument("--pixel-cap", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_sar_extract)

    p = sub.add_parser("gram", help="compute a Gram or distance matrix from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kernel", required=True,
                   help='e.g. "gaussian:auto", "energy:0.5", or "2w" for a '
                        "Wasserstein distance matrix")
    p.add_argument("--csv", action="store_true", help="also export CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_gram)

    p = sub.add_parser("cluster", help="K-means over a Gram file or manifest")
    p.add_argument("--gram")
    p.add_argument("--manifest")
    p.add_argument("--method", default="2w", help="used with --manifest")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--centroid-mode", default="quantile_mean",
                   choices=["quantile_mean", "mixture_mean"])
    p.add_argument("--csv", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_cluster)

    p = sub.add_parser("score", help="accuracy / ARI of a partition vs labels")
    p.add_argument("--partition", required=True)
    p.add_argument("--manifest", required=True)
    _add_common(p)
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("select-k", help="internal-index K selection")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", default="2w")
    p.add_argument("--k-range", default="2,3,4")
    p.add_argument("--criterion", default="all", choices=["all", *CRITERIA])
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--centroid-mode", default="quantile_mean",
                   choices=["quantile_mean", "mixture_mean"])
    _add_common(p)
    p.set_defaults(fn=_cmd_select_k)

    p = sub.add_parser("run", help="full replicated experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", dest="seed_override", type=int, default=None)
    p.add_argument("--jobs", dest="jobs_override", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("report", help="aggregate replication score files")
    p.add_argument("inputs", nargs="+")
    _add_common(p)
    p.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ReplicationFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

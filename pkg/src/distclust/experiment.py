"""Monte Carlo orchestration: replicated clustering runs and K selection.

A run is described declaratively: a data source (generator preset or
manifest), a list of methods (MMD kernels and/or the Wasserstein baseline),
clustering parameters, a replication count, and one master seed. Each
replication derives its own seed, so any single replication can be
reproduced in isolation. Results aggregate into tables of mean accuracy
and mean adjusted Rand index with standard errors; K-selection runs count
how often each candidate K wins under each internal index.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import DistributionRecord
from .errors import ConfigError, DistclustError, InputError, ReplicationFailure
from .gram import GramMatrix, gram_estimated_batch, gram_exact
from .io import load_manifest, read_matrix, write_matrix
from .kernels import KernelSpec
from .kmeans import kernel_kmeans, wasserstein_kmeans
from .validity import (CRITERIA, GramGeometry, WassersteinGeometry, accuracy,
                       adjusted_rand_index)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodSpec:
    """One clustering method: a metric plus its parameters."""

    metric: str  # "mmd" or "wasserstein"
    kernel: KernelSpec | None = None
    order: float = 2.0
    grid: int = 1024
    centroid_mode: str = "quantile_mean"

    def __post_init__(self):
        if self.metric == "mmd":
            if self.kernel is None:
                raise ConfigError("mmd method needs a kernel")
        elif self.metric != "wasserstein":
            raise ConfigError(f"unknown metric {self.metric!r}")

    def label(self) -> str:
        if self.metric == "wasserstein":
            return f"{self.order:g}-W"
        return self.kernel.label()

    @classmethod
    def parse(cls, text_or_dict) -> "MethodSpec":
        """Accept "2w", "gaussian:auto", "mg:2", "energy:0.25" or a JSON dict."""
        if isinstance(text_or_dict, dict):
            d = text_or_dict
            if d.get("metric") == "wasserstein" or "kernel" not in d:
                return cls("wasserstein", order=d.get("order", 2.0),
                           grid=d.get("grid", 1024),
                           centroid_mode=d.get("centroid_mode", "quantile_mean"))
            return cls("mmd", kernel=KernelSpec.from_json(d["kernel"]),
                       grid=d.get("grid", 1024))
        text = str(text_or_dict).strip().lower()
        if text in ("2w", "2-w", "w2", "wasserstein"):
            return cls("wasserstein")
        if ":" not in text:
            raise ConfigError(f"cannot parse method {text_or_dict!r}")
        family, _, param = text.partition(":")
        if family in ("gaussian", "laplace"):
            sigma = "auto" if param == "auto" else float(param)
            return cls("mmd", kernel=KernelSpec(family, sigma=sigma))
        if family in ("mg", "energy"):
            return cls("mmd", kernel=KernelSpec(family, alpha=float(param)))
        raise ConfigError(f"cannot parse method {text_or_dict!r}")


FULL_METHOD_GRID = ("2w", "gaussian:auto", "laplace:auto", "mg:2", "mg:3",
                 "energy:0.25", "energy:0.5", "energy:0.75")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one Monte Carlo run."""

    generator: dict
    methods: tuple
    n_clusters: int = 2
    restarts: int = 10
    replications: int = 20
    seed: int = 0
    jobs: int = 1
    out: str | None = None
    max_failure_fraction: float = 0.1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        object.__setattr__(self, "methods",
                           tuple(m if isinstance(m, MethodSpec) else MethodSpec.parse(m)
                                 for m in self.methods))

    @classmethod
    def from_json(cls, d: dict, **overrides) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config fields: {sorted(bad)}")
        merged = {**d, **{k: v for k, v in overrides.items() if v is not None}}
        if "generator" not in merged or "methods" not in merged:
            raise ConfigError("config needs 'generator' and 'methods'")
        return cls(**merged)


def _settings(generator: dict) -> list[tuple[str, dict]]:
    """Expand a generator description into concrete (label, config) settings.

    A list-valued "lambda" fans out into one setting per value, which is how
    the lambda-sweep tables are produced.
    """
    gen = dict(generator)
    model = gen.get("model", "manifest" if "manifest" in gen else None)
    if model is None:
        raise ConfigError("generator needs a 'model' or a 'manifest'")
    if model == "univariate":
        lams = gen.get("lambda", 0.0)
        if not isinstance(lams, (list, tuple)):
            lams = [lams]
        out = []
        for lam in lams:
            g = dict(gen)
            g["lambda"] = float(lam)
            out.append((f"lambda={lam:g}", g))
        return out
    return [(model, gen)]


def _generate(setting: dict, rng: np.random.Generator) -> list[DistributionRecord]:
    from . import simgen

    model = setting.get("model", "manifest" if "manifest" in setting else None)
    if model == "univariate":
        cfg = simgen.UnivariateModelConfig(
            setting["lambda"], n=setting.get("n", 100),
            c0=setting.get("c0", 805.0), d0=setting.get("d0", 1004.0))
        return simgen.generate_univariate(cfg, rng)
    if model == "bivariate_independent":
        cfg = simgen.BivariateModelConfig.independent(
            setting.get("n_per_cluster", 50), setting.get("n_obs", 1000))
        return simgen.generate_bivariate_independent(cfg, rng)
    if model == "bivariate_dependent":
        cfg = simgen.BivariateModelConfig.dependent(
            setting.get("rho", 0.9), setting.get("n_per_cluster", 50),
            setting.get("n_obs", 1000))
        return simgen.generate_bivariate_dependent(cfg, rng)
    if model == "manifest":
        return load_manifest(setting["manifest"])
    raise ConfigError(f"unknown generator model {model!r}")


# ---------------------------------------------------------------------------
# Gram construction with a content-addressed cache.


def _records_digest(records) -> str:
    h = hashlib.sha256()
    for rec in records:
        if rec.is_analytic:
            h.update(b"mix")
            h.update(np.asarray(rec.payload.components, dtype=float).tobytes())
        else:
            h.update(b"emp")
            h.update(rec.payload.observations.tobytes())
    return h.hexdigest()


def _gram_cache_path(cache_dir, records, kernel: KernelSpec, mode: str) -> Path:
    resolved = kernel.resolved(records)
    key = hashlib.sha256(
        (_records_digest(records) + json.dumps(resolved.to_json(), sort_keys=True)
         + mode).encode()).hexdigest()
    return Path(cache_dir) / f"gram_{key[:24]}.bin"


def _cache_store(cache_path: Path, gram: GramMatrix):
    """Write-once cache entry; the temp-and-rename keeps readers consistent."""
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = cache_path.with_name(f"{cache_path.name}.{os.getpid()}.tmp")
    write_matrix(tmp, gram.values, gram.mode, gram.kernel)
    os.replace(str(tmp) + ".json", str(cache_path) + ".json")
    os.replace(tmp, cache_path)


def build_gram(records, kernel: KernelSpec, jobs: int = 1,
               cache_dir=None) -> GramMatrix:
    """Exact or estimated Gram depending on the payload type, with caching."""
    analytic = all(r.is_analytic for r in records)
    empirical = all(not r.is_analytic for r in records)
    if not (analytic or empirical):
        raise InputError("cannot mix analytic and empirical records in one Gram")
    mode = "exact" if analytic else "estimated"
    cache_path = None
    if cache_dir is not None:
        cache_path = _gram_cache_path(cache_dir, records, kernel, mode)
        if cache_path.exists():
            values, got_mode, got_kernel, _ = read_matrix(cache_path)
            return GramMatrix(values, got_mode, got_kernel)
    if analytic:
        gram = gram_exact(records, kernel)
    else:
        gram = gram_estimated_batch(records, [kernel], jobs=jobs)[0]
    if cache_path is not None:
        _cache_store(cache_path, gram)
    return gram


def _grams_for_methods(records, methods, jobs, cache_dir=None):
    """Gram per MMD method; estimated mode batches kernels over one data pass.

    With a cache directory, hits are loaded and only the missing kernels are
    recomputed (still sharing one pass over the observations).
    """
    mmd_idx = [i for i, m in enumerate(methods) if m.metric == "mmd"]
    grams: dict[int, GramMatrix] = {}
    if not mmd_idx:
        return grams
    analytic = all(r.is_analytic for r in records)
    mode = "exact" if analytic else "estimated"
    missing = []
    cache_paths = {}
    for i in mmd_idx:
        if cache_dir is not None:
            path = _gram_cache_path(cache_dir, records, methods[i].kernel, mode)
            cache_paths[i] = path
            if path.exists():
                values, got_mode, got_kernel, _ = read_matrix(path)
                grams[i] = GramMatrix(values, got_mode, got_kernel)
                continue
        missing.append(i)
    if missing:
        if analytic:
            fresh = [gram_exact(records, methods[i].kernel) for i in missing]
        else:
            fresh = gram_estimated_batch(records, [methods[i].kernel for i in missing],
                                         jobs=jobs)
        for i, gram in zip(missing, fresh):
            grams[i] = gram
            if cache_dir is not None:
                _cache_store(cache_paths[i], gram)
    return grams


# ---------------------------------------------------------------------------
# Replication engine.


def _replication_seed(master: int, setting_idx: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((master, setting_idx, rep))


def _run_replication(config: ExperimentConfig, setting_idx: int, setting: dict,
                     rep: int) -> list[dict]:
    ss = _replication_seed(config.seed, setting_idx, rep)
    gen_ss, cluster_ss = ss.spawn(2)
    rng = np.random.default_rng(gen_ss)
    cluster_seed = int(cluster_ss.generate_state(1, np.uint64)[0])
    records = _generate(setting, rng)
    truth = [r.label for r in records]
    cache_dir = Path(config.out) / "cache" if config.out else None
    grams = _grams_for_methods(records, config.methods, config.jobs, cache_dir)
    rows = []
    for i, method in enumerate(config.methods):
        if method.metric == "mmd":
            part = kernel_kmeans(grams[i], config.n_clusters,
                                 restarts=config.restarts, seed=cluster_seed)
        else:
            part = wasserstein_kmeans(records, config.n_clusters,
                                      restarts=config.restarts, seed=cluster_seed,
                                      centroid_mode=method.centroid_mode,
                                      grid=method.grid)
        rows.append({
            "setting": None,  # filled by caller
            "method": method.label(),
            "replication": rep,
            "seed": cluster_seed,
            "accuracy": accuracy(part, truth),
            "ari": adjusted_rand_index(part, truth),
            "wcss": part.wcss,
            "n_iterations": part.n_iterations,
            "wcss_trace": list(part.wcss_trace),
        })
    return rows


def _rep_worker(args):
    config, setting_idx, setting, rep = args
    try:
        return rep, _run_replication(config, setting_idx, setting, rep), None
    except DistclustError as exc:
        return rep, None, f"{type(exc).__name__}: {exc}"


@dataclass
class ResultTable:
    """Aggregated scores, one row per (setting, method)."""

    rows: list = field(default_factory=list)

    def to_json(self) -> list:
        return self.rows

    def write_csv(self, path):
        cols = ["setting", "method", "mean_accuracy", "mean_ari",
                "se_accuracy", "se_ari", "n_replications", "n_failed"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            writer.writerows(self.rows)

    def lookup(self, setting: str, method: str) -> dict:
        for row in self.rows:
            if row["setting"] == setting and row["method"] == method:
                return row
        raise KeyError((setting, method))


def aggregate_rows(per_rep_rows, n_failed_by_setting=None) -> ResultTable:
    """Mean/standard-error table from per-replication score rows."""
    groups: dict[tuple, list] = {}
    for row in per_rep_rows:
        groups.setdefault((row["setting"], row["method"]), []).append(row)
    table = ResultTable()
    for (setting, method), rows in sorted(groups.items()):
        acc = np.array([r["accuracy"] for r in rows])
        ari = np.array([r["ari"] for r in rows])
        if acc.min() < 0.0 or acc.max() > 1.0 or ari.max() > 1.0 + 1e-12:
            raise InputError("scores outside their valid ranges")
        n = len(rows)
        table.rows.append({
            "setting": setting,
            "method": method,
            "mean_accuracy": float(acc.mean()),
            "mean_ari": float(ari.mean()),
            "se_accuracy": float(acc.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            "se_ari": float(ari.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            "n_replications": n,
            "n_failed": (n_failed_by_setting or {}).get(setting, 0),
        })
    return table


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Execute every (setting, replication), score, aggregate, persist."""
    settings = _settings(config.generator)
    all_rows = []
    failures = []
    jobs = [(config, s_idx, setting, rep)
            for s_idx, (_, setting) in enumerate(settings)
            for rep in range(config.replications)]
    if config.jobs > 1 and len(jobs) > 1:
        # Replications are the unit of parallelism; Gram-level workers are
        # left to the sequential path to avoid nested pools.
        seq_config = ExperimentConfig(config.generator, config.methods,
                                      config.n_clusters, config.restarts,
                                      config.replications, config.seed, 1,
                                      config.out, config.max_failure_fraction)
        jobs = [(seq_config, s, st, r) for (_, s, st, r) in jobs]
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_rep_worker, jobs))
    else:
        outcomes = [_rep_worker(j) for j in jobs]
    for (cfg, s_idx, setting, rep), (rep_id, rows, err) in zip(jobs, outcomes):
        label = settings[s_idx][0]
        if err is not None:
            failures.append({"setting": label, "replication": rep_id, "error": err,
                             "seed": [config.seed, s_idx, rep_id]})
            logger.warning("replication %s/%d failed: %s", label, rep_id, err)
            continue
        for row in rows:
            row["setting"] = label
        all_rows.extend(rows)
    total = len(jobs)
    if total and len(failures) / total > config.max_failure_fraction:
        raise ReplicationFailure(
            f"{len(failures)} of {total} replications failed")
    failed_by_setting: dict[str, int] = {}
    for f in failures:
        failed_by_setting[f["setting"]] = failed_by_setting.get(f["setting"], 0) + 1
    table = aggregate_rows(all_rows, failed_by_setting)
    if config.out:
        outdir = Path(config.out)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "replications.jsonl", "w") as fh:
            for row in all_rows:
                fh.write(json.dumps(row) + "\n")
        if failures:
            (outdir / "failures.json").write_text(json.dumps(failures, indent=1) + "\n")
        table.write_csv(outdir / "results.csv")
        (outdir / "results.json").write_text(json.dumps(table.to_json(), indent=1) + "\n")
    return table


# ---------------------------------------------------------------------------
# K selection.


def _geometry_for(method: MethodSpec, records, gram: GramMatrix | None):
    if method.metric == "mmd":
        return GramGeometry(gram)
    return WassersteinGeometry(records, alpha=method.order, grid=method.grid)


def select_k_proportions(config: ExperimentConfig, k_range=(2, 3, 4),
                         criteria=("ch", "silhouette", "dbstar")) -> list[dict]:
    """Fraction of replications in which each K wins, per method and criterion.

    Clustering runs once per K; every criterion scores the same partitions.
    """
    k_range = sorted(k_range)
    settings = _settings(config.generator)
    counts: dict[tuple, dict[int, int]] = {}
    totals: dict[tuple, int] = {}
    for s_idx, (label, setting) in enumerate(settings):
        for rep in range(config.replications):
            ss = _replication_seed(config.seed, s_idx, rep)
            gen_ss, cluster_ss = ss.spawn(2)
            rng = np.random.default_rng(gen_ss)
            cluster_seed = int(cluster_ss.generate_state(1, np.uint64)[0])
            records = _generate(setting, rng)
            grams = _grams_for_methods(records, config.methods, config.jobs)
            for i, method in enumerate(config.methods):
                geo = _geometry_for(method, records, grams.get(i))
                parts = {}
                for k in k_range:
                    if method.metric == "mmd":
                        parts[k] = kernel_kmeans(grams[i], k, restarts=config.restarts,
                                                 seed=cluster_seed)
                    else:
                        parts[k] = wasserstein_kmeans(
                            records, k, restarts=config.restarts, seed=cluster_seed,
                            centroid_mode=method.centroid_mode, grid=method.grid)
                for crit in criteria:
                    index_fn, sign = CRITERIA[crit]
                    best_k, best_val = None, None
                    for k in k_range:
                        val = sign * index_fn(geo, parts[k])
                        if best_val is None or val > best_val:
                            best_k, best_val = k, val
                    key = (label, method.label(), crit)
                    counts.setdefault(key, {kk: 0 for kk in k_range})
                    counts[key][best_k] += 1
                    totals[key] = totals.get(key, 0) + 1
    rows = []
    for (label, method, crit), by_k in sorted(counts.items()):
        total = totals[(label, method, crit)]
        for k in k_range:
            rows.append({"setting": label, "method": method, "criterion": crit,
                         "k": k, "proportion": by_k[k] / total})
    return rows

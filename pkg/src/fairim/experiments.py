"""Config-driven experiment runner and report writer.

One trial builds (or loads) the dataset, trains the embeddings the requested
methods need, picks seeds for every budget and scores them with a shared
set of cascade rollouts. Every random choice descends from ``master_seed``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
import traceback
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .baselines import degree_seeds, greedy_celf, random_seeds
from .datasets import SbmParams, generate_sbm, rice_filter
from .diffusion import CascadeParams, estimate_influence
from .embedding import TrainConfig, embed, train_fair_embedding, train_plain_embedding
from .errors import ConfigError, DataError, FairIMError
from .graph import (
    AttributedGraph,
    binarize_attribute,
    feature_matrix,
    group_label_predicate,
    load_attributes,
    load_edge_list,
    read_attribute_ids,
    threshold_predicate,
)
from .rng import derive_seed
from .selection import DEFAULT_CLUSTERS, fair_selection, normal_selection

log = logging.getLogger(__name__)

METHODS = ("fair_embedding", "normal_embedding", "greedy", "degree", "random")
DEFAULT_BUDGETS = (5, 10, 15, 20, 25, 30, 35, 40)
ROW_COLUMNS = ["method", "budget", "trial", "total_fraction", "frac_A", "frac_B", "disparity", "stderr_total"]

_STAGE_DATASET, _STAGE_EMBED, _STAGE_SELECT, _STAGE_GREEDY, _STAGE_RANDOM, _STAGE_EVAL = range(6)


@dataclass
class ExperimentConfig:
    dataset: dict
    attributes: list[str]
    methods: list[str]
    budgets: list[int] = field(default_factory=lambda: list(DEFAULT_BUDGETS))
    embedding: dict = field(default_factory=dict)
    k_clusters: int = DEFAULT_CLUSTERS
    activation_probability: float = 0.03
    rollouts: int = 1000
    trials: int = 5
    master_seed: int = 0
    trial_seeds: list[int] | None = None

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("methods: at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"methods: unknown {bad}; choose from {list(METHODS)}")
        if not self.budgets or any(int(b) < 1 for b in self.budgets):
            raise ConfigError("budgets: need a non-empty list of positive integers")
        if list(self.budgets) != sorted(set(self.budgets)):
            raise ConfigError("budgets: must be strictly ascending")
        if not 0.0 <= float(self.activation_probability) <= 1.0:
            raise ConfigError("activation_probability: must lie in [0, 1]")
        if int(self.rollouts) < 1:
            raise ConfigError("rollouts: must be positive")
        if int(self.trials) < 1:
            raise ConfigError("trials: must be positive")
        if int(self.k_clusters) < 1:
            raise ConfigError("k_clusters: must be positive")
        if not self.attributes:
            raise ConfigError("attributes: list at least one sensitive attribute")
        if self.trial_seeds is not None and len(self.trial_seeds) != self.trials:
            raise ConfigError("trial_seeds: need exactly one seed per trial")
        if "type" not in self.dataset or self.dataset["type"] not in ("sbm", "files"):
            raise ConfigError('dataset.type: must be "sbm" or "files"')
        self.train_config()

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig.from_dict(self.embedding)
        except (TypeError, ConfigError) as exc:
            raise ConfigError(f"embedding: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "attributes": list(self.attributes),
            "methods": list(self.methods),
            "budgets": [int(b) for b in self.budgets],
            "embedding": self.embedding,
            "k_clusters": self.k_clusters,
            "activation_probability": self.activation_probability,
            "rollouts": self.rollouts,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "trial_seeds": self.trial_seeds,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        missing = {"dataset", "attributes", "methods"} - set(d)
        if missing:
            raise ConfigError(f"missing config key(s): {sorted(missing)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def seed_for_trial(self, trial: int) -> int:
        if self.trial_seeds is not None:
            return int(self.trial_seeds[trial])
        return derive_seed(self.master_seed, trial)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    group_sizes: dict = field(default_factory=dict)
    trial_seeds: list[int] = field(default_factory=list)
    wall_seconds: float = 0.0

    def sorted_rows(self) -> list[dict]:
        order = {m: i for i, m in enumerate(METHODS)}
        return sorted(self.rows, key=lambda r: (order[r["method"]], r["budget"], r["trial"]))

    def aggregate(self) -> list[dict]:
        return aggregate_rows(self.sorted_rows())


def aggregate_rows(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], int(r["budget"])), []).append(r)
    out = []
    for (method, budget), rs in groups.items():
        agg = {"method": method, "budget": budget, "trials": len(rs)}
        for col in ("total_fraction", "frac_A", "frac_B", "disparity"):
            vals = np.array([float(r[col]) for r in rs])
            agg[f"mean_{col}"] = float(vals.mean())
            agg[f"se_{col}"] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out.append(agg)
    return out


# ---------------------------------------------------------------- datasets


def build_dataset(spec: Mapping, attributes: list[str], seed: int) -> AttributedGraph:
    """Graph for one trial from the ``dataset`` config block."""
    if spec["type"] == "sbm":
        params = SbmParams(**spec.get("params", {}))
        g = generate_sbm(params, int(spec.get("seed", seed)), attr=attributes[0])
        if len(attributes) > 1:
            raise ConfigError("sbm datasets carry a single attribute")
        return g
    try:
        edges = spec["edges"]
    except KeyError:
        raise ConfigError("dataset.edges: required for file datasets") from None
    base = Path(spec.get("base_dir", "."))
    attr_file = base / spec["attributes_file"] if "attributes_file" in spec else None
    try:
        if spec.get("remap", False):
            extra = read_attribute_ids(attr_file) if attr_file is not None else ()
            g, id_map = load_edge_list(base / edges, remap=True, extra_ids=extra)
        else:
            g, id_map = load_edge_list(base / edges), None
        if attr_file is not None:
            g = load_attributes(attr_file, g, id_map)
    except OSError as exc:
        raise DataError(f"{exc.filename}: {exc.strerror}") from None
    if spec.get("filter") == "rice":
        g = rice_filter(g, spec.get("age_attribute", "age"))
    elif spec.get("filter") not in (None, "none"):
        raise ConfigError(f"dataset.filter: unknown filter {spec['filter']!r}")
    thresholds = spec.get("thresholds", {})
    for attr in attributes:
        if attr in g.labels:
            continue
        pred = threshold_predicate(float(thresholds[attr])) if attr in thresholds else group_label_predicate
        g = binarize_attribute(g, attr, pred)
    return g


# ---------------------------------------------------------------- running


class _Clock:
    def __init__(self, report: ExperimentReport):
        self.report = report

    @contextmanager
    def stage(self, trial: int, method: str, stage: str, budget: int | str = ""):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.report.timings.append(
                {"trial": trial, "method": method, "budget": budget, "stage": stage, "seconds": time.perf_counter() - t0}
            )


def _row(method, budget, trial, rep, attributes) -> dict:
    first = attributes[0]
    fa, fb = rep.per_group_fraction[first]
    row = {
        "method": method,
        "budget": budget,
        "trial": trial,
        "total_fraction": rep.total_fraction,
        "frac_A": fa,
        "frac_B": fb,
        "disparity": abs(fa - fb),
        "stderr_total": rep.stderr["total"],
    }
    for attr in attributes[1:]:
        a, b = rep.per_group_fraction[attr]
        row[f"frac_A:{attr}"] = a
        row[f"frac_B:{attr}"] = b
        row[f"disparity:{attr}"] = abs(a - b)
    return row


def _run_trial(cfg: ExperimentConfig, trial: int, seed: int, report: ExperimentReport, clock: _Clock) -> None:
    attrs = list(cfg.attributes)
    current = "dataset"
    try:
        with clock.stage(trial, "", "dataset"):
            g = build_dataset(cfg.dataset, attrs, derive_seed(seed, _STAGE_DATASET))
            for a in attrs:
                if a not in g.labels:
                    raise DataError(f"dataset has no attribute {a!r}")
            x = feature_matrix(g) if {"fair_embedding", "normal_embedding"} & set(cfg.methods) else None
        report.group_sizes.setdefault("n", g.n)
        for a in attrs:
            report.group_sizes.setdefault(a, list(g.group_sizes(a)))
        cascade = CascadeParams(float(cfg.activation_probability), int(cfg.rollouts), derive_seed(seed, _STAGE_EVAL))
        tcfg = cfg.train_config()
        top = max(cfg.budgets)
        if top > g.n:
            raise ConfigError(f"budget {top} exceeds the {g.n} nodes of the dataset")
        for method in cfg.methods:
            current = method
            per_budget = {}
            if method == "fair_embedding":
                with clock.stage(trial, method, "train"):
                    groups = {a: g.labels[a] for a in attrs}
                    z = embed(train_fair_embedding(x, groups, tcfg, derive_seed(seed, _STAGE_EMBED, 0)), x)
                with clock.stage(trial, method, "select"):
                    for b in cfg.budgets:
                        per_budget[b] = fair_selection(
                            z, g.labels[attrs[0]], b, cfg.k_clusters, derive_seed(seed, _STAGE_SELECT, 0, b)
                        )
            elif method == "normal_embedding":
                with clock.stage(trial, method, "train"):
                    z = embed(train_plain_embedding(x, tcfg, derive_seed(seed, _STAGE_EMBED, 1)), x)
                with clock.stage(trial, method, "select"):
                    for b in cfg.budgets:
                        per_budget[b] = normal_selection(z, b, derive_seed(seed, _STAGE_SELECT, 1, b))
            elif method == "greedy":
                with clock.stage(trial, method, "select"):
                    full, _ = greedy_celf(g, cascade.p, top, cascade.rollouts, derive_seed(seed, _STAGE_GREEDY))
                    per_budget = {b: full.prefix(b) for b in cfg.budgets}
            elif method == "degree":
                with clock.stage(trial, method, "select"):
                    full = degree_seeds(g, top)
                    per_budget = {b: full.prefix(b) for b in cfg.budgets}
            else:
                with clock.stage(trial, method, "select"):
                    full = random_seeds(g, top, derive_seed(seed, _STAGE_RANDOM))
                    per_budget = {b: full.prefix(b) for b in cfg.budgets}
            with clock.stage(trial, method, "evaluate"):
                for b, seeds in per_budget.items():
                    rep = estimate_influence(g, seeds, cascade, attrs)
                    report.rows.append(_row(method, b, trial, rep, attrs))
    except FairIMError as exc:
        log.warning("trial %d aborted in %s: %s", trial, current, exc)
        report.errors.append({"trial": trial, "stage": current, "error": type(exc).__name__, "message": str(exc)})
    except Exception as exc:  # noqa: BLE001 - any failure aborts only this trial
        log.error("trial %d crashed in %s:\n%s", trial, current, traceback.format_exc())
        report.errors.append({"trial": trial, "stage": current, "error": type(exc).__name__, "message": str(exc)})


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    report = ExperimentReport(cfg)
    clock = _Clock(report)
    t0 = time.perf_counter()
    for trial in range(int(cfg.trials)):
        seed = cfg.seed_for_trial(trial)
        report.trial_seeds.append(seed)
        log.info("trial %d (seed %d)", trial, seed)
        _run_trial(cfg, trial, seed, report, clock)
    report.wall_seconds = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(h, "")) for h in header])


def row_columns(cfg: ExperimentConfig) -> list[str]:
    cols = list(ROW_COLUMNS)
    for attr in cfg.attributes[1:]:
        cols += [f"frac_A:{attr}", f"frac_B:{attr}", f"disparity:{attr}"]
    return cols


AGG_COLUMNS = [
    "method", "budget", "trials",
    "mean_total_fraction", "se_total_fraction",
    "mean_frac_A", "se_frac_A",
    "mean_frac_B", "se_frac_B",
    "mean_disparity", "se_disparity",
]


def emit_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write ``rows.csv``, ``aggregate.csv``, ``manifest.json`` and ``timings.csv``.

    The first three depend only on the report's results and are byte-stable;
    wall-clock measurements live in ``timings.csv`` alone.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc.strerror}") from None
    cfg = report.config
    paths = {
        "rows": out / "rows.csv",
        "aggregate": out / "aggregate.csv",
        "manifest": out / "manifest.json",
        "timings": out / "timings.csv",
    }
    _write_csv(paths["rows"], row_columns(cfg), report.sorted_rows())
    _write_csv(paths["aggregate"], AGG_COLUMNS, report.aggregate())
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "master_seed": cfg.master_seed,
        "trial_seeds": report.trial_seeds,
        "group_sizes": report.group_sizes,
        "errors": report.errors,
        "seeds_counted_as_influenced": True,
        "row_count": len(report.rows),
    }
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    timing_rows = list(report.timings) + [
        {"trial": "", "method": "", "budget": "", "stage": "wall_total", "seconds": report.wall_seconds}
    ]
    _write_csv(paths["timings"], ["trial", "method", "budget", "stage", "seconds"], timing_rows)
    return paths


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["budget"] = int(r["budget"])
        r["trial"] = int(r["trial"])
    return rows


def reaggregate(out_dir) -> list[dict]:
    """Recompute ``aggregate.csv`` from an existing ``rows.csv``."""
    out = Path(out_dir)
    agg = aggregate_rows(read_rows(out / "rows.csv"))
    _write_csv(out / "aggregate.csv", AGG_COLUMNS, agg)
    return agg

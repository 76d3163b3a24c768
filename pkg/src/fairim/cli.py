"""Command-line interface: ``fairim <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import GreedyTrace, degree_seeds, greedy_celf, random_seeds
from .datasets import SbmParams, edge_counts_by_block, expected_edge_counts, generate_sbm
from .diffusion import CascadeParams, estimate_influence
from .embedding import (
    TrainConfig,
    embed,
    load_checkpoint,
    loss_rows,
    save_checkpoint,
    train_fair_embedding,
    train_plain_embedding,
)
from .errors import ConfigError, DataError, FairIMError, NumericalError
from .experiments import ExperimentConfig, emit_report, reaggregate, run_experiment
from .graph import (
    binarize_attribute,
    feature_matrix,
    group_label_predicate,
    load_attributes,
    load_edge_list,
    threshold_predicate,
    write_attributes,
    write_edge_list,
)
from .selection import DEFAULT_CLUSTERS, fair_selection, normal_selection
from .seeds import read_seed_file, write_seed_file

log = logging.getLogger("fairim")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


# ---------------------------------------------------------------- helpers


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return doc


def _write_json(doc, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _parse_thresholds(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        try:
            if not sep:
                raise ValueError
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"--threshold expects NAME=MAX_A, got {item!r}") from None
    return out


def _load_graph(args, need_attrs: bool = True):
    """Graph from ``--edges``/``--attributes`` with ``--attr`` columns binarized."""
    if not args.edges:
        raise ConfigError("--edges is required")
    g = load_edge_list(args.edges)
    attrs = list(args.attr or [])
    if args.attributes:
        g = load_attributes(args.attributes, g)
        if not attrs:
            attrs = list(g.raw_attributes)
    if need_attrs and not attrs:
        raise ConfigError("this command needs --attributes (and optionally --attr)")
    thresholds = _parse_thresholds(args.threshold)
    for a in attrs:
        pred = threshold_predicate(thresholds[a]) if a in thresholds else group_label_predicate
        g = binarize_attribute(g, a, pred)
    return g, attrs


def _read_embedding(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "node_id":
            raise DataError(f"{path}: header must start with node_id")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                rows[int(row[0])] = [float(v) for v in row[1:]]
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed row") from None
    if sorted(rows) != list(range(len(rows))):
        raise DataError(f"{path}: node ids must be 0..n-1")
    return np.array([rows[u] for u in range(len(rows))], dtype=np.float64)


def _write_embedding(z: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *[f"z_{i}" for i in range(z.shape[1])]])
        for u, row in enumerate(z):
            w.writerow([u, *(repr(float(v)) for v in row)])


def _train_config(args) -> TrainConfig:
    return TrainConfig.from_dict(_read_json(args.config)) if args.config else TrainConfig()


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    params = _read_json(args.config) if args.config else {}
    for key in ("n", "r", "p_intra_a", "p_intra_b", "p_inter"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    try:
        sbm = SbmParams(**params)
    except TypeError as exc:
        raise ConfigError(f"generator parameters: {exc}") from None
    g = generate_sbm(sbm, args.seed, attr=args.attr_name)
    out = _out_dir(args)
    write_edge_list(g, out / "graph.edges")
    write_attributes(g, out / "attributes.csv", [args.attr_name])
    manifest = {
        "params": sbm.to_dict(),
        "seed": args.seed,
        "attribute": args.attr_name,
        "n": g.n,
        "edges": g.m,
        "edge_counts": dict(zip(("intra_A", "intra_B", "inter"), edge_counts_by_block(g, args.attr_name))),
        "expected_edge_counts": dict(zip(("intra_A", "intra_B", "inter"), expected_edge_counts(sbm))),
    }
    _write_json(manifest, out / "manifest.json")
    print(f"wrote {g.n} nodes, {g.m} edges to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _train_config(args)
    g, attrs = _load_graph(args, need_attrs=args.mode == "fair")
    x = feature_matrix(g)
    if args.mode == "fair":
        model = train_fair_embedding(x, {a: g.labels[a] for a in attrs}, cfg, args.seed)
    else:
        model = train_plain_embedding(x, cfg, args.seed)
    out = _out_dir(args)
    save_checkpoint(model, out / "checkpoint.json")
    header, rows = loss_rows(model)
    with open(out / "losses.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"trained {args.mode} embedding (d={cfg.embedding_dim}) -> {out / 'checkpoint.json'}")
    return EXIT_OK


def cmd_embed(args) -> int:
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required")
    model = load_checkpoint(args.checkpoint)
    g, _ = _load_graph(args, need_attrs=False)
    z = embed(model, feature_matrix(g))
    out = _out_dir(args)
    _write_embedding(z, out / "embedding.csv")
    print(f"wrote {z.shape[0]}x{z.shape[1]} embedding to {out / 'embedding.csv'}")
    return EXIT_OK


def cmd_select(args) -> int:
    if args.embedding:
        z = _read_embedding(args.embedding)
    elif args.checkpoint:
        g0, _ = _load_graph(args, need_attrs=False)
        z = embed(load_checkpoint(args.checkpoint), feature_matrix(g0))
    else:
        raise ConfigError("select needs --embedding, or --checkpoint with --edges")
    if args.method == "fair":
        g, attrs = _load_graph(args)
        if g.n != len(z):
            raise DataError(f"embedding has {len(z)} rows but the graph has {g.n} nodes")
        seeds = fair_selection(z, g.labels[attrs[0]], args.budget, args.k, args.seed)
    else:
        seeds = normal_selection(z, args.budget, args.seed)
    out = _out_dir(args)
    write_seed_file(seeds, out / "seeds.txt")
    meta = seeds.to_dict()
    meta["seed"] = args.seed
    meta["k_clusters"] = args.k if args.method == "fair" else args.budget
    _write_json(meta, out / "selection.json")
    print(f"selected {len(seeds)} seeds ({seeds.method}) -> {out / 'seeds.txt'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not args.seeds_file:
        raise ConfigError("--seeds-file is required")
    g, attrs = _load_graph(args, need_attrs=False)
    seeds = read_seed_file(args.seeds_file)
    rep = estimate_influence(g, seeds, CascadeParams(args.p, args.rollouts, args.seed), attrs)
    out = _out_dir(args)
    _write_json(rep.to_dict(), out / "influence.json")
    header = ["total_fraction", "stderr_total"]
    row = [rep.total_fraction, rep.stderr["total"]]
    for a in attrs:
        fa, fb = rep.per_group_fraction[a]
        sfx = "" if a == attrs[0] else f":{a}"
        header += [f"frac_A{sfx}", f"frac_B{sfx}", f"disparity{sfx}"]
        row += [fa, fb, abs(fa - fb)]
    with open(out / "influence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerow([repr(float(v)) for v in row])
    print(f"influenced fraction {rep.total_fraction:.4f} (se {rep.stderr['total']:.4f})")
    return EXIT_OK


def cmd_baseline(args) -> int:
    g, _ = _load_graph(args, need_attrs=False)
    if args.method == "greedy":
        seeds, trace = greedy_celf(g, args.p, args.budget, args.rollouts, args.seed)
    else:
        seeds = degree_seeds(g, args.budget) if args.method == "degree" else random_seeds(g, args.budget, args.seed)
        trace = GreedyTrace(nodes=list(seeds.nodes))
    out = _out_dir(args)
    write_seed_file(seeds, out / "seeds.txt")
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GreedyTrace.HEADER)
        if trace.gains:
            w.writerows(trace.rows())
        else:
            w.writerows([[i + 1, u, "", "", ""] for i, u in enumerate(trace.nodes)])
    print(f"{args.method}: {list(seeds.nodes)}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if not args.config:
        raise ConfigError("experiment needs --config")
    doc = _read_json(args.config)
    if args.seed_given:
        doc["master_seed"] = args.seed
    doc.setdefault("dataset", {})
    if doc["dataset"].get("type") == "files":
        doc["dataset"].setdefault("base_dir", str(Path(args.config).resolve().parent))
    cfg = ExperimentConfig.from_dict(doc)
    report = run_experiment(cfg)
    paths = emit_report(report, _out_dir(args))
    for err in report.errors:
        print(f"trial {err['trial']} failed in {err['stage']}: {err['error']}: {err['message']}", file=sys.stderr)
    _print_aggregate(report.aggregate())
    print(f"report written to {paths['rows'].parent}")
    if report.errors and not report.rows:
        return _exit_for(report.errors[0]["error"])
    return EXIT_OK


def cmd_report(args) -> int:
    rows_path = Path(args.out) / "rows.csv"
    if not rows_path.exists():
        raise DataError(f"{rows_path}: not found (run `experiment` first)")
    _print_aggregate(reaggregate(args.out))
    return EXIT_OK


def _print_aggregate(agg) -> None:
    print(f"{'method':<18}{'budget':>7}{'trials':>7}{'total':>10}{'frac_A':>9}{'frac_B':>9}{'disparity':>11}")
    for a in agg:
        print(
            f"{a['method']:<18}{a['budget']:>7}{a['trials']:>7}{a['mean_total_fraction']:>10.4f}"
            f"{a['mean_frac_A']:>9.4f}{a['mean_frac_B']:>9.4f}{a['mean_disparity']:>11.4f}"
        )


def _exit_for(error_name: str) -> int:
    return {"ConfigError": EXIT_CONFIG, "NumericalError": EXIT_NUMERIC}.get(error_name, EXIT_DATA)


# ---------------------------------------------------------------- parser


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="master seed (default 0)")
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default="fairim-out", help="output directory (default: fairim-out)")
    common.add_argument("-v", "--verbose", action="store_true")

    graph = argparse.ArgumentParser(add_help=False)
    graph.add_argument("--edges", help="edge list (one 'u v' pair per line)")
    graph.add_argument("--attributes", help="attribute CSV (node_id,<attr>...)")
    graph.add_argument("--attr", action="append", help="sensitive attribute column (repeatable)")
    graph.add_argument(
        "--threshold", action="append", metavar="NAME=MAX_A", help="numeric attribute: values <= MAX_A form group A"
    )

    parser = argparse.ArgumentParser(prog="fairim", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample a two-block SBM graph")
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=float, help="fraction of nodes in group A")
    p.add_argument("--p-intra-a", dest="p_intra_a", type=float)
    p.add_argument("--p-intra-b", dest="p_intra_b", type=float)
    p.add_argument("--p-inter", dest="p_inter", type=float)
    p.add_argument("--attr-name", default="group")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common, graph], help="train an embedding (config = hyperparameter JSON)")
    p.add_argument("--mode", choices=("fair", "plain"), default="fair")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", parents=[common, graph], help="embed a graph with a trained checkpoint")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("select", parents=[common, graph], help="pick seeds from an embedding")
    p.add_argument("--embedding", help="embedding CSV from `embed`")
    p.add_argument("--checkpoint")
    p.add_argument("--method", choices=("normal", "fair"), default="fair")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--k", type=int, default=DEFAULT_CLUSTERS, help="clusters for fair selection")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", parents=[common, graph], help="Monte Carlo influence of a seed file")
    p.add_argument("--seeds-file")
    p.add_argument("--p", type=float, required=True, help="activation probability")
    p.add_argument("--rollouts", type=int, default=1000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", parents=[common, graph], help="greedy, degree or random seeds")
    p.add_argument("--method", choices=("greedy", "degree", "random"), required=True)
    p.add_argument("--p", type=float, default=0.01)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--rollouts", type=int, default=1000)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("experiment", parents=[common], help="run a configured experiment")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", parents=[common], help="re-aggregate and print an experiment's rows")
    p.set_defaults(func=cmd_report)
    return parser


def _merge_globals(args, argv) -> None:
    # flags may appear before or after the subcommand; argparse keeps the
    # subcommand's default when the flag was only given up front
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--seed", type=_u64)
    pre.add_argument("--config")
    pre.add_argument("--out")
    head = argv[: argv.index(args.command)] if args.command in argv else []
    early, _ = pre.parse_known_args(head)
    for key in ("seed", "config", "out"):
        if getattr(early, key) is not None and f"--{key}" not in argv[len(head):]:
            setattr(args, key, getattr(early, key))
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_globals(args, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FairIMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"data error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

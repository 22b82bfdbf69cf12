"""Command-line front end.

Four subcommands drive experiments from a single JSON config document:

* ``train``    - run one configuration for `repeats` consecutive seeds,
* ``sweep``    - repeat ``train`` across a whitelisted parameter grid,
* ``analyze``  - dataset statistics (class sizes, imbalance, homophily),
* ``gen-data`` - write a synthetic dataset bundle to disk.

Exit codes: 0 success, 1 config error, 2 runtime failure. The environment
variable ``GNNCL_OUTPUT_ROOT`` supplies the root for relative output dirs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import trainer as trainermod
from .graph import (DatasetSpec, UndefinedHomophilyError, class_homophily,
                    downsample_minority, generate_synthetic_graph,
                    imbalance_ratio, load_graph_bundle, save_graph_bundle,
                    train_class_counts)

OUTPUT_ROOT_ENV = "GNNCL_OUTPUT_ROOT"

SWEEP_PARAMETERS = ("imbalance_ratio", "mu", "beta_plus", "beta_minus",
                    "lambda", "gamma", "epsilon", "k", "base_model", "variant")

_TOP_LEVEL_KEYS = ("dataset", "downsample", "train", "repeats", "output_dir", "sweep")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_experiment_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    for key in data:
        if key not in _TOP_LEVEL_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
    if "dataset" not in data:
        raise ConfigError("missing config key 'dataset'")
    dataset = data["dataset"]
    if not isinstance(dataset, dict) or not ({"bundle", "synthetic"} & set(dataset)):
        raise ConfigError("'dataset' must contain 'bundle' or 'synthetic'")
    repeats = data.get("repeats", 1)
    if not isinstance(repeats, int) or repeats < 1:
        raise ConfigError("'repeats' must be an integer >= 1")
    if "downsample" in data:
        ds = data["downsample"]
        if not isinstance(ds, dict) or "imbalance_ratio" not in ds:
            raise ConfigError("'downsample' requires key 'downsample.imbalance_ratio'")
    try:
        train_config(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid 'train' section: {exc}") from exc
    return data


def train_config(data, **overrides):
    section = dict(data.get("train", {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    return trainermod.config_from_json_dict(section)


def resolve_dataset(data):
    """Produce (Graph, SplitMasks) from the config's dataset + downsample keys."""
    dataset = data["dataset"]
    if "bundle" in dataset:
        bundle = Path(dataset["bundle"])
        if not bundle.is_dir():
            raise ConfigError(f"'dataset.bundle' does not exist: {bundle}")
        graph, masks = load_graph_bundle(bundle)
    else:
        try:
            spec = DatasetSpec(**dataset["synthetic"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid 'dataset.synthetic': {exc}") from exc
        graph, masks = generate_synthetic_graph(spec)

    if "downsample" in data:
        ds = data["downsample"]
        ratio = ds["imbalance_ratio"]
        fraction = ds.get("minority_fraction", 0.5)
        base_seed = int(data.get("train", {}).get("seed", 0))
        rng = np.random.default_rng([base_seed, 3])
        try:
            masks = downsample_minority(masks, graph, ratio, fraction, rng)
        except ValueError as exc:
            raise ConfigError(f"invalid 'downsample.imbalance_ratio': {exc}") from exc
    return graph, masks


def output_dir(data, override=None):
    raw = override if override is not None else data.get("output_dir", "gnncl-out")
    path = Path(raw)
    if not path.is_absolute():
        path = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / path
    return path


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _mean_std(values):
    """Population mean and standard deviation of a value sequence."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _write_history_csv(path, history):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "l_node", "l_edge", "l_gcl", "l_ntl", "total",
                         "val_cma", "n_synthetic", "n_edges_added", "n_triplets"])
        for rec in history:
            b = rec.losses
            writer.writerow([rec.epoch, repr(b.l_node), repr(b.l_edge),
                             repr(b.l_gcl), repr(b.l_ntl), repr(b.total),
                             repr(rec.val_cma), rec.n_synthetic,
                             rec.n_edges_added, rec.n_triplets])


def run_experiment(data, out, seed_override=None, variant_override=None):
    """Run `repeats` seeds of one configuration; returns the summary dict."""
    out.mkdir(parents=True, exist_ok=True)
    base = train_config(data, seed=seed_override, variant=variant_override)
    graph, masks = resolve_dataset(data)

    runs = []
    for i in range(data.get("repeats", 1)):
        config = replace(base, seed=base.seed + i)
        state = trainermod.train(config, graph, masks)
        report = state.evaluate()
        run_dir = out / f"run_seed{config.seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_json(run_dir / "metrics.json", report.to_json_dict())
        trainermod.save_checkpoint(run_dir / "checkpoint.json", state)
        _write_history_csv(run_dir / "history.csv", state.history)
        runs.append({"seed": config.seed, "cma": report.cma,
                     "auc_macro": report.auc_macro,
                     "best_epoch": state.best_epoch,
                     "stopped_early": state.stopped_early})

    cma_mean, cma_std = _mean_std([r["cma"] for r in runs])
    auc_mean, auc_std = _mean_std([r["auc_macro"] for r in runs])
    summary = {
        "repeats": len(runs),
        "variant": base.variant,
        "cma": {"mean": cma_mean, "std": cma_std,
                "values": [r["cma"] for r in runs]},
        "auc_macro": {"mean": auc_mean, "std": auc_std,
                      "values": [r["auc_macro"] for r in runs]},
        "summary_text": (f"cma {cma_mean:.3f}±{cma_std:.3f}, "
                         f"auc {auc_mean:.3f}±{auc_std:.3f}"),
        "runs": runs,
    }
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(args):
    data = load_experiment_config(args.config)
    out = output_dir(data, args.out)
    summary = run_experiment(data, out, args.seed, args.variant)
    print(f"wrote {out}/summary.json: {summary['summary_text']}")
    return 0


def _apply_sweep_value(data, param, value):
    updated = json.loads(json.dumps(data))   # deep copy
    if param == "imbalance_ratio":
        updated.setdefault("downsample", {})["imbalance_ratio"] = value
    else:
        updated.setdefault("train", {})[param] = value
    updated.pop("sweep", None)
    return updated


def _sweep_worker(payload):
    data, param, value, out = payload
    summary = run_experiment(data, Path(out))
    return [{"param": param, "value": value, "seed": run["seed"],
             "cma": run["cma"], "auc": run["auc_macro"]} for run in summary["runs"]]


def cmd_sweep(args):
    data = load_experiment_config(args.config)
    sweep = data.get("sweep")
    if not sweep:
        raise ConfigError("missing config key 'sweep'")
    param = sweep.get("parameter")
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"'sweep.parameter' must be one of {SWEEP_PARAMETERS}, "
                          f"got {param!r}")
    values = sweep.get("values")
    if not values:
        raise ConfigError("'sweep.values' must be a nonempty list")

    out = output_dir(data, args.out)
    out.mkdir(parents=True, exist_ok=True)
    payloads = [(_apply_sweep_value(data, param, v), param, v,
                 str(out / f"{param}={v}")) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    else:
        results = [_sweep_worker(p) for p in payloads]

    rows = [row for point in results for row in point]
    with open(out / "sweep_results.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["param", "value", "seed", "cma", "auc"])
        for row in rows:
            writer.writerow([row["param"], row["value"], row["seed"],
                             repr(row["cma"]), repr(row["auc"])])
    _write_json(out / "sweep_results.json", rows)
    print(f"wrote {out}/sweep_results.csv ({len(rows)} rows)")
    return 0


def cmd_analyze(args):
    data = load_experiment_config(args.config)
    graph, masks = resolve_dataset(data)
    out = output_dir(data, args.out)
    out.mkdir(parents=True, exist_ok=True)

    counts_total = np.bincount(graph.labels, minlength=graph.num_classes)
    counts_train = train_class_counts(graph, masks)
    per_class = []
    for cls in range(graph.num_classes):
        try:
            homophily = class_homophily(graph, cls)
        except UndefinedHomophilyError:
            homophily = None
        per_class.append({"class": cls, "total": int(counts_total[cls]),
                          "train": int(counts_train[cls]), "homophily": homophily})
    payload = {
        "num_nodes": graph.num_nodes,
        "num_edges": int(graph.num_edges),
        "num_classes": graph.num_classes,
        "imbalance_ratio": imbalance_ratio(graph, masks),
        "per_class": per_class,
    }
    _write_json(out / "analysis.json", payload)
    with open(out / "class_stats.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "total", "train", "homophily"])
        for entry in per_class:
            h = "" if entry["homophily"] is None else repr(entry["homophily"])
            writer.writerow([entry["class"], entry["total"], entry["train"], h])
    print(f"wrote {out}/analysis.json "
          f"(imbalance ratio {payload['imbalance_ratio']:.2f})")
    return 0


def cmd_gen_data(args):
    data = load_experiment_config(args.config)
    if "synthetic" not in data["dataset"]:
        raise ConfigError("gen-data requires 'dataset.synthetic'")
    graph, masks = resolve_dataset(data)
    out = output_dir(data, args.out)
    save_graph_bundle(graph, masks, out)
    print(f"wrote bundle to {out} ({graph.num_nodes} nodes, "
          f"{graph.num_edges} edges)")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="gnncl",
        description="Imbalanced node classification experiments: curriculum "
                    "oversampling + edge generation + triplet metric learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="override output_dir")

    p_train = sub.add_parser("train", help="run one configuration over `repeats` seeds")
    common(p_train)
    p_train.add_argument("--seed", type=int, default=None, help="override train.seed")
    p_train.add_argument("--variant", default=None, help="override train.variant")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="run the config's sweep block")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="parallel sweep points (default 1)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_analyze = sub.add_parser("analyze", help="dataset statistics report")
    common(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_gen = sub.add_parser("gen-data", help="write a synthetic bundle to disk")
    common(p_gen)
    p_gen.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:   # runtime failure contract: exit code 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    raise SystemExit(main())

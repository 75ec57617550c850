"""Command-line harness: experiment matrix, feature/dataset export, selector training, reports."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analytics, config as cfgmod, ela
from .acquisition import SCHEDULE_IDS, get_schedule
from .bbob import instantiate, suite_listing
from .doe import Design
from .engine import RunRecord, log_regret, run
from .selector import (Dataset, Forest, ForestConfig, build_dataset, predict_forest,
                       argmin_schedule, train_forest)

log = logging.getLogger("landscape_bo")

REPORT_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# experiment matrix


def _run_one(task) -> Tuple[tuple, Optional[str]]:
    """Worker entry point: run one cell and append it to this worker's part file."""
    (f, i, d, seed, sid), cfg, out_dir = task
    try:
        rec = run(instantiate(f, i, d), get_schedule(sid), cfg.budget(d), seed,
                  cfg.gp, cfg.af_optimizer)
    except Exception as exc:  # recorded by the parent, matrix continues
        return (f, i, d, seed, sid), f"{type(exc).__name__}: {exc}"
    cfgmod.append_record(Path(out_dir) / f"part-{os.getpid()}.jsonl", rec)
    return (f, i, d, seed, sid), None


def run_experiments(cfg: cfgmod.ExperimentConfig) -> Dict[str, int]:
    """Execute the config's full matrix, skipping runs already on disk."""
    out = cfgmod.ensure_writable(cfg.output_dir)  # fail before any run starts
    cfgmod.merge_parts(out)
    done = cfgmod.completed_keys(out)
    todo = [k for k in cfg.matrix() if k not in done]
    log.info("%d runs requested, %d already complete", len(done) + len(todo), len(done))
    failed = 0
    tasks = [(k, cfg, str(out)) for k in todo]
    if cfg.parallelism == 1:
        results = map(_run_one, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=cfg.parallelism)
        results = (fut.result() for fut in as_completed([pool.submit(_run_one, t) for t in tasks]))
    try:
        for key, err in results:
            if err is not None:
                failed += 1
                log.error("run %s failed: %s", key, err)
                cfgmod.write_failure(out, key, err)
    finally:
        if cfg.parallelism != 1:
            pool.shutdown()
        cfgmod.merge_parts(out)
    return {"requested": len(todo) + len(done), "skipped": len(done),
            "completed": len(todo) - failed, "failed": failed}


# ---------------------------------------------------------------------------
# reports


def write_features_csv(records: Sequence[RunRecord], path) -> int:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["function_id", "instance_id", "dim", "seed", "schedule_id", *ela.FEATURE_NAMES])
        n = 0
        for r in records:
            fv = r.features if r.features is not None else ela.feature_vector(r.design)
            w.writerow([*r.key, *("nan" if np.isnan(v) else repr(float(v)) for v in fv.as_array())])
            n += 1
    return n


def analyze(records: Sequence[RunRecord], model: Forest, out_dir, split_seed: int = 0,
            ci: str = "normal") -> Dict[str, object]:
    """AFS evaluation on test rows only: final_regret.csv, ranks.csv, convergence.csv."""
    out = cfgmod.ensure_writable(out_dir)
    ds = build_dataset(records, split_seed)
    perf_all = analytics.normalize_per_function(ds.keys, ds.raw)
    test = np.flatnonzero(ds.split == "test")
    if len(test) == 0:
        raise ValueError("dataset has no test rows")
    keys = [ds.keys[i] for i in test]
    choices = [argmin_schedule(model.predict_batch(ds.features[i:i + 1])[0]) for i in test]
    perf = analytics.PerformanceTable(keys, ds.raw[test], perf_all.normalized[test], choices,
                                      perf_all.flags, perf_all.norm_range)
    perf.to_csv(out / "final_regret.csv")
    ranks = analytics.rank_table(perf)
    ranks.to_csv(out / "ranks.csv")

    by_key = {r.key: r for r in records}
    groups: Dict[str, List[Tuple[int, List[float]]]] = {g: [] for g in (*SCHEDULE_IDS, "afs", "vbs")}
    for row, k in enumerate(keys):
        traj = {s: [log_regret(v) for v in by_key[(*k, s)].incumbent_regret] for s in SCHEDULE_IDS}
        for s in SCHEDULE_IDS:
            groups[s].append((k[0], traj[s]))
        groups["afs"].append((k[0], traj[choices[row]]))
        groups["vbs"].append((k[0], traj[perf.vbs_choice[row]]))
    curves = {"all": analytics.convergence_summary(groups, ci)}
    for fid in sorted({k[0] for k in keys}):
        sub = {g: [(f, t) for f, t in items if f == fid] for g, items in groups.items()}
        curves[str(fid)] = analytics.convergence_summary(sub, ci)
    analytics.write_convergence_csv(out / "convergence.csv", curves)
    return {"test_rows": len(keys), "mean_ranks": ranks.mean_ranks()}


def pipeline(runs_dir, out_dir, seed: int = 0, split_seed: int = 0,
             forest_config: Optional[ForestConfig] = None) -> Dict[str, object]:
    """Dataset -> forest -> test-row report, writing model.json and the three CSVs."""
    records = cfgmod.read_records(runs_dir)
    ds = build_dataset(records, split_seed)
    out = cfgmod.ensure_writable(out_dir)
    model = train_forest(ds, forest_config, seed)
    model.save(out / "model.json")
    summary = analyze(records, model, out, split_seed)
    summary["train_rows"] = int((ds.split == "train").sum())
    return summary


# ---------------------------------------------------------------------------
# argparse


def _cmd_suite(args) -> int:
    for info in suite_listing():
        print(f"{info.function_id:2d}  {info.name:<40s} {info.modality}")
    return 0


def _cmd_run(args) -> int:
    cfg = cfgmod.ExperimentConfig.load(args.config)
    print(json.dumps(run_experiments(cfg)))
    return 0


def _cmd_features(args) -> int:
    n = write_features_csv(cfgmod.read_records(args.runs), args.out)
    print(f"wrote {n} rows to {args.out}")
    return 0


def _cmd_dataset(args) -> int:
    ds = build_dataset(cfgmod.read_records(args.runs), args.split_seed)
    ds.to_csv(args.out)
    print(f"wrote {len(ds)} rows to {args.out}")
    return 0


def _cmd_train(args) -> int:
    ds = Dataset.from_csv(args.dataset)
    train_forest(ds, ForestConfig(n_trees=args.trees), args.seed).save(args.out)
    print(f"wrote model to {args.out}")
    return 0


def _cmd_select(args) -> int:
    model = Forest.load(args.model)
    with open(args.design) as fh:
        d = json.load(fh)
    design = Design.from_dict(d.get("design", d))
    pred = predict_forest(model, ela.feature_vector(design))
    print(json.dumps({
        "schema_version": REPORT_SCHEMA_VERSION,
        "schedule_id": argmin_schedule(pred, model.target_order),
        "predictions": {s: float(v) for s, v in zip(model.target_order, pred)},
    }))
    return 0


def _cmd_analyze(args) -> int:
    summary = analyze(cfgmod.read_records(args.runs), Forest.load(args.model), args.out,
                      args.split_seed, args.ci)
    print(json.dumps(summary))
    return 0


def _cmd_pipeline(args) -> int:
    print(json.dumps(pipeline(args.runs, args.out, args.seed, args.split_seed,
                              ForestConfig(n_trees=args.trees))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="landscape-bo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("suite", help="list the benchmark functions")
    s.add_argument("action", choices=["list"])
    s.set_defaults(fn=_cmd_suite)

    s = sub.add_parser("run", help="run the experiment matrix of a config file")
    s.add_argument("--config", required=True)
    s.set_defaults(fn=_cmd_run)

    s = sub.add_parser("features", help="export ELA features of every run")
    s.add_argument("--runs", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_features)

    s = sub.add_parser("dataset", help="build the selector dataset")
    s.add_argument("--runs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--split-seed", type=int, default=0)
    s.set_defaults(fn=_cmd_dataset)

    s = sub.add_parser("train", help="train the schedule selector")
    s.add_argument("--dataset", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trees", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_train)

    s = sub.add_parser("select", help="pick a schedule for an evaluated design")
    s.add_argument("--model", required=True)
    s.add_argument("--design", required=True)
    s.set_defaults(fn=_cmd_select)

    s = sub.add_parser("analyze", help="write the test-row report tables")
    s.add_argument("--runs", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--ci", choices=["normal", "bootstrap"], default="normal")
    s.set_defaults(fn=_cmd_analyze)

    s = sub.add_parser("pipeline", help="dataset, train and analyze in one step")
    s.add_argument("--runs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--trees", type=int, default=100)
    s.set_defaults(fn=_cmd_pipeline)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

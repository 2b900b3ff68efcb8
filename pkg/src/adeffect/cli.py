"""Command line entry point: clean, features, analyze, train-eval (and synth for demo projects)."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .config import Config, ConfigError, load_config
from .data_model import (
    DataError,
    balance_classes,
    class_counts,
    clean_record,
    read_clean_jsonl,
    read_raw_jsonl,
    write_jsonl,
)
from .ensemble import MissingFeatureBlock, save_ensemble
from .evaluation import (
    TASKS,
    Sample,
    format_report,
    get_task,
    run_experiment,
    write_confusion_json,
    write_table_csv,
)
from .features import FeatureError, VideoFeatures, extract_video, read_features, write_features

LOG = logging.getLogger("adeffect")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2

CLEAN_ALL = "clean_all.jsonl"
CLEAN_BALANCED = "clean.jsonl"
FEATURE_DIR = "features"


def _out(cfg: Config) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_clean(cfg: Config) -> int:
    raw = read_raw_jsonl(cfg.path("raw_records"))
    cleaned = sorted((clean_record(r) for r in raw), key=lambda r: r.video_id)
    balanced = balance_classes(cleaned, cfg.balance_seed)
    out = _out(cfg)
    write_jsonl(out / CLEAN_ALL, cleaned)
    write_jsonl(out / CLEAN_BALANCED, balanced)
    before, after = class_counts(cleaned), class_counts(balanced)
    with open(out / "balance_report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["effectiveness", "before", "after"])
        for c in before:
            w.writerow([c, before[c], after[c]])
        w.writerow(["total", sum(before.values()), sum(after.values())])
    print(f"cleaned {len(cleaned)} videos; balanced to {min(before.values())} per class, "
          f"{len(balanced)} total")
    for c in before:
        print(f"  effectiveness {c}: {before[c]:>6} -> {after[c]}")
    return EXIT_OK


def _extract_one(args):
    rec, assets_root, params = args
    try:
        return rec.video_id, extract_video(rec, assets_root, params), None
    except FeatureError as exc:
        return rec.video_id, None, str(exc)


def cmd_features(cfg: Config) -> int:
    out = _out(cfg)
    records = read_clean_jsonl(out / CLEAN_BALANCED)
    fdir = out / FEATURE_DIR
    fdir.mkdir(exist_ok=True)
    jobs = [(r, cfg.path("assets_root"), cfg.features) for r in records]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_extract_one, jobs, chunksize=8))
    else:
        results = [_extract_one(j) for j in jobs]
    errors, warnings = {}, {}
    for vid, vf, err in results:
        if err is not None:
            errors[vid] = err
            LOG.error(err)
            stale = fdir / f"{vid}.json"
            if stale.exists():
                stale.unlink()
            continue
        write_features(fdir / f"{vid}.json", vf)
        for w in vf.warnings:
            warnings[w] = warnings.get(w, 0) + 1
    summary = {
        "n_videos": len(records),
        "n_extracted": len(records) - len(errors),
        "errors": dict(sorted(errors.items())),
        "warning_counts": dict(sorted(warnings.items())),
    }
    (out / "features_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n",
                                               encoding="utf-8")
    print(f"extracted features for {summary['n_extracted']}/{len(records)} videos")
    for w, n in summary["warning_counts"].items():
        print(f"  warning: {w} ({n} videos)")
    for vid, e in summary["errors"].items():
        print(f"  error: {e}")
    return EXIT_PARTIAL if errors or warnings else EXIT_OK


def _load_feature_store(out: Path, video_ids) -> dict[str, VideoFeatures]:
    store = {}
    for vid in video_ids:
        path = out / FEATURE_DIR / f"{vid}.json"
        if not path.exists():
            raise FeatureError(f"missing feature file for video {vid}")
        store[vid] = read_features(path)
    return store


def cmd_analyze(cfg: Config, k: int | None = None) -> int:
    out = _out(cfg)
    raw = read_raw_jsonl(cfg.path("raw_records"))
    clean_all = read_clean_jsonl(out / CLEAN_ALL)
    k = cfg.extremes_k if k is None else k
    if len(clean_all) < 2 * k:
        raise DataError(f"extremes analysis needs at least {2 * k} records, have {len(clean_all)}")
    features = {}
    fdir = out / FEATURE_DIR
    for rec in clean_all:
        p = fdir / f"{rec.video_id}.json"
        if p.exists():
            features[rec.video_id] = read_features(p).to_dict()
    cols, target = analysis.correlation_columns(raw, clean_all, features)
    rows = analysis.correlation_report(cols, target)
    analysis.write_correlation_csv(out / "correlations.csv", rows)
    rel = analysis.reliability_report(raw)
    analysis.write_reliability_csv(out / "reliability.csv", rel)
    for group in ("topic", "sentiment"):
        rep = analysis.extremes_distribution(clean_all, k, group)
        analysis.write_extremes_csv(out / f"extremes_{group}.csv", rep)
    print(analysis.format_correlations(rows))
    for row in rel.rows():
        print(f"c_v <= {row['threshold_percent']:g}%: {row['count']} videos ({100 * row['fraction']:.2f}%)")
    return EXIT_OK


def build_samples(records, store: dict[str, VideoFeatures]) -> list[Sample]:
    samples = []
    for r in records:
        vf = store[r.video_id]
        samples.append(Sample(
            video_id=r.video_id,
            effectiveness=r.effectiveness,
            topic=r.topic,
            sentiment=r.sentiment,
            blocks={k: np.asarray(v, dtype=np.float64) for k, v in vf.blocks.items()},
            detection_counts={k: np.asarray(v, dtype=np.int64) for k, v in vf.detection_counts.items()},
        ))
    return samples


def cmd_train_eval(cfg: Config, tasks: list[str], seeds: list[int] | None = None) -> int:
    out = _out(cfg)
    records = read_clean_jsonl(out / CLEAN_BALANCED)
    store = _load_feature_store(out, [r.video_id for r in records])
    samples = build_samples(records, store)
    seeds = list(seeds) if seeds else list(cfg.seeds)
    reports = {}
    for name in tasks:
        task = get_task(name)
        report = run_experiment(
            samples, task, seeds, cfg.learners, workers=cfg.workers,
            fraction=cfg.split_fraction,
            priors_on_full_dataset=cfg.priors_on_full_dataset,
            out_of_fold_bins=cfg.out_of_fold_bins,
        )
        reports[task.kind] = report
        write_confusion_json(out / f"confusion_{task.kind}.json", report)
        for res in report.results:
            save_ensemble(res.model, out / "models" / task.kind / f"seed_{res.seed}")
        print(format_report(report))
    write_table_csv(out / "table.csv", {k: reports[k] for k in TASKS if k in reports})
    return EXIT_OK


def cmd_synth(root: str, n_per_class: int, seed: int) -> int:
    from .synthetic import generate_project
    path = generate_project(root, n_per_class=n_per_class, seed=seed)
    print(f"wrote synthetic project; config at {path}")
    return EXIT_OK


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adeffect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("clean", "aggregate annotator labels and balance classes"),
                        ("features", "extract per-video feature files"),
                        ("analyze", "correlations, rating reliability and extreme-ad lifts"),
                        ("train-eval", "train the classifiers and the routing ensemble")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="project config JSON")
        if name == "train-eval":
            p.add_argument("--task", action="append", choices=["binary", "four", "five", "all"],
                           help="task to run (repeatable; default all)")
            p.add_argument("--seed-list", type=_seed_list, help="comma-separated seeds, overrides config")
        if name == "analyze":
            p.add_argument("--k", type=int, help="size of the most/least effective groups")
    p = sub.add_parser("synth", help="write a synthetic demo project with planted signal")
    p.add_argument("root")
    p.add_argument("--per-class", type=int, default=193)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args.root, args.per_class, args.seed)
        cfg = load_config(args.config)
        if args.command == "clean":
            return cmd_clean(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.k)
        tasks = args.task or ["all"]
        tasks = ["binary", "four", "five"] if "all" in tasks else list(dict.fromkeys(tasks))
        return cmd_train_eval(cfg, tasks, args.seed_list)
    except (ConfigError, DataError, FeatureError, MissingFeatureBlock, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""``stereogen`` command line: file-based pipeline stages.

Exit codes: 0 success, 1 stage failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from stereogen import corr, hac, kmodes, recs
from stereogen.config import FeatureConfig, PipelineConfig, load_config
from stereogen.errors import StereogenError
from stereogen.ingest import (
    ItemCatalog,
    LabelVocabulary,
    RatingsTable,
    build_vocabulary,
    encode_multi_hot,
    load_catalog,
    load_ratings,
)
from stereogen.stereotype import StereotypeRun, generate_stereotypes

log = logging.getLogger("stereogen")

QUADRATIC_WARN_BELOW = 0.4


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage


@dataclass
class Context:
    """Loaded inputs shared by the stages of one invocation."""

    config: PipelineConfig
    _catalog: ItemCatalog | None = None
    _ratings: RatingsTable | None = None
    _warned: set = field(default_factory=set)

    @property
    def catalog(self) -> ItemCatalog:
        if self._catalog is None:
            cfg = self.config
            delimiters = {f.delimiter for f in cfg.features}
            if len(delimiters) > 1:
                raise ValueError("all complex features of one catalog must share a delimiter")
            self._catalog = load_catalog(cfg.catalog, cfg.feature_names, delimiters.pop())
        return self._catalog

    @property
    def ratings(self) -> RatingsTable:
        if self._ratings is None:
            self._ratings = load_ratings(self.config.ratings)
        return self._ratings

    def vocabulary(self, feature: str) -> LabelVocabulary:
        return build_vocabulary(self.catalog, feature, self.config.feature(feature).min_count)

    def out(self, stem: str, feature: str, ext: str, seed: int | None = None) -> Path:
        cfg = self.config
        cfg.output.mkdir(parents=True, exist_ok=True)
        seed = cfg.seed if seed is None else seed
        return cfg.output / f"{stem}_{feature}_{cfg.metric}_{cfg.linkage}_s{seed}.{ext}"


def _write_json(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _matrix_csv(labels: Sequence[str], values: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + list(labels))
    for label, row in zip(labels, values):
        writer.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()


def _provenance(ctx: Context, stage: str) -> dict:
    cfg = ctx.config
    return {"root_seed": cfg.seed, "stage_seed": cfg.seed_for(stage)}


# -- stages -------------------------------------------------------------------


def stage_ingest(ctx: Context) -> list[Path]:
    written = []
    for feature in ctx.config.feature_names:
        vocab = ctx.vocabulary(feature)
        m = encode_multi_hot(ctx.catalog, vocab)
        doc = {
            "feature": feature,
            "min_count": vocab.min_count,
            "labels": list(vocab.labels),
            "counts": list(vocab.counts),
            "n_items": len(ctx.catalog),
            **_provenance(ctx, "ingest"),
        }
        written.append(_write_json(ctx.out("vocab", feature, "json"), doc))
        path = ctx.out("multihot", feature, "csv")
        m.to_frame().to_csv(path, index_label="item_id", lineterminator="\n")
        written.append(path)
    ratings = ctx.ratings
    summary = {
        "n_ratings": len(ratings),
        "n_users": int(ratings.records["user_id"].nunique()),
        "n_items": int(ratings.records["item_id"].nunique()),
        **_provenance(ctx, "ingest"),
    }
    written.append(_write_json(ctx.out("ratings_summary", "all", "json"), summary))
    return written


def _correlation(ctx: Context, feature: str) -> corr.CorrelationMatrix:
    return corr.correlation(encode_multi_hot(ctx.catalog, ctx.vocabulary(feature)))


def _warn_quadratic(ctx: Context, feature: str, r: corr.CorrelationMatrix) -> None:
    if ctx.config.metric != "quadratic" or feature in ctx._warned:
        return
    ctx._warned.add(feature)
    mean_abs = r.mean_abs_offdiag()
    if mean_abs < QUADRATIC_WARN_BELOW:
        msg = (
            f"warning: {feature}: the quadratic metric tends to compress weak correlations toward 1.0 "
            f"(mean |R| = {mean_abs:.3f} < {QUADRATIC_WARN_BELOW}); the linear metric is advised"
        )
        print(msg, file=sys.stderr)


def stage_corr(ctx: Context) -> list[Path]:
    written = []
    for feature in ctx.config.feature_names:
        r = _correlation(ctx, feature)
        path = ctx.out("corr", feature, "csv")
        path.write_text(_matrix_csv(r.labels, r.values), encoding="utf-8")
        perm = corr.seriate_greedy(r)
        seriated = r.permuted(perm.order)
        path2 = ctx.out("corr_seriated", feature, "csv")
        path2.write_text(_matrix_csv(seriated.labels, seriated.values), encoding="utf-8")
        written += [path, path2]
    return written


def stage_cluster(ctx: Context) -> list[Path]:
    written = []
    cfg = ctx.config
    for feature in cfg.feature_names:
        r = _correlation(ctx, feature)
        _warn_quadratic(ctx, feature, r)
        dendro = hac.agglomerate(hac.to_dissimilarity(r, cfg.metric), cfg.linkage)
        path = ctx.out("merges", feature, "csv")
        path.write_text(dendro.to_csv(), encoding="utf-8")
        dot = ctx.out("dendrogram", feature, "dot")
        dot.write_text(dendro.to_dot(f"{feature} {cfg.metric} {cfg.linkage}"), encoding="utf-8")
        written += [path, dot]
    return written


def build_runs(ctx: Context) -> dict[str, StereotypeRun]:
    cfg = ctx.config
    runs = {}
    for feature in cfg.feature_names:
        m = encode_multi_hot(ctx.catalog, ctx.vocabulary(feature))
        run = generate_stereotypes(m, feature, cfg.metric, cfg.linkage)
        _warn_quadratic(ctx, feature, run.correlation)
        runs[feature] = run
    return runs


def stage_stereotypes(ctx: Context, runs: dict[str, StereotypeRun] | None = None) -> list[Path]:
    runs = runs if runs is not None else build_runs(ctx)
    written = []
    for feature, run in runs.items():
        doc = {**run.stereotypes.to_dict(), **_provenance(ctx, "stereotypes")}
        written.append(_write_json(ctx.out("stereotypes", feature, "json"), doc))
        path = ctx.out("ratio", feature, "csv")
        path.write_text(run.series.to_csv(), encoding="utf-8")
        written.append(path)
    return written


def stage_kmodes(ctx: Context) -> list[Path]:
    cfg = ctx.config
    seed = cfg.seed_for("kmodes")
    written = []
    for feature in cfg.feature_names:
        m = encode_multi_hot(ctx.catalog, ctx.vocabulary(feature))
        models = []
        scan_lines = ["k,cost"]
        for k in cfg.kmodes_k:
            model = kmodes.fit(m, k, cfg.kmodes_init, seed, cfg.kmodes_max_iter, cfg.kmodes_n_init)
            scan_lines.append(f"{k},{model.cost!r}")
            models.append(
                {
                    "k": k,
                    "cost": model.cost,
                    "iterations": model.iterations,
                    "modes": model.mode_labels(m.labels),
                }
            )
        doc = {
            "feature": feature,
            "init": cfg.kmodes_init,
            "n_init": cfg.kmodes_n_init,
            "models": models,
            **_provenance(ctx, "kmodes"),
        }
        stem = f"kmodes_{cfg.kmodes_init}"
        written.append(_write_json(ctx.out(stem, feature, "json", seed=cfg.seed), doc))
        path = ctx.out(f"{stem}_scan", feature, "csv")
        path.write_text("\n".join(scan_lines) + "\n", encoding="utf-8")
        written.append(path)
    return written


def stage_evaluate(ctx: Context, runs: dict[str, StereotypeRun] | None = None) -> list[Path]:
    cfg = ctx.config
    vocabs = {f: ctx.vocabulary(f) for f in cfg.feature_names}
    stereotypes = None
    if "stereotype" in cfg.modes:
        runs = runs if runs is not None else build_runs(ctx)
        stereotypes = {f: run.stereotypes for f, run in runs.items()}
    seed = cfg.seed_for("evaluate")
    reports = []
    for mode in cfg.modes:
        features = recs.build_item_features(
            ctx.catalog, mode, vocabs, stereotypes, cfg.simple_features, cfg.weighting
        )
        for kind in cfg.splits:
            reports.append(recs.cross_validate(ctx.ratings, features, kind, cfg.folds, seed))
    tag = "+".join(cfg.feature_names)
    written = []
    for kind in cfg.splits:
        doc = {
            "split": kind,
            "folds": cfg.folds,
            "reports": [r.to_dict() for r in reports if r.kind == kind],
            **_provenance(ctx, "evaluate"),
        }
        written.append(_write_json(ctx.out(f"report_{kind}", tag, "json"), doc))
    path = ctx.out("table", tag, "csv")
    path.write_text(recs.reports_csv(reports), encoding="utf-8")
    written.append(path)
    for r in reports:
        log.info("%s/%s: rmse=%.4f mae=%.4f", r.kind, r.mode, r.rmse, r.mae)
    return written


def stage_pipeline(ctx: Context, with_kmodes: bool = False) -> list[Path]:
    written = _run("ingest", stage_ingest, ctx)
    written += _run("corr", stage_corr, ctx)
    written += _run("cluster", stage_cluster, ctx)
    runs = _run("stereotypes", build_runs, ctx)
    written += _run("stereotypes", stage_stereotypes, ctx, runs)
    if with_kmodes:
        written += _run("kmodes", stage_kmodes, ctx)
    written += _run("evaluate", stage_evaluate, ctx, runs)
    return written


def _run(stage: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (StereogenError, ValueError, KeyError, OSError) as exc:
        raise StageError(stage, exc) from exc


# -- argument parsing ------------------------------------------------------------


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _min_counts(values: list[str] | None) -> dict[str, int] | int | None:
    if not values:
        return None
    out: dict[str, int] = {}
    for v in values:
        if "=" in v:
            name, count = v.split("=", 1)
            out[name.strip()] = int(count)
        else:
            return int(v)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML pipeline config; flags override it")
    common.add_argument("--ratings", type=Path)
    common.add_argument("--catalog", type=Path)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--feature", action="append", help="complex feature(s), comma-separated or repeated")
    common.add_argument("--min-count", action="append", help="N for all features or FEATURE=N")
    common.add_argument("--delimiter")
    common.add_argument("--metric", choices=hac.METRICS)
    common.add_argument("--linkage", choices=hac.LINKAGES)
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stereogen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="vocabularies and multi-hot encodings")
    sub.add_parser("corr", parents=[common], help="correlation matrix and greedy seriation")
    sub.add_parser("cluster", parents=[common], help="dendrogram merge table and DOT file")
    sub.add_parser("stereotypes", parents=[common], help="auto-cut stereotypes and ratio series")
    km = sub.add_parser("kmodes", parents=[common], help="k-modes baseline and cost scan")
    km.add_argument("--k", help="comma-separated k values")
    km.add_argument("--init", choices=kmodes.INITS)
    km.add_argument("--max-iter", type=int)
    km.add_argument("--n-init", type=int, help="restarts for huang init; the cheapest run is kept")
    ev = sub.add_parser("evaluate", parents=[common], help="cold-start cross-validation")
    ev.add_argument("--split", action="append", choices=["new-user", "new-item", "new_user", "new_item"])
    ev.add_argument("--mode", action="append", choices=recs.MODES)
    ev.add_argument("--folds", type=int)
    ev.add_argument("--weighting", choices=["binary", "count", "fraction"])
    pipe = sub.add_parser("pipeline", parents=[common], help="ingest -> corr -> cluster -> stereotypes -> evaluate")
    pipe.add_argument("--kmodes", action="store_true", help="also run the k-modes stage")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    features = cfg.features
    if args.feature:
        names = [n for item in args.feature for n in _csv_list(item)]
        features = tuple(cfg.feature(n) for n in names)
    counts = _min_counts(args.min_count)
    if isinstance(counts, int):
        features = tuple(FeatureConfig(f.name, counts, f.delimiter) for f in features)
    elif counts:
        features = tuple(FeatureConfig(f.name, counts.get(f.name, f.min_count), f.delimiter) for f in features)
    if args.delimiter:
        features = tuple(FeatureConfig(f.name, f.min_count, args.delimiter) for f in features)
    changes = dict(
        ratings=args.ratings,
        catalog=args.catalog,
        output=args.out,
        features=features,
        metric=args.metric,
        linkage=args.linkage,
        seed=args.seed,
    )
    if getattr(args, "k", None):
        changes["kmodes_k"] = tuple(int(k) for k in _csv_list(args.k))
    changes["kmodes_init"] = getattr(args, "init", None)
    changes["kmodes_max_iter"] = getattr(args, "max_iter", None)
    changes["kmodes_n_init"] = getattr(args, "n_init", None)
    if getattr(args, "split", None):
        changes["splits"] = tuple(args.split)
    if getattr(args, "mode", None):
        changes["modes"] = tuple(args.mode)
    changes["folds"] = getattr(args, "folds", None)
    changes["weighting"] = getattr(args, "weighting", None)
    return cfg.override(**changes)


STAGES = {
    "ingest": stage_ingest,
    "corr": stage_corr,
    "cluster": stage_cluster,
    "stereotypes": stage_stereotypes,
    "kmodes": stage_kmodes,
    "evaluate": stage_evaluate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    ctx = Context(cfg)
    try:
        if args.command == "pipeline":
            written = stage_pipeline(ctx, with_kmodes=args.kmodes)
        else:
            written = _run(args.command, STAGES[args.command], ctx)
    except StageError as exc:
        print(f"stereogen: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

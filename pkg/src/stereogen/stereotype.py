"""Automatic dendrogram cut and stereotype extraction for complex features."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from stereogen.corr import CorrelationMatrix, correlation
from stereogen.hac import (
    DissimilarityMatrix,
    Dendrogram,
    Linkage,
    Metric,
    agglomerate,
    cut_at,
    labels_of,
    to_dissimilarity,
)
from stereogen.ingest import MultiHotMatrix

Weighting = Literal["binary", "count", "fraction"]
WEIGHTINGS = ("binary", "count", "fraction")


@dataclass(frozen=True)
class IterationSeries:
    """Per merge iteration t = 1..N-1 (stored 0-based).

    Only clusters with two or more members count; leaves that have not been
    merged yet are ignored.
    """

    clusters_count: np.ndarray
    avg_cluster_size: np.ndarray
    ratio: np.ndarray

    def __len__(self) -> int:
        return len(self.ratio)

    def to_csv(self) -> str:
        lines = ["iteration,clusters_count,avg_cluster_size,ratio"]
        for t, (k, a, r) in enumerate(
            zip(self.clusters_count, self.avg_cluster_size, self.ratio), start=1
        ):
            lines.append(f"{t},{int(k)},{float(a)!r},{float(r)!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StereotypeSet:
    feature_name: str
    groups: tuple[tuple[str, ...], ...]
    cut_height: float | None
    cut_iteration: int | None = None
    metric: str = ""
    linkage: str = ""

    @property
    def no_structure(self) -> bool:
        return self.cut_height is None

    def __len__(self) -> int:
        return len(self.groups)

    def labels(self) -> list[str]:
        return [label for g in self.groups for label in g]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature_name,
            "metric": self.metric,
            "linkage": self.linkage,
            "cut_height": self.cut_height,
            "cut_iteration": self.cut_iteration,
            "no_structure": self.no_structure,
            "groups": [list(g) for g in self.groups],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StereotypeSet":
        return cls(
            feature_name=doc["feature"],
            groups=tuple(tuple(g) for g in doc["groups"]),
            cut_height=doc.get("cut_height"),
            cut_iteration=doc.get("cut_iteration"),
            metric=doc.get("metric", ""),
            linkage=doc.get("linkage", ""),
        )


def iteration_series(dendro: Dendrogram) -> IterationSeries:
    n = dendro.n_leaves
    if n < 2:
        raise ValueError("dendrogram needs at least 2 leaves")
    sizes = {i: 1 for i in range(n)}
    live: dict[int, int] = {}
    counts, avgs = [], []
    for t, m in enumerate(dendro.merges):
        live.pop(m.left, None)
        live.pop(m.right, None)
        size = sizes[m.left] + sizes[m.right]
        sizes[n + t] = size
        live[n + t] = size
        counts.append(len(live))
        avgs.append(sum(live.values()) / len(live))
    counts_a = np.asarray(counts, dtype=np.int64)
    avgs_a = np.asarray(avgs, dtype=float)
    return IterationSeries(counts_a, avgs_a, avgs_a / counts_a)


def find_cut(series: IterationSeries | Sequence[float]) -> int | None:
    """Rightmost local minimum of the iteration ratio, as a 1-based iteration.

    A plateau counts once, located at its right end. The final iteration is
    never a candidate. Returns None (no structure) when the ratio never
    decreases.
    """
    r = np.asarray(series.ratio if isinstance(series, IterationSeries) else series, dtype=float)
    if len(r) == 0:
        raise ValueError("empty iteration series")
    if np.all(np.diff(r) >= 0):
        return None
    best = None
    i = 0
    while i < len(r):
        j = i
        while j + 1 < len(r) and r[j + 1] == r[i]:
            j += 1
        descends_in = i == 0 or r[i - 1] > r[i]
        rises_out = j + 1 < len(r) and r[j + 1] > r[j]
        if descends_in and rises_out:
            best = j + 1
        i = j + 1
    return best


def extract_stereotypes(
    dendro: Dendrogram,
    c: int,
    feature_name: str = "",
    metric: str = "",
) -> StereotypeSet:
    """Cut halfway between the heights of merge iterations ``c`` and ``c + 1``."""
    n = dendro.n_leaves
    if not 1 <= c <= n - 2:
        raise ValueError(f"cut iteration {c} outside 1..{n - 2}")
    h = dendro.heights
    height = float((h[c - 1] + h[c]) / 2.0)
    groups = labels_of(dendro, cut_at(dendro, height))
    return StereotypeSet(
        feature_name=feature_name,
        groups=tuple(tuple(g) for g in groups),
        cut_height=height,
        cut_iteration=c,
        metric=metric,
        linkage=dendro.linkage,
    )


def singleton_stereotypes(labels: Sequence[str], feature_name: str = "", metric: str = "", linkage: str = "") -> StereotypeSet:
    """Fallback when a feature shows no group structure: every label stands alone."""
    return StereotypeSet(feature_name, tuple((label,) for label in labels), None, None, metric, linkage)


def project_item(
    labels: Iterable[str], s: StereotypeSet, weighting: Weighting = "binary"
) -> np.ndarray:
    """Activation of each stereotype group for one item's labels."""
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    carried = {label.casefold() for label in labels}
    out = np.zeros(len(s.groups), dtype=float)
    for g, group in enumerate(s.groups):
        hits = sum(1 for label in group if label.casefold() in carried)
        if weighting == "binary":
            out[g] = 1.0 if hits else 0.0
        elif weighting == "count":
            out[g] = hits
        else:
            out[g] = hits / len(group)
    return out


def project_items(
    label_lists: Iterable[Sequence[str]], s: StereotypeSet, weighting: Weighting = "binary"
) -> np.ndarray:
    rows = [project_item(labels, s, weighting) for labels in label_lists]
    if not rows:
        return np.zeros((0, len(s.groups)))
    return np.vstack(rows)


@dataclass(frozen=True)
class StereotypeRun:
    """Every intermediate of one stereotype build, for reporting."""

    correlation: CorrelationMatrix = field(repr=False)
    dissimilarity: DissimilarityMatrix = field(repr=False)
    dendrogram: Dendrogram = field(repr=False)
    series: IterationSeries = field(repr=False)
    stereotypes: StereotypeSet


def generate_stereotypes(
    m: MultiHotMatrix,
    feature_name: str = "",
    metric: Metric = "linear",
    linkage: Linkage = "ward",
) -> StereotypeRun:
    """encode -> correlation -> dissimilarity -> agglomerate -> auto-cut."""
    r = correlation(m)
    d = to_dissimilarity(r, metric)
    labels = list(r.labels)
    if len(labels) < 2:
        empty = IterationSeries(np.zeros(0, np.int64), np.zeros(0), np.zeros(0))
        dendro = Dendrogram(tuple(labels), (), linkage)
        return StereotypeRun(
            r, d, dendro, empty, singleton_stereotypes(labels, feature_name, metric, linkage)
        )
    dendro = agglomerate(d, linkage)
    series = iteration_series(dendro)
    c = find_cut(series)
    if c is None:
        s = singleton_stereotypes(labels, feature_name, metric, linkage)
    else:
        s = extract_stereotypes(dendro, c, feature_name, metric)
    return StereotypeRun(r, d, dendro, series, s)

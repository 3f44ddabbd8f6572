"""Correlation dissimilarities and Lance-Williams agglomerative clustering."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from stereogen.corr import CorrelationMatrix
from stereogen.errors import InsufficientLabels

METRICS = ("linear", "quadratic")
LINKAGES = ("single", "complete", "ward")
Metric = Literal["linear", "quadratic"]
Linkage = Literal["single", "complete", "ward"]


class HeightInversionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DissimilarityMatrix:
    labels: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    metric_kind: str = "linear"

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Leaves are node ids ``0..N-1``; merge ``t`` (0-based) creates node ``N+t``."""

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]
    linkage: str = ""

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges], dtype=float)

    def is_monotone(self) -> bool:
        h = self.heights
        return bool(np.all(np.diff(h) >= 0))

    def to_linkage_matrix(self) -> np.ndarray:
        """Same layout as ``scipy.cluster.hierarchy.linkage`` output."""
        return np.array(
            [[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float
        ).reshape(-1, 4)

    def to_csv(self) -> str:
        lines = ["left,right,height,size"]
        lines += [f"{m.left},{m.right},{m.height!r},{m.size}" for m in self.merges]
        return "\n".join(lines) + "\n"

    def to_dot(self, name: str = "dendrogram") -> str:
        out = [f'digraph "{name}" {{', "  rankdir=BT;", "  node [shape=box];"]
        for i, label in enumerate(self.leaves):
            escaped = label.replace('"', '\\"')
            out.append(f'  n{i} [label="{escaped}"];')
        n = self.n_leaves
        for t, m in enumerate(self.merges):
            node = n + t
            out.append(f'  n{node} [shape=point, xlabel="{m.height:.4f}"];')
            out.append(f"  n{m.left} -> n{node};")
            out.append(f"  n{m.right} -> n{node};")
        out.append("}")
        return "\n".join(out) + "\n"


def to_dissimilarity(r: CorrelationMatrix | np.ndarray | float, kind: Metric = "linear"):
    """``1 - |R|`` (linear) or ``sqrt(1 - R^2)`` (quadratic), zero diagonal.

    Scalars map to scalars, which is handy for checking single values.
    """
    if kind not in METRICS:
        raise ValueError(f"unknown metric {kind!r}; expected one of {METRICS}")
    if np.isscalar(r):
        x = float(r)
        return 1.0 - abs(x) if kind == "linear" else float(np.sqrt(max(0.0, 1.0 - x * x)))
    labels = r.labels if isinstance(r, CorrelationMatrix) else None
    values = r.values if isinstance(r, CorrelationMatrix) else np.asarray(r, dtype=float)
    if kind == "linear":
        d = 1.0 - np.abs(values)
    else:
        d = np.sqrt(np.clip(1.0 - values**2, 0.0, None))
    d = np.clip(d, 0.0, 1.0)
    np.fill_diagonal(d, 0.0)
    d = np.triu(d) + np.triu(d, 1).T
    if labels is None:
        labels = tuple(str(i) for i in range(d.shape[0]))
    return DissimilarityMatrix(tuple(labels), d, kind)


def _lance_williams(
    linkage: str, d_ab: np.ndarray, d_cb: np.ndarray, d_ac: float, n_a: int, n_c: int, n_b: np.ndarray
) -> np.ndarray:
    """Distance from the union of clusters A and C to every other cluster B."""
    if linkage == "single":
        return np.minimum(d_ab, d_cb)
    if linkage == "complete":
        return np.maximum(d_ab, d_cb)
    total = n_a + n_b + n_c
    return ((n_a + n_b) * d_ab + (n_c + n_b) * d_cb - n_b * d_ac) / total


def agglomerate(d: DissimilarityMatrix | np.ndarray, linkage: Linkage = "ward") -> Dendrogram:
    """Agglomerative clustering with Lance-Williams distance updates.

    Ward is applied to the dissimilarities as given (no squaring). Among
    equally close pairs, the one with the smallest ``(min id, max id)`` merges
    first. Height inversions are kept and reported with a warning.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    labels = d.labels if isinstance(d, DissimilarityMatrix) else None
    values = d.values if isinstance(d, DissimilarityMatrix) else np.asarray(d, dtype=float)
    n = values.shape[0]
    if n < 2:
        raise InsufficientLabels(f"need at least 2 labels to cluster, got {n}")
    if labels is None:
        labels = tuple(str(i) for i in range(n))

    total = 2 * n - 1
    dist = np.full((total, total), np.inf)
    dist[:n, :n] = values
    sizes = np.zeros(total, dtype=np.int64)
    sizes[:n] = 1
    active = list(range(n))
    merges: list[Merge] = []
    for t in range(n - 1):
        ids = np.asarray(active)
        sub = dist[np.ix_(ids, ids)]
        sub = np.where(np.triu(np.ones_like(sub, dtype=bool), 1), sub, np.inf)
        # active ids ascend, so row-major argmin is the lexicographic tie-break
        flat = int(np.argmin(sub))
        p, q = divmod(flat, len(ids))
        a, c = int(ids[p]), int(ids[q])
        height = float(sub[p, q])
        new = n + t
        others = np.asarray([i for i in active if i != a and i != c], dtype=np.int64)
        if len(others):
            upd = _lance_williams(
                linkage,
                dist[a, others],
                dist[c, others],
                dist[a, c],
                int(sizes[a]),
                int(sizes[c]),
                sizes[others].astype(float),
            )
            dist[new, others] = upd
            dist[others, new] = upd
        sizes[new] = sizes[a] + sizes[c]
        merges.append(Merge(a, c, height, int(sizes[new])))
        active = [i for i in active if i != a and i != c] + [new]

    dendro = Dendrogram(tuple(labels), tuple(merges), linkage)
    if not dendro.is_monotone():
        warnings.warn(
            f"{linkage} linkage produced non-monotone merge heights; kept as-is",
            HeightInversionWarning,
            stacklevel=2,
        )
    return dendro


def cut_at(dendro: Dendrogram, height: float) -> list[list[int]]:
    """Maximal subtrees whose internal merge heights are all <= ``height``.

    Groups are lists of leaf ids, each sorted, ordered by their smallest leaf.
    """
    if height < 0:
        raise ValueError("height must be >= 0")
    n = dendro.n_leaves
    members: list[list[int]] = [[i] for i in range(n)]
    whole = [True] * n
    for m in dendro.merges:
        members.append(members[m.left] + members[m.right])
        whole.append(whole[m.left] and whole[m.right] and m.height <= height)
    groups: list[list[int]] = []
    stack = [2 * n - 2]
    while stack:
        node = stack.pop()
        if whole[node]:
            groups.append(sorted(members[node]))
        else:
            m = dendro.merges[node - n]
            stack += [m.left, m.right]
    return sorted(groups, key=lambda g: g[0])


def labels_of(dendro: Dendrogram, groups: Sequence[Sequence[int]]) -> list[list[str]]:
    return [[dendro.leaves[i] for i in g] for g in groups]

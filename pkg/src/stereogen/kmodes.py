"""k-modes clustering of per-label true/false item vectors.

This is the baseline the stereotype builder is compared against: modes are
per-attribute majorities, distance is the count of mismatched attributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from stereogen.ingest import MultiHotMatrix

InitKind = Literal["huang", "cao"]
INITS = ("huang", "cao")


@dataclass(frozen=True)
class KModesModel:
    k: int
    modes: np.ndarray = field(repr=False)
    assignments: np.ndarray = field(repr=False)
    cost: float
    iterations: int
    init_kind: str
    seed: int | None
    cost_history: tuple[float, ...] = ()

    def mode_labels(self, labels: Sequence[str]) -> list[list[str]]:
        """Attributes set to true in each mode, i.e. the centroid composition."""
        return [[labels[j] for j in np.flatnonzero(mode)] for mode in self.modes]


def _as_bool(data: MultiHotMatrix | np.ndarray) -> np.ndarray:
    values = data.values if isinstance(data, MultiHotMatrix) else np.asarray(data)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("data must be a non-empty 2-d array")
    return values.astype(bool)


def matching_dissimilarity(a: Sequence, b: Sequence) -> int:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def _distances(x: np.ndarray, modes: np.ndarray) -> np.ndarray:
    return (x[:, None, :] != modes[None, :, :]).sum(axis=2)


def _distinct_rows(x: np.ndarray) -> np.ndarray:
    """Distinct rows in order of first appearance."""
    _, first = np.unique(x, axis=0, return_index=True)
    return x[np.sort(first)]


def _check_k(x: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = _distinct_rows(x)
    if k > len(distinct):
        raise ValueError(f"k={k} exceeds the {len(distinct)} distinct rows in the data")
    return distinct


def init_huang(data: MultiHotMatrix | np.ndarray, k: int, seed: int | None = 0) -> np.ndarray:
    """Random modes drawn from attribute-value frequencies, snapped to distinct data rows."""
    x = _as_bool(data)
    distinct = _check_k(x, k)
    rng = np.random.default_rng(seed)
    p_true = x.mean(axis=0)
    chosen: list[int] = []
    for _ in range(k):
        candidate = rng.random(x.shape[1]) < p_true
        dist = (distinct != candidate).sum(axis=1)
        for idx in np.argsort(dist, kind="stable"):
            if idx not in chosen:
                chosen.append(int(idx))
                break
    return distinct[chosen].copy()


def init_cao(data: MultiHotMatrix | np.ndarray, k: int) -> np.ndarray:
    """Density-based deterministic initialization.

    Density of a row is its average attribute agreement with all rows. The
    first mode is the densest row; each next one maximizes density times the
    distance to the nearest mode already chosen.
    """
    x = _as_bool(data)
    _check_k(x, k)
    n_rows, n_attr = x.shape
    freq_true = x.sum(axis=0)
    agree = np.where(x, freq_true, n_rows - freq_true)
    density = agree.sum(axis=1) / (n_rows * n_attr)
    chosen = [int(np.argmax(density))]
    nearest = (x != x[chosen[0]]).sum(axis=1)
    for _ in range(1, k):
        score = density * nearest
        nxt = int(np.argmax(score))
        chosen.append(nxt)
        nearest = np.minimum(nearest, (x != x[nxt]).sum(axis=1))
    return x[chosen].copy()


def _update_modes(x: np.ndarray, assignments: np.ndarray, modes: np.ndarray) -> np.ndarray:
    new = modes.copy()
    for j in range(len(modes)):
        members = x[assignments == j]
        if len(members):
            # strict majority; ties go to false
            new[j] = members.sum(axis=0) * 2 > len(members)
    return new


def _repair_empty(x: np.ndarray, assignments: np.ndarray, modes: np.ndarray, dist: np.ndarray) -> None:
    """Re-seed each empty cluster with the row farthest from its own mode."""
    for j in range(len(modes)):
        if np.any(assignments == j):
            continue
        own = dist[np.arange(len(x)), assignments]
        far = int(np.argmax(own))
        modes[j] = x[far]
        assignments[far] = j
        dist[far, j] = 0


def fit(
    data: MultiHotMatrix | np.ndarray,
    k: int,
    init_kind: InitKind = "cao",
    seed: int | None = 0,
    max_iter: int = 100,
    n_init: int = 1,
) -> KModesModel:
    """Alternate nearest-mode assignment and majority mode updates.

    Stops when assignments repeat or after ``max_iter`` iterations. Cost is
    recorded after every assignment and every update step.

    With ``n_init > 1`` and Huang initialization, runs that many restarts
    (seeds spawned from ``seed``) and keeps the cheapest; Cao initialization
    is deterministic so it always runs once.
    """
    if init_kind not in INITS:
        raise ValueError(f"unknown init {init_kind!r}; expected one of {INITS}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    x = _as_bool(data)
    if init_kind == "huang" and n_init > 1:
        children = np.random.SeedSequence(seed).spawn(n_init)
        runs = [_fit_once(x, k, init_kind, int(c.generate_state(1)[0]), max_iter) for c in children]
        best = min(runs, key=lambda m: m.cost)
        return replace(best, seed=seed)
    return _fit_once(x, k, init_kind, seed, max_iter)


def _fit_once(x: np.ndarray, k: int, init_kind: str, seed: int | None, max_iter: int) -> KModesModel:
    modes = init_huang(x, k, seed) if init_kind == "huang" else init_cao(x, k)
    dist = _distances(x, modes)
    assignments = np.argmin(dist, axis=1)
    history = [float(dist[np.arange(len(x)), assignments].sum())]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        _repair_empty(x, assignments, modes, dist)
        history.append(float(dist[np.arange(len(x)), assignments].sum()))
        modes = _update_modes(x, assignments, modes)
        dist = _distances(x, modes)
        history.append(float(dist[np.arange(len(x)), assignments].sum()))
        new_assignments = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(len(x)), new_assignments].sum()))
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
    cost = float(dist[np.arange(len(x)), assignments].sum())
    return KModesModel(
        k=k,
        modes=modes,
        assignments=assignments,
        cost=cost,
        iterations=iterations,
        init_kind=init_kind,
        seed=seed if init_kind == "huang" else None,
        cost_history=tuple(history),
    )


def elbow_scan(
    data: MultiHotMatrix | np.ndarray,
    k_range: Sequence[int],
    init_kind: InitKind = "cao",
    seed: int | None = 0,
    max_iter: int = 100,
    n_init: int = 1,
) -> list[tuple[int, float]]:
    """Final cost for each k; not guaranteed monotone because of local optima."""
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range is empty")
    return [(k, fit(data, k, init_kind, seed, max_iter, n_init).cost) for k in ks]

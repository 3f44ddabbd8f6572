"""Seeded synthetic data: planted label blocks, independent labels, a mini catalog, ratings."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd

from stereogen.ingest import MultiHotMatrix

# label groups of the bundled mini catalog, echoing the movie genres/keywords domain
GENRE_GROUPS: tuple[tuple[str, ...], ...] = (
    ("Music", "Musical"),
    ("Fantasy", "Animation", "Family", "Children's"),
    ("Action", "Adventure", "Western"),
    ("War", "History"),
    ("TV Movie", "Documentary", "Foreign"),
    ("Film-Noir", "Crime", "Thriller", "Mystery"),
    ("Romance", "Comedy", "Drama", "Horror"),
    ("Science Fiction", "Sci-Fi"),
)
KEYWORD_GROUPS: tuple[tuple[str, ...], ...] = (
    ("violence", "explosion"),
    ("nudity", "sex", "female nudity"),
    ("drug", "murder", "police", "robbery"),
    ("high school", "teenager", "teacher"),
    ("independent film", "woman director"),
    ("sequel", "monster", "alien"),
    ("prison", "escape"),
    ("love", "jealousy", "wedding"),
)


def _matrix(x: np.ndarray, prefix: str = "L") -> MultiHotMatrix:
    return MultiHotMatrix(
        tuple(f"item{i}" for i in range(x.shape[0])),
        tuple(f"{prefix}{j}" for j in range(x.shape[1])),
        x.astype(np.uint8),
    )


def planted_blocks(
    n_blocks: int,
    seed: int,
    block_sizes: Sequence[int] | None = None,
    n_items: int = 500,
    within: float = 0.9,
    cross: float = 0.05,
    activation: float = 0.3,
    size_range: tuple[int, int] = (2, 4),
) -> tuple[MultiHotMatrix, list[list[str]]]:
    """Items switch each block on independently with probability ``activation``.

    Labels of an active block fire with probability ``within``, all others
    with ``cross``. Returns the matrix and the planted partition (label
    names), with label columns shuffled so blocks are not contiguous.
    """
    rng = np.random.default_rng(seed)
    if block_sizes is None:
        block_sizes = rng.integers(size_range[0], size_range[1] + 1, n_blocks)
    block_of = np.repeat(np.arange(n_blocks), block_sizes)
    block_of = block_of[rng.permutation(len(block_of))]
    active = rng.random((n_items, n_blocks)) < activation
    p = np.where(active[:, block_of], within, cross)
    m = _matrix(rng.random(p.shape) < p)
    truth = [[m.labels[j] for j in np.flatnonzero(block_of == b)] for b in range(n_blocks)]
    return m, truth


def independent_labels(
    seed: int, n_labels: int = 20, n_items: int = 500, rate_range: tuple[float, float] = (0.05, 0.5)
) -> MultiHotMatrix:
    """Every label fires independently at its own rate: no group structure."""
    rng = np.random.default_rng(seed)
    rates = rng.uniform(*rate_range, n_labels)
    return _matrix(rng.random((n_items, n_labels)) < rates)


def rare_label_data(seed: int, n_items: int = 500, rare_count: int = 2) -> tuple[MultiHotMatrix, str]:
    """Planted-block data plus one label carried by exactly ``rare_count`` items."""
    m, _ = planted_blocks(3, seed, block_sizes=(3, 3, 3), n_items=n_items)
    rng = np.random.default_rng(seed + 1)
    rare = np.zeros((n_items, 1), dtype=np.uint8)
    rare[rng.choice(n_items, rare_count, replace=False), 0] = 1
    rare_name = "Rare"
    return (
        MultiHotMatrix(m.item_ids, m.labels + (rare_name,), np.hstack([m.values, rare])),
        rare_name,
    )


def _draw_labels(rng: np.random.Generator, groups, n_groups: tuple[int, int], keep: float) -> list[str]:
    picks = rng.choice(len(groups), rng.integers(n_groups[0], n_groups[1] + 1), replace=False)
    out: list[str] = []
    for g in sorted(picks):
        group = groups[g]
        chosen = [label for label in group if rng.random() < keep]
        out += chosen or [group[rng.integers(len(group))]]
    return out


def mini_catalog_rows(n_items: int = 60, seed: int = 7) -> list[dict]:
    """Rows for the bundled catalog: genre and keywords are complex features."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_items):
        genre = _draw_labels(rng, GENRE_GROUPS, (1, 2), 0.8)
        if "Sci-Fi" in genre or "Science Fiction" in genre:
            genre = [g for g in genre if g not in ("Sci-Fi", "Science Fiction")] + ["Sci-Fi", "Science Fiction"]
        keywords = _draw_labels(rng, KEYWORD_GROUPS, (1, 3), 0.75)
        rows.append(
            {
                "item_id": f"m{i + 1:03d}",
                "genre": "|".join(genre),
                "keywords": "|".join(keywords),
                "year": int(rng.integers(1930, 2001)),
                "runtime": int(rng.integers(80, 181)),
                "language": str(rng.choice(["en", "en", "en", "fr", "it"])),
            }
        )
    return rows


def synthetic_ratings(
    item_labels: dict[str, list[str]],
    groups: Sequence[Sequence[str]],
    n_ratings: int,
    seed: int,
    n_users: int | None = None,
    group_effect: float = 0.5,
    item_noise: float = 0.1,
    rating_noise: float = 0.9,
) -> pd.DataFrame:
    """Ratings driven by user bias plus label-group effects of the rated item.

    ``item_labels`` maps item id to its labels; an item gets the effect of
    every group it touches.
    """
    rng = np.random.default_rng(seed)
    items = list(item_labels)
    n_items = len(items)
    if n_users is None:
        n_users = max(2, int(np.ceil(n_ratings / (0.6 * n_items))))
    effects = rng.normal(0.0, group_effect, len(groups))
    lookup = {label.casefold(): g for g, group in enumerate(groups) for label in group}
    item_effect = np.empty(n_items)
    for k, item in enumerate(items):
        touched = {lookup[label.casefold()] for label in item_labels[item] if label.casefold() in lookup}
        item_effect[k] = sum(effects[g] for g in touched) + rng.normal(0.0, item_noise)
    user_bias = rng.normal(0.0, 0.4, n_users)

    per_user = np.full(n_users, n_ratings // n_users)
    per_user[: n_ratings % n_users] += 1
    per_user = np.minimum(per_user, n_items)
    users, rated = [], []
    for u in range(n_users):
        users.append(np.full(per_user[u], u))
        rated.append(rng.choice(n_items, per_user[u], replace=False))
    u_idx = np.concatenate(users)
    i_idx = np.concatenate(rated)
    raw = 3.5 + user_bias[u_idx] + item_effect[i_idx] + rng.normal(0.0, rating_noise, len(u_idx))
    rating = np.clip(np.rint(raw), 1, 5).astype(np.int64)
    return pd.DataFrame(
        {
            "user_id": pd.Series([f"u{u:05d}" for u in u_idx], dtype=object),
            "item_id": pd.Series([items[i] for i in i_idx], dtype=object),
            "rating": rating,
        }
    )

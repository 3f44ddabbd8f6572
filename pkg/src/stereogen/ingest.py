"""Loading of ratings and item catalogs, label vocabularies and multi-hot encoding."""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from stereogen.errors import InputFormatError, NoLabels

RATINGS_HEADER = ("user_id", "item_id", "rating")
DEFAULT_DELIMITER = "|"
_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True)
class RatingsTable:
    """Rating triples in file order plus per-user mean and population std.

    ``records`` has columns ``user_id``, ``item_id`` (strings) and ``rating``
    (int). ``user_stats`` is indexed by user id with columns ``mu`` and
    ``sigma``.
    """

    records: pd.DataFrame
    user_stats: pd.DataFrame

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_records(cls, records: pd.DataFrame) -> "RatingsTable":
        records = records.reset_index(drop=True)
        bad = ~records["rating"].between(1, 5)
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise InputFormatError(
                f"rating {records['rating'].iloc[i]} outside 1..5 (record {i})"
            )
        return cls(records=records, user_stats=user_statistics(records))


def user_statistics(records: pd.DataFrame) -> pd.DataFrame:
    """Per-user arithmetic mean and population standard deviation of ratings."""
    grouped = records.groupby("user_id", sort=True)["rating"]
    stats = pd.DataFrame({"mu": grouped.mean(), "sigma": grouped.std(ddof=0)})
    stats["sigma"] = stats["sigma"].fillna(0.0)
    return stats.astype(float)


def load_ratings(path: str | Path) -> RatingsTable:
    """Read a ``user_id,item_id,rating`` CSV.

    Raises :class:`InputFormatError` naming the offending line for malformed
    rows and for ratings outside 1..5.
    """
    users: list[str] = []
    items: list[str] = []
    ratings: list[int] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RATINGS_HEADER:
            raise InputFormatError(
                f"{path}: line 1: expected header {','.join(RATINGS_HEADER)}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise InputFormatError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            user, item, raw = row
            raw = raw.strip()
            if not user or not item or not _INT_RE.match(raw):
                raise InputFormatError(f"{path}: line {lineno}: malformed row {row!r}")
            value = int(raw)
            if not 1 <= value <= 5:
                raise InputFormatError(f"{path}: line {lineno}: rating {value} outside 1..5")
            users.append(user)
            items.append(item)
            ratings.append(value)
    records = pd.DataFrame(
        {
            "user_id": pd.Series(users, dtype=object),
            "item_id": pd.Series(items, dtype=object),
            "rating": np.asarray(ratings, dtype=np.int64),
        }
    )
    return RatingsTable(records=records, user_stats=user_statistics(records))


def save_ratings(table: RatingsTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RATINGS_HEADER)
        writer.writerows(
            zip(table.records["user_id"], table.records["item_id"], table.records["rating"])
        )


@dataclass(frozen=True)
class ItemCatalog:
    """Items keyed by id; complex features hold deduplicated label lists."""

    items: dict[str, dict[str, Any]]
    complex_features: tuple[str, ...]
    simple_features: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.items)

    @property
    def item_ids(self) -> list[str]:
        return list(self.items)

    def labels(self, item_id: str, feature: str) -> list[str]:
        return self.items[item_id][feature]

    def subset(self, item_ids: Iterable[str]) -> "ItemCatalog":
        return ItemCatalog(
            {i: self.items[i] for i in item_ids},
            self.complex_features,
            self.simple_features,
        )


def _split_labels(value: Any, delimiter: str) -> list[str]:
    if value is None:
        return []
    if isinstance(value, float) and np.isnan(value):
        return []
    if isinstance(value, str):
        parts = value.split(delimiter)
    else:
        parts = [str(v) for v in value]
    return [p.strip() for p in parts if p.strip()]


def _coerce_scalar(value: Any) -> Any:
    if isinstance(value, str):
        text = value.strip()
        if text == "":
            return None
        try:
            return int(text) if _INT_RE.match(text) else float(text)
        except ValueError:
            return text
    return value


def catalog_from_rows(
    rows: Sequence[Mapping[str, Any]],
    complex_features: Sequence[str],
    delimiter: str = DEFAULT_DELIMITER,
    source: str = "<rows>",
) -> ItemCatalog:
    """Build a catalog from row mappings, as read from CSV or JSON."""
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    if rows and "item_id" not in columns:
        raise InputFormatError(f"{source}: missing item_id column")
    unknown = [f for f in complex_features if f not in columns]
    if unknown:
        raise InputFormatError(f"{source}: unknown feature(s) {unknown}; available: {columns}")
    simple = tuple(c for c in columns if c != "item_id" and c not in complex_features)

    # labels match case-insensitively per feature and keep the first-seen casing
    canonical: dict[str, dict[str, str]] = {f: {} for f in complex_features}
    items: dict[str, dict[str, Any]] = {}
    for n, row in enumerate(rows):
        item_id = row.get("item_id")
        if item_id is None or str(item_id).strip() == "":
            raise InputFormatError(f"{source}: row {n + 1}: missing item_id")
        item_id = str(item_id).strip()
        entry: dict[str, Any] = {}
        for feature in complex_features:
            seen: list[str] = []
            for label in _split_labels(row.get(feature), delimiter):
                key = label.casefold()
                stored = canonical[feature].setdefault(key, label)
                if stored not in seen:
                    seen.append(stored)
            entry[feature] = seen
        for name in simple:
            entry[name] = _coerce_scalar(row.get(name))
        items[item_id] = entry
    return ItemCatalog(items, tuple(complex_features), simple)


def load_catalog(
    path: str | Path,
    complex_features: Sequence[str],
    delimiter: str = DEFAULT_DELIMITER,
) -> ItemCatalog:
    """Read an item catalog from CSV or JSON (a list of objects).

    Complex-feature cells are ``delimiter``-separated strings (JSON may also
    use arrays). Every other column is passed through as a simple feature.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            rows = json.load(fh)
        if isinstance(rows, dict):
            rows = [{"item_id": k, **v} for k, v in rows.items()]
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "item_id" not in reader.fieldnames:
                raise InputFormatError(f"{path}: missing item_id column")
            rows = list(reader)
    return catalog_from_rows(rows, complex_features, delimiter, source=str(path))


@dataclass(frozen=True)
class LabelVocabulary:
    feature_name: str
    labels: tuple[str, ...]
    counts: tuple[int, ...]
    min_count: int = 1

    def __len__(self) -> int:
        return len(self.labels)

    def index(self) -> dict[str, int]:
        return {label.casefold(): i for i, label in enumerate(self.labels)}


def build_vocabulary(catalog: ItemCatalog, feature: str, min_count: int = 1) -> LabelVocabulary:
    """Labels carried by at least ``min_count`` items, most frequent first."""
    if feature not in catalog.complex_features:
        raise InputFormatError(f"{feature!r} is not a declared complex feature")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(label for entry in catalog.items.values() for label in entry[feature])
    kept = sorted(
        ((label, c) for label, c in counts.items() if c >= min_count),
        key=lambda lc: (-lc[1], lc[0]),
    )
    if not kept:
        raise NoLabels(f"no {feature!r} label occurs at least {min_count} times")
    return LabelVocabulary(
        feature_name=feature,
        labels=tuple(label for label, _ in kept),
        counts=tuple(c for _, c in kept),
        min_count=min_count,
    )


@dataclass(frozen=True)
class MultiHotMatrix:
    item_ids: tuple[str, ...]
    labels: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.item_ids), columns=list(self.labels))


def encode_labels(label_lists: Iterable[Sequence[str]], vocab: LabelVocabulary) -> np.ndarray:
    index = vocab.index()
    rows = list(label_lists)
    out = np.zeros((len(rows), len(vocab)), dtype=np.uint8)
    for i, labels in enumerate(rows):
        for label in labels:
            j = index.get(label.casefold())
            if j is not None:
                out[i, j] = 1
    return out


def encode_multi_hot(catalog: ItemCatalog, vocab: LabelVocabulary) -> MultiHotMatrix:
    """Items x labels 0/1 matrix; labels outside ``vocab`` are dropped."""
    if len(vocab) == 0:
        raise NoLabels("empty vocabulary")
    ids = catalog.item_ids
    values = encode_labels((catalog.labels(i, vocab.feature_name) for i in ids), vocab)
    return MultiHotMatrix(tuple(ids), vocab.labels, values)

"""Cold-start rating prediction harness: baseline vs stereotype item features."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Mapping, Sequence

import numpy as np
import pandas as pd

from stereogen.ingest import ItemCatalog, LabelVocabulary, RatingsTable, encode_labels
from stereogen.stereotype import StereotypeSet, Weighting, project_items

log = logging.getLogger(__name__)

SplitKind = Literal["new_user", "new_item"]
SPLIT_KINDS = ("new_user", "new_item")
MODES = ("baseline", "stereotype")
DEFAULT_RIDGE = 1e-6


def split_kind(name: str) -> str:
    """Accept ``new-user``/``new_user``/``A`` style names."""
    key = name.strip().lower().replace("-", "_")
    aliases = {"a": "new_user", "b": "new_item", "user": "new_user", "item": "new_item"}
    key = aliases.get(key, key)
    if key not in SPLIT_KINDS:
        raise ValueError(f"unknown split kind {name!r}; expected one of {SPLIT_KINDS}")
    return key


# -- normalization ----------------------------------------------------------


@dataclass(frozen=True)
class NormalizedRatings:
    """Records with an ``r_tilde`` column plus the statistics to invert it.

    Users never seen here fall back to the global mean/std of the ratings.
    """

    records: pd.DataFrame
    user_stats: pd.DataFrame
    global_mu: float
    global_sigma: float

    def user_params(self, user_ids: Sequence) -> tuple[np.ndarray, np.ndarray]:
        stats = self.user_stats.reindex(pd.Index(user_ids, dtype=object))
        known = stats["mu"].notna().to_numpy()
        mu = np.where(known, stats["mu"].to_numpy(), self.global_mu)
        sigma = np.where(known, stats["sigma"].to_numpy(), self.global_sigma)
        return mu.astype(float), sigma.astype(float)


def normalize(r: RatingsTable | pd.DataFrame) -> NormalizedRatings:
    """Per-user standard scores; users with zero spread get r_tilde = 0."""
    table = r if isinstance(r, RatingsTable) else RatingsTable.from_records(r)
    records = table.records.copy()
    stats = table.user_stats.reindex(records["user_id"])
    mu = stats["mu"].to_numpy()
    sigma = stats["sigma"].to_numpy()
    ratings = records["rating"].to_numpy(dtype=float)
    safe = np.where(sigma > 0, sigma, 1.0)
    records["r_tilde"] = np.where(sigma > 0, (ratings - mu) / safe, 0.0)
    return NormalizedRatings(
        records=records,
        user_stats=table.user_stats,
        global_mu=float(ratings.mean()),
        global_sigma=float(ratings.std(ddof=0)),
    )


def denormalize(r_tilde, mu, sigma):
    return np.asarray(mu) + np.asarray(sigma) * np.asarray(r_tilde)


def clamp_rating(r, low: float = 1.0, high: float = 5.0):
    return np.clip(r, low, high)


def denormalize_and_clamp(r_tilde, mu, sigma):
    """Back to the rating scale, then capped at 5 and floored at 1."""
    out = clamp_rating(denormalize(r_tilde, mu, sigma))
    return float(out) if np.ndim(out) == 0 else out


# -- splits -------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSplit:
    kind: str
    train: pd.DataFrame = field(repr=False)
    test: pd.DataFrame = field(repr=False)
    fold_id: int
    seed: int
    held_out: frozenset = field(repr=False, default=frozenset())


def _fold_pools(ids: Sequence, n_folds: int, seed: int) -> list[np.ndarray]:
    ordered = np.asarray(sorted(set(ids)), dtype=object)
    rng = np.random.default_rng(seed)
    return np.array_split(ordered[rng.permutation(len(ordered))], n_folds)


def make_split(
    data: RatingsTable | pd.DataFrame,
    kind: str,
    fraction: float = 1 / 6,
    seed: int = 0,
    fold: int = 0,
) -> ExperimentSplit:
    """Hold out whole users (new_user) or whole items (new_item).

    The shuffled id list is cut into ``round(1 / fraction)`` disjoint pools;
    ``fold`` picks the test pool, so the folds of one seed never overlap.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    kind = split_kind(kind)
    records = data.records if isinstance(data, RatingsTable) else data
    n_folds = int(round(1 / fraction))
    if not 0 <= fold < n_folds:
        raise ValueError(f"fold {fold} outside 0..{n_folds - 1}")
    column = "user_id" if kind == "new_user" else "item_id"
    pool = _fold_pools(records[column], n_folds, seed)[fold]
    held = frozenset(pool.tolist())
    in_test = records[column].isin(held).to_numpy()
    train, test = records[~in_test], records[in_test]
    if train.empty or test.empty:
        raise ValueError(f"degenerate {kind} split: {len(train)} train / {len(test)} test records")
    return ExperimentSplit(kind, train.reset_index(drop=True), test.reset_index(drop=True), fold, seed, held)


# -- features -----------------------------------------------------------------


@dataclass(frozen=True)
class ItemFeatures:
    """Per-item feature rows for one treatment of the complex features."""

    mode: str
    item_ids: tuple[str, ...]
    columns: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)
    complex_width: int

    @property
    def dimension(self) -> int:
        return len(self.columns)

    def row_index(self) -> dict[str, int]:
        return {item: i for i, item in enumerate(self.item_ids)}


def _simple_block(catalog: ItemCatalog, ids: list[str], names: Sequence[str]) -> tuple[list[str], np.ndarray]:
    columns: list[str] = []
    blocks: list[np.ndarray] = []
    for name in names:
        values = [catalog.items[i].get(name) for i in ids]
        present = [v for v in values if v is not None]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in present):
            col = np.array([np.nan if v is None else float(v) for v in values])
            fill = np.nanmean(col) if present else 0.0
            col = np.where(np.isnan(col), fill, col)
            spread = col.std()
            col = (col - col.mean()) / spread if spread > 0 else col - col.mean()
            columns.append(name)
            blocks.append(col[:, None])
        else:
            levels = sorted({str(v) for v in present})
            onehot = np.array([[str(v) == lv for lv in levels] for v in values], dtype=float)
            columns += [f"{name}={lv}" for lv in levels]
            blocks.append(onehot.reshape(len(ids), len(levels)))
    matrix = np.hstack(blocks) if blocks else np.zeros((len(ids), 0))
    return columns, matrix


def build_item_features(
    catalog: ItemCatalog,
    mode: str,
    vocabularies: Mapping[str, LabelVocabulary],
    stereotypes: Mapping[str, StereotypeSet] | None = None,
    simple_features: Sequence[str] | None = None,
    weighting: Weighting = "binary",
) -> ItemFeatures:
    """Complex features as raw multi-hot (baseline) or stereotype activations.

    Simple features are identical in both modes: numeric columns standardized,
    anything else one-hot encoded.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "stereotype" and not stereotypes:
        raise ValueError("stereotype mode needs stereotype sets")
    ids = catalog.item_ids
    columns: list[str] = []
    blocks: list[np.ndarray] = []
    for feature, vocab in vocabularies.items():
        label_lists = [catalog.labels(i, feature) for i in ids]
        if mode == "baseline":
            blocks.append(encode_labels(label_lists, vocab).astype(float))
            columns += [f"{feature}:{label}" for label in vocab.labels]
        else:
            s = stereotypes[feature]
            blocks.append(project_items(label_lists, s, weighting).reshape(len(ids), len(s)))
            columns += [f"{feature}:S{g + 1}" for g in range(len(s))]
    complex_width = len(columns)
    names = catalog.simple_features if simple_features is None else simple_features
    simple_cols, simple = _simple_block(catalog, ids, names)
    columns += simple_cols
    blocks.append(simple)
    matrix = np.hstack(blocks) if blocks else np.zeros((len(ids), 0))
    return ItemFeatures(mode, tuple(ids), tuple(columns), matrix, complex_width)


@dataclass(frozen=True)
class DesignMatrix:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    kept: np.ndarray = field(repr=False)
    n_skipped: int = 0


def assemble_features(features: ItemFeatures, records: pd.DataFrame, target: str = "r_tilde") -> DesignMatrix:
    """One row per rating: an intercept (the only user-side descriptor) then item features.

    Ratings on items missing from the catalog are skipped and counted.
    """
    index = features.row_index()
    rows = records["item_id"].map(index)
    kept = rows.notna().to_numpy()
    n_skipped = int((~kept).sum())
    if n_skipped:
        log.warning("skipped %d ratings on items missing from the catalog", n_skipped)
    item_rows = rows[kept].to_numpy(dtype=np.int64)
    x = np.hstack([np.ones((len(item_rows), 1)), features.matrix[item_rows]])
    y = records[target].to_numpy(dtype=float)[kept] if target in records else np.zeros(len(item_rows))
    return DesignMatrix(x, y, kept, n_skipped)


# -- learner and metrics -------------------------------------------------------


@dataclass(frozen=True)
class LinearModel:
    coef: np.ndarray = field(repr=False)
    ridge: float = DEFAULT_RIDGE

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coef


def train_linear(x: np.ndarray, y: np.ndarray, ridge: float = DEFAULT_RIDGE) -> LinearModel:
    """Least squares with a vanishing ridge term so one-hot blocks stay solvable."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in design matrix or targets")
    gram = x.T @ x + ridge * np.eye(x.shape[1])
    try:
        coef = np.linalg.solve(gram, x.T @ y)
    except np.linalg.LinAlgError:
        coef = np.linalg.lstsq(gram, x.T @ y, rcond=None)[0]
    return LinearModel(coef, ridge)


Learner = Callable[[np.ndarray, np.ndarray], object]


def error_metrics(predicted, actual) -> tuple[float, float]:
    """(rmse, mae)."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.size == 0:
        raise ValueError("no predictions to evaluate")
    err = predicted - actual
    return float(np.sqrt(np.mean(err**2))), float(np.mean(np.abs(err)))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    rmse: float
    mae: float
    wall_seconds: float
    n_train: int
    n_test: int
    n_skipped: int = 0


def evaluate(
    split: ExperimentSplit,
    features: ItemFeatures,
    learner: Learner = train_linear,
) -> FoldResult:
    """Train on the split's training ratings and score raw 1-5 test ratings.

    Predictions are denormalized with training-time user statistics (global
    fallback for unseen users) and clamped before computing errors. Wall time
    covers fitting and prediction.
    """
    if split.test.empty:
        raise ValueError("empty test set")
    norm = normalize(split.train)
    train = assemble_features(features, norm.records)
    test = assemble_features(features, split.test, target="rating")
    test_records = split.test[test.kept]
    if len(test_records) == 0:
        raise ValueError("no test rating has catalog features")
    start = time.perf_counter()
    model = learner(train.x, train.y)
    r_tilde = model.predict(test.x)
    elapsed = time.perf_counter() - start
    mu, sigma = norm.user_params(test_records["user_id"].tolist())
    predicted = denormalize_and_clamp(r_tilde, mu, sigma)
    rmse, mae = error_metrics(predicted, test_records["rating"].to_numpy(dtype=float))
    return FoldResult(
        fold=split.fold_id,
        rmse=rmse,
        mae=mae,
        wall_seconds=elapsed,
        n_train=len(train.y),
        n_test=len(test_records),
        n_skipped=train.n_skipped + test.n_skipped,
    )


@dataclass(frozen=True)
class EvalReport:
    kind: str
    mode: str
    model: str
    seed: int
    dimension: int
    complex_width: int
    folds: tuple[FoldResult, ...]

    @property
    def rmse(self) -> float:
        return float(np.mean([f.rmse for f in self.folds]))

    @property
    def mae(self) -> float:
        return float(np.mean([f.mae for f in self.folds]))

    @property
    def wall_seconds(self) -> float:
        return float(np.mean([f.wall_seconds for f in self.folds]))

    @property
    def total_wall_seconds(self) -> float:
        return float(np.sum([f.wall_seconds for f in self.folds]))

    def to_dict(self, timings: bool = True) -> dict:
        folds = [asdict(f) for f in self.folds]
        doc = {
            "split": self.kind,
            "mode": self.mode,
            "model": self.model,
            "seed": self.seed,
            "dimension": self.dimension,
            "complex_width": self.complex_width,
            "rmse": self.rmse,
            "mae": self.mae,
            "wall_seconds": self.wall_seconds,
            "folds": folds,
        }
        if not timings:
            doc.pop("wall_seconds")
            for f in folds:
                f.pop("wall_seconds")
        return doc


def cross_validate(
    data: RatingsTable | pd.DataFrame,
    features: ItemFeatures,
    kind: str,
    folds: int = 6,
    seed: int = 0,
    learner: Learner = train_linear,
    model_name: str = "linear",
) -> EvalReport:
    """Average of ``folds`` disjoint hold-out evaluations."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    kind = split_kind(kind)
    results = [
        evaluate(make_split(data, kind, 1 / folds, seed, f), features, learner) for f in range(folds)
    ]
    return EvalReport(kind, features.mode, model_name, seed, features.dimension, features.complex_width, tuple(results))


def reports_csv(reports: Sequence[EvalReport]) -> str:
    """Table-shaped summary: one row per (model, split, mode)."""
    lines = ["model,split,mode,rmse,mae,wall_seconds,dimension,complex_width"]
    for r in reports:
        lines.append(
            f"{r.model},{r.kind},{r.mode},{r.rmse:.6f},{r.mae:.6f},{r.wall_seconds:.6f},{r.dimension},{r.complex_width}"
        )
    return "\n".join(lines) + "\n"

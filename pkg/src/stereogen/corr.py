"""Label covariance/correlation over multi-hot data and greedy seriation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from stereogen.errors import InsufficientData
from stereogen.ingest import MultiHotMatrix


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.labels)

    def permuted(self, order: Sequence[int]) -> "CorrelationMatrix":
        order = np.asarray(order)
        return CorrelationMatrix(
            tuple(self.labels[i] for i in order), self.values[np.ix_(order, order)]
        )

    def mean_abs_offdiag(self) -> float:
        n = len(self.labels)
        if n < 2:
            return 0.0
        mask = ~np.eye(n, dtype=bool)
        return float(np.abs(self.values[mask]).mean())


@dataclass(frozen=True)
class Permutation:
    order: tuple[int, ...]
    objective_value: float


def _as_matrix(m: MultiHotMatrix | np.ndarray) -> np.ndarray:
    values = m.values if isinstance(m, MultiHotMatrix) else np.asarray(m)
    if values.ndim != 2:
        raise ValueError("expected a 2-d items x labels matrix")
    if values.shape[0] < 2:
        raise InsufficientData(f"need at least 2 items, got {values.shape[0]}")
    return values


def covariance(m: MultiHotMatrix | np.ndarray) -> np.ndarray:
    """Population covariance (divide by M) between label columns.

    Binary input goes through an exact integer co-occurrence count, so the
    result does not depend on BLAS threading.
    """
    x = _as_matrix(m)
    n_items = x.shape[0]
    if np.issubdtype(x.dtype, np.integer) or x.dtype == bool:
        xi = x.astype(np.int64)
        co = xi.T @ xi
        mean = xi.sum(axis=0) / n_items
        cv = co / n_items - np.outer(mean, mean)
    else:
        xc = x - x.mean(axis=0)
        cv = np.einsum("ki,kj->ij", xc, xc) / n_items
    upper = np.triu(cv)
    return upper + np.triu(cv, 1).T


def correlation(m: MultiHotMatrix | np.ndarray, labels: Sequence[str] | None = None) -> CorrelationMatrix:
    """Pearson correlation R = CV / (sigma_i sigma_j).

    Zero-variance columns get R = 0 against every other label and 1 on the
    diagonal, so they survive as singletons downstream.
    """
    if labels is None:
        if isinstance(m, MultiHotMatrix):
            labels = m.labels
        else:
            labels = tuple(str(i) for i in range(np.asarray(m).shape[1]))
    cv = covariance(m)
    sigma = np.sqrt(np.clip(np.diag(cv), 0.0, None))
    degenerate = sigma == 0.0
    denom = np.outer(sigma, sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 0, cv / np.where(denom > 0, denom, 1.0), 0.0)
    r = np.clip(r, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    r[degenerate, :] = 0.0
    r[:, degenerate] = 0.0
    r[degenerate, degenerate] = 1.0
    upper = np.triu(r)
    r = upper + np.triu(r, 1).T
    return CorrelationMatrix(tuple(labels), r)


def penalty(r: CorrelationMatrix | np.ndarray) -> np.ndarray:
    """Linear penalty 1 - |R|: near-zero correlations cost the most."""
    values = r.values if isinstance(r, CorrelationMatrix) else np.asarray(r, dtype=float)
    p = 1.0 - np.abs(values)
    np.fill_diagonal(p, 0.0)
    return np.clip(p, 0.0, 1.0)


def _band_weights(n: int) -> np.ndarray:
    idx = np.arange(n)
    return 1.0 / (1.0 + np.abs(idx[:, None] - idx[None, :]))


def seriation_objective(r: CorrelationMatrix | np.ndarray, order: Sequence[int]) -> float:
    """Sum of |R| over the permuted matrix, weighted by 1/(1+distance to diagonal)."""
    values = r.values if isinstance(r, CorrelationMatrix) else np.asarray(r, dtype=float)
    order = np.asarray(order)
    b = np.abs(values[np.ix_(order, order)])
    return float((b * _band_weights(len(order))).sum())


def seriate_greedy(
    r: CorrelationMatrix | np.ndarray, max_steps: int | None = None, tol: float = 1e-12
) -> Permutation:
    """Steepest-ascent pairwise-swap search from the identity order.

    Each step applies the swap with the largest objective gain (first pair in
    row-major order on ties) and stops when no swap gains more than ``tol``.
    """
    values = r.values if isinstance(r, CorrelationMatrix) else np.asarray(r, dtype=float)
    n = values.shape[0]
    order = np.arange(n)
    if n < 2:
        return Permutation(tuple(order.tolist()), seriation_objective(values, order))
    w = _band_weights(n)
    a = np.abs(values)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    steps = 0
    while max_steps is None or steps < max_steps:
        b = a[np.ix_(order, order)]
        g = b @ w
        gd = np.diag(g)
        bd = np.diag(b)
        # gain of swapping positions p<q; only rows/columns p and q move
        gain = 2.0 * (
            g + g.T - gd[:, None] - gd[None, :] - (w - 1.0) * (bd[:, None] + bd[None, :] - 2.0 * b)
        )
        gain = np.where(upper, gain, -np.inf)
        flat = int(np.argmax(gain))
        p, q = divmod(flat, n)
        if gain[p, q] <= tol:
            break
        order[[p, q]] = order[[q, p]]
        steps += 1
    return Permutation(tuple(order.tolist()), seriation_objective(values, order))

"""Mutual-information feature ranking over discretized columns.

Continuous columns are binned (equal-frequency by default, or entropy-based
recursive splitting driven by a minimum-description-length acceptance test),
mutual information is estimated with the plug-in formula on empirical
counts, and features are ranked greedily: maximal relevance to the target
penalized by mean redundancy with features already picked. The discretized
data is used only for ranking; models always train on the continuous values.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConstantColumnWarning
from .gp import FitConfig
from .numerics import as_matrix, as_vector


class BinningMethod(Enum):
    EQUAL_FREQUENCY = "equal-frequency"
    MDL = "mdl"


@dataclass(frozen=True)
class DiscreteTable:
    """Integer-labelled feature columns sharing a row count."""

    columns: tuple
    n_bins: tuple

    def __post_init__(self) -> None:
        cols = tuple(np.asarray(c, dtype=np.int64) for c in self.columns)
        if not cols:
            raise ValueError("a discrete table needs at least one column")
        n_rows = cols[0].size
        for c, b in zip(cols, self.n_bins):
            if c.size != n_rows:
                raise ValueError("all columns must have the same number of rows")
            if c.size == 0 or c.min() < 0 or c.max() >= b:
                raise ValueError("labels must lie in [0, n_bins)")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "n_bins", tuple(int(b) for b in self.n_bins))

    @property
    def n_rows(self) -> int:
        return self.columns[0].size

    @property
    def n_features(self) -> int:
        return len(self.columns)


@dataclass(frozen=True)
class FeatureRanking:
    """Feature indices best-first plus the greedy score at each step."""

    order: tuple
    scores: tuple

    def __post_init__(self) -> None:
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError("order must be a permutation of the feature indices")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))


def _equal_frequency_labels(values: np.ndarray, n_bins: int) -> np.ndarray:
    # Stable argsort assigns tied values bins by first occurrence.
    n = values.size
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    return (ranks * n_bins) // n


def _entropy_bits(labels: np.ndarray) -> float:
    counts = np.bincount(labels)
    counts = counts[counts > 0]
    p = counts / labels.size
    return float(-(p * np.log2(p)).sum())


def _best_split(values: np.ndarray, labels: np.ndarray):
    """Best entropy-minimizing binary split of a sorted interval, or None.

    Returns ``(gain_bits, cut_value, split_position)`` where the cut is the
    midpoint between adjacent distinct values.
    """
    n = values.size
    boundaries = np.nonzero(np.diff(values) > 0)[0]  # split after position i
    if boundaries.size == 0:
        return None
    base = _entropy_bits(labels)
    best = None
    for i in boundaries:
        left, right = labels[: i + 1], labels[i + 1 :]
        err = (left.size * _entropy_bits(left) + right.size * _entropy_bits(right)) / n
        gain = base - err
        cut = 0.5 * (values[i] + values[i + 1])
        if best is None or gain > best[0] + 1e-15:
            best = (gain, cut, int(i) + 1)
    return best


def _mdl_accepts(values: np.ndarray, labels: np.ndarray, split_pos: int, gain: float) -> bool:
    n = values.size
    left, right = labels[:split_pos], labels[split_pos:]
    k = np.unique(labels).size
    k1 = np.unique(left).size
    k2 = np.unique(right).size
    delta = math.log2(3**k - 2) - (
        k * _entropy_bits(labels) - k1 * _entropy_bits(left) - k2 * _entropy_bits(right)
    )
    threshold = (math.log2(n - 1) + delta) / n
    return gain > threshold


def _mdl_cuts(values: np.ndarray, target: np.ndarray, max_cuts: int) -> list[float]:
    order = np.argsort(values, kind="stable")
    v = values[order]
    c = target[order]
    cuts: list[float] = []
    # Best-first expansion: intervals compete on gain so the cut budget goes
    # to the most informative splits regardless of recursion depth.
    heap: list = []
    counter = 0

    def push(start: int, end: int) -> None:
        nonlocal counter
        if end - start < 2:
            return
        best = _best_split(v[start:end], c[start:end])
        if best is None:
            return
        gain, cut, pos = best
        if _mdl_accepts(v[start:end], c[start:end], pos, gain):
            heapq.heappush(heap, (-gain, cut, counter, start, end, pos))
            counter += 1

    push(0, values.size)
    while heap and len(cuts) < max_cuts:
        _, cut, _, start, end, pos = heapq.heappop(heap)
        cuts.append(cut)
        push(start, start + pos)
        push(start + pos, end)
    return sorted(cuts)


def discretize(
    values,
    n_bins: int = 5,
    method: BinningMethod = BinningMethod.EQUAL_FREQUENCY,
    target=None,
) -> np.ndarray:
    """Map a continuous column to integer labels in [0, n_bins).

    Equal-frequency binning cuts at quantiles with ties broken by first
    occurrence. The MDL method greedily accepts entropy-minimizing binary
    splits while the description-length test passes, up to ``n_bins - 1``
    cuts; it requires a discrete ``target`` column. A constant column maps to
    a single bin with a :class:`ConstantColumnWarning`.
    """
    values = as_vector(values, "values")
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    if values.size == 0:
        raise ValueError("values must be nonempty")
    if float(values.min()) == float(values.max()):
        warnings.warn("constant column mapped to a single bin", ConstantColumnWarning, stacklevel=2)
        return np.zeros(values.size, dtype=np.int64)
    if method is BinningMethod.EQUAL_FREQUENCY:
        return _equal_frequency_labels(values, n_bins)
    if target is None:
        raise ValueError("MDL discretization needs a target label column")
    target = np.asarray(target, dtype=np.int64)
    if target.size != values.size:
        raise ValueError("target labels must match the column length")
    cuts = _mdl_cuts(values, target, max_cuts=n_bins - 1)
    return np.searchsorted(cuts, values, side="left").astype(np.int64)


def make_table(
    X,
    y,
    n_bins: int = 5,
    method: BinningMethod = BinningMethod.EQUAL_FREQUENCY,
) -> tuple[DiscreteTable, np.ndarray]:
    """Discretize a feature matrix and target for ranking.

    The target is always binned equal-frequency (the MDL feature splits are
    driven by those target labels). Returns the table and the target labels.
    """
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    target_labels = discretize(y, n_bins, BinningMethod.EQUAL_FREQUENCY)
    columns = tuple(
        discretize(X[:, j], n_bins, method, target=target_labels) for j in range(X.shape[1])
    )
    return DiscreteTable(columns=columns, n_bins=(n_bins,) * X.shape[1]), target_labels


def entropy(labels) -> float:
    """Empirical entropy in nats."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels)
    counts = counts[counts > 0]
    p = counts / labels.size
    return float(-(p * np.log(p)).sum())


def mutual_information(a, b) -> float:
    """Plug-in mutual information (nats) between two label columns.

    Zero-count cells contribute nothing; the result is clamped at 0 against
    roundoff.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("labels must be nonempty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    na, nb = ia.max() + 1, ib.max() + 1
    joint = np.bincount(ia * nb + ib, minlength=na * nb).reshape(na, nb) / a.size
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    mask = joint > 0
    # fsum is correctly rounded, so the result is exactly invariant under
    # swapping the arguments (which transposes the joint table).
    mi = math.fsum(joint[mask] * np.log(joint[mask] / np.outer(pa, pb)[mask]))
    return max(mi, 0.0)


def mrmr_rank(table: DiscreteTable, target) -> FeatureRanking:
    """Greedy minimum-redundancy maximum-relevance ranking.

    The first pick maximizes relevance I(feature; target); every later pick
    maximizes relevance minus the mean mutual information with the features
    already selected. Ties break to the lower feature index.
    """
    target = np.asarray(target, dtype=np.int64)
    n = table.n_features
    relevance = np.array([mutual_information(col, target) for col in table.columns])
    order: list[int] = []
    scores: list[float] = []
    redundancy_sum = np.zeros(n)
    remaining = list(range(n))
    while remaining:
        if order:
            criterion = [relevance[f] - redundancy_sum[f] / len(order) for f in remaining]
        else:
            criterion = [relevance[f] for f in remaining]
        best_pos = int(np.argmax(criterion))  # argmax keeps the lowest index on ties
        pick = remaining.pop(best_pos)
        order.append(pick)
        scores.append(float(criterion[best_pos]))
        for f in remaining:
            redundancy_sum[f] += mutual_information(table.columns[f], table.columns[pick])
    return FeatureRanking(order=tuple(order), scores=tuple(scores))


# --- subset-size sweep -----------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    """Repeated-split evaluation settings for the subset-size sweep.

    Each subset size runs with seed ``seed + n_f`` so sizes are independent
    and reproducible regardless of evaluation order.
    """

    n_t: int
    n_repeats: int = 30
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)
    max_features: int | None = None


@dataclass(frozen=True)
class SweepPoint:
    n_f: int
    feature_indices: tuple
    mean_rmse: float
    std_rmse: float
    n_failures: int


def sweep_subset_size(levels, ranking: FeatureRanking, method_kind, config: SweepConfig) -> list[SweepPoint]:
    """Mean RMSE of the given model kind as the feature subset grows.

    For each subset size the levels are restricted to the top-ranked
    features (kept in original column order, so using every feature
    reproduces the unrestricted data exactly), then evaluated with the
    benchmark harness's repeated splits. Failed seeds are recorded, not
    fatal.
    """
    from . import bench  # local import: bench orchestrates models built on this module

    levels = tuple(levels)
    n_features = levels[0].x.shape[1]
    if len(ranking.order) != n_features:
        raise ValueError("ranking must cover every feature column")
    limit = n_features if config.max_features is None else min(config.max_features, n_features)
    points: list[SweepPoint] = []
    for n_f in range(1, limit + 1):
        idx = tuple(sorted(ranking.order[:n_f]))
        restricted = [
            type(level)(level.index, level.x[:, list(idx)], level.y) for level in levels
        ]
        report = bench.run_experiment(
            restricted,
            methods=[method_kind],
            n_t_list=[config.n_t],
            n_repeats=config.n_repeats,
            seed=config.seed + n_f,
            fit=config.fit,
        )
        cell = report.cells[0]
        points.append(
            SweepPoint(
                n_f=n_f,
                feature_indices=idx,
                mean_rmse=cell.mean_rmse,
                std_rmse=cell.std_rmse,
                n_failures=len(cell.failures),
            )
        )
    return points

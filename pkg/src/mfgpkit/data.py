"""Dataset ingestion, normalization, splitting, and PCA diagnostics."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyFileError,
    EmptyReferenceError,
    MissingColumnError,
    NonNumericCellError,
    ZeroRangeWarning,
)
from .mfgp import FidelityLevel
from .numerics import as_matrix, as_vector


@dataclass(frozen=True)
class Dataset:
    """A feature matrix, target vector and per-row fidelity level (1-based)."""

    feature_names: tuple
    x: np.ndarray
    y: np.ndarray
    fidelity: np.ndarray
    source: str = "<memory>"
    row_ids: tuple = ()

    def __post_init__(self) -> None:
        names = tuple(str(n) for n in self.feature_names)
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        x = as_matrix(self.x, "x").copy()
        y = as_vector(self.y, "y").copy()
        fid = np.asarray(self.fidelity, dtype=np.int64).reshape(-1).copy()
        if not (x.shape[0] == y.size == fid.size):
            raise ValueError("x, y and fidelity must have the same number of rows")
        if x.shape[1] != len(names):
            raise ValueError("feature_names must match the number of columns")
        row_ids = tuple(int(i) for i in (self.row_ids or range(x.shape[0])))
        if len(row_ids) != x.shape[0]:
            raise ValueError("row_ids must cover every row")
        for arr in (x, y, fid):
            arr.flags.writeable = False
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "fidelity", fid)
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def levels_present(self) -> list[int]:
        return sorted(set(int(v) for v in self.fidelity))

    @property
    def top_level(self) -> int:
        return int(self.fidelity.max())

    def high_rows(self) -> np.ndarray:
        """Row indices at the highest fidelity level."""
        return np.nonzero(self.fidelity == self.top_level)[0]


@dataclass(frozen=True)
class CsvSchema:
    """How to read a delimited file into a :class:`Dataset`.

    ``feature_columns=None`` infers every column that is neither the target
    nor the fidelity column, in header order. A fidelity column holding
    category labels needs ``fidelity_order`` (lowest fidelity first); numeric
    fidelity values rank by magnitude.
    """

    target_column: str
    fidelity_column: str | None = None
    feature_columns: tuple | None = None
    fidelity_order: tuple | None = None


def _parse_cell(value: str, row: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise NonNumericCellError(row, column, value) from None


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a comma-separated UTF-8 file with a mandatory header row.

    Row order is preserved; cells must parse as 64-bit reals (fidelity cells
    may instead be labels named in ``schema.fidelity_order``). Errors carry
    0-based data-row coordinates and the column name.
    """
    path = str(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(path) from None
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    col_index = {name: i for i, name in enumerate(header)}

    def require(name: str) -> int:
        if name not in col_index:
            raise MissingColumnError(name)
        return col_index[name]

    target_idx = require(schema.target_column)
    fid_idx = require(schema.fidelity_column) if schema.fidelity_column else None
    if schema.feature_columns is None:
        feature_names = [
            name
            for name in header
            if name != schema.target_column
            and (fid_idx is None or name != schema.fidelity_column)
        ]
    else:
        feature_names = [str(n) for n in schema.feature_columns]
    feature_idx = [require(name) for name in feature_names]

    n = len(rows)
    x = np.empty((n, len(feature_idx)))
    y = np.empty(n)
    raw_fid: list = []
    for r, row in enumerate(rows):
        for j, (name, idx) in enumerate(zip(feature_names, feature_idx)):
            x[r, j] = _parse_cell(row[idx], r, name)
        y[r] = _parse_cell(row[target_idx], r, schema.target_column)
        if fid_idx is not None:
            raw_fid.append(row[fid_idx].strip())

    if fid_idx is None:
        fidelity = np.ones(n, dtype=np.int64)
    elif schema.fidelity_order is not None:
        order = {str(label): rank + 1 for rank, label in enumerate(schema.fidelity_order)}
        missing = sorted(set(raw_fid) - set(order))
        if missing:
            raise NonNumericCellError(raw_fid.index(missing[0]), schema.fidelity_column, missing[0])
        fidelity = np.array([order[v] for v in raw_fid], dtype=np.int64)
    else:
        values = [
            _parse_cell(v, r, schema.fidelity_column) for r, v in enumerate(raw_fid)
        ]
        distinct = sorted(set(values))
        rank = {v: i + 1 for i, v in enumerate(distinct)}
        fidelity = np.array([rank[v] for v in values], dtype=np.int64)

    return Dataset(
        feature_names=tuple(feature_names),
        x=x,
        y=y,
        fidelity=fidelity,
        source=path,
        row_ids=tuple(range(n)),
    )


def write_csv(
    ds: Dataset,
    path,
    fidelity_column: str = "fidelity",
    target_column: str = "y",
    config_line: str | None = None,
) -> None:
    """Write a dataset back out; floats use shortest round-trip decimals.

    ``config_line`` becomes a leading ``#`` comment (skipped by
    :func:`load_csv`), used to embed run provenance.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_line:
            fh.write(f"# {config_line}\n")
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target_column, fidelity_column])
        for r in range(ds.n_rows):
            writer.writerow(
                [repr(float(v)) for v in ds.x[r]]
                + [repr(float(ds.y[r])), str(int(ds.fidelity[r]))]
            )


# --- normalization ---------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column min/max for features and the target, fitted on a reference subset."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def __post_init__(self) -> None:
        lo = as_vector(self.feature_min, "feature_min").copy()
        hi = as_vector(self.feature_max, "feature_max").copy()
        if lo.size != hi.size or np.any(hi < lo):
            raise ValueError("per-column max must be >= min")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "feature_min", lo)
        object.__setattr__(self, "feature_max", hi)
        object.__setattr__(self, "target_min", float(self.target_min))
        object.__setattr__(self, "target_max", float(self.target_max))

    @property
    def target_range(self) -> float:
        return self.target_max - self.target_min


def fit_normalize(ds: Dataset, reference="all") -> NormalizationStats:
    """Column min/max over the reference rows.

    ``reference`` is ``"all"`` or a :class:`SplitPlan`, in which case the
    stats come from the training rows only (every non-top-level row plus the
    plan's training rows), for leakage-free pipelines.
    """
    if reference == "all":
        rows = np.arange(ds.n_rows)
    else:
        rows = np.concatenate(
            [np.nonzero(ds.fidelity != ds.top_level)[0], np.asarray(reference.train_high)]
        ).astype(np.int64)
    if rows.size == 0:
        raise EmptyReferenceError("normalization reference subset is empty")
    x = ds.x[rows]
    y = ds.y[rows]
    return NormalizationStats(
        feature_min=x.min(axis=0),
        feature_max=x.max(axis=0),
        target_min=float(y.min()),
        target_max=float(y.max()),
    )


def _scale_columns(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    zero = span == 0.0
    if np.any(zero):
        warnings.warn(
            "zero-range column(s) mapped to 0.0 during normalization",
            ZeroRangeWarning,
            stacklevel=3,
        )
    safe = np.where(zero, 1.0, span)
    out = (x - lo) / safe
    out[:, zero] = 0.0 if out.ndim == 2 else out
    return out


def apply_normalize(ds: Dataset, stats: NormalizationStats) -> Dataset:
    """Map features and target into [0, 1] per the fitted stats."""
    x = _scale_columns(ds.x.copy(), stats.feature_min, stats.feature_max)
    span = stats.target_range
    if span == 0.0:
        warnings.warn("zero-range target mapped to 0.0", ZeroRangeWarning, stacklevel=2)
        y = np.zeros_like(ds.y)
    else:
        y = (ds.y - stats.target_min) / span
    return Dataset(
        feature_names=ds.feature_names,
        x=x,
        y=y,
        fidelity=ds.fidelity,
        source=ds.source,
        row_ids=ds.row_ids,
    )


def invert_target(values, stats: NormalizationStats) -> np.ndarray:
    """Undo target normalization (for reporting in original units)."""
    return np.asarray(values, dtype=np.float64) * stats.target_range + stats.target_min


# --- splits ----------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    """One train/test split of the highest-fidelity rows.

    Lower-fidelity rows are always training data; ``train_high`` and
    ``test_high`` partition the top level's row indices.
    """

    seed: int
    n_t: int
    train_high: tuple
    test_high: tuple

    def __post_init__(self) -> None:
        train = tuple(int(i) for i in self.train_high)
        test = tuple(int(i) for i in self.test_high)
        if set(train) & set(test):
            raise ValueError("train and test rows overlap")
        object.__setattr__(self, "train_high", train)
        object.__setattr__(self, "test_high", test)


def make_splits(ds: Dataset, n_t: int, n_repeats: int, seed: int) -> list[SplitPlan]:
    """Uniform without-replacement draws of ``n_t`` high-fidelity training rows.

    Repeat ``i`` draws from a generator seeded by ``(seed, i)``, so plans are
    reproducible independently of each other.
    """
    high = ds.high_rows()
    n_high = high.size
    if not 1 <= n_t < n_high:
        raise ValueError(
            f"n_t must satisfy 1 <= n_t < {n_high} (high-fidelity rows), got {n_t}"
        )
    plans = []
    for i in range(n_repeats):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, i]))
        picked = np.sort(rng.choice(n_high, size=n_t, replace=False))
        mask = np.zeros(n_high, dtype=bool)
        mask[picked] = True
        plans.append(
            SplitPlan(
                seed=int(seed),
                n_t=int(n_t),
                train_high=tuple(int(r) for r in high[mask]),
                test_high=tuple(int(r) for r in high[~mask]),
            )
        )
    return plans


def split_plan_to_dict(plan: SplitPlan) -> dict:
    return {
        "seed": plan.seed,
        "n_t": plan.n_t,
        "train_high": list(plan.train_high),
        "test_high": list(plan.test_high),
    }


def write_split_plans(plans, path, config_line: str | None = None) -> None:
    """Persist split plans as JSON (seed and row indices per plan)."""
    import json

    doc = {"format": "mfgpkit-splits", "version": 1, "plans": [split_plan_to_dict(p) for p in plans]}
    if config_line:
        doc["config"] = config_line
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_split_plans(path) -> list[SplitPlan]:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "mfgpkit-splits":
        raise ValueError(f"{path}: not a split-plan file")
    return [
        SplitPlan(
            seed=int(p["seed"]),
            n_t=int(p["n_t"]),
            train_high=tuple(p["train_high"]),
            test_high=tuple(p["test_high"]),
        )
        for p in doc["plans"]
    ]


def loo_splits(ds: Dataset) -> list[SplitPlan]:
    """One plan per high-fidelity row, that row as the sole test point."""
    high = ds.high_rows()
    if high.size < 2:
        raise ValueError("leave-one-out needs at least two high-fidelity rows")
    plans = []
    for i, row in enumerate(high):
        rest = tuple(int(r) for r in high if r != row)
        plans.append(SplitPlan(seed=0, n_t=high.size - 1, train_high=rest, test_high=(int(row),)))
    return plans


def to_levels(ds: Dataset) -> tuple[FidelityLevel, ...]:
    """Split a dataset into per-fidelity levels, re-ranked 1..L in order."""
    levels = []
    for rank, value in enumerate(ds.levels_present, start=1):
        rows = np.nonzero(ds.fidelity == value)[0]
        levels.append(FidelityLevel(rank, ds.x[rows], ds.y[rows]))
    return tuple(levels)


def from_levels(levels, feature_names=None) -> Dataset:
    """Stack fidelity levels back into a flat dataset (low levels first)."""
    levels = tuple(levels)
    d = levels[0].x.shape[1]
    names = tuple(feature_names) if feature_names else tuple(f"x{i}" for i in range(d))
    x = np.vstack([level.x for level in levels])
    y = np.concatenate([level.y for level in levels])
    fid = np.concatenate([np.full(level.n, level.index, dtype=np.int64) for level in levels])
    return Dataset(feature_names=names, x=x, y=y, fidelity=fid)


# --- PCA -------------------------------------------------------------------------


def pca_project(X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Project column-centered X onto the top-k eigenvectors of its sample covariance.

    Component signs are fixed by making each eigenvector's largest-magnitude
    loading positive. Returns the projections and the explained-variance
    ratios of the k components.
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k must satisfy 1 <= k <= min(rows - 1, cols) = {min(n - 1, d)}")
    centered = X - X.mean(axis=0)
    cov = np.atleast_2d(np.cov(centered, rowvar=False, ddof=1))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    for j in range(d):
        lead = np.argmax(np.abs(eigvecs[:, j]))
        if eigvecs[lead, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    total = eigvals.sum()
    ratios = eigvals[:k] / total if total > 0 else np.zeros(k)
    return centered @ eigvecs[:, :k], ratios

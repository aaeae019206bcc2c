"""Baselines, synthetic two-fidelity benchmark tasks, and the repeated-split harness.

The harness evaluates five methods under a shared split/seed scheme:

* ``gp-low`` / ``gp-high``: plain GPs on one fidelity level only,
* ``gp-aug``: one GP on all levels pooled, with a per-level indicator
  appended as an extra feature,
* ``largp`` / ``nargp``: the recursive multi-fidelity models.

All randomness flows from a single seed; each repeat derives its own
generator by fixed mixing (independent of method and of the training-set
size, so e.g. the low-fidelity baseline's training data is provably
identical across training-set sizes). Failed fits are recorded per seed and
excluded from the mean, never silently retried.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import data as data_mod
from . import gp, mfgp
from ._version import __version__
from .errors import MfgpkitError
from .gp import FitConfig
from .mfgp import FidelityLevel, ImputeConfig, MfgpFitConfig
from .numerics import as_vector


class Method(Enum):
    GP_LOW = "gp-low"
    GP_HIGH = "gp-high"
    GP_AUG = "gp-aug"
    LARGP = "largp"
    NARGP = "nargp"


def _as_method(value) -> Method:
    if isinstance(value, Method):
        return value
    return Method(str(value))


# --- synthetic tasks --------------------------------------------------------------


def _linear_link_high(x: np.ndarray) -> np.ndarray:
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def _linear_link_low(x: np.ndarray) -> np.ndarray:
    return 0.5 * _linear_link_high(x) + 10.0 * (x - 0.5) - 5.0


def _nonlinear_link_low(x: np.ndarray) -> np.ndarray:
    return np.sin(8.0 * np.pi * x)


def _nonlinear_link_high(x: np.ndarray) -> np.ndarray:
    return (x - math.sqrt(2.0)) * _nonlinear_link_low(x) ** 2


@dataclass(frozen=True)
class SyntheticTask:
    """A two-level benchmark: a cheap low-fidelity function and the truth.

    Generators are deterministic given (inputs, seed); noise is Gaussian per
    level. Low-fidelity inputs form a uniform grid and the high-fidelity
    inputs are a random nested subset of it, so nesting holds by
    construction.
    """

    name: str
    low_fn: object
    high_fn: object
    link: str  # "linear" or "nonlinear"
    domain: tuple = (0.0, 1.0)
    noise_low: float = 0.0
    noise_high: float = 0.0
    default_n_low: int = 12


SYNTHETIC_TASKS = {
    "linear_link": SyntheticTask(
        name="linear_link",
        low_fn=_linear_link_low,
        high_fn=_linear_link_high,
        link="linear",
        default_n_low=12,
    ),
    "nonlinear_link": SyntheticTask(
        name="nonlinear_link",
        low_fn=_nonlinear_link_low,
        high_fn=_nonlinear_link_high,
        link="nonlinear",
        default_n_low=20,
    ),
}


def resolve_task(task) -> SyntheticTask:
    if isinstance(task, SyntheticTask):
        return task
    try:
        return SYNTHETIC_TASKS[str(task)]
    except KeyError:
        known = ", ".join(sorted(SYNTHETIC_TASKS))
        raise ValueError(f"unknown synthetic task {task!r} (known: {known})") from None


def make_synthetic(task, n_low: int, n_high: int, seed: int) -> tuple[FidelityLevel, ...]:
    """Generate a nested two-level instance of a registered task.

    The low level sits on a uniform ``n_low``-point grid; the high level is a
    seeded random subset of ``n_high`` of those grid points (values shared
    exactly, so the nesting is bitwise). Independent substreams drive the
    low-level noise, the subset choice, and the high-level noise, so the low
    level does not change with ``n_high``.
    """
    task = resolve_task(task)
    if not 1 <= n_high <= n_low:
        raise ValueError(f"need 1 <= n_high <= n_low, got n_high={n_high}, n_low={n_low}")
    seed = int(seed) & 0xFFFFFFFF
    lo, hi = task.domain
    x_low = np.linspace(lo, hi, n_low)
    y_low = np.asarray(task.low_fn(x_low), dtype=np.float64)
    if task.noise_low > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        y_low = y_low + task.noise_low * rng.standard_normal(n_low)
    rng_subset = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    subset = np.sort(rng_subset.choice(n_low, size=n_high, replace=False))
    x_high = x_low[subset]
    y_high = np.asarray(task.high_fn(x_high), dtype=np.float64)
    if task.noise_high > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
        y_high = y_high + task.noise_high * rng.standard_normal(n_high)
    return (
        FidelityLevel(1, x_low[:, None], y_low),
        FidelityLevel(2, x_high[:, None], y_high),
    )


def rmse(pred, truth) -> float:
    """Root mean square error between two equal-length vectors."""
    pred = as_vector(pred, "pred")
    truth = as_vector(truth, "truth")
    if pred.size != truth.size:
        raise ValueError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ValueError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


# --- report ------------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    """Aggregate of one (method, n_t) cell across repeats."""

    method: str
    n_t: int
    repeats: tuple          # repeat indices that succeeded, in order
    rmse_values: tuple      # one value per successful repeat
    failures: tuple         # dicts: {"repeat": i, "error": msg}

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.rmse_values)) if self.rmse_values else float("nan")

    @property
    def std_rmse(self) -> float:
        return float(np.std(self.rmse_values)) if self.rmse_values else float("nan")


@dataclass(frozen=True)
class LooPoint:
    """One leave-one-out prediction with its two-standard-deviation band."""

    method: str
    row_id: int
    truth: float
    mean: float
    variance: float
    lo2sd: float
    hi2sd: float
    covered: bool


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple
    metadata: dict
    loo_points: tuple = ()

    def cell(self, method, n_t: int) -> CellResult:
        key = _as_method(method).value
        for c in self.cells:
            if c.method == key and c.n_t == n_t:
                return c
        raise KeyError(f"no cell for method={key}, n_t={n_t}")

    def summary_rows(self) -> list[dict]:
        return [
            {
                "method": c.method,
                "n_t": c.n_t,
                "mean_rmse": None if not c.rmse_values else c.mean_rmse,
                "std_rmse": None if not c.rmse_values else c.std_rmse,
                "n_failures": len(c.failures),
            }
            for c in self.cells
        ]

    def to_dict(self) -> dict:
        return {
            "format": "mfgpkit-report",
            "version": 1,
            "metadata": self.metadata,
            "cells": [
                {
                    "method": c.method,
                    "n_t": c.n_t,
                    "repeats": list(c.repeats),
                    "rmse_values": list(c.rmse_values),
                    "mean_rmse": None if not c.rmse_values else c.mean_rmse,
                    "std_rmse": None if not c.rmse_values else c.std_rmse,
                    "failures": list(c.failures),
                }
                for c in self.cells
            ],
            "loo_points": [
                {
                    "method": p.method,
                    "row_id": p.row_id,
                    "truth": p.truth,
                    "mean": p.mean,
                    "variance": p.variance,
                    "lo2sd": p.lo2sd,
                    "hi2sd": p.hi2sd,
                    "covered": p.covered,
                }
                for p in self.loo_points
            ],
        }


def _repeat_seed(seed: int, repeat: int) -> int:
    # Fixed mixing: independent of method and n_t so every cell of a repeat
    # shares one derived seed.
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(repeat), 0xC311])
    return int(ss.generate_state(1)[0])


def dataset_hash(ds) -> str:
    """Content hash of a dataset (features, target, fidelity, names)."""
    import hashlib

    digest = hashlib.sha256()
    digest.update(",".join(ds.feature_names).encode("utf-8"))
    digest.update(ds.x.tobytes())
    digest.update(ds.y.tobytes())
    digest.update(ds.fidelity.tobytes())
    return digest.hexdigest()


def _indicator_codes(level_values: list, declared=None) -> list[float]:
    """Min-max scaled per-level indicator for the pooled baseline."""
    if declared is not None:
        vals = [float(v) for v in declared]
        if len(vals) != len(level_values):
            raise ValueError("need one indicator value per fidelity level")
    else:
        vals = [float(v) for v in level_values]
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return [0.0 for _ in vals]
    return [(v - lo) / (hi - lo) for v in vals]


def observation_noise(model) -> float:
    """Fitted observation-noise variance at the highest fidelity."""
    if isinstance(model, gp.GpModel):
        return model.hyper.noise_variance
    top = model.levels[-1]
    top_gp = top.gp if isinstance(top, mfgp.LinkedLevel) else top
    return top_gp.hyper.noise_variance


def _fit_method(
    method: Method,
    train_levels: tuple,
    cfg: FitConfig,
    impute_mode: str,
    codes: list[float],
):
    if method is Method.GP_LOW:
        return gp.fit(train_levels[0].x, train_levels[0].y, cfg)
    if method is Method.GP_HIGH:
        return gp.fit(train_levels[-1].x, train_levels[-1].y, cfg)
    if method is Method.GP_AUG:
        x_parts = []
        y_parts = []
        for level, code in zip(train_levels, codes):
            x_parts.append(np.hstack([level.x, np.full((level.n, 1), code)]))
            y_parts.append(level.y)
        return gp.fit(np.vstack(x_parts), np.concatenate(y_parts), cfg)
    nested, _ = mfgp.ensure_nested(
        train_levels, ImputeConfig(mode=impute_mode, seed=cfg.seed, fit=cfg)
    )
    if method is Method.LARGP:
        return mfgp.fit_largp(nested, MfgpFitConfig(fit=cfg))
    return mfgp.fit_nargp(nested, MfgpFitConfig(fit=cfg))


def _predict_method(method: Method, model, x_test: np.ndarray, codes: list[float]):
    if method is Method.GP_AUG:
        x_test = np.hstack([x_test, np.full((x_test.shape[0], 1), codes[-1])])
    return mfgp.predict(model, x_test)


def _predict_for_method(
    method: Method,
    train_levels: tuple,
    x_test: np.ndarray,
    cfg: FitConfig,
    impute_mode: str,
    codes: list[float],
):
    """Fit one method on the training levels and predict at the test inputs."""
    model = _fit_method(method, train_levels, cfg, impute_mode, codes)
    return _predict_method(method, model, x_test, codes)


def _train_levels_for_plan(ds: data_mod.Dataset, plan: data_mod.SplitPlan) -> tuple:
    levels = []
    present = ds.levels_present
    for rank, value in enumerate(present[:-1], start=1):
        rows = np.nonzero(ds.fidelity == value)[0]
        levels.append(FidelityLevel(rank, ds.x[rows], ds.y[rows]))
    rows = np.asarray(plan.train_high, dtype=np.int64)
    levels.append(FidelityLevel(len(present), ds.x[rows], ds.y[rows]))
    return tuple(levels)


def run_experiment(
    source,
    methods,
    n_t_list,
    n_repeats: int,
    seed: int,
    *,
    fit: FitConfig = FitConfig(),
    jobs: int = 1,
    eval_grid: int = 100,
    n_low: int | None = None,
    normalization: str = "all",
    original_units: bool = False,
    impute_mode: str = "mean",
    indicator_values=None,
    per_split_selection: int | None = None,
    extra_metadata: dict | None = None,
) -> ExperimentReport:
    """Repeated-split RMSE comparison of the given methods.

    ``source`` is a :class:`~mfgpkit.data.Dataset`, a sequence of
    :class:`FidelityLevel`, or a synthetic task (name or instance). Dataset
    sources split the highest-fidelity rows into ``n_t`` training rows and
    the rest for testing; task sources regenerate a fresh seeded instance
    with ``n_t`` high-fidelity points per repeat and score against the
    noise-free truth on a uniform ``eval_grid``. Cells are independent, may
    run on ``jobs`` threads, and are reassembled in a fixed order, so the
    report does not depend on scheduling. Per-seed failures are recorded and
    excluded from means.

    ``per_split_selection`` re-runs the mutual-information ranking inside
    every split on its training rows and keeps that many features (the
    default selects nothing per split; restrict columns up front for the
    select-once protocol).
    """
    methods = [_as_method(m) for m in methods]
    if not methods:
        raise ValueError("at least one method is required")
    n_t_list = [int(v) for v in n_t_list]

    task_mode = isinstance(source, (str, SyntheticTask))
    metadata: dict = {
        "toolkit_version": __version__,
        "seed": int(seed),
        "n_repeats": int(n_repeats),
        "n_t_list": n_t_list,
        "methods": [m.value for m in methods],
        "normalization": None if task_mode else normalization,
        "original_units": bool(original_units),
        "impute_mode": impute_mode,
        "seed_derivation": "per-repeat generator seeded by (seed, repeat, 0xC311); "
        "splits by (seed, repeat); method- and n_t-independent",
        "fit": {
            "n_restarts": fit.n_restarts,
            "noise_floor": fit.noise_floor,
            "max_iter": fit.max_iter,
            "shared_lengthscale": fit.shared_lengthscale,
        },
    }
    if extra_metadata:
        metadata.update(extra_metadata)

    if task_mode:
        task = resolve_task(source)
        width = task.default_n_low if n_low is None else int(n_low)
        grid = np.linspace(task.domain[0], task.domain[1], int(eval_grid))[:, None]
        truth = np.asarray(task.high_fn(grid[:, 0]), dtype=np.float64)
        codes = _indicator_codes([1, 2], indicator_values)
        metadata.update(
            {
                "source": {"kind": "task", "task": task.name, "n_low": width,
                           "noise_low": task.noise_low, "noise_high": task.noise_high},
                "eval_grid": int(eval_grid),
                "indicator_codes": codes,
            }
        )

        def run_cell(method: Method, n_t: int, rep: int) -> float:
            rep_seed = _repeat_seed(seed, rep)
            levels = make_synthetic(task, width, n_t, rep_seed)
            cfg = replace(fit, seed=rep_seed)
            pred = _predict_for_method(method, levels, grid, cfg, impute_mode, codes)
            return rmse(pred.mean, truth)

    else:
        ds0 = source if isinstance(source, data_mod.Dataset) else data_mod.from_levels(source)
        stats_all = None
        if normalization == "all":
            stats_all = data_mod.fit_normalize(ds0)
            ds_norm = data_mod.apply_normalize(ds0, stats_all)
        elif normalization in ("none", "train"):
            ds_norm = ds0
        else:
            raise ValueError(f"normalization must be 'all', 'train' or 'none', got {normalization!r}")
        codes = _indicator_codes(ds0.levels_present, indicator_values)
        plans_by_nt = {
            n_t: data_mod.make_splits(ds_norm, n_t, n_repeats, seed) for n_t in n_t_list
        }
        metadata.update(
            {
                "source": {"kind": "dataset", "path": ds0.source, "n_rows": ds0.n_rows,
                           "levels": ds0.levels_present, "sha256": dataset_hash(ds0)},
                "indicator_codes": codes,
                "per_split_selection": per_split_selection,
            }
        )

        def run_cell(method: Method, n_t: int, rep: int) -> float:
            plan = plans_by_nt[n_t][rep]
            rep_seed = _repeat_seed(seed, rep)
            cfg = replace(fit, seed=rep_seed)
            if normalization == "train":
                ds_cell = data_mod.apply_normalize(ds0, data_mod.fit_normalize(ds0, plan))
                stats = data_mod.fit_normalize(ds0, plan)
            else:
                ds_cell = ds_norm
                stats = stats_all
            if per_split_selection is not None:
                ds_cell = _restrict_by_split_ranking(ds_cell, plan, per_split_selection)
            train_levels = _train_levels_for_plan(ds_cell, plan)
            test_rows = np.asarray(plan.test_high, dtype=np.int64)
            pred = _predict_for_method(
                method, train_levels, ds_cell.x[test_rows], cfg, impute_mode, codes
            )
            value = rmse(pred.mean, ds_cell.y[test_rows])
            if original_units and stats is not None:
                value *= stats.target_range
            return value

    jobs = max(int(jobs), 1)
    cell_keys = [
        (mi, method, n_t, rep)
        for mi, method in enumerate(methods)
        for n_t in n_t_list
        for rep in range(int(n_repeats))
    ]

    def worker(key):
        _, method, n_t, rep = key
        try:
            return key, float(run_cell(method, n_t, rep)), None
        except (MfgpkitError, np.linalg.LinAlgError) as exc:
            return key, None, f"{type(exc).__name__}: {exc}"

    if jobs == 1:
        outcomes = [worker(k) for k in cell_keys]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(worker, cell_keys))
    outcomes.sort(key=lambda item: (item[0][0], n_t_list.index(item[0][2]), item[0][3]))

    cells = []
    for mi, method in enumerate(methods):
        for n_t in n_t_list:
            repeats, values, failures = [], [], []
            for key, value, error in outcomes:
                if key[0] != mi or key[2] != n_t:
                    continue
                if error is None:
                    repeats.append(key[3])
                    values.append(value)
                else:
                    failures.append({"repeat": key[3], "error": error})
            cells.append(
                CellResult(
                    method=method.value,
                    n_t=n_t,
                    repeats=tuple(repeats),
                    rmse_values=tuple(values),
                    failures=tuple(failures),
                )
            )
    return ExperimentReport(cells=tuple(cells), metadata=metadata)


def _restrict_by_split_ranking(ds, plan, n_keep: int):
    from . import featsel  # local import: featsel builds on bench for its sweep

    train_rows = np.concatenate(
        [np.nonzero(ds.fidelity != ds.top_level)[0], np.asarray(plan.train_high)]
    ).astype(np.int64)
    table, target = featsel.make_table(ds.x[train_rows], ds.y[train_rows])
    ranking = featsel.mrmr_rank(table, target)
    idx = sorted(ranking.order[: min(n_keep, len(ranking.order))])
    return data_mod.Dataset(
        feature_names=tuple(ds.feature_names[i] for i in idx),
        x=ds.x[:, idx],
        y=ds.y,
        fidelity=ds.fidelity,
        source=ds.source,
        row_ids=ds.row_ids,
    )


def loo_report(
    source,
    methods,
    *,
    fit: FitConfig = FitConfig(),
    seed: int = 0,
    normalization: str = "all",
    impute_mode: str = "mean",
    indicator_values=None,
    extra_metadata: dict | None = None,
) -> ExperimentReport:
    """Leave-one-out evaluation over the highest-fidelity rows.

    Besides the usual per-seed RMSE bookkeeping (one "seed" per held-out
    point), the report carries the per-point posterior mean, the
    two-standard-deviation band, and whether the truth fell inside it. The
    band covers observations, so it includes the fitted noise variance on
    top of the latent predictive variance.
    """
    methods = [_as_method(m) for m in methods]
    ds0 = source if isinstance(source, data_mod.Dataset) else data_mod.from_levels(source)
    if normalization == "all":
        ds = data_mod.apply_normalize(ds0, data_mod.fit_normalize(ds0))
    elif normalization == "none":
        ds = ds0
    else:
        raise ValueError("loo_report supports normalization 'all' or 'none'")
    plans = data_mod.loo_splits(ds)
    codes = _indicator_codes(ds.levels_present, indicator_values)

    cells = []
    points: list[LooPoint] = []
    for method in methods:
        repeats, values, failures = [], [], []
        for i, plan in enumerate(plans):
            cfg = replace(fit, seed=_repeat_seed(seed, i))
            train_levels = _train_levels_for_plan(ds, plan)
            row = plan.test_high[0]
            try:
                model = _fit_method(method, train_levels, cfg, impute_mode, codes)
                pred = _predict_method(method, model, ds.x[[row]], codes)
            except (MfgpkitError, np.linalg.LinAlgError) as exc:
                failures.append({"repeat": i, "error": f"{type(exc).__name__}: {exc}"})
                continue
            mean = float(pred.mean[0])
            var = float(pred.variance[0]) + observation_noise(model)
            band = 2.0 * math.sqrt(var)
            truth = float(ds.y[row])
            points.append(
                LooPoint(
                    method=method.value,
                    row_id=int(row),
                    truth=truth,
                    mean=mean,
                    variance=var,
                    lo2sd=mean - band,
                    hi2sd=mean + band,
                    covered=bool(mean - band <= truth <= mean + band),
                )
            )
            repeats.append(i)
            values.append(abs(mean - truth))
        cells.append(
            CellResult(
                method=method.value,
                n_t=plans[0].n_t,
                repeats=tuple(repeats),
                rmse_values=tuple(values),
                failures=tuple(failures),
            )
        )
    metadata = {
        "toolkit_version": __version__,
        "seed": int(seed),
        "protocol": "leave-one-out",
        "n_points": len(plans),
        "methods": [m.value for m in methods],
        "normalization": normalization,
        "indicator_codes": codes,
        "source": {"kind": "dataset", "path": ds0.source, "n_rows": ds0.n_rows,
                   "sha256": dataset_hash(ds0)},
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    return ExperimentReport(cells=tuple(cells), metadata=metadata, loo_points=tuple(points))


# --- delimited output ---------------------------------------------------------------


def _float_cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_report_csv(report: ExperimentReport, path, config_line: str | None = None) -> None:
    """Summary CSV mirroring the bar-chart data: one row per (method, n_t)."""
    lines = []
    if config_line:
        lines.append(f"# {config_line}")
    lines.append("method,n_t,mean_rmse,std_rmse,n_failures")
    for row in report.summary_rows():
        lines.append(
            f"{row['method']},{row['n_t']},{_float_cell(row['mean_rmse'])},"
            f"{_float_cell(row['std_rmse'])},{row['n_failures']}"
        )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_json(report: ExperimentReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_loo_csv(report: ExperimentReport, path, config_line: str | None = None) -> None:
    lines = []
    if config_line:
        lines.append(f"# {config_line}")
    lines.append("method,row_id,truth,mean,variance,lo2sd,hi2sd,covered")
    for p in report.loo_points:
        lines.append(
            f"{p.method},{p.row_id},{_float_cell(p.truth)},{_float_cell(p.mean)},"
            f"{_float_cell(p.variance)},{_float_cell(p.lo2sd)},{_float_cell(p.hi2sd)},"
            f"{int(p.covered)}"
        )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

"""Command-line surface: fit, predict, select-features, benchmark, make-synthetic, pca.

All randomness flows from ``--seed``; subordinate seeds are derived by fixed
mixing (documented in report metadata), so reruns with identical inputs and
flags produce byte-identical delimited outputs at any ``--jobs`` setting.
Every output embeds the resolved run configuration and a content hash of its
inputs. Exit codes: 0 success, 2 configuration or input error, 3 numerical
or fit failure. Set ``MFGP_LOG`` to control log verbosity.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import bench, data as data_mod, featsel, figures, gp, mfgp
from ._version import __version__
from .errors import DataError, EmptyFileError, MissingColumnError, NumericalError
from .gp import FitConfig

logger = logging.getLogger(__name__)


def _config_line(command: str, params: dict, input_sha256=None) -> str:
    doc = {"command": command, "params": params}
    if input_sha256 is not None:
        doc["input_sha256"] = input_sha256
    return json.dumps(doc, sort_keys=True)


def _hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _maybe_tuple(csv_arg: str | None) -> tuple | None:
    if csv_arg is None:
        return None
    items = tuple(s.strip() for s in csv_arg.split(",") if s.strip())
    return items or None


def _schema(target, fidelity_col, features, fidelity_levels) -> data_mod.CsvSchema:
    return data_mod.CsvSchema(
        target_column=target,
        fidelity_column=fidelity_col,
        feature_columns=_maybe_tuple(features),
        fidelity_order=_maybe_tuple(fidelity_levels),
    )


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (DataError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"fit failed: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _stats_to_dict(stats) -> dict:
    return {
        "feature_min": stats.feature_min.tolist(),
        "feature_max": stats.feature_max.tolist(),
        "target_min": stats.target_min,
        "target_max": stats.target_max,
    }


def _stats_from_dict(d) -> data_mod.NormalizationStats:
    return data_mod.NormalizationStats(
        feature_min=np.asarray(d["feature_min"], dtype=np.float64),
        feature_max=np.asarray(d["feature_max"], dtype=np.float64),
        target_min=float(d["target_min"]),
        target_max=float(d["target_max"]),
    )


def _normalize_features(x: np.ndarray, stats: data_mod.NormalizationStats) -> np.ndarray:
    span = stats.feature_max - stats.feature_min
    safe = np.where(span == 0.0, 1.0, span)
    out = (x - stats.feature_min) / safe
    out[:, span == 0.0] = 0.0
    return out


@click.group()
@click.version_option(version=__version__, prog_name="mfgp")
def main() -> None:
    """Multi-fidelity Gaussian-process toolkit."""
    level_name = os.environ.get("MFGP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING))


# --- fit -------------------------------------------------------------------------


def _summarize_gp(model: gp.GpModel, indent: str = "") -> list[str]:
    lines = [f"{indent}log marginal likelihood: {model.mll_at_fit:.6f}"]
    kernel = gp.kernel_to_dict(model.hyper.kernel)
    for key, value in sorted(kernel.items()):
        if key == "family":
            continue
        lines.append(f"{indent}{key}: {value}")
    lines.append(f"{indent}noise_variance: {model.hyper.noise_variance:.6g}")
    if model.hyper.mean_constant != 0.0:
        lines.append(f"{indent}mean_constant: {model.hyper.mean_constant:.6g}")
    lines.append(f"{indent}jitter: {model.factor.jitter:.3g}")
    return lines


def _summarize_model(model) -> list[str]:
    if isinstance(model, gp.GpModel):
        return _summarize_gp(model)
    lines = [f"kind: {model.kind} ({model.n_levels} levels)"]
    for pos, level in enumerate(model.levels, start=1):
        lines.append(f"level {pos}:")
        if isinstance(level, mfgp.LinkedLevel):
            lines.append(f"  scale: {level.scale:.6g}")
            lines.append(f"  offset: {level.offset:.6g}")
            lines.extend(_summarize_gp(level.gp, indent="  "))
        else:
            lines.extend(_summarize_gp(level, indent="  "))
    return lines


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", required=True,
              type=click.Choice([m.value for m in bench.Method]))
@click.option("--target", required=True, help="Target column name.")
@click.option("--fidelity-col", default=None, help="Fidelity column name.")
@click.option("--features", default=None, help="Comma-separated feature columns (default: infer).")
@click.option("--fidelity-levels", default=None,
              help="Comma-separated fidelity labels, lowest first (for categorical columns).")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--restarts", default=10, type=int, show_default=True)
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--impute/--no-impute", default=True, show_default=True,
              help="Impute lower-level targets to satisfy the nested-inputs requirement.")
@click.option("--impute-mode", default="mean", type=click.Choice(["mean", "sample"]),
              show_default=True)
@click.option("--output-dir", default=".", show_default=True)
@_handle_errors
def cmd_fit(data_path, method, target, fidelity_col, features, fidelity_levels, seed,
            restarts, normalize, impute, impute_mode, output_dir):
    """Train one method on a dataset and write model.json plus a fit summary."""
    params = {
        "data": str(data_path), "method": method, "target": target,
        "fidelity_col": fidelity_col, "features": features,
        "fidelity_levels": fidelity_levels, "seed": seed, "restarts": restarts,
        "normalize": normalize, "impute": impute, "impute_mode": impute_mode,
    }
    config_line = _config_line("fit", params)
    schema = _schema(target, fidelity_col, features, fidelity_levels)
    ds = data_mod.load_csv(data_path, schema)
    stats = None
    if normalize:
        stats = data_mod.fit_normalize(ds)
        ds = data_mod.apply_normalize(ds, stats)

    cfg = FitConfig(seed=seed, n_restarts=restarts)
    codes = bench._indicator_codes(ds.levels_present)
    n_imputed = 0
    method_enum = bench.Method(method)
    if method_enum in (bench.Method.LARGP, bench.Method.NARGP):
        levels = data_mod.to_levels(ds)
        if impute:
            levels, log = mfgp.ensure_nested(
                levels, mfgp.ImputeConfig(mode=impute_mode, seed=seed, fit=cfg)
            )
            n_imputed = len(log)
        else:
            mfgp.check_nested(levels)
        if method_enum is bench.Method.LARGP:
            model = mfgp.fit_largp(levels, mfgp.MfgpFitConfig(fit=cfg))
        else:
            model = mfgp.fit_nargp(levels, mfgp.MfgpFitConfig(fit=cfg))
    else:
        levels = data_mod.to_levels(ds)
        if method_enum is bench.Method.GP_LOW:
            model = gp.fit(levels[0].x, levels[0].y, cfg)
        elif method_enum is bench.Method.GP_HIGH:
            model = gp.fit(levels[-1].x, levels[-1].y, cfg)
        else:
            x_parts = [np.hstack([lv.x, np.full((lv.n, 1), code)])
                       for lv, code in zip(levels, codes)]
            y_parts = [lv.y for lv in levels]
            model = gp.fit(np.vstack(x_parts), np.concatenate(y_parts), cfg)

    out = _out_dir(output_dir)
    metadata = {
        "run_config": json.loads(config_line),
        "input_sha256": _hash_file(data_path),
        "toolkit_version": __version__,
        "method": method,
        "feature_names": list(ds.feature_names),
        "target_column": target,
        "fidelity_column": fidelity_col,
        "normalization": _stats_to_dict(stats) if stats else None,
        "indicator_codes": codes if method_enum is bench.Method.GP_AUG else None,
        "imputed_points": n_imputed,
    }
    model_path = out / "model.json"
    mfgp.save_model(model, model_path, metadata=metadata)
    click.echo(f"wrote {model_path}")
    for line in _summarize_model(model):
        click.echo(line)


# --- predict ----------------------------------------------------------------------


def _read_feature_rows(path, feature_names) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFileError(str(path)) from None
        rows = [row for row in reader if row]
    idx = []
    for name in feature_names:
        if name not in header:
            raise MissingColumnError(name)
        idx.append(header.index(name))
    x = np.empty((len(rows), len(feature_names)))
    for r, row in enumerate(rows):
        for j, (name, i) in enumerate(zip(feature_names, idx)):
            x[r, j] = data_mod._parse_cell(row[i], r, name)
    return x


@main.command("predict")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--original-units", is_flag=True, default=False,
              help="Report mean/band in the target's original units.")
@click.option("--samples", default=0, type=int, show_default=True,
              help="Monte Carlo samples for nonlinear multi-fidelity prediction (0 = deterministic).")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--output-dir", default=".", show_default=True)
@_handle_errors
def cmd_predict(model_path, data_path, original_units, samples, seed, output_dir):
    """Predict at the rows of a feature CSV: mean, variance and the 2-sigma band."""
    params = {
        "model": str(model_path), "data": str(data_path),
        "original_units": original_units, "samples": samples, "seed": seed,
    }
    config_line = _config_line(
        "predict", params,
        {"data": _hash_file(data_path), "model": _hash_file(model_path)},
    )
    model, meta = mfgp.load_model(model_path)
    feature_names = meta.get("feature_names")
    if not feature_names:
        raise ValueError(f"{model_path}: model file carries no feature names")
    x_raw = _read_feature_rows(data_path, feature_names)

    x = x_raw
    stats = _stats_from_dict(meta["normalization"]) if meta.get("normalization") else None
    if stats is not None and x.shape[0] > 0:
        x = _normalize_features(x_raw, stats)
    if meta.get("indicator_codes"):
        code = meta["indicator_codes"][-1]
        x = np.hstack([x, np.full((x.shape[0], 1), code)])

    if x.shape[0] == 0:
        mean = np.empty(0)
        variance = np.empty(0)
    else:
        kwargs = {}
        if isinstance(model, mfgp.MfgpModel) and model.kind == "nargp" and samples > 0:
            kwargs = {"mode": "sample", "n_samples": samples, "seed": seed}
        dist = mfgp.predict(model, x, **kwargs)
        mean, variance = dist.mean, dist.variance

    sd2 = 2.0 * np.sqrt(variance)
    lo, hi = mean - sd2, mean + sd2
    if original_units and stats is not None:
        mean = data_mod.invert_target(mean, stats)
        lo = data_mod.invert_target(lo, stats)
        hi = data_mod.invert_target(hi, stats)
        variance = variance * stats.target_range**2

    out = _out_dir(output_dir)
    out_path = out / "predictions.csv"
    lines = [f"# {config_line}"]
    lines.append(",".join(list(feature_names) + ["mean", "variance", "lo2sd", "hi2sd"]))
    for r in range(x_raw.shape[0]):
        cells = [repr(float(v)) for v in x_raw[r]]
        cells += [repr(float(mean[r])), repr(float(variance[r])),
                  repr(float(lo[r])), repr(float(hi[r]))]
        lines.append(",".join(cells))
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {out_path} ({x_raw.shape[0]} rows)")


# --- select-features --------------------------------------------------------------


@main.command("select-features")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", required=True)
@click.option("--fidelity-col", required=True)
@click.option("--features", default=None)
@click.option("--fidelity-levels", default=None)
@click.option("--bins", default=5, type=int, show_default=True)
@click.option("--binning", default="equal-frequency",
              type=click.Choice([m.value for m in featsel.BinningMethod]), show_default=True)
@click.option("--model", "model_kind", default="largp",
              type=click.Choice([m.value for m in bench.Method]), show_default=True)
@click.option("--nf-max", default=None, type=int,
              help="Largest subset size to sweep (default: all features).")
@click.option("--nt", default=None, type=int,
              help="High-fidelity training rows per split (default: all but one).")
@click.option("--repeats", default=30, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--restarts", default=10, type=int, show_default=True)
@click.option("--figures/--no-figures", "figures_on", default=True, show_default=True)
@click.option("--output-dir", default=".", show_default=True)
@_handle_errors
def cmd_select_features(data_path, target, fidelity_col, features, fidelity_levels, bins,
                        binning, model_kind, nf_max, nt, repeats, seed, restarts, figures_on,
                        output_dir):
    """Rank features by relevance-minus-redundancy and sweep the subset size."""
    params = {
        "data": str(data_path), "target": target, "fidelity_col": fidelity_col,
        "features": features, "fidelity_levels": fidelity_levels, "bins": bins,
        "binning": binning, "model": model_kind, "nf_max": nf_max, "nt": nt,
        "repeats": repeats, "seed": seed, "restarts": restarts,
    }
    config_line = _config_line("select-features", params, _hash_file(data_path))
    schema = _schema(target, fidelity_col, features, fidelity_levels)
    ds = data_mod.load_csv(data_path, schema)
    ds = data_mod.apply_normalize(ds, data_mod.fit_normalize(ds))

    table, target_labels = featsel.make_table(
        ds.x, ds.y, n_bins=bins, method=featsel.BinningMethod(binning)
    )
    ranking = featsel.mrmr_rank(table, target_labels)

    out = _out_dir(output_dir)
    ranking_path = out / "ranking.csv"
    lines = [f"# {config_line}", "rank,feature_name,score"]
    for rank, (feat, score) in enumerate(zip(ranking.order, ranking.scores), start=1):
        lines.append(f"{rank},{ds.feature_names[feat]},{repr(float(score))}")
    ranking_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {ranking_path}")

    n_high = ds.high_rows().size
    n_t = (n_high - 1) if nt is None else nt
    sweep = featsel.sweep_subset_size(
        data_mod.to_levels(ds),
        ranking,
        model_kind,
        featsel.SweepConfig(
            n_t=n_t,
            n_repeats=repeats,
            seed=seed,
            fit=FitConfig(seed=seed, n_restarts=restarts),
            max_features=nf_max,
        ),
    )
    sweep_path = out / "nf_sweep.csv"
    lines = [f"# {config_line}", "n_f,mean_rmse,std_rmse"]
    for point in sweep:
        lines.append(f"{point.n_f},{repr(point.mean_rmse)},{repr(point.std_rmse)}")
    sweep_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {sweep_path}")
    failures = sum(p.n_failures for p in sweep)
    if failures:
        click.echo(f"warning: {failures} fit failure(s) across the sweep", err=True)
    if figures_on:
        fig_path = out / "nf_sweep.png"
        figures.save_sweep_curve(sweep, fig_path, description=config_line)
        click.echo(f"wrote {fig_path}")
    finite = [p for p in sweep if math.isfinite(p.mean_rmse)]
    if finite:
        best = min(finite, key=lambda p: (p.mean_rmse, p.n_f))
        click.echo(f"best subset size: {best.n_f} (mean RMSE {best.mean_rmse:.6f})")


# --- benchmark --------------------------------------------------------------------


@main.command("benchmark")
@click.option("--data", "data_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", "task_name", default=None,
              type=click.Choice(sorted(bench.SYNTHETIC_TASKS)))
@click.option("--methods", required=True,
              help="Comma-separated method names (gp-low,gp-high,gp-aug,largp,nargp).")
@click.option("--nt", default=None, help="Comma-separated high-fidelity training counts.")
@click.option("--loo", is_flag=True, default=False,
              help="Leave-one-out protocol instead of repeated splits.")
@click.option("--repeats", default=30, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--restarts", default=10, type=int, show_default=True)
@click.option("--n-low", default=None, type=int, help="Low-fidelity points for synthetic tasks.")
@click.option("--noise-low", default=None, type=float)
@click.option("--noise-high", default=None, type=float)
@click.option("--eval-grid", default=100, type=int, show_default=True)
@click.option("--jobs", default=1, type=int, show_default=True)
@click.option("--normalization", default="all", type=click.Choice(["all", "train", "none"]),
              show_default=True)
@click.option("--original-units", is_flag=True, default=False)
@click.option("--indicator-values", default=None,
              help="Comma-separated per-level indicator values for gp-aug (e.g. volumes).")
@click.option("--target", default=None)
@click.option("--fidelity-col", default=None)
@click.option("--features", default=None)
@click.option("--fidelity-levels", default=None)
@click.option("--figures/--no-figures", "figures_on", default=True, show_default=True)
@click.option("--output-dir", default=".", show_default=True)
@_handle_errors
def cmd_benchmark(data_path, task_name, methods, nt, loo, repeats, seed, restarts, n_low,
                  noise_low, noise_high, eval_grid, jobs, normalization, original_units,
                  indicator_values, target, fidelity_col, features, fidelity_levels,
                  figures_on, output_dir):
    """Repeated-split (or leave-one-out) RMSE comparison; writes JSON + CSV reports."""
    if (data_path is None) == (task_name is None):
        raise ValueError("exactly one of --data or --task is required")
    if not loo and nt is None:
        raise ValueError("--nt is required unless --loo is given")
    if loo and nt is not None:
        raise ValueError("--loo and --nt are mutually exclusive")
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    if not method_list:
        raise ValueError("at least one method is required")
    nt_list = [int(v) for v in nt.split(",")] if nt else []
    indicator = None
    if indicator_values is not None:
        indicator = [float(v) for v in indicator_values.split(",")]

    params = {
        "data": data_path and str(data_path), "task": task_name, "methods": method_list,
        "nt": nt_list, "loo": loo, "repeats": repeats, "seed": seed, "restarts": restarts,
        "n_low": n_low, "noise_low": noise_low, "noise_high": noise_high,
        "eval_grid": eval_grid, "normalization": normalization,
        "original_units": original_units, "indicator_values": indicator,
        "target": target, "fidelity_col": fidelity_col, "features": features,
        "fidelity_levels": fidelity_levels,
    }
    fit_cfg = FitConfig(seed=seed, n_restarts=restarts)

    if data_path is not None:
        if target is None:
            raise ValueError("--target is required with --data")
        schema = _schema(target, fidelity_col, features, fidelity_levels)
        source = data_mod.load_csv(data_path, schema)
        input_hash = _hash_file(data_path)
    else:
        task = bench.resolve_task(task_name)
        if noise_low is not None:
            task = replace(task, noise_low=noise_low)
        if noise_high is not None:
            task = replace(task, noise_high=noise_high)
        source = task
        input_hash = _hash_text(json.dumps(params, sort_keys=True))
    config_line = _config_line("benchmark", params, input_hash)

    extra = {"run_config": json.loads(config_line), "input_sha256": input_hash}
    if loo:
        report = bench.loo_report(
            source if isinstance(source, data_mod.Dataset) else bench.make_synthetic(
                source, n_low or source.default_n_low, (n_low or source.default_n_low) // 2, seed
            ),
            method_list,
            fit=fit_cfg,
            seed=seed,
            normalization=normalization if normalization != "train" else "all",
            indicator_values=indicator,
            extra_metadata=extra,
        )
    else:
        report = bench.run_experiment(
            source,
            method_list,
            nt_list,
            repeats,
            seed,
            fit=fit_cfg,
            jobs=jobs,
            eval_grid=eval_grid,
            n_low=n_low,
            normalization=normalization,
            original_units=original_units,
            indicator_values=indicator,
            extra_metadata=extra,
        )

    out = _out_dir(output_dir)
    json_path = out / "report.json"
    csv_path = out / "report.csv"
    bench.write_report_json(report, json_path)
    bench.write_report_csv(report, csv_path, config_line=config_line)
    click.echo(f"wrote {json_path}")
    click.echo(f"wrote {csv_path}")
    if loo:
        loo_path = out / "loo_points.csv"
        bench.write_loo_csv(report, loo_path, config_line=config_line)
        click.echo(f"wrote {loo_path}")
    elif figures_on:
        fig_path = out / "report.png"
        figures.save_benchmark_bars(report, fig_path, description=config_line)
        click.echo(f"wrote {fig_path}")
    for row in report.summary_rows():
        mean = "nan" if row["mean_rmse"] is None else f"{row['mean_rmse']:.6f}"
        click.echo(f"{row['method']:>8}  n_t={row['n_t']:<4} mean_rmse={mean} "
                   f"failures={row['n_failures']}")


# --- make-synthetic ---------------------------------------------------------------


@main.command("make-synthetic")
@click.option("--task", "task_name", required=True,
              type=click.Choice(sorted(bench.SYNTHETIC_TASKS)))
@click.option("--n-low", default=None, type=int)
@click.option("--n-high", required=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--noise-low", default=None, type=float)
@click.option("--noise-high", default=None, type=float)
@click.option("--figures/--no-figures", "figures_on", default=True, show_default=True)
@click.option("--output-dir", default=".", show_default=True)
@_handle_errors
def cmd_make_synthetic(task_name, n_low, n_high, seed, noise_low, noise_high, figures_on,
                       output_dir):
    """Generate a nested two-level benchmark instance as CSV."""
    task = bench.resolve_task(task_name)
    if noise_low is not None:
        task = replace(task, noise_low=noise_low)
    if noise_high is not None:
        task = replace(task, noise_high=noise_high)
    width = task.default_n_low if n_low is None else n_low
    params = {
        "task": task.name, "n_low": width, "n_high": n_high, "seed": seed,
        "noise_low": task.noise_low, "noise_high": task.noise_high,
    }
    config_line = _config_line(
        "make-synthetic", params, _hash_text(json.dumps(params, sort_keys=True))
    )
    levels = bench.make_synthetic(task, width, n_high, seed)
    ds = data_mod.from_levels(levels, feature_names=("x",))
    out = _out_dir(output_dir)
    csv_path = out / "synthetic.csv"
    data_mod.write_csv(ds, csv_path, config_line=config_line)
    click.echo(f"wrote {csv_path}")
    if figures_on:
        fig_path = out / "synthetic.png"
        figures.save_synthetic_overview(task, levels, fig_path, description=config_line)
        click.echo(f"wrote {fig_path}")


# --- pca --------------------------------------------------------------------------


@main.command("pca")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", required=True)
@click.option("--fidelity-col", default=None)
@click.option("--features", default=None)
@click.option("--fidelity-levels", default=None)
@click.option("-k", "--components", default=2, type=int, show_default=True)
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--figures/--no-figures", "figures_on", default=True, show_default=True)
@click.option("--output-dir", default=".", show_default=True)
@_handle_errors
def cmd_pca(data_path, target, fidelity_col, features, fidelity_levels, components,
            normalize, figures_on, output_dir):
    """Project the features onto principal components for plotting."""
    params = {
        "data": str(data_path), "target": target, "fidelity_col": fidelity_col,
        "features": features, "fidelity_levels": fidelity_levels,
        "components": components, "normalize": normalize,
    }
    config_line = _config_line("pca", params, _hash_file(data_path))
    schema = _schema(target, fidelity_col, features, fidelity_levels)
    ds = data_mod.load_csv(data_path, schema)
    if normalize:
        ds = data_mod.apply_normalize(ds, data_mod.fit_normalize(ds))
    projected, ratios = data_mod.pca_project(ds.x, components)

    out = _out_dir(output_dir)
    csv_path = out / "pca.csv"
    header = [f"pc{j + 1}" for j in range(components)] + ["y", "fidelity"]
    lines = [f"# {config_line}", ",".join(header)]
    for r in range(ds.n_rows):
        cells = [repr(float(v)) for v in projected[r]]
        cells += [repr(float(ds.y[r])), str(int(ds.fidelity[r]))]
        lines.append(",".join(cells))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {csv_path}")
    click.echo("explained variance ratios: "
               + ", ".join(f"{v:.4f}" for v in ratios))
    if figures_on:
        fig_path = out / "pca.png"
        figures.save_pca_scatter(
            projected[:, 0], ds.y, ds.fidelity, fig_path,
            description=config_line,
            level_names=_maybe_tuple(fidelity_levels),
        )
        click.echo(f"wrote {fig_path}")


if __name__ == "__main__":
    main()

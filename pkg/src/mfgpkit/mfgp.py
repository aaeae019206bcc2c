"""Multi-fidelity models over an ordered hierarchy of fidelity levels.

Two model kinds share the recursive structure:

* the linear autoregressive model, where each level is a scalar multiple of
  the lower level's posterior mean plus a constant offset and a GP-distributed
  correction fitted on the link residuals, and
* the nonlinear autoregressive model, where each level is a GP over the
  input augmented with the lower level's posterior mean, using the
  product-plus-bias composite kernel.

Both require nested training inputs: every higher-level input must also
appear (exactly, to 1e-12) among the lower level's inputs.
:func:`ensure_nested` repairs violations by imputing lower-level targets
from a GP fitted to that level's original data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import gp
from .errors import NotNestedError, NotPositiveDefiniteError
from .gp import FitConfig, GpModel, PredictiveDistribution
from .numerics import KernelFamily, as_matrix, as_vector

NEST_TOL = 1e-12


@dataclass(frozen=True)
class FidelityLevel:
    """One rung of the fidelity hierarchy: 1 is the lowest fidelity."""

    index: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = as_matrix(self.x, "x").copy()
        y = as_vector(self.y, "y").copy()
        if x.shape[0] != y.size or x.shape[0] < 1:
            raise ValueError("x and y must have the same nonzero number of rows")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "index", int(self.index))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class LinkedLevel:
    """Trained state of one linear-autoregressive level (t >= 2).

    ``scale`` multiplies the lower level's posterior mean, ``offset`` shifts
    it, and ``gp`` is the correction GP trained on the link residuals
    y - scale * lower_mean(x_train) - offset.
    """

    scale: float
    offset: float
    gp: GpModel


@dataclass(frozen=True)
class MfgpModel:
    """Ordered stack of per-level trained state.

    ``kind`` is ``"largp"`` or ``"nargp"``. The first level is always a plain
    :class:`GpModel`; higher levels are :class:`LinkedLevel` for the linear
    model and plain GPs over augmented inputs for the nonlinear model.
    """

    kind: str
    levels: tuple

    @property
    def n_levels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class ImputeConfig:
    """How :func:`ensure_nested` fills in missing lower-level targets."""

    mode: str = "mean"  # "mean" (deterministic) or "sample" (seeded posterior draw)
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        if self.mode not in ("mean", "sample"):
            raise ValueError(f"impute mode must be 'mean' or 'sample', got {self.mode!r}")


@dataclass(frozen=True)
class ImputedPoint:
    """One synthetic row appended by ensure_nested."""

    level_index: int
    row: int  # index within the augmented level
    x: tuple
    y: float
    mode: str


@dataclass(frozen=True)
class MfgpFitConfig:
    """Per-level fit controls for the multi-fidelity models.

    ``fix_scale`` / ``fix_offset`` pin the linear link parameters instead of
    optimizing them; fixing both to 0 makes every level an independent GP on
    its own data (the same code path as a plain fit, bit for bit).
    """

    fit: FitConfig = field(default_factory=FitConfig)
    fix_scale: float | None = None
    fix_offset: float | None = None


def validate_levels(levels) -> tuple[FidelityLevel, ...]:
    levels = tuple(levels)
    if not levels:
        raise ValueError("at least one fidelity level is required")
    for pos, level in enumerate(levels):
        if not isinstance(level, FidelityLevel):
            raise TypeError("levels must be FidelityLevel instances")
        if level.index != pos + 1:
            raise ValueError(
                f"fidelity levels must be ordered 1..L; position {pos} has index {level.index} "
                "(permuted hierarchies are rejected, not reordered)"
            )
    dims = {level.x.shape[1] for level in levels}
    if len(dims) != 1:
        raise ValueError(f"all levels must share feature dimensionality, got {sorted(dims)}")
    return levels


def _missing_rows(upper_x: np.ndarray, lower_x: np.ndarray) -> list[int]:
    """Indices of upper rows with no exact (<= 1e-12) counterpart below."""
    missing = []
    for i in range(upper_x.shape[0]):
        diffs = np.max(np.abs(lower_x - upper_x[i]), axis=1)
        if not np.any(diffs <= NEST_TOL):
            missing.append(i)
    return missing


def check_nested(levels) -> None:
    """Raise NotNestedError unless every level's inputs appear one level down."""
    levels = validate_levels(levels)
    for t in range(1, len(levels)):
        missing = _missing_rows(levels[t].x, levels[t - 1].x)
        if missing:
            raise NotNestedError(levels[t].index, len(missing))


def ensure_nested(
    levels, config: ImputeConfig = ImputeConfig()
) -> tuple[tuple[FidelityLevel, ...], list[ImputedPoint]]:
    """Augment lower levels until every higher-level input has a counterpart.

    Works top-down over adjacent pairs so additions cascade to the bottom.
    Missing targets come from a GP fitted to the lower level's original
    (pre-augmentation) data: its posterior mean by default, or a seeded
    posterior draw in ``sample`` mode. Returns the augmented hierarchy plus a
    log of the synthetic rows; already-nested hierarchies return unchanged
    with an empty log.
    """
    levels = list(validate_levels(levels))
    if len(levels) < 2:
        raise ValueError("ensure_nested needs at least two fidelity levels")
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed) & 0xFFFFFFFF, 0x5EED]))
    log: list[ImputedPoint] = []
    for t in range(len(levels) - 2, -1, -1):
        upper, lower = levels[t + 1], levels[t]
        missing = _missing_rows(upper.x, lower.x)
        if not missing:
            continue
        model = gp.fit(lower.x, lower.y, config.fit)
        new_x = upper.x[missing]
        pred = gp.predict(model, new_x)
        if config.mode == "sample":
            new_y = pred.mean + np.sqrt(pred.variance) * rng.standard_normal(pred.mean.size)
        else:
            new_y = pred.mean
        start = lower.n
        levels[t] = FidelityLevel(
            lower.index, np.vstack([lower.x, new_x]), np.concatenate([lower.y, new_y])
        )
        log.extend(
            ImputedPoint(lower.index, start + k, tuple(new_x[k]), float(new_y[k]), config.mode)
            for k in range(new_x.shape[0])
        )
    return tuple(levels), log


# --- linear autoregressive model ----------------------------------------------


def _chain_predict_largp(levels: tuple, X: np.ndarray) -> PredictiveDistribution:
    dist = gp.predict(levels[0], X)
    for level in levels[1:]:
        part = gp.predict(level.gp, X)
        mean = level.scale * dist.mean + level.offset + part.mean
        variance = level.scale**2 * dist.variance + part.variance
        dist = PredictiveDistribution(mean=mean, variance=variance)
    return dist


def _fit_linked_level(
    x: np.ndarray, y: np.ndarray, lower_mean: np.ndarray, config: MfgpFitConfig
) -> LinkedLevel:
    fit_cfg = config.fit
    if config.fix_scale == 0.0 and config.fix_offset == 0.0:
        # The link vanishes entirely: identical code path to a plain fit so the
        # degenerate model matches a high-fidelity-only GP bit for bit.
        return LinkedLevel(scale=0.0, offset=0.0, gp=gp.fit(x, y, fit_cfg))

    scale0 = 1.0 if config.fix_scale is None else float(config.fix_scale)
    offset0 = (
        float(np.mean(y - scale0 * lower_mean))
        if config.fix_offset is None
        else float(config.fix_offset)
    )
    resid0 = y - scale0 * lower_mean - offset0
    base_cfg = replace(fit_cfg, optimize_mean=False, warn_on_unnormalized=False)
    kernel_inits = gp.initial_hypers(x, resid0, base_cfg)
    template = kernel_inits[0].kernel
    free_scale = config.fix_scale is None
    free_offset = config.fix_offset is None
    n_link = int(free_scale) + int(free_offset)

    rng = np.random.default_rng(np.random.SeedSequence([int(fit_cfg.seed) & 0xFFFFFFFF, 0x2A2A]))
    y_spread = float(np.std(y)) + 1e-9
    x0s = []
    for i, hyper in enumerate(kernel_inits):
        vec = gp.pack_hyper(hyper, optimize_mean=False)
        link = []
        if free_scale:
            link.append(scale0 if i == 0 else scale0 + float(rng.standard_normal()))
        if free_offset:
            link.append(offset0 if i == 0 else offset0 + y_spread * float(rng.standard_normal()))
        x0s.append(np.concatenate([vec, link]))
    bounds = gp.parameter_bounds(template, fit_cfg.noise_floor, optimize_mean=False)
    bounds += [(None, None)] * n_link

    def split(vec):
        core, link = vec[: vec.size - n_link], vec[vec.size - n_link :]
        pos = 0
        scale = config.fix_scale
        offset = config.fix_offset
        if free_scale:
            scale = float(link[pos])
            pos += 1
        if free_offset:
            offset = float(link[pos])
        return core, float(scale), float(offset)

    def objective(vec):
        core, scale, offset = split(vec)
        hyper = gp.unpack_hyper(core, template, optimize_mean=False, fixed_mean=0.0,
                                noise_floor=fit_cfg.noise_floor)
        resid = y - scale * lower_mean - offset
        try:
            value, kernel_grad, noise_grad, alpha = gp.mll_value_and_gradient(
                hyper.kernel, hyper.noise_variance, x, resid
            )
        except NotPositiveDefiniteError:
            return np.inf, np.zeros_like(vec)
        parts = [kernel_grad, [noise_grad]]
        if free_scale:
            parts.append([float(lower_mean @ alpha)])
        if free_offset:
            parts.append([float(alpha.sum())])
        return -value, -np.concatenate(parts)

    best_x, _, _ = gp.multi_restart_minimize(objective, x0s, bounds, fit_cfg.max_iter)
    core, scale, offset = split(best_x)
    hyper = gp.unpack_hyper(core, template, optimize_mean=False, fixed_mean=0.0,
                            noise_floor=fit_cfg.noise_floor)
    resid = y - scale * lower_mean - offset
    return LinkedLevel(scale=scale, offset=offset, gp=gp.build_model(x, resid, hyper))


def fit_largp(levels, config: MfgpFitConfig = MfgpFitConfig()) -> MfgpModel:
    """Fit the linear autoregressive stack, lowest level first.

    Level 1 is a plain GP fit. Each level t >= 2 jointly maximizes its
    marginal likelihood over the kernel parameters, noise, link scale and
    offset, with residuals formed against the already-fitted lower levels'
    posterior mean at this level's training inputs.
    """
    levels = validate_levels(levels)
    check_nested(levels)
    fitted: list = [gp.fit(levels[0].x, levels[0].y, config.fit)]
    for level in levels[1:]:
        lower_mean = _chain_predict_largp(tuple(fitted), level.x).mean
        fitted.append(_fit_linked_level(level.x, level.y, lower_mean, config))
    return MfgpModel(kind="largp", levels=tuple(fitted))


def predict_largp(model: MfgpModel, X_star) -> PredictiveDistribution:
    """Recursive posterior at the highest fidelity.

    Mean: scale * lower mean + offset + correction-GP mean. Variance:
    scale^2 * lower variance + this level's data term, clamped at zero.
    """
    if model.kind != "largp":
        raise ValueError(f"expected a largp model, got {model.kind!r}")
    X_star = as_matrix(X_star, "X_star")
    return _chain_predict_largp(model.levels, X_star)


def largp_from_hypers(levels, level_hypers, links) -> MfgpModel:
    """Assemble a linear autoregressive model with fixed hyperparameters.

    ``links`` holds one ``(scale, offset)`` pair per level above the first.
    No optimization runs; residuals are formed exactly as in fitting.
    """
    levels = validate_levels(levels)
    if len(level_hypers) != len(levels) or len(links) != len(levels) - 1:
        raise ValueError("need one hyperparameter set per level and one link per upper level")
    fitted: list = [gp.build_model(levels[0].x, levels[0].y, level_hypers[0])]
    for level, hyper, (scale, offset) in zip(levels[1:], level_hypers[1:], links):
        lower_mean = _chain_predict_largp(tuple(fitted), level.x).mean
        resid = level.y - scale * lower_mean - offset
        fitted.append(
            LinkedLevel(float(scale), float(offset), gp.build_model(level.x, resid, hyper))
        )
    return MfgpModel(kind="largp", levels=tuple(fitted))


# --- nonlinear autoregressive model ---------------------------------------------


def _chain_mean_nargp(fitted: tuple, X: np.ndarray) -> PredictiveDistribution:
    dist = gp.predict(fitted[0], X)
    for model in fitted[1:]:
        z = np.hstack([X, dist.mean[:, None]])
        dist = gp.predict(model, z)
    return dist


def fit_nargp(levels, config: MfgpFitConfig = MfgpFitConfig()) -> MfgpModel:
    """Fit the nonlinear autoregressive stack.

    Level 1 is a plain GP. Each level t >= 2 is a GP over the inputs
    augmented with the lower levels' posterior mean, using the composite
    kernel (input RBF times link RBF, plus bias RBF over the input).
    """
    levels = validate_levels(levels)
    check_nested(levels)
    fitted: list = [gp.fit(levels[0].x, levels[0].y, config.fit)]
    for level in levels[1:]:
        lower_mean = _chain_mean_nargp(tuple(fitted), level.x).mean
        z = np.hstack([level.x, lower_mean[:, None]])
        cfg = replace(
            config.fit,
            kernel_family=KernelFamily.NARGP_COMPOSITE,
            warn_on_unnormalized=False,
        )
        fitted.append(gp.fit(z, level.y, cfg))
    return MfgpModel(kind="nargp", levels=tuple(fitted))


def predict_nargp(
    model: MfgpModel,
    X_star,
    mode: str = "mean",
    n_samples: int = 100,
    seed: int = 0,
) -> PredictiveDistribution:
    """Posterior at the highest fidelity, propagating the lower levels.

    The default ``mean`` mode substitutes the lower level's posterior mean
    into the augmented input deterministically. ``sample`` mode instead
    propagates ``n_samples`` independent per-point draws of the lower level
    and returns the mixture mean and variance (seeded).
    """
    if model.kind != "nargp":
        raise ValueError(f"expected a nargp model, got {model.kind!r}")
    X_star = as_matrix(X_star, "X_star")
    if mode == "mean" or model.n_levels == 1:
        return _chain_mean_nargp(model.levels, X_star)
    if mode != "sample":
        raise ValueError(f"mode must be 'mean' or 'sample', got {mode!r}")

    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0x3A3A]))
    base = gp.predict(model.levels[0], X_star)
    n = X_star.shape[0]
    values = base.mean[None, :] + np.sqrt(base.variance)[None, :] * rng.standard_normal(
        (n_samples, n)
    )
    means = np.empty((n_samples, n))
    variances = np.empty((n_samples, n))
    for depth, level_model in enumerate(model.levels[1:], start=2):
        for s in range(n_samples):
            z = np.hstack([X_star, values[s][:, None]])
            dist = gp.predict(level_model, z)
            means[s] = dist.mean
            variances[s] = dist.variance
        if depth < model.n_levels:
            values = means + np.sqrt(variances) * rng.standard_normal((n_samples, n))
    mix_mean = means.mean(axis=0)
    mix_var = (variances + means**2).mean(axis=0) - mix_mean**2
    return PredictiveDistribution(mean=mix_mean, variance=np.maximum(mix_var, 0.0))


def nargp_from_hypers(levels, level_hypers) -> MfgpModel:
    """Assemble the nonlinear model with fixed per-level hyperparameters."""
    levels = validate_levels(levels)
    if len(level_hypers) != len(levels):
        raise ValueError("need one hyperparameter set per level")
    fitted: list = [gp.build_model(levels[0].x, levels[0].y, level_hypers[0])]
    for level, hyper in zip(levels[1:], level_hypers[1:]):
        lower_mean = _chain_mean_nargp(tuple(fitted), level.x).mean
        z = np.hstack([level.x, lower_mean[:, None]])
        fitted.append(gp.build_model(z, level.y, hyper))
    return MfgpModel(kind="nargp", levels=tuple(fitted))


def predict(model, X_star, **kwargs) -> PredictiveDistribution:
    """Dispatch prediction over plain GPs and both multi-fidelity kinds."""
    if isinstance(model, GpModel):
        return gp.predict(model, X_star, **kwargs)
    if model.kind == "largp":
        return predict_largp(model, X_star)
    return predict_nargp(model, X_star, **kwargs)


# --- serialization --------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, GpModel):
        return gp.model_to_dict(model)
    level_docs = [gp.model_to_dict(model.levels[0])]
    for level in model.levels[1:]:
        if model.kind == "largp":
            level_docs.append(
                {
                    "scale": float(level.scale),
                    "offset": float(level.offset),
                    "gp": gp.model_to_dict(level.gp),
                }
            )
        else:
            level_docs.append(gp.model_to_dict(level))
    return {"kind": model.kind, "levels": level_docs}


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "gp":
        return gp.model_from_dict(d)
    if kind not in ("largp", "nargp"):
        raise ValueError(f"unknown model kind {kind!r}")
    docs = d["levels"]
    levels: list = [gp.model_from_dict(docs[0])]
    for doc in docs[1:]:
        if kind == "largp":
            levels.append(
                LinkedLevel(
                    scale=float(doc["scale"]),
                    offset=float(doc["offset"]),
                    gp=gp.model_from_dict(doc["gp"]),
                )
            )
        else:
            levels.append(gp.model_from_dict(doc))
    return MfgpModel(kind=kind, levels=tuple(levels))


def save_model(model, path, metadata: dict | None = None) -> None:
    """Write any trained model as a versioned, self-describing JSON file.

    Real values round-trip exactly: they are emitted as shortest
    round-trip decimals.
    """
    doc = {
        "format": gp.MODEL_FORMAT,
        "version": gp.MODEL_VERSION,
        "model": model_to_dict(model),
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    """Read a model file; returns ``(model, metadata)``."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != gp.MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file")
    if doc.get("version") != gp.MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')!r}")
    return model_from_dict(doc["model"]), doc.get("metadata", {})

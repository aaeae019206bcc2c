"""Single-fidelity Gaussian-process regression.

Implements exact GP regression with a constant (optionally estimated) mean:
the log marginal likelihood and its analytic gradient in log-parameter
space, maximum-likelihood (type II) fitting via multi-restart L-BFGS-B, and
posterior prediction. All heavy lifting goes through the Cholesky
factorization of the noisy kernel matrix.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import numerics
from .errors import (
    AllRestartsFailedError,
    ClampedVarianceWarning,
    NotPositiveDefiniteError,
    UnnormalizedFeaturesWarning,
)
from .numerics import (
    CholeskyFactor,
    KernelFamily,
    KernelSpec,
    NargpCompositeKernel,
    RbfKernel,
    as_matrix,
    as_vector,
)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# log-space optimizer bounds: generous enough never to bind in sane problems,
# tight enough that exp() cannot overflow.
_LENGTHSCALE_LOG_BOUNDS = (math.log(1e-3), math.log(1e4))
_AMPLITUDE_LOG_BOUNDS = (math.log(1e-12), math.log(1e8))
_NOISE_LOG_UPPER = math.log(1e6)


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel spec plus observation-noise variance and constant mean."""

    kernel: KernelSpec
    noise_variance: float
    mean_constant: float = 0.0

    def __post_init__(self) -> None:
        nv = float(self.noise_variance)
        if not math.isfinite(nv) or nv <= 0.0:
            raise ValueError(f"noise_variance must be positive and finite, got {nv}")
        mc = float(self.mean_constant)
        if not math.isfinite(mc):
            raise ValueError("mean_constant must be finite")
        object.__setattr__(self, "noise_variance", nv)
        object.__setattr__(self, "mean_constant", mc)


@dataclass(frozen=True)
class FitConfig:
    """Controls for maximum-likelihood fitting.

    One restart starts from the canonical initialization (lengthscales 0.5,
    signal variance 1, noise 1 percent of the target variance, mean at the
    target mean when estimated); the remaining restarts draw log-uniform
    random initializations from a generator seeded by ``seed``. The best
    marginal likelihood across restarts wins, deterministically.
    """

    seed: int = 0
    n_restarts: int = 10
    noise_floor: float = 1e-8
    optimize_mean: bool = False
    mean_constant: float = 0.0
    shared_lengthscale: bool = False
    kernel_family: KernelFamily = KernelFamily.RBF
    max_iter: int = 250
    warn_on_unnormalized: bool = True
    fixed: Hyperparameters | None = None


@dataclass(frozen=True)
class GpModel:
    """Trained posterior state of a single GP."""

    hyper: Hyperparameters
    x_train: np.ndarray
    y_train: np.ndarray
    factor: CholeskyFactor
    alpha: np.ndarray
    mll_at_fit: float

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]


@dataclass(frozen=True)
class PredictiveDistribution:
    """Posterior mean and pointwise variance at query inputs."""

    mean: np.ndarray
    variance: np.ndarray


# --- marginal likelihood ------------------------------------------------------


def _noisy_gram(kernel: KernelSpec, noise_variance: float, X: np.ndarray) -> np.ndarray:
    K = numerics.gram_matrix(kernel, X)
    return K + noise_variance * np.eye(X.shape[0])


def _mll_from_factor(factor: CholeskyFactor, resid: np.ndarray, alpha: np.ndarray) -> float:
    n = resid.size
    return -0.5 * (float(resid @ alpha) + numerics.log_det(factor) + n * LOG_2PI)


def mll(hyper: Hyperparameters, X, y) -> float:
    """Log marginal likelihood -0.5 (r^T Ky^-1 r + log|Ky| + n log 2pi), r = y - mean."""
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] != y.size or y.size < 1:
        raise ValueError("X and y must have the same nonzero number of rows")
    resid = y - hyper.mean_constant
    factor = numerics.cholesky_factor(_noisy_gram(hyper.kernel, hyper.noise_variance, X))
    alpha = numerics.cho_solve(factor, resid)
    return _mll_from_factor(factor, resid, alpha)


def mll_value_and_gradient(
    kernel: KernelSpec, noise_variance: float, X: np.ndarray, resid: np.ndarray
) -> tuple[float, np.ndarray, float, np.ndarray]:
    """Core quantities for one evaluation of the marginal likelihood.

    Returns ``(value, kernel_log_gradient, log_noise_gradient, alpha)`` where
    gradients use the identity d/dtheta = 0.5 tr((alpha alpha^T - Ky^-1) dKy/dtheta)
    and are taken w.r.t. log-parameters. ``alpha = Ky^-1 resid`` also yields
    the mean-constant gradient as ``alpha.sum()``.
    """
    n = X.shape[0]
    K, kernel_grads = numerics.gram_with_gradients(kernel, X)
    factor = numerics.cholesky_factor(K + noise_variance * np.eye(n))
    alpha = numerics.cho_solve(factor, resid)
    value = _mll_from_factor(factor, resid, alpha)
    k_inv = numerics.cho_solve(factor, np.eye(n))
    w = np.outer(alpha, alpha) - k_inv
    kernel_grad = np.array([0.5 * float(np.sum(w * dk)) for dk in kernel_grads])
    noise_grad = 0.5 * noise_variance * (float(alpha @ alpha) - float(np.trace(k_inv)))
    return value, kernel_grad, noise_grad, alpha


def mll_gradient(hyper: Hyperparameters, X, y) -> np.ndarray:
    """Gradient of the marginal likelihood.

    Layout: kernel log-lengthscales, kernel log-amplitudes, log noise
    variance, mean constant (the mean component is in natural space).
    """
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    resid = y - hyper.mean_constant
    _, kernel_grad, noise_grad, alpha = mll_value_and_gradient(
        hyper.kernel, hyper.noise_variance, X, resid
    )
    return np.concatenate([kernel_grad, [noise_grad, float(alpha.sum())]])


def gradient_param_names(hyper: Hyperparameters) -> list[str]:
    return numerics.kernel_param_names(hyper.kernel) + ["log_noise_variance", "mean_constant"]


# --- fitting ------------------------------------------------------------------


def _canonical_kernel(X: np.ndarray, config: FitConfig, y: np.ndarray) -> KernelSpec:
    d = X.shape[1]
    if config.kernel_family is KernelFamily.RBF:
        if config.shared_lengthscale:
            return RbfKernel(np.array([0.5]), 1.0, shared=True)
        return RbfKernel(np.full(d, 0.5), 1.0)
    if d < 2:
        raise ValueError("composite kernel needs at least one x column plus the appended output")
    vhat = max(float(np.var(y)), 1e-8)
    span = float(np.ptp(X[:, -1]))
    link_scale = 0.5 * span if span > 0.0 else 0.5
    return NargpCompositeKernel(
        input_scales=np.full(d - 1, 0.5),
        link_scale=link_scale,
        bias_scales=np.full(d - 1, 0.5),
        link_variance=vhat,
        bias_variance=0.1 * vhat,
    )


def initial_hypers(X, y, config: FitConfig = FitConfig()) -> list[Hyperparameters]:
    """The fit's starting points: one canonical plus seeded log-uniform draws."""
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    v = float(np.var(y))
    vhat = max(v, 1e-12)
    mean0 = float(np.mean(y)) if config.optimize_mean else config.mean_constant
    canonical_kernel = _canonical_kernel(X, config, y)
    canonical = Hyperparameters(
        kernel=canonical_kernel,
        noise_variance=max(0.01 * v, config.noise_floor),
        mean_constant=mean0,
    )
    inits = [canonical]
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed) & 0xFFFFFFFF, 0x1717]))
    base_logs = numerics.kernel_log_params(canonical_kernel)
    n_scales = base_logs.size - (1 if config.kernel_family is KernelFamily.RBF else 2)
    for _ in range(max(config.n_restarts - 1, 0)):
        logs = base_logs.copy()
        if config.kernel_family is KernelFamily.RBF:
            logs[:n_scales] = rng.uniform(math.log(0.02), math.log(2.0), size=n_scales)
            logs[n_scales] = math.log(vhat) + rng.uniform(math.log(0.1), math.log(10.0))
        else:
            logs[:n_scales] += rng.uniform(math.log(0.08), math.log(8.0), size=n_scales)
            logs[n_scales] = math.log(vhat) + rng.uniform(math.log(0.1), math.log(10.0))
            logs[n_scales + 1] = math.log(vhat) + rng.uniform(math.log(0.01), math.log(1.0))
        noise = max(vhat * math.exp(rng.uniform(math.log(1e-5), math.log(0.5))), config.noise_floor)
        mean_i = mean0
        if config.optimize_mean:
            mean_i = float(np.mean(y)) + float(np.std(y)) * float(rng.standard_normal())
        inits.append(
            Hyperparameters(
                kernel=numerics.kernel_from_log_params(canonical_kernel, logs),
                noise_variance=noise,
                mean_constant=mean_i,
            )
        )
    return inits


def parameter_bounds(kernel: KernelSpec, noise_floor: float, optimize_mean: bool) -> list[tuple]:
    """L-BFGS-B box bounds matching the packed log-parameter vector."""
    n_amp = 1 if isinstance(kernel, RbfKernel) else 2
    n_scales = numerics.kernel_log_params(kernel).size - n_amp
    bounds: list[tuple] = [_LENGTHSCALE_LOG_BOUNDS] * n_scales
    bounds += [_AMPLITUDE_LOG_BOUNDS] * n_amp
    bounds.append((math.log(noise_floor), _NOISE_LOG_UPPER))
    if optimize_mean:
        bounds.append((None, None))
    return bounds


def pack_hyper(hyper: Hyperparameters, optimize_mean: bool) -> np.ndarray:
    vec = np.concatenate(
        [numerics.kernel_log_params(hyper.kernel), [math.log(hyper.noise_variance)]]
    )
    if optimize_mean:
        vec = np.concatenate([vec, [hyper.mean_constant]])
    return vec


def unpack_hyper(
    vec: np.ndarray,
    template: KernelSpec,
    optimize_mean: bool,
    fixed_mean: float,
    noise_floor: float = 0.0,
) -> Hyperparameters:
    if optimize_mean:
        kernel_logs, log_noise, mean = vec[:-2], vec[-2], float(vec[-1])
    else:
        kernel_logs, log_noise, mean = vec[:-1], vec[-1], fixed_mean
    # exp(log(floor)) can land one ulp under the floor itself.
    noise = max(float(np.exp(log_noise)), noise_floor)
    return Hyperparameters(
        kernel=numerics.kernel_from_log_params(template, kernel_logs),
        noise_variance=noise,
        mean_constant=mean,
    )


def multi_restart_minimize(fun_and_grad, x0s, bounds, max_iter: int):
    """Run L-BFGS-B from each start, return (best_x, best_fun, n_failed).

    A restart counts as failed when its best objective is non-finite. Ties
    resolve to the earliest restart so results are order-deterministic.
    """
    best_x = None
    best_f = np.inf
    n_failed = 0
    for x0 in x0s:
        result = minimize(
            fun_and_grad,
            x0=np.asarray(x0, dtype=np.float64),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iter, "ftol": 1e-12, "gtol": 1e-7},
        )
        if not np.isfinite(result.fun):
            n_failed += 1
            continue
        if result.fun < best_f:
            best_f = float(result.fun)
            best_x = np.asarray(result.x, dtype=np.float64)
    if best_x is None:
        raise AllRestartsFailedError(len(list(x0s)))
    return best_x, best_f, n_failed


def build_model(X, y, hyper: Hyperparameters) -> GpModel:
    """Assemble the trained posterior state for fixed hyperparameters."""
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] != y.size:
        raise ValueError("X and y row counts differ")
    resid = y - hyper.mean_constant
    factor = numerics.cholesky_factor(_noisy_gram(hyper.kernel, hyper.noise_variance, X))
    alpha = numerics.cho_solve(factor, resid)
    value = _mll_from_factor(factor, resid, alpha)
    check = float(np.max(np.abs(_noisy_gram(hyper.kernel, hyper.noise_variance, X) @ alpha - resid), initial=0.0))
    # Backward error scales with the conditioning; on normalized data this sits
    # far below the 1e-8 reconstruction contract checked in the tests.
    if check > 1e-8 * max(1.0, float(np.max(np.abs(resid), initial=0.0))):
        logger.debug("training residual reconstruction error %g", check)
    X = X.copy()
    y = y.copy()
    X.flags.writeable = False
    y.flags.writeable = False
    return GpModel(hyper=hyper, x_train=X, y_train=y, factor=factor, alpha=alpha, mll_at_fit=value)


def fit(X, y, config: FitConfig = FitConfig()) -> GpModel:
    """Maximize the marginal likelihood and return the trained model.

    Deterministic given ``config.seed``. With a single training row (or a
    ``config.fixed`` hyperparameter set) no optimization runs.
    """
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    n = X.shape[0]
    if n != y.size or n < 1:
        raise ValueError("X and y must have the same nonzero number of rows")
    if config.warn_on_unnormalized and n > 0:
        if float(X.min()) < -0.05 or float(X.max()) > 1.05:
            warnings.warn(
                "training features stray outside [0, 1]; fitting expects pre-normalized inputs",
                UnnormalizedFeaturesWarning,
                stacklevel=2,
            )
    if config.fixed is not None:
        return build_model(X, y, config.fixed)
    inits = initial_hypers(X, y, config)
    if n == 1:
        return build_model(X, y, inits[0])

    template = inits[0].kernel
    fixed_mean = config.mean_constant

    def objective(vec):
        hyper = unpack_hyper(vec, template, config.optimize_mean, fixed_mean, config.noise_floor)
        resid = y - hyper.mean_constant
        try:
            value, kernel_grad, noise_grad, alpha = mll_value_and_gradient(
                hyper.kernel, hyper.noise_variance, X, resid
            )
        except NotPositiveDefiniteError:
            return np.inf, np.zeros_like(vec)
        grad = np.concatenate([kernel_grad, [noise_grad]])
        if config.optimize_mean:
            grad = np.concatenate([grad, [float(alpha.sum())]])
        return -value, -grad

    x0s = [pack_hyper(h, config.optimize_mean) for h in inits]
    bounds = parameter_bounds(template, config.noise_floor, config.optimize_mean)
    best_x, _, n_failed = multi_restart_minimize(objective, x0s, bounds, config.max_iter)
    if n_failed:
        logger.info("%d of %d restarts failed", n_failed, len(x0s))
    hyper = unpack_hyper(best_x, template, config.optimize_mean, fixed_mean, config.noise_floor)
    return build_model(X, y, hyper)


# --- prediction ---------------------------------------------------------------


def predict(model: GpModel, X_star, include_observation_noise: bool = False) -> PredictiveDistribution:
    """Posterior mean and variance at the query rows.

    The variance is that of the latent function; pass
    ``include_observation_noise=True`` to add the fitted noise variance.
    """
    X_star = as_matrix(X_star, "X_star")
    if X_star.shape[1] != model.x_train.shape[1]:
        raise ValueError(
            f"query has {X_star.shape[1]} columns, model was trained on {model.x_train.shape[1]}"
        )
    if X_star.shape[0] == 0:
        return PredictiveDistribution(mean=np.empty(0), variance=np.empty(0))
    ks = numerics.cross_gram(model.hyper.kernel, X_star, model.x_train)
    mean = model.hyper.mean_constant + ks @ model.alpha
    v = numerics.solve_lower(model.factor, ks.T)
    variance = numerics.kernel_diag(model.hyper.kernel, X_star) - np.sum(v * v, axis=0)
    if include_observation_noise:
        variance = variance + model.hyper.noise_variance
    low = float(variance.min())
    if low < -1e-10:
        # Constant message so the default warning filter deduplicates per call
        # site; the magnitude goes to the debug log.
        logger.debug("negative predictive variance %g clamped to zero", low)
        warnings.warn(
            "clamping negative predictive variance to zero",
            ClampedVarianceWarning,
            stacklevel=2,
        )
    variance = np.maximum(variance, 0.0)
    return PredictiveDistribution(mean=mean, variance=variance)


# --- serialization --------------------------------------------------------------

MODEL_FORMAT = "mfgpkit-model"
MODEL_VERSION = 1


def kernel_to_dict(spec: KernelSpec) -> dict:
    if isinstance(spec, RbfKernel):
        return {
            "family": spec.family.value,
            "lengthscales": spec.lengthscales.tolist(),
            "signal_variance": float(spec.signal_variance),
            "shared": bool(spec.shared),
        }
    return {
        "family": spec.family.value,
        "input_scales": spec.input_scales.tolist(),
        "link_scale": float(spec.link_scale),
        "bias_scales": spec.bias_scales.tolist(),
        "link_variance": float(spec.link_variance),
        "bias_variance": float(spec.bias_variance),
    }


def kernel_from_dict(d: dict) -> KernelSpec:
    family = KernelFamily(d["family"])
    if family is KernelFamily.RBF:
        return RbfKernel(
            np.asarray(d["lengthscales"], dtype=np.float64),
            float(d["signal_variance"]),
            shared=bool(d.get("shared", False)),
        )
    return NargpCompositeKernel(
        input_scales=np.asarray(d["input_scales"], dtype=np.float64),
        link_scale=float(d["link_scale"]),
        bias_scales=np.asarray(d["bias_scales"], dtype=np.float64),
        link_variance=float(d["link_variance"]),
        bias_variance=float(d["bias_variance"]),
    )


def hyper_to_dict(hyper: Hyperparameters) -> dict:
    return {
        "kernel": kernel_to_dict(hyper.kernel),
        "noise_variance": float(hyper.noise_variance),
        "mean_constant": float(hyper.mean_constant),
    }


def hyper_from_dict(d: dict) -> Hyperparameters:
    return Hyperparameters(
        kernel=kernel_from_dict(d["kernel"]),
        noise_variance=float(d["noise_variance"]),
        mean_constant=float(d["mean_constant"]),
    )


def model_to_dict(model: GpModel) -> dict:
    return {
        "kind": "gp",
        "hyper": hyper_to_dict(model.hyper),
        "x_train": model.x_train.tolist(),
        "y_train": model.y_train.tolist(),
        "mll_at_fit": float(model.mll_at_fit),
        "jitter": float(model.factor.jitter),
    }


def model_from_dict(d: dict) -> GpModel:
    if d.get("kind") != "gp":
        raise ValueError(f"expected a gp model document, got kind={d.get('kind')!r}")
    return build_model(
        np.asarray(d["x_train"], dtype=np.float64),
        np.asarray(d["y_train"], dtype=np.float64),
        hyper_from_dict(d["hyper"]),
    )

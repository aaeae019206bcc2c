"""Dense kernel evaluation and Cholesky-based linear algebra.

Everything downstream (single- and multi-fidelity models alike) funnels
through the primitives here: squared-exponential kernels with per-dimension
or shared lengthscales, the composite product-plus-bias kernel used by the
nonlinear autoregressive model, and a jitter-escalating Cholesky
factorization. All operations are pure functions on immutable inputs and
use 64-bit floats throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.linalg import cho_solve as _scipy_cho_solve
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefiniteError

logger = logging.getLogger(__name__)

DEFAULT_JITTER_START = 1e-10
DEFAULT_JITTER_CAP = 1e-4


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array (copying only if needed)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


class KernelFamily(Enum):
    RBF = "rbf"
    NARGP_COMPOSITE = "nargp-composite"


def _positive_scalar(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite real, got {value}")
    return value


def _positive_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} must be positive and finite elementwise")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RbfKernel:
    """Squared-exponential kernel s * exp(-sum_d (a_d - b_d)^2 / (2 l_d^2)).

    ``lengthscales`` holds one entry per input dimension (the default), or a
    single entry applied to every dimension when ``shared`` is True.
    """

    lengthscales: np.ndarray
    signal_variance: float = 1.0
    shared: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "lengthscales", _positive_array(self.lengthscales, "lengthscales"))
        object.__setattr__(self, "signal_variance", _positive_scalar(self.signal_variance, "signal_variance"))
        if self.shared and self.lengthscales.size != 1:
            raise ValueError("shared-lengthscale mode takes exactly one lengthscale")

    @property
    def family(self) -> KernelFamily:
        return KernelFamily.RBF

    def input_dim(self) -> int | None:
        # Shared mode accepts any dimensionality.
        return None if self.shared else int(self.lengthscales.size)


@dataclass(frozen=True)
class NargpCompositeKernel:
    """Product-plus-bias kernel over inputs carrying an appended lower-fidelity output.

    For z = (x, f) and z' = (x', f'):

        k(z, z') = kd(x, x') * kf(f, f') + kb(x, x')

    where kd is a unit-amplitude RBF over x, kf an RBF over the appended
    coordinate carrying the product's amplitude, and kb an RBF over x
    modelling the additive bias. Only valid for fidelity levels >= 2.
    """

    input_scales: np.ndarray     # kd lengthscales, one per x dimension
    link_scale: float            # kf lengthscale over the appended coordinate
    bias_scales: np.ndarray      # kb lengthscales, one per x dimension
    link_variance: float = 1.0   # amplitude of the product term
    bias_variance: float = 1.0   # amplitude of the bias term

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_scales", _positive_array(self.input_scales, "input_scales"))
        object.__setattr__(self, "bias_scales", _positive_array(self.bias_scales, "bias_scales"))
        object.__setattr__(self, "link_scale", _positive_scalar(self.link_scale, "link_scale"))
        object.__setattr__(self, "link_variance", _positive_scalar(self.link_variance, "link_variance"))
        object.__setattr__(self, "bias_variance", _positive_scalar(self.bias_variance, "bias_variance"))
        if self.input_scales.size != self.bias_scales.size:
            raise ValueError("input_scales and bias_scales must cover the same x dimensions")

    @property
    def family(self) -> KernelFamily:
        return KernelFamily.NARGP_COMPOSITE

    def input_dim(self) -> int:
        # x dimensions plus the appended lower-fidelity coordinate.
        return int(self.input_scales.size) + 1


KernelSpec = Union[RbfKernel, NargpCompositeKernel]


def prior_variance(spec: KernelSpec) -> float:
    """k(z, z) for any z: the prior (signal) variance of the kernel."""
    if isinstance(spec, RbfKernel):
        return spec.signal_variance
    return spec.link_variance + spec.bias_variance


def _check_dims(spec: KernelSpec, d: int) -> None:
    expected = spec.input_dim()
    if expected is not None and d != expected:
        raise ValueError(f"kernel expects {expected}-dimensional inputs, got {d}")


def _sq_diffs(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    # (d, n, m) per-coordinate squared differences; exactly symmetric when X is Z
    # because (a-b)**2 and (b-a)**2 are the same float.
    return (X.T[:, :, None] - Z.T[:, None, :]) ** 2


def _rbf_exponent(sq: np.ndarray, lengthscales: np.ndarray, shared: bool) -> np.ndarray:
    if shared:
        return sq.sum(axis=0) / (2.0 * lengthscales[0] ** 2)
    return (sq / (2.0 * lengthscales[:, None, None] ** 2)).sum(axis=0)


def cross_gram(spec: KernelSpec, X, Z) -> np.ndarray:
    """Kernel matrix with entries k(x_i, z_j) for rows of X against rows of Z."""
    X = as_matrix(X, "X")
    Z = as_matrix(Z, "Z")
    if X.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]} columns")
    _check_dims(spec, X.shape[1])
    if isinstance(spec, RbfKernel):
        sq = _sq_diffs(X, Z)
        return spec.signal_variance * np.exp(-_rbf_exponent(sq, spec.lengthscales, spec.shared))
    sq_x = _sq_diffs(X[:, :-1], Z[:, :-1])
    sq_f = _sq_diffs(X[:, -1:], Z[:, -1:])
    kd = np.exp(-_rbf_exponent(sq_x, spec.input_scales, False))
    kf = spec.link_variance * np.exp(-sq_f[0] / (2.0 * spec.link_scale**2))
    kb = spec.bias_variance * np.exp(-_rbf_exponent(sq_x, spec.bias_scales, False))
    return kd * kf + kb


def gram_matrix(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric kernel matrix over the rows of X (diagonal = prior variance)."""
    return cross_gram(spec, X, X)


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    X = as_matrix(X, "X")
    _check_dims(spec, X.shape[1])
    return np.full(X.shape[0], prior_variance(spec))


def kernel_eval(spec: KernelSpec, a, b) -> float:
    """Evaluate the kernel on a single pair of points."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.size != b.size:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return float(cross_gram(spec, a.reshape(1, -1), b.reshape(1, -1))[0, 0])


# --- log-parameter packing used by the marginal-likelihood machinery ---------
#
# Canonical order, matching the gradient layout: all lengthscale logs first,
# then all amplitude logs. For the composite kernel the lengthscale group is
# (input_scales..., link_scale, bias_scales...) and the amplitude group is
# (link_variance, bias_variance).


def kernel_log_params(spec: KernelSpec) -> np.ndarray:
    if isinstance(spec, RbfKernel):
        return np.log(np.concatenate([spec.lengthscales, [spec.signal_variance]]))
    return np.log(
        np.concatenate(
            [
                spec.input_scales,
                [spec.link_scale],
                spec.bias_scales,
                [spec.link_variance, spec.bias_variance],
            ]
        )
    )


def kernel_from_log_params(template: KernelSpec, logs: np.ndarray) -> KernelSpec:
    vals = np.exp(np.asarray(logs, dtype=np.float64))
    if isinstance(template, RbfKernel):
        return RbfKernel(vals[:-1], float(vals[-1]), shared=template.shared)
    d = template.input_scales.size
    return NargpCompositeKernel(
        input_scales=vals[:d],
        link_scale=float(vals[d]),
        bias_scales=vals[d + 1 : 2 * d + 1],
        link_variance=float(vals[2 * d + 1]),
        bias_variance=float(vals[2 * d + 2]),
    )


def kernel_param_names(spec: KernelSpec) -> list[str]:
    if isinstance(spec, RbfKernel):
        if spec.shared:
            return ["log_lengthscale", "log_signal_variance"]
        names = [f"log_lengthscale_{i}" for i in range(spec.lengthscales.size)]
        return names + ["log_signal_variance"]
    d = spec.input_scales.size
    return (
        [f"log_input_scale_{i}" for i in range(d)]
        + ["log_link_scale"]
        + [f"log_bias_scale_{i}" for i in range(d)]
        + ["log_link_variance", "log_bias_variance"]
    )


def gram_with_gradients(spec: KernelSpec, X) -> tuple[np.ndarray, list[np.ndarray]]:
    """Gram matrix and its derivatives w.r.t. each log-parameter.

    Derivative order matches :func:`kernel_log_params`.
    """
    X = as_matrix(X, "X")
    _check_dims(spec, X.shape[1])
    if isinstance(spec, RbfKernel):
        sq = _sq_diffs(X, X)
        K = spec.signal_variance * np.exp(-_rbf_exponent(sq, spec.lengthscales, spec.shared))
        grads: list[np.ndarray] = []
        if spec.shared:
            grads.append(K * (sq.sum(axis=0) / spec.lengthscales[0] ** 2))
        else:
            for d in range(spec.lengthscales.size):
                grads.append(K * (sq[d] / spec.lengthscales[d] ** 2))
        grads.append(K.copy())  # d/d log signal_variance
        return K, grads

    sq_x = _sq_diffs(X[:, :-1], X[:, :-1])
    sq_f = _sq_diffs(X[:, -1:], X[:, -1:])[0]
    kd = np.exp(-_rbf_exponent(sq_x, spec.input_scales, False))
    kf = spec.link_variance * np.exp(-sq_f / (2.0 * spec.link_scale**2))
    kb = spec.bias_variance * np.exp(-_rbf_exponent(sq_x, spec.bias_scales, False))
    K = kd * kf + kb
    grads = []
    prod = kd * kf
    for d in range(spec.input_scales.size):
        grads.append(prod * (sq_x[d] / spec.input_scales[d] ** 2))
    grads.append(prod * (sq_f / spec.link_scale**2))
    for d in range(spec.bias_scales.size):
        grads.append(kb * (sq_x[d] / spec.bias_scales[d] ** 2))
    grads.append(prod.copy())  # d/d log link_variance
    grads.append(kb.copy())    # d/d log bias_variance
    return K, grads


# --- Cholesky ----------------------------------------------------------------


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T = A + jitter * I."""

    lower: np.ndarray
    jitter: float = 0.0

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=np.float64)
        if lower.ndim != 2 or lower.shape[0] != lower.shape[1]:
            raise ValueError("factor must be square")
        if np.any(np.triu(lower, k=1) != 0.0):
            raise ValueError("factor must be lower-triangular")
        if np.any(np.diag(lower) <= 0.0) or not np.all(np.isfinite(lower)):
            raise ValueError("factor diagonal must be positive and finite")
        object.__setattr__(self, "lower", lower)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def _jitter_schedule(jitter: float, start: float, cap: float):
    yield jitter
    j = start if jitter <= 0.0 else jitter * 10.0
    while j <= cap * (1.0 + 1e-12):
        yield j
        j *= 10.0


def cholesky_factor(
    A,
    jitter: float = 0.0,
    *,
    jitter_start: float = DEFAULT_JITTER_START,
    jitter_cap: float = DEFAULT_JITTER_CAP,
) -> CholeskyFactor:
    """Factor a symmetric matrix, escalating diagonal jitter x10 on failure.

    Starts from ``jitter`` (0 means try the matrix as-is), falls back to
    ``jitter_start`` and escalates tenfold up to ``jitter_cap``. Raises
    :class:`NotPositiveDefiniteError` if the cap is exceeded.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("A must be square")
    scale = max(float(np.max(np.abs(A))), 1.0)
    if float(np.max(np.abs(A - A.T))) > 1e-8 * scale:
        raise ValueError("A must be symmetric")
    eye = np.eye(n)
    for j in _jitter_schedule(float(jitter), jitter_start, jitter_cap):
        try:
            lower = np.linalg.cholesky(A + j * eye if j > 0.0 else A)
        except np.linalg.LinAlgError:
            continue
        if j > jitter:
            logger.info("cholesky succeeded after escalating jitter to %g", j)
        return CholeskyFactor(lower=lower, jitter=j)
    raise NotPositiveDefiniteError(jitter_cap)


def cho_solve(factor: CholeskyFactor, b) -> np.ndarray:
    """Solve (L L^T) x = b by forward then backward substitution."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.dim:
        raise ValueError(f"dimension mismatch: factor is {factor.dim}, b has {b.shape[0]} rows")
    return _scipy_cho_solve((factor.lower, True), b, check_finite=False)


def solve_lower(factor: CholeskyFactor, B) -> np.ndarray:
    """Solve L v = B (forward substitution only)."""
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != factor.dim:
        raise ValueError(f"dimension mismatch: factor is {factor.dim}, B has {B.shape[0]} rows")
    return solve_triangular(factor.lower, B, lower=True, check_finite=False)


def log_det(factor: CholeskyFactor) -> float:
    """log det(A + jitter I) = 2 * sum(log diag(L))."""
    return float(2.0 * np.sum(np.log(np.diag(factor.lower))))

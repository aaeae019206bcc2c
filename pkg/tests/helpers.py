"""Independent oracles shared by the test modules.

Everything here deliberately avoids the library's computational paths:
kernels are scalar loops, posteriors use dense matrix inversion, rankings
re-evaluate the greedy criterion from scratch. Agreement between these and
the package is the point of the tests.
"""

from __future__ import annotations

import math

import numpy as np


def rbf_scalar(a, b, lengthscales, signal_variance) -> float:
    """Scalar-loop squared-exponential kernel."""
    total = 0.0
    for ai, bi, li in zip(a, b, lengthscales):
        total += (ai - bi) ** 2 / (2.0 * li**2)
    return signal_variance * math.exp(-total)


def composite_scalar(a, b, input_scales, link_scale, bias_scales,
                     link_variance, bias_variance) -> float:
    """Scalar-loop product-plus-bias kernel; the last coordinate is the link input."""
    kd = rbf_scalar(a[:-1], b[:-1], input_scales, 1.0)
    kf = link_variance * math.exp(-((a[-1] - b[-1]) ** 2) / (2.0 * link_scale**2))
    kb = rbf_scalar(a[:-1], b[:-1], bias_scales, bias_variance)
    return kd * kf + kb


def gram_loop(kernel_fn, X, Z=None) -> np.ndarray:
    Z = X if Z is None else Z
    out = np.empty((len(X), len(Z)))
    for i, a in enumerate(X):
        for j, b in enumerate(Z):
            out[i, j] = kernel_fn(a, b)
    return out


def naive_gp(kernel_fn, X, y, X_star, noise_variance, mean_constant=0.0):
    """Posterior mean/variance by dense inversion of the noisy kernel matrix."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X_star = np.asarray(X_star, dtype=np.float64)
    K = gram_loop(kernel_fn, X) + noise_variance * np.eye(len(X))
    K_inv = np.linalg.inv(K)
    ks = gram_loop(kernel_fn, X_star, X)
    resid = y - mean_constant
    mean = mean_constant + ks @ K_inv @ resid
    prior = np.array([kernel_fn(row, row) for row in X_star])
    var = prior - np.einsum("ij,jk,ik->i", ks, K_inv, ks)
    return mean, var


def naive_mll(kernel_fn, X, y, noise_variance, mean_constant=0.0) -> float:
    """Marginal likelihood by dense inversion and slogdet."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    K = gram_loop(kernel_fn, X) + noise_variance * np.eye(n)
    resid = y - mean_constant
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    quad = resid @ np.linalg.inv(K) @ resid
    return -0.5 * (quad + logdet + n * math.log(2.0 * math.pi))


def naive_two_level_linear(level1, level2, X_star):
    """Direct transcription of the recursive two-level linear model.

    ``level1`` is (kernel_fn, X, y, noise); ``level2`` is
    (kernel_fn, X, y, noise, scale, offset). The level-2 residual uses the
    level-1 posterior mean at the level-2 training inputs.
    """
    k1, x1, y1, s1 = level1
    k2, x2, y2, s2, scale, offset = level2
    m1_train, _ = naive_gp(k1, x1, y1, x2, s1)
    m1_star, v1_star = naive_gp(k1, x1, y1, X_star, s1)

    K2 = gram_loop(k2, x2) + s2 * np.eye(len(x2))
    K2_inv = np.linalg.inv(K2)
    ks = gram_loop(k2, X_star, x2)
    resid = y2 - scale * m1_train - offset
    mean = scale * m1_star + offset + ks @ K2_inv @ resid
    prior = np.array([k2(row, row) for row in X_star])
    var = scale**2 * v1_star + prior - np.einsum("ij,jk,ik->i", ks, K2_inv, ks)
    return mean, var


def plugin_mi_dict(a, b) -> float:
    """Hand-expanded plug-in mutual information via dictionary counting."""
    n = len(a)
    joint: dict = {}
    pa: dict = {}
    pb: dict = {}
    for x, y in zip(a, b):
        joint[(x, y)] = joint.get((x, y), 0) + 1
        pa[x] = pa.get(x, 0) + 1
        pb[y] = pb.get(y, 0) + 1
    total = 0.0
    for (x, y), c in joint.items():
        p_xy = c / n
        total += p_xy * math.log(p_xy / ((pa[x] / n) * (pb[y] / n)))
    return total


def entropy_dict(labels) -> float:
    n = len(labels)
    counts: dict = {}
    for v in labels:
        counts[v] = counts.get(v, 0) + 1
    return -sum((c / n) * math.log(c / n) for c in counts.values())


def brute_force_mrmr(columns, target) -> tuple[list[int], list[float]]:
    """Greedy relevance-minus-mean-redundancy, re-evaluated from scratch each step."""
    n = len(columns)
    relevance = [plugin_mi_dict(col, target) for col in columns]
    selected: list[int] = []
    scores: list[float] = []
    while len(selected) < n:
        best_f, best_score = None, None
        for f in range(n):
            if f in selected:
                continue
            if selected:
                red = sum(plugin_mi_dict(columns[f], columns[s]) for s in selected) / len(selected)
            else:
                red = 0.0
            score = relevance[f] - red
            if best_score is None or score > best_score + 1e-12:
                best_f, best_score = f, score
        selected.append(best_f)
        scores.append(best_score)
    return selected, scores


def rmse_two_pass(pred, truth) -> float:
    """Two-pass RMSE oracle: accumulate squared errors, then average and root."""
    errs = [float(p) - float(t) for p, t in zip(pred, truth)]
    total = 0.0
    for e in errs:
        total += e * e
    return math.sqrt(total / len(errs))


def wide_two_level_dataset(seed=0, n_low=24, n_high=16, n_features=20):
    """Small wide fixture: 24 low- and 16 high-fidelity rows over 20 features.

    Inputs of the two levels are disjoint; targets land in [0, 1].
    """
    rng = np.random.default_rng(seed)
    x_low = rng.uniform(0, 1, (n_low, n_features))
    x_high = rng.uniform(0, 1, (n_high, n_features))
    w = rng.normal(0, 1, n_features) / math.sqrt(n_features)

    def response(x, gain):
        raw = np.tanh(x @ w) * gain
        return (raw - raw.min()) / (raw.max() - raw.min() + 1e-12)

    y_low = response(x_low, 1.0)
    y_high = response(x_high, 1.4)
    return x_low, y_low, x_high, y_high

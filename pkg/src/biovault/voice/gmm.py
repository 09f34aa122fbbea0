"""Diagonal-covariance Gaussian mixtures fit by EM, with AIC/BIC order selection.

All likelihood work happens in the log domain through a max-shifted
log-sum-exp, so tiny densities in high dimension cannot underflow. Variances
are floored at 1e-6 after every M-step. A component that loses all its
responsibility mass is re-seeded to a random data point instead of erroring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import DimensionMismatch

VARIANCE_FLOOR = 1e-6
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GmmModel:
    weights: np.ndarray    # (K,) mixing proportions, a simplex
    means: np.ndarray      # (K, d)
    variances: np.ndarray  # (K, d) diagonal covariances

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if self.means.ndim != 2:
            raise DimensionMismatch("means must be (K, d)")
        k, d = self.means.shape
        if self.weights.shape != (k,) or self.variances.shape != (k, d):
            raise DimensionMismatch("weights/variances shapes must match the means")
        if np.any(self.weights < 0) or abs(float(self.weights.sum()) - 1.0) > 1e-6:
            raise ValueError("mixing weights must form a probability simplex")
        if np.any(self.variances < VARIANCE_FLOOR - 1e-12):
            raise ValueError(f"variances must respect the {VARIANCE_FLOOR} floor")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass
class EmFitInfo:
    log_likelihoods: list[float]  # total data log-likelihood at each iterate
    iterations: int
    converged: bool

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihoods[-1]


def logsumexp(values: np.ndarray, axis: int = -1) -> np.ndarray:
    shift = np.max(values, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    with np.errstate(divide="ignore"):  # a slice of only -inf sums to a legal -inf
        out = np.log(np.sum(np.exp(values - shift), axis=axis)) + np.squeeze(shift, axis=axis)
    return out


def _component_log_densities(model: GmmModel, data: np.ndarray) -> np.ndarray:
    """log N(x_i | mu_k, diag sigma_k^2) for every (i, k); shape (n, K)."""
    diff = data[:, None, :] - model.means[None, :, :]          # (n, K, d)
    quad = np.sum(diff * diff / model.variances[None, :, :], axis=2)
    log_norm = np.sum(np.log(model.variances), axis=1) + model.dim * _LOG_2PI
    return -0.5 * (quad + log_norm[None, :])


def _check_data(model: GmmModel, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] != model.dim:
        raise DimensionMismatch(
            f"data must be (n, {model.dim}), got {data.shape}"
        )
    return data


def _log_weights(model: GmmModel) -> np.ndarray:
    with np.errstate(divide="ignore"):  # a zero weight is a legal -inf
        return np.log(model.weights)


def gmm_log_likelihood(model: GmmModel, data: np.ndarray) -> float:
    """Total log-likelihood: sum_i log sum_k pi_k N(x_i | mu_k, sigma_k^2)."""
    data = _check_data(model, data)
    log_joint = _component_log_densities(model, data) + _log_weights(model)[None, :]
    return float(logsumexp(log_joint, axis=1).sum())


def responsibilities(model: GmmModel, data: np.ndarray) -> np.ndarray:
    """Posterior component memberships (n, K); every row sums to 1."""
    data = _check_data(model, data)
    log_joint = _component_log_densities(model, data) + _log_weights(model)[None, :]
    log_norm = logsumexp(log_joint, axis=1)
    return np.exp(log_joint - log_norm[:, None])


def _init_model(data: np.ndarray, k: int, rng: np.random.Generator) -> GmmModel:
    """Farthest-point seeding over a seeded shuffle; shared variance start."""
    n = data.shape[0]
    order = rng.permutation(n)
    centers = [data[order[0]]]
    dists = np.sum((data - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        idx = int(np.argmax(dists))
        centers.append(data[idx])
        dists = np.minimum(dists, np.sum((data - centers[-1]) ** 2, axis=1))
    variance = np.maximum(data.var(axis=0), VARIANCE_FLOOR)
    return GmmModel(
        weights=np.full(k, 1.0 / k),
        means=np.stack(centers),
        variances=np.tile(variance, (k, 1)),
    )


def em_iterate(
    data: np.ndarray,
    k: int,
    init_seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> Iterator[tuple[GmmModel, float]]:
    """Yield (model, log-likelihood) per EM iterate, starting with the initial
    model. The likelihood reported with each model is evaluated at that model,
    so the yielded sequence is the monotone EM trajectory."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    n, d = data.shape
    if k < 1:
        raise ValueError("need at least one component")
    if n < k:
        raise ValueError(f"need at least {k} points to fit {k} components")
    rng = np.random.default_rng(init_seed)
    model = _init_model(data, k, rng)
    previous = -np.inf
    for _ in range(max_iters):
        log_joint = _component_log_densities(model, data) + _log_weights(model)[None, :]
        log_norm = logsumexp(log_joint, axis=1)
        current = float(log_norm.sum())
        yield model, current
        if current - previous < tol:
            return
        previous = current
        resp = np.exp(log_joint - log_norm[:, None])   # (n, K)
        mass = resp.sum(axis=0)                         # (K,)
        weights = mass / n
        means = np.empty_like(model.means)
        variances = np.empty_like(model.variances)
        global_var = np.maximum(data.var(axis=0), VARIANCE_FLOOR)
        for j in range(k):
            if mass[j] < 1e-10:
                # Re-seed a starved component on a random data point.
                means[j] = data[rng.integers(n)]
                variances[j] = global_var
                weights[j] = 1.0 / n
                continue
            means[j] = resp[:, j] @ data / mass[j]
            centered = data - means[j]
            variances[j] = np.maximum(
                resp[:, j] @ (centered * centered) / mass[j], VARIANCE_FLOOR
            )
        weights = weights / weights.sum()
        model = GmmModel(weights=weights, means=means, variances=variances)
    # max_iters exhausted: report the final iterate's likelihood too.
    final = gmm_log_likelihood(model, data)
    yield model, final


def em_fit_detailed(
    data: np.ndarray,
    k: int,
    init_seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> tuple[GmmModel, EmFitInfo]:
    trajectory = list(em_iterate(data, k, init_seed, max_iters, tol))
    models, lls = zip(*trajectory)
    improved = len(lls) < 2 or lls[-1] - lls[-2] >= tol
    info = EmFitInfo(
        log_likelihoods=list(lls),
        iterations=len(lls) - 1,
        converged=not improved,
    )
    return models[-1], info


def em_fit(
    data: np.ndarray,
    k: int,
    init_seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> GmmModel:
    model, _ = em_fit_detailed(data, k, init_seed, max_iters, tol)
    return model


def parameter_count(k: int, d: int) -> int:
    """Free parameters of a K-component diagonal GMM in d dimensions:
    (K - 1) mixing weights + K d means + K d variances."""
    return (k - 1) + 2 * k * d


def aic(log_likelihood: float, k: int, d: int) -> float:
    return 2.0 * parameter_count(k, d) - 2.0 * log_likelihood


def bic(log_likelihood: float, k: int, d: int, n: int) -> float:
    return parameter_count(k, d) * float(np.log(n)) - 2.0 * log_likelihood


def select_k(
    data: np.ndarray,
    k_candidates: list[int],
    criterion: str = "bic",
    init_seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> tuple[int, GmmModel]:
    """Fit every candidate order with the same seed policy and keep the
    criterion minimizer (ties break toward the smaller K)."""
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")
    if not k_candidates:
        raise ValueError("k_candidates must be non-empty")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    n, d = data.shape
    best: tuple[float, int, GmmModel] | None = None
    for k in sorted(k_candidates):
        model, info = em_fit_detailed(data, k, init_seed, max_iters, tol)
        ll = info.final_log_likelihood
        value = aic(ll, k, d) if criterion == "aic" else bic(ll, k, d, n)
        if best is None or value < best[0]:
            best = (value, k, model)
    return best[1], best[2]

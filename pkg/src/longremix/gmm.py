"""Per-sample losses and the two-component 1-D Gaussian mixture over them.

The posterior responsibility of the smaller-mean component is the
probability that a training sample is clean. EM is initialized from the
10th/90th loss percentiles so the component identities stay stable from
epoch to epoch (no label switching), which makes the fit deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Network, forward

VAR_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-8


@dataclass(frozen=True)
class LossVector:
    values: np.ndarray
    epoch: int = 0

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray    # (2,), sum 1
    means: np.ndarray      # (2,)
    variances: np.ndarray  # (2,), floored
    clean_component: int   # index of the smaller mean
    collapsed: bool = False
    log_likelihoods: tuple = ()  # mean log-likelihood after each accepted step
    n_iter: int = 0

    def __post_init__(self):
        if self.collapsed:
            return
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if not ((self.weights > 0) & (self.weights < 1)).all():
            raise ValueError("mixture weights must lie in (0, 1)")
        if (self.variances < VAR_FLOOR * (1 - 1e-12)).any():
            raise ValueError("variance below floor")
        if self.clean_component != int(np.argmin(self.means)):
            raise ValueError("clean component must be the smaller-mean component")


def per_sample_losses(net: Network, ds, epoch=0) -> LossVector:
    """Unreduced cross-entropy of the observed label under ``net``."""
    probs = forward(net, ds.features)
    picked = probs[np.arange(ds.n), ds.labels]
    return LossVector(values=-np.log(np.maximum(picked, 1e-12)), epoch=epoch)


def normalize_losses(lv: LossVector) -> LossVector:
    """Min-max rescale to [0, 1]; a constant vector maps to all 0.5."""
    if len(lv) == 0:
        raise ValueError("empty loss vector")
    lo, hi = float(lv.values.min()), float(lv.values.max())
    if hi - lo <= 1e-12:
        return LossVector(np.full_like(lv.values, 0.5), lv.epoch)
    return LossVector((lv.values - lo) / (hi - lo), lv.epoch)


def _log_normal(x, mean, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def _mean_ll(x, weights, means, variances):
    comp = np.log(weights)[None, :] + _log_normal(x[:, None], means[None, :], variances[None, :])
    hi = comp.max(axis=1, keepdims=True)
    return float(np.mean(hi[:, 0] + np.log(np.exp(comp - hi).sum(axis=1))))


def _collapsed(values) -> GmmParams:
    center = float(np.mean(values)) if len(values) else 0.5
    return GmmParams(weights=np.array([0.5, 0.5]),
                     means=np.array([center, center]),
                     variances=np.array([VAR_FLOOR, VAR_FLOOR]),
                     clean_component=0, collapsed=True)


def fit_gmm_em(lv: LossVector, tol=1e-6, max_iter=100, seed=0) -> GmmParams:
    """EM fit of a 2-component 1-D mixture to the loss values.

    ``seed`` is accepted for interface uniformity; the percentile-anchored
    initialization makes the fit deterministic without it. Steps that would
    lower the mean log-likelihood (possible only via the variance floor)
    are rejected, so the recorded likelihood path is non-decreasing.
    """
    x = np.asarray(lv.values, dtype=float)
    if len(x) < 4:
        raise ValueError("need at least 4 samples to fit the mixture")
    if float(x.max() - x.min()) <= 1e-12:
        return _collapsed(x)

    means = np.percentile(x, [10.0, 90.0]).astype(float)
    if means[1] - means[0] <= 1e-12:
        means = np.array([float(x.min()), float(x.max())])
    weights = np.array([0.5, 0.5])
    variances = np.full(2, max(float(np.var(x)), VAR_FLOOR))

    ll = _mean_ll(x, weights, means, variances)
    path = [ll]
    n_iter = 0
    for _ in range(max_iter):
        # E-step in log space
        comp = np.log(weights)[None, :] + _log_normal(x[:, None], means[None, :], variances[None, :])
        comp -= comp.max(axis=1, keepdims=True)
        resp = np.exp(comp)
        resp /= resp.sum(axis=1, keepdims=True)
        # M-step with variance floor
        mass = resp.sum(axis=0)
        if (mass / len(x) < WEIGHT_FLOOR).any():
            return _collapsed(x)
        new_means = (resp * x[:, None]).sum(axis=0) / mass
        new_vars = np.maximum((resp * (x[:, None] - new_means[None, :]) ** 2).sum(axis=0) / mass,
                              VAR_FLOOR)
        new_weights = mass / len(x)
        new_ll = _mean_ll(x, new_weights, new_means, new_vars)
        if new_ll < ll:
            break  # floored step would regress; keep previous parameters
        weights, means, variances = new_weights, new_means, new_vars
        improved = new_ll - ll
        ll = new_ll
        path.append(ll)
        n_iter += 1
        if improved < tol:
            break

    order = np.argsort(means)  # smaller mean first, so clean_component == 0
    return GmmParams(weights=weights[order], means=means[order],
                     variances=variances[order], clean_component=0,
                     collapsed=False, log_likelihoods=tuple(path), n_iter=n_iter)


def clean_posterior(params: GmmParams, losses):
    """Posterior responsibility of the clean (smaller-mean) component.

    Accepts a scalar or an array; a collapsed fit yields 0.5 everywhere.
    """
    arr = np.asarray(losses, dtype=float)
    scalar = arr.ndim == 0
    x = np.atleast_1d(arr)
    if params.collapsed:
        out = np.full(x.shape, 0.5)
    else:
        k = params.clean_component
        j = 1 - k
        log_clean = np.log(params.weights[k]) + _log_normal(x, params.means[k], params.variances[k])
        log_noisy = np.log(params.weights[j]) + _log_normal(x, params.means[j], params.variances[j])
        out = 1.0 / (1.0 + np.exp(np.clip(log_noisy - log_clean, -700.0, 700.0)))
    return float(out[0]) if scalar else out


def gmm_record(params: GmmParams, epoch, model_tag) -> dict:
    """One JSON-lines diagnostics row."""
    return {
        "epoch": int(epoch),
        "model": model_tag,
        "weights": [float(v) for v in params.weights],
        "means": [float(v) for v in params.means],
        "variances": [float(v) for v in params.variances],
        "collapsed": bool(params.collapsed),
    }

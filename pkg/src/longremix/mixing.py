"""MixUp sampling over the clean/noisy split and the vicinal training loss.

An epoch plan lists which anchor/partner pairs get mixed. In longmix mode
both the labelled and the unlabelled plans hold one instruction per
training sample (anchors resampled with replacement), decoupling the
number of mix operations from the size of the predicted-clean set; the
baseline-compat mode sizes both plans to the clean set instead.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, StateError
from .selector import SplitSets


@dataclass(frozen=True)
class LossWeights:
    lambda_u: float    # weight of the unlabelled squared-error term
    lambda_reg: float  # weight of the uniform-prior KL penalty

    def __post_init__(self):
        if self.lambda_u < 0 or self.lambda_reg < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass(frozen=True)
class EpochPlan:
    x_anchor: np.ndarray   # labelled-anchor sample indices, with replacement
    x_partner: np.ndarray  # partner indices, uniform over X and U
    u_anchor: np.ndarray   # unlabelled-anchor sample indices
    u_partner: np.ndarray
    seed: tuple
    fully_supervised: bool = False  # set when U was empty

    @property
    def x_ops(self) -> int:
        return len(self.x_anchor)

    @property
    def u_ops(self) -> int:
        return len(self.u_anchor)


@dataclass
class MixBatch:
    features: np.ndarray
    targets: np.ndarray
    origin: str            # "labeled" | "unlabeled"
    lam: np.ndarray        # per-pair mixing coefficients

    def __len__(self):
        return len(self.features)


def sample_beta(alpha, rng) -> float:
    """One draw from the symmetric Beta(alpha, alpha)."""
    if alpha <= 0:
        raise ConfigError(f"beta concentration must be positive, got {alpha}")
    return float(rng.beta(alpha, alpha))


def mixup_pair(a, b, lam):
    """Convex combination of two (features, soft label) pairs."""
    xa, ya = a
    xb, yb = b
    xa, ya, xb, yb = (np.asarray(v, dtype=float) for v in (xa, ya, xb, yb))
    if xa.shape != xb.shape or ya.shape != yb.shape:
        raise ValueError("mixup operands must share shapes")
    return lam * xa + (1.0 - lam) * xb, lam * ya + (1.0 - lam) * yb


def build_epoch_plan(labeled_idx, unlabeled_idx, dataset_size, seed,
                     longmix=True) -> EpochPlan:
    """Draw the epoch's mix instructions.

    Longmix mode draws ``dataset_size`` anchors from each of X and U;
    baseline-compat mode draws ``len(labeled_idx)`` from each. Partners are
    uniform with replacement over X plus U either way. With an empty U the
    plan carries labelled instructions only and is flagged fully supervised.
    """
    labeled_idx = np.asarray(labeled_idx, dtype=int)
    unlabeled_idx = np.asarray(unlabeled_idx, dtype=int)
    if len(labeled_idx) == 0:
        raise StateError("cannot build an epoch plan without labelled anchors")
    seed_keys = seed if isinstance(seed, tuple) else (int(seed),)
    rng = np.random.default_rng(list(seed_keys))
    target = int(dataset_size) if longmix else len(labeled_idx)
    pool = np.concatenate([labeled_idx, unlabeled_idx])

    x_anchor = labeled_idx[rng.integers(0, len(labeled_idx), size=target)]
    x_partner = pool[rng.integers(0, len(pool), size=target)]
    if len(unlabeled_idx) == 0:
        return EpochPlan(x_anchor=x_anchor, x_partner=x_partner,
                         u_anchor=np.empty(0, dtype=int), u_partner=np.empty(0, dtype=int),
                         seed=seed_keys, fully_supervised=True)
    u_anchor = unlabeled_idx[rng.integers(0, len(unlabeled_idx), size=target)]
    u_partner = pool[rng.integers(0, len(pool), size=target)]
    return EpochPlan(x_anchor=x_anchor, x_partner=x_partner,
                     u_anchor=u_anchor, u_partner=u_partner, seed=seed_keys)


def target_table(split: SplitSets, num_classes) -> np.ndarray:
    """Per-sample training targets: one-hot labels for X members (core-set
    overrides included), guessed soft labels for U members."""
    n = split.x_size + split.u_size
    table = np.zeros((n, num_classes))
    table[split.labeled_idx, split.labeled_labels] = 1.0
    if split.u_size:
        table[split.unlabeled_idx] = split.guessed
    return table


def mix_plan(plan: EpochPlan, features, targets, alpha, rng):
    """Realize a plan into mixed batches (one labelled, one unlabelled)."""
    if alpha <= 0:
        raise ConfigError(f"beta concentration must be positive, got {alpha}")

    def _mix(anchor, partner, origin):
        lam = rng.beta(alpha, alpha, size=len(anchor))
        col = lam[:, None]
        return MixBatch(
            features=col * features[anchor] + (1.0 - col) * features[partner],
            targets=col * targets[anchor] + (1.0 - col) * targets[partner],
            origin=origin, lam=lam)

    xbatch = _mix(plan.x_anchor, plan.x_partner, "labeled")
    ubatch = _mix(plan.u_anchor, plan.u_partner, "unlabeled")
    return xbatch, ubatch


def evr_loss(xbatch: MixBatch, ubatch: MixBatch, net, weights: LossWeights) -> float:
    """Mean cross-entropy over the labelled mixes plus the weighted mean
    squared error over the unlabelled mixes."""
    if len(xbatch) == 0:
        raise ValueError("labelled mix batch is empty")
    px = nn.forward(net, xbatch.features)
    value = float(np.mean(nn.cross_entropy(px, xbatch.targets)))
    if len(ubatch):
        pu = nn.forward(net, ubatch.features)
        value += weights.lambda_u * float(np.mean(nn.squared_error(pu, ubatch.targets)))
    return value


def kl_regularizer(predictions) -> float:
    """KL(uniform || mean prediction); keeps the ensemble from collapsing
    onto a few classes."""
    predictions = np.atleast_2d(np.asarray(predictions, dtype=float))
    if predictions.size == 0:
        raise ValueError("need at least one prediction")
    mean = predictions.mean(axis=0)
    c = len(mean)
    pi = 1.0 / c
    return float((pi * (np.log(pi) - np.log(np.maximum(mean, nn.LOG_EPS)))).sum())


def total_loss(evr, reg, lambda_reg) -> float:
    return float(evr + lambda_reg * reg)


def plan_digest(plan: EpochPlan) -> str:
    """Stable digest of a plan for reproducibility audits."""
    h = hashlib.sha256()
    h.update(repr(plan.seed).encode())
    for arr in (plan.x_anchor, plan.x_partner, plan.u_anchor, plan.u_partner):
        h.update(np.ascontiguousarray(arr, dtype=np.int64).tobytes())
    return h.hexdigest()

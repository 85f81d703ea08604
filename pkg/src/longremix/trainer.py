"""Training orchestration: warmup, co-trained selection epochs, and the
two-stage schedule (confidence-window selection, then guided retraining
from scratch with the captured core set pinned into the labelled set).

Modes:

* ``ce``             - plain cross-entropy on the observed labels.
* ``baseline``       - single stage, single-epoch splits, clean-set-sized plans.
* ``longmix``        - single stage, single-epoch splits, dataset-sized plans.
* ``retrain-only``   - both stages, clean-set-sized plans.
* ``full-longremix`` - both stages, dataset-sized plans.

Each epoch, model 1's losses produce the split that trains model 2 and
vice versa; evaluation averages the two softmax outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import NoisyDataset
from .errors import ConfigError
from .gmm import clean_posterior, fit_gmm_em, gmm_record, normalize_losses, per_sample_losses
from .mixing import build_epoch_plan, mix_plan, plan_digest, target_table
from .seeding import MIX_LAMBDA, PLAN_DRAW, WARMUP_SHUFFLE, derive_rng
from .selector import (CoreSet, LossHistory, baseline_split, clean_set_metrics,
                       guided_split, hct_split, select_core_set)

MODES = ("ce", "baseline", "longmix", "retrain-only", "full-longremix")
TWO_STAGE_MODES = ("retrain-only", "full-longremix")


@dataclass
class TrainConfig:
    mode: str = "full-longremix"
    tau: float = 0.5
    zeta: int = 5
    # alpha and lambda_u are desk-scale values; strong mixing (alpha ~ 4)
    # collapses 2-D class structure because blob midpoints collide
    alpha: float = 0.2
    lambda_u: float = 10.0
    lambda_reg: float = 1.0
    epochs: int = 60          # selection epochs per stage
    warmup_epochs: int = 10
    batch_size: int = 64
    lr: float = 0.05
    lr_drop: float = 0.1      # factor applied at the stage midpoint
    momentum: float = 0.8
    weight_decay: float = 5e-4
    hidden: tuple = (64, 64)
    normalize_losses: bool = True
    data_seed: int = 1
    model1_seed: int = 11
    model2_seed: int = 22
    plan_seed: int = 33

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        if self.zeta < 1:
            raise ConfigError(f"zeta must be >= 1, got {self.zeta}")
        if self.epochs < self.zeta:
            raise ConfigError(f"epochs ({self.epochs}) must be >= zeta ({self.zeta})")
        if self.warmup_epochs < 1:
            raise ConfigError(f"warmup must be >= 1, got {self.warmup_epochs}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.lambda_u < 0 or self.lambda_reg < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")


@dataclass(frozen=True)
class ModelEpochStats:
    split_kind: str
    x_size: int
    u_size: int
    precision: float
    recall: float
    x_ops: int          # mix operations this model trained on (labelled)
    u_ops: int
    fallback: bool = False  # supervised fallback because the other split was empty


@dataclass(frozen=True)
class EpochMetrics:
    stage: str
    epoch: int
    phase: str          # "warmup" | "train"
    lr: float
    test_acc: float
    model1: ModelEpochStats | None = None
    model2: ModelEpochStats | None = None


@dataclass
class RunRecord:
    stage: str
    epochs: list
    best_acc: float
    best_epoch: int
    last10_acc: float | None
    core_set_size: int | None = None
    core_set_epoch: int | None = None


@dataclass
class StageOutcome:
    record: RunRecord
    nets: tuple
    histories: tuple | None = None   # per-model LossHistory (windowed stages)
    guessed: np.ndarray | None = None  # final-epoch guessed-label table
    core_set: CoreSet | None = None
    gmm_rows: list = field(default_factory=list)
    plan_rows: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: TrainConfig
    stages: list              # StageOutcome per stage, in run order
    core_set: CoreSet | None

    @property
    def records(self):
        return [s.record for s in self.stages]

    @property
    def final(self) -> StageOutcome:
        return self.stages[-1]

    @property
    def best_acc(self) -> float:
        return self.final.record.best_acc


def one_hot(labels, num_classes) -> np.ndarray:
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def evaluate(net1: nn.Network, net2: nn.Network, test: NoisyDataset) -> float:
    """Ensemble accuracy: argmax of the mean softmax (argmax takes the lowest
    class index on ties)."""
    probs = (nn.forward(net1, test.features) + nn.forward(net2, test.features)) / 2.0
    return float((probs.argmax(axis=1) == test.true_labels).mean())


def _epoch_lr(cfg: TrainConfig, epoch: int) -> float:
    return cfg.lr if epoch <= cfg.epochs // 2 else cfg.lr * cfg.lr_drop


def _supervised_pass(net, opt, ds: NoisyDataset, rng, batch_size):
    targets = one_hot(ds.labels, ds.num_classes)
    order = rng.permutation(ds.n)
    for start in range(0, ds.n, batch_size):
        sel = order[start:start + batch_size]
        grads = nn.backward(net, (ds.features[sel], targets[sel]), "cross_entropy")
        nn.sgd_step(net, grads, opt)


def warmup(net1, net2, ds: NoisyDataset, epochs, cfg: TrainConfig, stage_no,
           test=None, stage_tag="warmup", rows=None):
    """Independent cross-entropy training of both nets on all observed labels."""
    if epochs < 1:
        raise ConfigError("warmup needs at least one epoch")
    opts = [nn.init_optimizer(n, cfg.lr, cfg.momentum, cfg.weight_decay) for n in (net1, net2)]
    seeds = (cfg.model1_seed, cfg.model2_seed)
    for e in range(1, epochs + 1):
        for net, opt, seed in zip((net1, net2), opts, seeds):
            rng = derive_rng(seed, WARMUP_SHUFFLE, stage_no, e)
            _supervised_pass(net, opt, ds, rng, cfg.batch_size)
        if rows is not None and test is not None:
            rows.append(EpochMetrics(stage=stage_tag, epoch=e, phase="warmup",
                                     lr=cfg.lr, test_acc=evaluate(net1, net2, test)))
    return net1, net2


def train_accuracy(net1, net2, ds: NoisyDataset) -> float:
    probs = (nn.forward(net1, ds.features) + nn.forward(net2, ds.features)) / 2.0
    return float((probs.argmax(axis=1) == ds.labels).mean())


def _epoch_posteriors(net, ds, cfg, epoch):
    lv = per_sample_losses(net, ds, epoch=epoch)
    if cfg.normalize_losses:
        lv = normalize_losses(lv)
    params = fit_gmm_em(lv)
    return clean_posterior(params, lv.values), params


def _train_on_split(net, opt, split, ds, cfg, stage_no, epoch, model_no,
                    longmix_plans, collect_plans):
    """One full pass over the epoch plan built from ``split``."""
    plan = build_epoch_plan(split.labeled_idx, split.unlabeled_idx, ds.n,
                            seed=(cfg.plan_seed, PLAN_DRAW, stage_no, epoch, model_no),
                            longmix=longmix_plans)
    targets = target_table(split, ds.num_classes)
    lam_rng = derive_rng(cfg.plan_seed, MIX_LAMBDA, stage_no, epoch, model_no)
    xb, ub = mix_plan(plan, ds.features, targets, cfg.alpha, lam_rng)
    spec = nn.TotalLoss(lambda_u=cfg.lambda_u, lambda_reg=cfg.lambda_reg)
    for start in range(0, len(xb), cfg.batch_size):
        stop = start + cfg.batch_size
        batch = ((xb.features[start:stop], xb.targets[start:stop]),
                 (ub.features[start:stop], ub.targets[start:stop]))
        grads = nn.backward(net, batch, spec)
        nn.sgd_step(net, grads, opt)
    digest = plan_digest(plan) if collect_plans else None
    return plan.x_ops, plan.u_ops, digest


def cotrain_epoch(net1, net2, opts, ds: NoisyDataset, test: NoisyDataset,
                  cfg: TrainConfig, stage_no, stage_tag, epoch, split_mode,
                  histories=None, core=None, longmix_plans=True,
                  gmm_rows=None, plan_rows=None, snapshots=None):
    """One co-training epoch; model m's losses produce the split that trains
    the other model. Returns the epoch metrics row."""
    nets = (net1, net2)
    lr = _epoch_lr(cfg, epoch)
    for opt in opts:
        opt.lr = lr

    guessed = (nn.forward(net1, ds.features) + nn.forward(net2, ds.features)) / 2.0
    splits, stats = [], []
    for m, net in enumerate(nets):
        posteriors, params = _epoch_posteriors(net, ds, cfg, epoch)
        if gmm_rows is not None:
            gmm_rows.append(gmm_record(params, epoch, net.tag))
        if split_mode == "hct":
            histories[m].push(posteriors)
            if histories[m].full:
                split = hct_split(histories[m], cfg.tau, guessed, ds.labels)
            else:
                split = baseline_split(posteriors, cfg.tau, guessed, ds.labels)
        elif split_mode == "guided":
            split = guided_split(posteriors, cfg.tau, guessed, core, ds.labels)
        else:
            split = baseline_split(posteriors, cfg.tau, guessed, ds.labels)
        splits.append(split)
        if snapshots is not None and split.kind == "hct":
            snapshots.append((epoch, split))

    for m, (net, opt) in enumerate(zip(nets, opts)):
        split = splits[1 - m]  # cross-model exchange
        metrics = clean_set_metrics(splits[m], ds.mask)
        if split.x_size == 0:
            # cannot mix without labelled anchors: supervised pass on all data
            rng = derive_rng((cfg.model1_seed, cfg.model2_seed)[m], WARMUP_SHUFFLE,
                             stage_no, cfg.warmup_epochs + epoch)
            _supervised_pass(net, opt, ds, rng, cfg.batch_size)
            x_ops, u_ops, fallback = ds.n, 0, True
        else:
            x_ops, u_ops, digest = _train_on_split(
                net, opt, split, ds, cfg, stage_no, epoch, m,
                longmix_plans, plan_rows is not None)
            fallback = False
            if plan_rows is not None:
                plan_rows.append({"stage": stage_tag, "epoch": epoch,
                                  "model": net.tag, "digest": digest})
        stats.append(ModelEpochStats(
            split_kind=splits[m].kind, x_size=splits[m].x_size, u_size=splits[m].u_size,
            precision=metrics.precision, recall=metrics.recall,
            x_ops=x_ops, u_ops=u_ops, fallback=fallback))

    return EpochMetrics(stage=stage_tag, epoch=epoch, phase="train", lr=lr,
                        test_acc=evaluate(net1, net2, test),
                        model1=stats[0], model2=stats[1]), guessed


def _finalize_record(stage_tag, rows, core=None) -> RunRecord:
    accs = [r.test_acc for r in rows]
    best_pos = int(np.argmax(accs))
    return RunRecord(
        stage=stage_tag, epochs=rows,
        best_acc=accs[best_pos],
        best_epoch=rows[best_pos].epoch,
        last10_acc=float(np.mean(accs[-10:])) if len(accs) >= 10 else None,
        core_set_size=None if core is None else core.size,
        core_set_epoch=None if core is None else core.epoch)


def _init_pair(cfg: TrainConfig, ds: NoisyDataset, stage_no):
    sizes = (ds.dim, *cfg.hidden, ds.num_classes)
    net1 = nn.init_network(sizes, seed=(cfg.model1_seed, stage_no), tag="model1")
    net2 = nn.init_network(sizes, seed=(cfg.model2_seed, stage_no), tag="model2")
    return net1, net2


def _run_selection_stage(cfg, ds, test, stage_no, stage_tag, split_mode,
                         longmix_plans, core=None, capture_core=False,
                         collect_gmm=False, collect_plans=False) -> StageOutcome:
    net1, net2 = _init_pair(cfg, ds, stage_no)
    rows: list = []
    warmup(net1, net2, ds, cfg.warmup_epochs, cfg, stage_no, test, stage_tag, rows)
    opts = [nn.init_optimizer(n, cfg.lr, cfg.momentum, cfg.weight_decay) for n in (net1, net2)]
    histories = (LossHistory(ds.n, cfg.zeta), LossHistory(ds.n, cfg.zeta)) \
        if split_mode == "hct" else None
    snapshots: list = [] if capture_core else None
    gmm_rows: list = [] if collect_gmm else None
    plan_rows: list = [] if collect_plans else None
    guessed = None
    for epoch in range(1, cfg.epochs + 1):
        row, guessed = cotrain_epoch(
            net1, net2, opts, ds, test, cfg, stage_no, stage_tag, epoch, split_mode,
            histories=histories, core=core, longmix_plans=longmix_plans,
            gmm_rows=gmm_rows, plan_rows=plan_rows, snapshots=snapshots)
        rows.append(row)
    captured = None
    if capture_core:
        eligible = [(e, s) for e, s in snapshots if e >= (cfg.epochs + 1) // 2]
        if eligible:
            captured = select_core_set(eligible, cfg.epochs)
        else:
            captured = CoreSet.empty()
    return StageOutcome(record=_finalize_record(stage_tag, rows, captured),
                        nets=(net1, net2), histories=histories, guessed=guessed,
                        core_set=captured,
                        gmm_rows=gmm_rows or [], plan_rows=plan_rows or [])


def run_stage1_hct(cfg: TrainConfig, ds: NoisyDataset, test: NoisyDataset,
                   collect_gmm=False, collect_plans=False) -> StageOutcome:
    """Warmup plus confidence-window selection epochs; captures the core set
    from the second half of the stage. Falls back to single-epoch splits
    until the window fills.

    Plans stay clean-set-sized here: the oversampled plans belong to the
    guided stage, and dataset-sized plans during selection were observed to
    collapse the loss bimodality the window depends on."""
    return _run_selection_stage(cfg, ds, test, stage_no=1, stage_tag="stage1-hct",
                                split_mode="hct", longmix_plans=False,
                                capture_core=True, collect_gmm=collect_gmm,
                                collect_plans=collect_plans)


def run_stage2_guided(cfg: TrainConfig, ds: NoisyDataset, core: CoreSet,
                      test: NoisyDataset, collect_gmm=False,
                      collect_plans=False) -> StageOutcome:
    """Retrains from scratch (fresh seeds, repeated warmup) with the core set
    pinned into the labelled set every epoch."""
    longmix_plans = cfg.mode in ("longmix", "full-longremix")
    return _run_selection_stage(cfg, ds, test, stage_no=2, stage_tag="stage2-guided",
                                split_mode="guided", longmix_plans=longmix_plans,
                                core=core, collect_gmm=collect_gmm,
                                collect_plans=collect_plans)


def _run_ce(cfg: TrainConfig, ds, test) -> StageOutcome:
    net1, net2 = _init_pair(cfg, ds, stage_no=1)
    rows: list = []
    warmup(net1, net2, ds, cfg.warmup_epochs, cfg, 1, test, "ce", rows)
    opts = [nn.init_optimizer(n, cfg.lr, cfg.momentum, cfg.weight_decay) for n in (net1, net2)]
    for epoch in range(1, cfg.epochs + 1):
        lr = _epoch_lr(cfg, epoch)
        for opt in opts:
            opt.lr = lr
        for net, opt, seed in zip((net1, net2), opts, (cfg.model1_seed, cfg.model2_seed)):
            rng = derive_rng(seed, WARMUP_SHUFFLE, 1, cfg.warmup_epochs + epoch)
            _supervised_pass(net, opt, ds, rng, cfg.batch_size)
        rows.append(EpochMetrics(stage="ce", epoch=epoch, phase="train", lr=lr,
                                 test_acc=evaluate(net1, net2, test)))
    return StageOutcome(record=_finalize_record("ce", rows), nets=(net1, net2))


def run_training(cfg: TrainConfig, ds: NoisyDataset, test: NoisyDataset,
                 collect_gmm=False, collect_plans=False) -> ExperimentResult:
    """Execute the configured mode end to end."""
    if cfg.mode == "ce":
        return ExperimentResult(cfg, [_run_ce(cfg, ds, test)], core_set=None)
    if cfg.mode in ("baseline", "longmix"):
        out = _run_selection_stage(
            cfg, ds, test, stage_no=1, stage_tag=cfg.mode, split_mode="baseline",
            longmix_plans=cfg.mode == "longmix",
            collect_gmm=collect_gmm, collect_plans=collect_plans)
        return ExperimentResult(cfg, [out], core_set=None)
    stage1 = run_stage1_hct(cfg, ds, test, collect_gmm, collect_plans)
    stage2 = run_stage2_guided(cfg, ds, stage1.core_set, test, collect_gmm, collect_plans)
    return ExperimentResult(cfg, [stage1, stage2], core_set=stage1.core_set)

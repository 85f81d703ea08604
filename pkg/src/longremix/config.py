"""Flat key-value experiment configuration.

The format is plain text, one ``section.key = value`` per line, ``#``
comments allowed. Every key has a default; the effective (fully
materialized) config is echoed into the metrics JSON so a run can be
reproduced from its own output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .data import NoiseSpec
from .errors import ConfigError
from .trainer import TrainConfig

OUTDIR_ENV = "LONGREMIX_OUTDIR"

DEFAULT_TAU_GRID = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "blobs"      # blobs | moons | csv
    n: int = 2000
    test_n: int = 1000
    classes: int = 16
    spread: float = 0.15
    path: str = ""           # csv only
    test_path: str = ""      # csv only

    def __post_init__(self):
        if self.kind not in ("blobs", "moons", "csv"):
            raise ConfigError(f"unknown dataset kind: {self.kind!r}")
        if self.kind == "csv" and not self.path:
            raise ConfigError("dataset.path is required for csv datasets")


@dataclass(frozen=True)
class ReportSpec:
    formats: tuple = ("json", "csv")
    prcurve: bool = True
    tau_grid: tuple = DEFAULT_TAU_GRID
    gmm_dump: bool = False
    plan_digests: bool = False
    checkpoints: bool = False

    def __post_init__(self):
        for f in self.formats:
            if f not in ("json", "csv"):
                raise ConfigError(f"unknown report format: {f!r}")


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    noise: NoiseSpec
    train: TrainConfig
    outdir: str
    report: ReportSpec


def parse_flat_config(text) -> dict:
    """Strict ``key = value`` lines into an ordered mapping."""
    out: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key in out:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        out[key] = value
    return out


def _to_bool(key, value):
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _to_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _to_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _to_mapping(key, value):
    if not value:
        return None
    mapping = {}
    for part in value.split(","):
        src, sep, dst = part.partition(":")
        if not sep:
            raise ConfigError(f"{key}: expected 'src:dst' pairs, got {part!r}")
        mapping[_to_int(key, src.strip())] = _to_int(key, dst.strip())
    return mapping


def _to_int_tuple(key, value):
    return tuple(_to_int(key, v.strip()) for v in value.split(",") if v.strip())


def _to_float_tuple(key, value):
    return tuple(_to_float(key, v.strip()) for v in value.split(",") if v.strip())


def _to_str_tuple(key, value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


_PARSERS = {
    "dataset.kind": str,
    "dataset.n": _to_int,
    "dataset.test_n": _to_int,
    "dataset.classes": _to_int,
    "dataset.spread": _to_float,
    "dataset.path": str,
    "dataset.test_path": str,
    "noise.kind": str,
    "noise.eta": _to_float,
    "noise.mapping": _to_mapping,
    "noise.seed": _to_int,
    "train.mode": str,
    "train.tau": _to_float,
    "train.zeta": _to_int,
    "train.alpha": _to_float,
    "train.lambda_u": _to_float,
    "train.lambda_reg": _to_float,
    "train.epochs": _to_int,
    "train.warmup": _to_int,
    "train.batch_size": _to_int,
    "train.lr": _to_float,
    "train.lr_drop": _to_float,
    "train.momentum": _to_float,
    "train.weight_decay": _to_float,
    "train.hidden": _to_int_tuple,
    "train.normalize_losses": _to_bool,
    "train.data_seed": _to_int,
    "train.model1_seed": _to_int,
    "train.model2_seed": _to_int,
    "train.plan_seed": _to_int,
    "output.dir": str,
    "report.formats": _to_str_tuple,
    "report.prcurve": _to_bool,
    "report.tau_grid": _to_float_tuple,
    "report.gmm_dump": _to_bool,
    "report.plan_digests": _to_bool,
    "report.checkpoints": _to_bool,
}


def build_experiment(mapping, outdir_override=None) -> ExperimentConfig:
    """Typed ExperimentConfig from a flat string mapping.

    Unknown keys are errors. When the noise is asymmetric and the loss
    weights were not set explicitly, both default to 0.
    """
    values = {}
    for key, raw in mapping.items():
        parser = _PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown config key: {key}")
        values[key] = parser(key, raw) if parser is not str else raw

    def take(key, default):
        return values[key] if key in values else default

    dataset = DatasetSpec(
        kind=take("dataset.kind", "blobs"),
        n=take("dataset.n", 2000),
        test_n=take("dataset.test_n", 1000),
        classes=take("dataset.classes", 16),
        spread=take("dataset.spread", 0.15),
        path=take("dataset.path", ""),
        test_path=take("dataset.test_path", ""),
    )
    noise = NoiseSpec(
        kind=take("noise.kind", "none"),
        eta=take("noise.eta", 0.0),
        mapping=take("noise.mapping", None),
        seed=take("noise.seed", 0),
    )
    asym = noise.kind == "asymmetric"
    train = TrainConfig(
        mode=take("train.mode", "full-longremix"),
        tau=take("train.tau", 0.5),
        zeta=take("train.zeta", 5),
        alpha=take("train.alpha", 0.2),
        lambda_u=take("train.lambda_u", 0.0 if asym else 10.0),
        lambda_reg=take("train.lambda_reg", 0.0 if asym else 1.0),
        epochs=take("train.epochs", 60),
        warmup_epochs=take("train.warmup", 10),
        batch_size=take("train.batch_size", 64),
        lr=take("train.lr", 0.02),
        lr_drop=take("train.lr_drop", 0.1),
        momentum=take("train.momentum", 0.8),
        weight_decay=take("train.weight_decay", 5e-4),
        hidden=take("train.hidden", (64, 64)),
        normalize_losses=take("train.normalize_losses", True),
        data_seed=take("train.data_seed", 1),
        model1_seed=take("train.model1_seed", 11),
        model2_seed=take("train.model2_seed", 22),
        plan_seed=take("train.plan_seed", 33),
    )
    report = ReportSpec(
        formats=take("report.formats", ("json", "csv")),
        prcurve=take("report.prcurve", True),
        tau_grid=take("report.tau_grid", DEFAULT_TAU_GRID),
        gmm_dump=take("report.gmm_dump", False),
        plan_digests=take("report.plan_digests", False),
        checkpoints=take("report.checkpoints", False),
    )
    outdir = outdir_override or os.environ.get(OUTDIR_ENV) or take("output.dir", "runs/experiment")
    return ExperimentConfig(dataset=dataset, noise=noise, train=train,
                            outdir=outdir, report=report)


def apply_seed_override(mapping, seed) -> dict:
    """Single master seed: data=N, model1=N+11, model2=N+22, plan=N+33, noise=N+101."""
    out = dict(mapping)
    out["train.data_seed"] = str(seed)
    out["train.model1_seed"] = str(seed + 11)
    out["train.model2_seed"] = str(seed + 22)
    out["train.plan_seed"] = str(seed + 33)
    out["noise.seed"] = str(seed + 101)
    return out


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, dict):
        return ",".join(f"{k}:{v[k]}" for k in sorted(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def effective_config(exp: ExperimentConfig) -> dict:
    """Canonical flat echo of every key, defaults materialized."""
    d, n, t, r = exp.dataset, exp.noise, exp.train, exp.report
    return {
        "dataset.kind": d.kind,
        "dataset.n": _fmt_value(d.n),
        "dataset.test_n": _fmt_value(d.test_n),
        "dataset.classes": _fmt_value(d.classes),
        "dataset.spread": _fmt_value(d.spread),
        "dataset.path": d.path,
        "dataset.test_path": d.test_path,
        "noise.kind": n.kind,
        "noise.eta": _fmt_value(n.eta),
        "noise.mapping": _fmt_value(n.mapping) if n.mapping else "",
        "noise.seed": _fmt_value(n.seed),
        "train.mode": t.mode,
        "train.tau": _fmt_value(t.tau),
        "train.zeta": _fmt_value(t.zeta),
        "train.alpha": _fmt_value(t.alpha),
        "train.lambda_u": _fmt_value(t.lambda_u),
        "train.lambda_reg": _fmt_value(t.lambda_reg),
        "train.epochs": _fmt_value(t.epochs),
        "train.warmup": _fmt_value(t.warmup_epochs),
        "train.batch_size": _fmt_value(t.batch_size),
        "train.lr": _fmt_value(t.lr),
        "train.lr_drop": _fmt_value(t.lr_drop),
        "train.momentum": _fmt_value(t.momentum),
        "train.weight_decay": _fmt_value(t.weight_decay),
        "train.hidden": _fmt_value(t.hidden),
        "train.normalize_losses": _fmt_value(t.normalize_losses),
        "train.data_seed": _fmt_value(t.data_seed),
        "train.model1_seed": _fmt_value(t.model1_seed),
        "train.model2_seed": _fmt_value(t.model2_seed),
        "train.plan_seed": _fmt_value(t.plan_seed),
        "output.dir": exp.outdir,
        "report.formats": _fmt_value(r.formats),
        "report.prcurve": _fmt_value(r.prcurve),
        "report.tau_grid": _fmt_value(r.tau_grid),
        "report.gmm_dump": _fmt_value(r.gmm_dump),
        "report.plan_digests": _fmt_value(r.plan_digests),
        "report.checkpoints": _fmt_value(r.checkpoints),
    }


def serialize_flat(mapping) -> str:
    return "\n".join(f"{k} = {v}" for k, v in mapping.items()) + "\n"

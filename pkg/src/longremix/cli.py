"""Command-line entry points.

Subcommands: ``train`` (run a configured experiment end to end), ``lemma``
(closed-form + Monte-Carlo window sweep), ``noise`` (generate or load a
dataset, inject label noise, write CSV + provenance sidecar), ``prcurve``
(threshold sweep of the selection precision/recall), ``report`` (re-emit
plot CSVs from an existing metrics JSON).

Exit codes: 0 success, 2 configuration error, 3 runtime failure. The
``LONGREMIX_OUTDIR`` environment variable overrides the configured output
directory; an explicit ``--out`` beats both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, data, lemma, report
from .config import (OUTDIR_ENV, apply_seed_override, build_experiment,
                     parse_flat_config)
from .errors import ConfigError, LongRemixError, ParseError
from .trainer import run_stage1_hct, run_training


def _load_config(path, seed=None, outdir=None):
    try:
        with open(path, encoding="utf-8") as fh:
            mapping = parse_flat_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if seed is not None:
        mapping = apply_seed_override(mapping, seed)
    return build_experiment(mapping, outdir_override=outdir)


def _build_datasets(exp):
    d = exp.dataset
    if d.kind == "csv":
        train = data.load_csv_dataset(d.path)
        if not d.test_path:
            raise ConfigError("dataset.test_path is required for csv training runs")
        test = data.load_csv_dataset(d.test_path)
    else:
        train = data.make_synthetic_dataset(d.kind, d.n, d.classes, d.spread,
                                            seed=exp.train.data_seed)
        test = data.make_synthetic_dataset(d.kind, d.test_n, d.classes, d.spread,
                                           seed=exp.train.data_seed + 1000003)
    noisy = data.apply_noise(train, exp.noise)
    return noisy, test


def _dataset_info(exp, ds, test):
    return {"kind": exp.dataset.kind, "n": ds.n, "test_n": test.n,
            "classes": ds.num_classes, "features": ds.dim}


def cmd_train(args) -> int:
    exp = _load_config(args.config, args.seed, args.out)
    ds, test = _build_datasets(exp)
    result = run_training(exp.train, ds, test,
                          collect_gmm=exp.report.gmm_dump,
                          collect_plans=exp.report.plan_digests)
    curve = None
    if exp.report.prcurve and result.stages[0].histories is not None:
        stage1 = result.stages[0]
        curve = report.pr_curve(stage1.histories[0], ds.mask, exp.report.tau_grid,
                                stage1.guessed, ds.labels)
    bundle = report.emit_report(result, exp, data.noise_sidecar(exp.noise, ds.mask.sum()),
                                _dataset_info(exp, ds, test), prcurve_rows=curve)
    print(f"mode={exp.train.mode} best_acc={result.best_acc:.6g} "
          f"bundle={bundle.manifest_path}")
    return 0


def cmd_prcurve(args) -> int:
    exp = _load_config(args.config, args.seed, args.out)
    ds, test = _build_datasets(exp)
    stage1 = run_stage1_hct(exp.train, ds, test)
    curve = report.pr_curve(stage1.histories[0], ds.mask, exp.report.tau_grid,
                            stage1.guessed, ds.labels)
    os.makedirs(exp.outdir, exist_ok=True)
    path = os.path.join(exp.outdir, "prcurve.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.prcurve_csv_text(curve))
    print(f"wrote {path} ({len(curve)} thresholds)")
    return 0


def cmd_lemma(args) -> int:
    zetas = ([int(z) for z in args.zetas.split(",")] if args.zetas
             else list(range(1, args.zeta_max + 1)))
    rows = lemma.sweep_zeta(args.pcc, args.pnn, args.pc, zetas,
                            mc_trials=args.trials, seed=args.seed)
    outdir = args.out or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "lemma.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.lemma_csv_text(rows))
    for row in rows:
        mc = "" if "precision_mc" not in row else (
            f" mc=({row['precision_mc']:.4f}, {row['recall_mc']:.4f})")
        print(f"zeta={row['zeta']:3d} precision={row['precision_cf']:.6f} "
              f"recall={row['recall_cf']:.6f}{mc}")
    print(f"wrote {path}")
    return 0


def cmd_noise(args) -> int:
    if args.csv:
        ds = data.load_csv_dataset(args.csv)
    else:
        ds = data.make_synthetic_dataset(args.dataset, args.n, args.classes,
                                         args.spread, seed=args.data_seed)
    mapping = None
    if args.mapping:
        mapping = {}
        for part in args.mapping.split(","):
            src, sep, dst = part.partition(":")
            if not sep:
                raise ConfigError(f"--mapping expects 'src:dst' pairs, got {part!r}")
            mapping[int(src)] = int(dst)
    spec = data.NoiseSpec(kind=args.kind, eta=args.eta, mapping=mapping, seed=args.seed)
    noisy = data.apply_noise(ds, spec)
    outdir = args.out or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "dataset.csv")
    data.save_csv_dataset(noisy, csv_path)
    sidecar_path = os.path.join(outdir, "dataset.noise.json")
    report.write_json(data.noise_sidecar(spec, noisy.mask.sum()), sidecar_path)
    print(f"wrote {csv_path} and {sidecar_path} (flipped {int(noisy.mask.sum())} of {noisy.n})")
    return 0


def cmd_report(args) -> int:
    try:
        with open(args.metrics, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read metrics {args.metrics}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"metrics file is not valid JSON: {exc}") from exc
    outdir = args.out or os.environ.get(OUTDIR_ENV) or os.path.dirname(args.metrics) or "."
    try:
        bundle = report.reemit_from_metrics(doc, outdir)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"metrics file is missing required fields: {exc}") from exc
    print(f"re-emitted {len(bundle.files)} files into {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="longremix",
        description="Noisy-label co-training with confidence-window selection, "
                    "core-set guided retraining, and oversampled MixUp.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a configured experiment end to end")
    p_train.add_argument("--config", required=True, help="flat key=value config file")
    p_train.add_argument("--out", help="output directory (beats config and env)")
    p_train.add_argument("--seed", type=int,
                         help="master seed override: data=N, model1=N+11, model2=N+22, "
                              "plan=N+33, noise=N+101")
    p_train.set_defaults(func=cmd_train)

    p_curve = sub.add_parser("prcurve", help="threshold sweep of selection precision/recall")
    p_curve.add_argument("--config", required=True)
    p_curve.add_argument("--out")
    p_curve.add_argument("--seed", type=int, help="master seed override (see train)")
    p_curve.set_defaults(func=cmd_prcurve)

    p_lemma = sub.add_parser("lemma", help="closed-form + Monte-Carlo window sweep")
    p_lemma.add_argument("--pcc", type=float, required=True,
                         help="P(classified clean | clean)")
    p_lemma.add_argument("--pnn", type=float, required=True,
                         help="P(classified noisy | noisy)")
    p_lemma.add_argument("--pc", type=float, required=True, help="clean proportion")
    p_lemma.add_argument("--zeta-max", type=int, default=10)
    p_lemma.add_argument("--zetas", help="explicit comma-separated window lengths")
    p_lemma.add_argument("--trials", type=int, default=100_000,
                         help="Monte-Carlo trials per row (0 disables)")
    p_lemma.add_argument("--seed", type=int, default=0)
    p_lemma.add_argument("--out")
    p_lemma.set_defaults(func=cmd_lemma)

    p_noise = sub.add_parser("noise", help="inject label noise and write CSV + sidecar")
    p_noise.add_argument("--kind", choices=("symmetric", "asymmetric", "none"), required=True)
    p_noise.add_argument("--eta", type=float, default=0.0)
    p_noise.add_argument("--mapping", help="asymmetric class mapping, e.g. 0:1,2:3")
    p_noise.add_argument("--seed", type=int, default=0, help="noise draw seed")
    p_noise.add_argument("--csv", help="noise an existing CSV dataset")
    p_noise.add_argument("--dataset", choices=("blobs", "moons"), default="blobs")
    p_noise.add_argument("--n", type=int, default=2000)
    p_noise.add_argument("--classes", type=int, default=16)
    p_noise.add_argument("--spread", type=float, default=0.15)
    p_noise.add_argument("--data-seed", type=int, default=1)
    p_noise.add_argument("--out")
    p_noise.set_defaults(func=cmd_noise)

    p_report = sub.add_parser("report", help="re-emit CSVs from an existing metrics JSON")
    p_report.add_argument("--metrics", required=True)
    p_report.add_argument("--out")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LongRemixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def console_entry():
    sys.exit(main())

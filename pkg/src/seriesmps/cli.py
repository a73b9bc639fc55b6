"""Command-line entry point.

Subcommands: train, impute, classify, sample, analyze, tune, gen-nts.  Every
run writes one JSON manifest next to its primary output recording the command,
resolved configuration, seeds, input/output paths, wall time and package
version.  Exit codes: 0 success, 2 usage/config errors, 3 numeric/runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("seriesmps")
    except Exception:
        return "unknown"


def _write_manifest(primary_output: Path, command: str, config: dict, seeds: dict,
                    inputs: list, outputs: list, started: float) -> None:
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.time() - started, 3),
        "package_version": _package_version(),
    }
    path = Path(str(primary_output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(format(cell, ".17g"))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _load_train_config(args) -> "TrainConfig":
    from .config import TrainConfig, read_config_file

    cfg = read_config_file(args.config) if args.config else TrainConfig()
    overrides = {
        "eta": args.eta,
        "chi_max": args.chi_max,
        "d": args.d,
        "n_sweeps": args.n_sweeps,
        "chi_init": args.chi_init,
        "cutoff": args.cutoff,
        "seed": args.seed,
        "loss_tolerance": args.loss_tolerance,
    }
    return cfg.merged(**overrides).validate()


def cmd_train(args) -> int:
    from .data import load_csv
    from .model import save_bundle

    started = time.time()
    config = _load_train_config(args)
    dataset = load_csv(args.data, labeled=True if args.labeled else None)
    from .trainer import fit

    bundle, report = fit(
        dataset.values, config, labels=dataset.labels, preprocessing=args.preprocessing
    )
    out = Path(args.out)
    save_bundle(bundle, out)
    loss_path = out.with_suffix(out.suffix + ".loss.csv") if args.loss_out is None else Path(args.loss_out)
    _write_rows(loss_path, ["sweep", "nll"],
                [(i + 1, float(v)) for i, v in enumerate(report.loss_per_sweep)])
    if report.rejected:
        print(f"rejected {len(report.rejected)} unencodable instances: {list(report.rejected)}")
    print(f"trained {dataset.n_instances}x{dataset.length} -> {out} "
          f"(final NLL {report.final_loss:.6f}, {report.sweeps_run} sweeps)")
    _write_manifest(out, "train", config.to_dict() | {"preprocessing": args.preprocessing},
                    {"seed": config.seed}, [args.data], [out, loss_path], started)
    return EXIT_OK


def cmd_impute(args) -> int:
    from .data import load_csv, mae
    from .imputer import impute
    from .model import load_bundle

    started = time.time()
    bundle = load_bundle(args.model)
    dataset = load_csv(args.data)
    truth = load_csv(args.truth) if args.truth else None
    out = Path(args.out)
    multi = dataset.n_instances > 1
    header = ["t", "value", "imputed_flag", "wmad"]
    if multi:
        header = ["instance"] + header
    rows = []
    errors = []
    for i in range(dataset.n_instances):
        mask = dataset.mask[i] if dataset.mask is not None else None
        result = impute(bundle, dataset.values[i], mask=mask)
        for t in range(dataset.length):
            row = (
                t + 1,
                float(result.series[t]),
                int(result.imputed_mask[t]),
                float(result.uncertainty[t]) if result.imputed_mask[t] else float("nan"),
            )
            rows.append(((i,) + row) if multi else row)
        if truth is not None and result.imputed_mask.any():
            errors.append(mae(truth.values[i], result.series, ~result.imputed_mask))
    _write_rows(out, header, rows)
    if errors:
        print(f"MAE over {len(errors)} instances: {sum(errors) / len(errors):.6f}")
    _write_manifest(out, "impute", {"model": str(args.model)}, {},
                    [args.data] + ([args.truth] if args.truth else []), [out], started)
    return EXIT_OK


def cmd_classify(args) -> int:
    from .classifier import predict
    from .data import load_csv
    from .model import load_bundle

    started = time.time()
    bundle = load_bundle(args.model)
    dataset = load_csv(args.data, labeled=True if args.labeled else None)
    out = Path(args.out)
    n_classes = bundle.mps.n_labels
    header = ["instance_id", "predicted_label"] + [f"score_{l}" for l in range(1, n_classes + 1)]
    rows = []
    hits = 0
    for i in range(dataset.n_instances):
        pred = predict(bundle, dataset.values[i])
        rows.append((i, pred.label) + tuple(float(s) for s in pred.scores))
        if dataset.labels is not None and pred.label == int(dataset.labels[i]):
            hits += 1
    _write_rows(out, header, rows)
    if dataset.labels is not None and dataset.n_instances:
        print(f"accuracy: {hits / dataset.n_instances:.4f}")
    _write_manifest(out, "classify", {"model": str(args.model)}, {}, [args.data], [out], started)
    return EXIT_OK


def cmd_sample(args) -> int:
    from .data import load_csv, save_csv
    from .model import load_bundle
    from .sampler import SamplerConfig, generate_dataset, sample_trajectory

    started = time.time()
    bundle = load_bundle(args.model)
    config = SamplerConfig(
        alpha=args.alpha,
        max_rejections=args.max_rejections,
        seed=args.seed,
        n_trajectories=args.n,
    ).validate()
    out = Path(args.out)
    if args.condition:
        cond_data = load_csv(args.condition)
        prefix_row = cond_data.values[0]
        finite = [float(v) for v in prefix_row if not (v != v)]  # leading non-NaN values
        import numpy as np

        from .data import Dataset

        values = np.empty((config.n_trajectories, bundle.mps.n_sites))
        meta_rej = np.zeros(bundle.mps.n_sites, dtype=np.int64)
        fallbacks = 0
        for i in range(config.n_trajectories):
            traj = sample_trajectory(bundle, config, conditioning=np.asarray(finite),
                                     trajectory_index=i)
            values[i] = traj.values
            meta_rej += traj.rejections
            fallbacks += traj.median_fallbacks
        sampled = Dataset(values=values)
        meta = {"seed": config.seed, "alpha": config.alpha,
                "max_rejections": config.max_rejections,
                "n_trajectories": config.n_trajectories,
                "conditioned_prefix": len(finite),
                "rejections_per_site": meta_rej.tolist(), "median_fallbacks": fallbacks}
    else:
        sampled, meta = generate_dataset(bundle, config)
    save_csv(sampled, out)
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {sampled.n_instances} trajectories to {out} "
          f"({meta['median_fallbacks']} median fallbacks)")
    _write_manifest(out, "sample",
                    {"alpha": config.alpha, "max_rejections": config.max_rejections,
                     "n": config.n_trajectories, "model": str(args.model)},
                    {"seed": config.seed}, [args.model], [out], started)
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .analysis import dataset_mean_profile, profile_rows, residual_rows
    from .data import load_csv
    from .model import load_bundle

    started = time.time()
    bundle = load_bundle(args.model)
    dataset = load_csv(args.data)
    profile = dataset_mean_profile(bundle, dataset)
    out_profile = Path(args.out_profile)
    out_residual = Path(args.out_residual)
    _write_rows(out_profile, ["k", "site", "see"], profile_rows(profile))
    _write_rows(out_residual, ["k", "residual"], residual_rows(profile))
    if profile.n_failed:
        print(f"skipped {profile.n_failed} instances that failed projection")
    print(f"wrote SEE profile to {out_profile} and residual curve to {out_residual}")
    _write_manifest(out_profile, "analyze", {"model": str(args.model)}, {},
                    [args.data], [out_profile, out_residual], started)
    return EXIT_OK


def cmd_tune(args) -> int:
    from .config import TrainConfig, write_config_file
    from .data import load_csv
    from .tuning import (
        SearchSpace,
        lhs_search,
        make_classification_objective,
        make_imputation_objective,
        trial_log_rows,
    )

    started = time.time()
    dataset = load_csv(args.data, labeled=True if args.labeled else None)
    space = SearchSpace(
        d_range=tuple(args.d_range),
        eta_range=tuple(args.eta_range),
        chi_range=tuple(args.chi_range),
        n_samples=args.samples,
        folds=args.folds,
        seed=args.seed,
    ).validate()
    base = TrainConfig(seed=args.seed, n_sweeps=args.n_sweeps)
    if args.task == "imputation":
        objective = make_imputation_objective(
            dataset.values, base, n_folds=space.folds,
            missing_fractions=tuple(args.missing), seed=args.seed,
            max_val_instances=args.max_val_instances, tune_sweeps=args.tune_sweeps,
        )
    else:
        if dataset.labels is None:
            raise SystemExit("classification tuning needs a labeled dataset")
        objective = make_classification_objective(
            dataset.values, dataset.labels, base, n_folds=space.folds,
            seed=args.seed, tune_sweeps=args.tune_sweeps,
        )
    best, trials = lhs_search(space, objective)
    out_log = Path(args.out_log)
    _write_rows(out_log, ["trial_id", "d", "eta", "chi_max", "fold", "objective"],
                trial_log_rows(trials))
    best_cfg = base.merged(d=best["d"], eta=best["eta"], chi_max=best["chi_max"])
    write_config_file(best_cfg, args.out_config)
    print(f"best: d={best['d']} eta={best['eta']:.5f} chi_max={best['chi_max']} "
          f"objective={best['objective']:.6f}")
    _write_manifest(out_log, "tune",
                    {"space": {"d": list(space.d_range), "eta": list(space.eta_range),
                               "chi": list(space.chi_range), "samples": space.n_samples,
                               "folds": space.folds}, "task": args.task},
                    {"seed": args.seed}, [args.data], [out_log, args.out_config], started)
    return EXIT_OK


def cmd_gen_nts(args) -> int:
    from .data import NTSParams, generate_nts, save_csv

    started = time.time()
    phases = None if args.phases is None else tuple(args.phases)
    params = NTSParams(
        n_instances=args.n,
        length=args.length,
        tau_choices=tuple(args.tau),
        m_choices=tuple(args.m),
        sigma=args.sigma,
        seed=args.seed,
        phases=phases,
    ).validate()
    dataset = generate_nts(params)
    out = Path(args.out)
    save_csv(dataset, out)
    print(f"wrote {dataset.n_instances}x{dataset.length} NTS dataset to {out}")
    _write_manifest(out, "gen-nts",
                    {"tau": list(params.tau_choices), "m": list(params.m_choices),
                     "sigma": params.sigma, "n": params.n_instances,
                     "length": params.length,
                     "phases": None if phases is None else list(phases)},
                    {"seed": params.seed}, [], [out], started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seriesmps",
        description="MPS-based time-series modeling: train, impute, classify, sample, analyze.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/OpenMP threads for this run")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--labeled", action="store_true",
                   help="treat the last CSV column as class labels")
    p.add_argument("--preprocessing", choices=["min-max", "robust-sigmoid"],
                   default="min-max")
    p.add_argument("--loss-out", default=None, help="loss history CSV path")
    for flag, typ in [("--eta", float), ("--chi-max", int), ("--d", int),
                      ("--n-sweeps", int), ("--chi-init", int), ("--cutoff", float),
                      ("--seed", int), ("--loss-tolerance", float)]:
        p.add_argument(flag, type=typ, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("impute", help="impute NaN entries of each series")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV with NaN for missing values")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="ground-truth CSV; prints MAE")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("classify", help="predict labels for each series")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labeled", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sample", help="generate trajectories from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--max-rejections", type=int, default=100)
    p.add_argument("--condition", default=None,
                   help="CSV whose first row's leading values condition the sampler")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="entanglement-entropy profile over a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-profile", required=True)
    p.add_argument("--out-residual", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tune", help="LHS hyperparameter search with cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=["imputation", "classification"], required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--d-range", type=int, nargs=2, default=[5, 15])
    p.add_argument("--eta-range", type=float, nargs=2, default=[1e-3, 0.5])
    p.add_argument("--chi-range", type=int, nargs=2, default=[20, 40])
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-sweeps", type=int, default=10)
    p.add_argument("--tune-sweeps", type=int, default=None,
                   help="cheaper sweep count used inside search trials")
    p.add_argument("--missing", type=float, nargs="+", default=[0.15, 0.45, 0.85])
    p.add_argument("--max-val-instances", type=int, default=None)
    p.add_argument("--out-log", required=True)
    p.add_argument("--out-config", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("gen-nts", help="generate a noisy-trendy-sinusoid dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--tau", type=float, nargs="+", default=[20.0])
    p.add_argument("--m", type=float, nargs="+", default=[3.0])
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phases", type=float, nargs="+", default=None,
                   help="finite phase set; omit for uniform phases")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_nts)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    from .errors import (
        ConfigError,
        DegenerateDataError,
        DomainError,
        ModelFormatError,
        NumericError,
        ProjectionError,
        ShapeError,
    )

    try:
        return args.func(args)
    except (FileNotFoundError, ConfigError, DomainError, DegenerateDataError,
            ModelFormatError, ShapeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ProjectionError, ArithmeticError, RuntimeError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

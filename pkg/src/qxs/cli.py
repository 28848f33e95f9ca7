"""Command line interface: synth, backtest, train, gradcheck.

Runs are described by a JSON config file; unknown fields anywhere in it are
hard errors so typos cannot silently fall back to defaults.  Exactly one data
source must be configured: ``data`` (panel + benchmark CSV paths) or
``synthetic`` (generator spec).

Output directory precedence: ``--out`` flag, then the ``QXS_OUT_DIR``
environment variable, then ``out_dir`` in the config, then ``./runs``.
Files are written atomically (temp file + rename) and never overwrite
existing files unless ``--force`` is passed.

Exit codes: 0 success, 2 usage error, 3 configuration error, 4 data error,
5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import gradcheck
from .backtest import BacktestReport, run_backtest
from .errors import (
    ConfigurationError,
    DataError,
    NumericalError,
    QxsError,
    UsageError,
    ValidationError,
)
from .panel import (
    SyntheticSpec,
    generate_synthetic,
    load_benchmark_csv,
    load_panel_csv,
    save_benchmark_csv,
    save_panel_csv,
)
from .training import (
    LinearSpec,
    MpsSpec,
    NeuralNetSpec,
    QclSpec,
    TrainConfig,
    fit,
)

__all__ = ["main"]

logger = logging.getLogger(__name__)

ENV_OUT_DIR = "QXS_OUT_DIR"
DEFAULT_OUT_DIR = "runs"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_NUMERICAL = 5

MODEL_NAMES = ("linear", "nn1", "nn2", "qcl", "tn", "custom")

_TRAIN_KEYS = {
    "optimizer", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
    "epochs", "batch_size", "seed", "target_rescale",
}
_SCHEDULE_KEYS = {"train_months", "test_months", "include_partial",
                  "first_month", "last_month"}
_DATA_KEYS = {"panel_csv", "benchmark_csv"}
_SYNTH_KEYS = {"n_stocks", "n_months", "n_features", "seed", "linear_weights",
               "interaction_pairs", "noise_sigma", "start_month"}
_TOP_KEYS = {"model", "model_params", "train", "schedule", "data", "synthetic",
             "out_dir"}

_MODEL_PARAM_KEYS = {
    "linear": {"fit_intercept"},
    "nn1": set(),
    "nn2": set(),
    "qcl": {"depth", "tau"},
    "tn": {"bond_dim", "noise_scale"},
    "custom": {"family", "fit_intercept", "layer_sizes", "depth", "tau",
               "bond_dim", "noise_scale"},
}


@dataclass
class RunConfig:
    model: str
    model_spec: object
    train: TrainConfig
    train_months: int
    test_months: int
    include_partial: bool
    first_month: str | None
    last_month: str | None
    data_paths: dict | None
    synthetic: SyntheticSpec | None
    out_dir: str | None


def _check_keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown field(s) in {where}: {', '.join(unknown)}"
        )


def _build_model_spec(model: str, params: dict):
    _check_keys(params, _MODEL_PARAM_KEYS[model], f"model_params for {model!r}")
    if model == "linear":
        return LinearSpec(fit_intercept=bool(params.get("fit_intercept", True)))
    if model == "nn1":
        return NeuralNetSpec(layer_sizes=(10, 7, 1))
    if model == "nn2":
        return NeuralNetSpec(layer_sizes=(10, 5, 4, 1))
    if model == "qcl":
        return QclSpec(depth=int(params.get("depth", 3)),
                       tau=float(params.get("tau", 1.0)))
    if model == "tn":
        spec = MpsSpec(bond_dim=int(params.get("bond_dim", 2)))
        if "noise_scale" in params:
            spec = MpsSpec(bond_dim=spec.bond_dim,
                           noise_scale=float(params["noise_scale"]))
        return spec
    # custom: explicit family plus that family's knobs
    family = params.get("family")
    if family == "linear":
        return LinearSpec(fit_intercept=bool(params.get("fit_intercept", True)))
    if family == "nn":
        if "layer_sizes" not in params:
            raise ConfigurationError(
                "custom nn model needs model_params.layer_sizes"
            )
        return NeuralNetSpec(layer_sizes=tuple(params["layer_sizes"]))
    if family == "qcl":
        return QclSpec(depth=int(params.get("depth", 3)),
                       tau=float(params.get("tau", 1.0)))
    if family == "tn":
        return MpsSpec(bond_dim=int(params.get("bond_dim", 2)),
                       noise_scale=float(params.get("noise_scale", 1e-2)))
    raise ConfigurationError(
        f"custom model needs model_params.family in "
        f"('linear', 'nn', 'qcl', 'tn'), got {family!r}"
    )


def load_config(path) -> RunConfig:
    """Parse and strictly validate a JSON run config."""
    try:
        raw = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    _check_keys(doc, _TOP_KEYS, "config")

    model = doc.get("model")
    if model not in MODEL_NAMES:
        raise ConfigurationError(
            f"model must be one of {MODEL_NAMES}, got {model!r}"
        )
    model_spec = _build_model_spec(model, doc.get("model_params", {}))

    train_doc = dict(doc.get("train", {}))
    _check_keys(train_doc, _TRAIN_KEYS, "train")
    # The circuit model predicts in [-1, 1]; rescale targets to match unless
    # the config says otherwise.
    if model_spec.kind == "qcl" and "target_rescale" not in train_doc:
        train_doc["target_rescale"] = "to_symmetric"
    try:
        train_cfg = TrainConfig(**train_doc)
    except TypeError as exc:
        raise ConfigurationError(f"bad train section: {exc}") from exc

    sched = dict(doc.get("schedule", {}))
    _check_keys(sched, _SCHEDULE_KEYS, "schedule")

    data_doc = doc.get("data")
    synth_doc = doc.get("synthetic")
    if (data_doc is None) == (synth_doc is None):
        raise ConfigurationError(
            "config needs exactly one data source: 'data' or 'synthetic'"
        )
    synth_spec = None
    if synth_doc is not None:
        _check_keys(synth_doc, _SYNTH_KEYS, "synthetic")
        synth_doc = dict(synth_doc)
        if "linear_weights" in synth_doc:
            synth_doc["linear_weights"] = tuple(synth_doc["linear_weights"])
        if "interaction_pairs" in synth_doc:
            synth_doc["interaction_pairs"] = tuple(
                tuple(p) for p in synth_doc["interaction_pairs"]
            )
        try:
            synth_spec = SyntheticSpec(**synth_doc)
        except TypeError as exc:
            raise ConfigurationError(f"bad synthetic section: {exc}") from exc
    else:
        _check_keys(data_doc, _DATA_KEYS, "data")
        for key in ("panel_csv", "benchmark_csv"):
            if key not in data_doc:
                raise ConfigurationError(f"data section needs {key!r}")

    return RunConfig(
        model=model,
        model_spec=model_spec,
        train=train_cfg,
        train_months=int(sched.get("train_months", 36)),
        test_months=int(sched.get("test_months", 12)),
        include_partial=bool(sched.get("include_partial", False)),
        first_month=sched.get("first_month"),
        last_month=sched.get("last_month"),
        data_paths=data_doc,
        synthetic=synth_spec,
        out_dir=doc.get("out_dir"),
    )


def _resolve_out_dir(cfg: RunConfig, args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get(ENV_OUT_DIR)
    if env:
        return Path(env)
    return Path(cfg.out_dir or DEFAULT_OUT_DIR)


def _apply_seed_override(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is None:
        return cfg
    seed = int(args.seed)
    cfg.train = replace(cfg.train, seed=seed)
    if cfg.synthetic is not None:
        cfg.synthetic = replace(cfg.synthetic, seed=seed)
    return cfg


def _check_clobber(paths, force: bool) -> None:
    for path in paths:
        if path.exists() and not force:
            raise ConfigurationError(
                f"refusing to overwrite {path}; pass --force"
            )


def _write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _write_csv_atomic(path: Path, writer) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _report_json_text(report: BacktestReport, config_echo: dict) -> str:
    doc = report.to_json_dict()
    doc["config"] = config_echo
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _config_echo(cfg: RunConfig, out_dir: Path, threads: int) -> dict:
    echo = {
        "model": cfg.model,
        "model_kind": cfg.model_spec.kind,
        "hyperparams": cfg.model_spec.hyperparams(),
        "train": {
            "optimizer": cfg.train.optimizer,
            "learning_rate": cfg.train.learning_rate,
            "adam_beta1": cfg.train.adam_beta1,
            "adam_beta2": cfg.train.adam_beta2,
            "adam_eps": cfg.train.adam_eps,
            "epochs": cfg.train.epochs,
            "batch_size": cfg.train.batch_size,
            "seed": cfg.train.seed,
            "target_rescale": cfg.train.target_rescale,
        },
        "schedule": {
            "train_months": cfg.train_months,
            "test_months": cfg.test_months,
            "include_partial": cfg.include_partial,
            "first_month": cfg.first_month,
            "last_month": cfg.last_month,
        },
        "out_dir": str(out_dir),
        "threads": threads,
    }
    if cfg.synthetic is not None:
        echo["synthetic"] = {
            "n_stocks": cfg.synthetic.n_stocks,
            "n_months": cfg.synthetic.n_months,
            "n_features": cfg.synthetic.n_features,
            "seed": cfg.synthetic.seed,
            "linear_weights": list(cfg.synthetic.linear_weights),
            "interaction_pairs": [list(p) for p in
                                  cfg.synthetic.interaction_pairs],
            "noise_sigma": cfg.synthetic.noise_sigma,
            "start_month": cfg.synthetic.start_month,
        }
    else:
        echo["data"] = dict(cfg.data_paths)
    return echo


def _load_inputs(cfg: RunConfig):
    if cfg.synthetic is not None:
        return generate_synthetic(cfg.synthetic)
    panel = load_panel_csv(cfg.data_paths["panel_csv"])
    benchmark = load_benchmark_csv(cfg.data_paths["benchmark_csv"])
    return panel, benchmark


def _print_metrics_table(model: str, report: BacktestReport) -> None:
    m = report.metrics
    te = f"{100 * m.tracking_error:8.2f}" if m.tracking_error is not None \
        else "     n/a"
    ir = f"{m.information_ratio:8.2f}" if m.information_ratio is not None \
        else "     n/a"
    print(f"{'model':<8}{'ER (%)':>8}{'TE (%)':>10}{'IR':>10}")
    print(f"{model:<8}{100 * m.excess_return:8.2f}{te:>10}{ir:>10}")
    print(f"months: {m.n_months}  parameters: {report.parameter_count}")


def cmd_synth(args) -> int:
    cfg = _apply_seed_override(load_config(args.config), args)
    if cfg.synthetic is None:
        raise ConfigurationError("synth needs a 'synthetic' config section")
    out_dir = _resolve_out_dir(cfg, args)
    panel_path = out_dir / "panel.csv"
    bench_path = out_dir / "benchmark.csv"
    _check_clobber([panel_path, bench_path], args.force)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel, benchmark = generate_synthetic(cfg.synthetic)
    _write_csv_atomic(panel_path, lambda p: save_panel_csv(panel, p))
    _write_csv_atomic(bench_path, lambda p: save_benchmark_csv(benchmark, p))
    print(f"wrote {panel_path} ({len(panel.frame)} rows) and {bench_path}")
    return EXIT_OK


def cmd_backtest(args) -> int:
    cfg = _apply_seed_override(load_config(args.config), args)
    out_dir = _resolve_out_dir(cfg, args)
    report_path = out_dir / "report.json"
    monthly_path = out_dir / "monthly.csv"
    cumulative_path = out_dir / "cumulative.csv"
    _check_clobber([report_path, monthly_path, cumulative_path], args.force)
    out_dir.mkdir(parents=True, exist_ok=True)

    panel, benchmark = _load_inputs(cfg)
    report = run_backtest(
        panel, benchmark, cfg.model_spec, cfg.train,
        train_months=cfg.train_months, test_months=cfg.test_months,
        first_month=cfg.first_month, last_month=cfg.last_month,
        include_partial=cfg.include_partial, threads=args.threads,
    )
    echo = _config_echo(cfg, out_dir, args.threads)
    echo["parameter_count"] = report.parameter_count
    _write_text_atomic(report_path, _report_json_text(report, echo))
    _write_csv_atomic(
        monthly_path,
        lambda p: report.monthly_frame().to_csv(p, index=False),
    )
    _write_csv_atomic(
        cumulative_path,
        lambda p: report.cumulative_frame().to_csv(p, index=False),
    )
    _print_metrics_table(cfg.model, report)
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .backtest import _run_fold, build_schedule  # local: shares fold logic

    cfg = _apply_seed_override(load_config(args.config), args)
    out_dir = _resolve_out_dir(cfg, args)
    fold_path = out_dir / f"fold_{args.fold}.json"
    _check_clobber([fold_path], args.force)
    out_dir.mkdir(parents=True, exist_ok=True)

    panel, benchmark = _load_inputs(cfg)
    feature_dates = panel.feature_dates()
    if not feature_dates:
        raise DataError("panel has no months with complete feature rows")
    schedule = build_schedule(
        cfg.first_month or feature_dates[0],
        cfg.last_month or feature_dates[-1],
        train_months=cfg.train_months, test_months=cfg.test_months,
    )
    if not 0 <= args.fold < len(schedule.folds):
        raise UsageError(
            f"fold index {args.fold} out of range; schedule has "
            f"{len(schedule.folds)} folds"
        )
    result = _run_fold(panel, benchmark, schedule.folds[args.fold],
                       cfg.model_spec, cfg.train)
    doc = result.to_json_dict()
    doc["config"] = _config_echo(cfg, out_dir, 1)
    _write_text_atomic(fold_path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(f"fold {args.fold}: train rows {result.train_rows}, "
          f"final loss {result.loss_trace[-1]:.6g}")
    print(f"wrote {fold_path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    checks = []
    if args.model in ("qcl", "all"):
        checks.append(("qcl", lambda: gradcheck.qcl_gradient_check(
            n_qubits=args.qubits, depth=args.depth, seed=args.seed,
            fixtures=args.fixtures)))
    if args.model in ("tn", "all"):
        checks.append(("tn", lambda: gradcheck.mps_gradient_check(
            n_sites=args.sites, bond_dim=args.bond_dim, seed=args.seed,
            fixtures=args.fixtures)))
    if args.model in ("nn", "all"):
        layers = tuple(int(s) for s in args.layers.split(","))
        checks.append(("nn", lambda: gradcheck.nn_gradient_check(
            layer_sizes=layers, seed=args.seed, fixtures=args.fixtures)))
    failed = False
    for name, runner in checks:
        deviation = runner()
        tol = gradcheck.TOLERANCES[name]
        ok = deviation < tol
        failed = failed or not ok
        print(f"{name}: max deviation {deviation:.3e} "
              f"(tolerance {tol:.0e}) {'PASS' if ok else 'FAIL'}")
    if failed:
        raise NumericalError("gradient check failed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qxs",
        description="Cross-sectional return prediction models and backtests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", help="output directory (overrides config/env)")
        p.add_argument("--seed", type=int, help="override config seeds")
        p.add_argument("--force", action="store_true",
                       help="allow overwriting existing outputs")

    p_synth = sub.add_parser("synth", help="write a synthetic panel+benchmark")
    add_common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_back = sub.add_parser("backtest", help="run a walk-forward backtest")
    add_common(p_back)
    p_back.add_argument("--threads", type=int, default=1,
                        help="max folds trained in parallel")
    p_back.set_defaults(func=cmd_backtest)

    p_train = sub.add_parser("train", help="train a single fold")
    add_common(p_train)
    p_train.add_argument("--fold", type=int, required=True,
                         help="fold index within the schedule")
    p_train.set_defaults(func=cmd_train)

    p_grad = sub.add_parser("gradcheck",
                            help="compare analytic gradients to finite differences")
    p_grad.add_argument("--model", choices=("qcl", "tn", "nn", "all"),
                        default="all")
    p_grad.add_argument("--qubits", type=int, default=4)
    p_grad.add_argument("--depth", type=int, default=2)
    p_grad.add_argument("--sites", type=int, default=5)
    p_grad.add_argument("--bond-dim", type=int, default=2, dest="bond_dim")
    p_grad.add_argument("--layers", default="6,4,1",
                        help="comma-separated nn layer sizes")
    p_grad.add_argument("--fixtures", type=int, default=10)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValidationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QxsError as exc:  # safety net for new subclasses
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 data error,
5 numeric failure (including a failed gradient check), 6 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .crossval import crossval
from .data import get_config, get_group, load_manifest, write_csv, write_manifest
from .data.registry import check_applicable
from .data.windows import build_dataset
from .errors import ConfigError, HarError
from .metrics import evaluate
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.gradcheck import LAYER_CHECKS, GradcheckSizes, run_gradcheck
from .nn.network import NetworkSpec
from .optim import TrainConfig, train, write_trace_csv
from .report import build_report, report_name, write_crossval, write_report_csv
from .synth import CohortSpec, generate_cohort

log = logging.getLogger("harcnn")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5, 6
OUT_ENV = "HARCNN_OUT"

DEFAULTS = {
    "seed": 0,
    "group": "walk",
    "config": "LS",
    "epochs": 200,
    "batch_size": 1024,
    "lr": 0.005,
    "train_thin": 1,
    "folds": 5,
    "test_size": None,
    "subjects": 19,
    "duration": 60.0,
    "data": None,
    "val_subjects": None,
}
TYPES = {
    "seed": int,
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "train_thin": int,
    "folds": int,
    "test_size": int,
    "subjects": int,
    "duration": float,
}


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names with underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = TYPES.get(key, str)(value)
        except ValueError:
            raise ConfigError(f"{path}:{n}: bad value for {key}: {value!r}") from None
    return out


def effective(args) -> dict:
    values = dict(DEFAULTS)
    if getattr(args, "config_file", None):
        values.update(read_config_file(args.config_file))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def out_root(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "results"))


def _prepare_out(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def _echo_config(out: Path, command: str, values: dict) -> None:
    lines = [f"command = {command}"] + [f"{k} = {'' if v is None else v}" for k, v in sorted(values.items())]
    (out / f"{command}_config.txt").write_text("\n".join(lines) + "\n")


def _write_meta(out: Path, command: str, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "harcnn": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    meta.update(extra or {})
    (out / f"{command}_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _recordings(values: dict, activities) -> list:
    if values["data"]:
        return load_manifest(values["data"], activities=set(activities))
    cohort = CohortSpec(
        n_subjects=values["subjects"], duration_s=values["duration"], seed=values["seed"], activities=tuple(activities)
    )
    return generate_cohort(cohort)


def _train_config(values: dict) -> TrainConfig:
    try:
        return TrainConfig(
            batch_size=values["batch_size"], epochs=values["epochs"], learning_rate=values["lr"], seed=values["seed"]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolve(values: dict):
    group = get_group(values["group"])
    config = get_config(values["config"])
    check_applicable(group, config)
    return group, config


# -- commands -----------------------------------------------------------------


def cmd_synth(args) -> int:
    values = effective(args)
    out = _prepare_out(out_root(args))
    cohort = CohortSpec(n_subjects=values["subjects"], duration_s=values["duration"], seed=values["seed"])
    entries = []
    for rec in generate_cohort(cohort):
        name = f"s{rec.subject_id:02d}_{rec.activity}.csv"
        write_csv(rec, out / name)
        entries.append((name, rec.subject_id, rec.activity))
    write_manifest(entries, out / "manifest.csv")
    print(f"wrote {len(entries)} recordings and manifest.csv to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    values = effective(args)
    group, config = _resolve(values)
    cfg = _train_config(values)
    out = _prepare_out(out_root(args))
    dataset = build_dataset(_recordings(values, group.labels), group, config)
    val = None
    if values["val_subjects"]:
        held = [int(s) for s in str(values["val_subjects"]).split(",")]
        is_val = np.isin(dataset.subjects, held)
        val = dataset.subset(np.flatnonzero(is_val))
        dataset = dataset.subset(np.flatnonzero(~is_val))
    dataset = dataset.thin(values["train_thin"])
    spec = NetworkSpec(channels=config.arity, output_units=group.m)
    state, trace = train(spec, dataset, cfg, val=val)
    stem = f"{group.name}_{config.name}"
    save_checkpoint(out / f"{stem}.ckpt", spec, state, {"group": group.name, "config": config.name})
    write_trace_csv(out / f"{stem}_trace.csv", trace)
    _echo_config(out, "train", values)
    _write_meta(out, "train")
    last = trace[-1]
    print(f"trained {stem}: {len(trace)} epochs, final loss {last.train_loss:.4f}, acc {last.train_acc:.4f}")
    return EXIT_OK


def cmd_crossval(args) -> int:
    values = effective(args)
    group, config = _resolve(values)
    cfg = _train_config(values)
    out = _prepare_out(out_root(args))
    recordings = _recordings(values, group.labels)

    def progress(fold):
        print(f"fold {fold.fold}: macro-F {fold.report.macro_f:.4f} (test subjects {sorted(fold.test_subjects)})")

    result = crossval(
        group,
        config,
        recordings,
        cfg,
        k=values["folds"],
        train_thin=values["train_thin"],
        test_size=values["test_size"],
        on_fold=progress,
    )
    write_crossval(result, out)
    _echo_config(out, "crossval", values)
    _write_meta(out, "crossval", {"fold_plan_note": result.plan.note})
    print(f"pooled macro-F {result.pooled.macro_f:.4f}; reports in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    values = effective(args)
    spec, state, meta = load_checkpoint(args.checkpoint)
    group = get_group(meta.get("group", values["group"]))
    config = get_config(meta.get("config", values["config"]))
    out = _prepare_out(out_root(args))
    dataset = build_dataset(_recordings(values, group.labels), group, config)
    report = evaluate(state, spec, dataset, {"group": group.name, "config": config.name, "fold": "eval"})
    write_report_csv(report, out / report_name(group.name, config.name, "eval"))
    print(f"macro-F {report.macro_f:.4f} over {report.total} windows")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    sizes = GradcheckSizes(batch=args.batch, height=args.height, width=args.width, channels=args.channels)
    rows, seconds = run_gradcheck(seed=args.seed if args.seed is not None else 0, sizes=sizes, flip_layer=args.inject_bug)
    print(f"{'layer':<24}{'max_rel_error':>15}{'checked':>9}  status")
    for r in rows:
        print(f"{r.layer:<24}{r.max_rel_error:>15.3e}{r.checked:>9}  {'PASS' if r.passed else 'FAIL'}")
    print(f"elapsed {seconds:.2f} s")
    return EXIT_OK if all(r.passed for r in rows) else EXIT_NUMERIC


def cmd_report(args) -> int:
    results = Path(args.results)
    if not results.is_dir():
        raise FileNotFoundError(f"results directory {results} does not exist")
    grid = build_report(results, args.out)
    filled = int((~np.isnan(grid.values)).sum())
    print(f"fscore_matrix.csv / .svg written with {filled} filled cells")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _common(p, data=True, training=True):
    p.add_argument("--seed", type=int, help="root seed for every random stream (default 0)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--config-file", help="key = value file; flags override it")
    if data:
        p.add_argument("--data", help="manifest CSV; without it a synthetic cohort is generated")
        p.add_argument("--subjects", type=int, help="synthetic cohort size (default 19)")
        p.add_argument("--duration", type=float, help="synthetic seconds per activity (default 60)")
    if training:
        p.add_argument("--group", help="walk | walk_balance | stand_balance | strength")
        p.add_argument("--config", help="sensor configuration, e.g. LS, RFLF, RSRFLM")
        p.add_argument("--epochs", type=int, help="training epochs (default 200)")
        p.add_argument("--batch-size", type=int, dest="batch_size", help="mini-batch size (default 1024)")
        p.add_argument("--lr", type=float, help="Adam learning rate (default 0.005)")
        p.add_argument("--train-thin", type=int, dest="train_thin", help="keep every n-th training window (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harcnn", description="Depthwise CNN activity recognition from IMU windows.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic cohort as CSV files plus a manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config-file")
    p.add_argument("--subjects", type=int)
    p.add_argument("--duration", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one network and save a checkpoint and trace")
    _common(p)
    p.add_argument("--val-subjects", dest="val_subjects", help="comma-separated subject ids held out for validation")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", help="subject-wise k-fold cross-validation with reports")
    _common(p)
    p.add_argument("--folds", type=int, help="number of folds (default 5)")
    p.add_argument("--test-size", type=int, dest="test_size", help="fixed test subjects per fold (default: disjoint folds)")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _common(p, training=False)
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("--seed", type=int)
    p.add_argument("--batch", type=int, default=2)
    p.add_argument("--height", type=int, default=3)
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--inject-bug", choices=sorted(LAYER_CHECKS), help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="build the F-score grid from a results directory")
    p.add_argument("results")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except HarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # remaining ValueErrors come from argument validation (cohort size, fold count)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

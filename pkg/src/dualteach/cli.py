"""Command-line driver: ``dualteach run|sweep|dynamics|inspect``.

Exit codes: 0 success, 2 configuration error, 3 data error.

Dataset labels need not be +1/-1: the two distinct label values found in a
LIBSVM file are mapped by sort order, the smaller one to -1.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import re
import sys
from pathlib import Path

from . import dynamics
from .data import BUILTIN_DATASETS, ParseError, SplitError
from .dual_teaching import TEACHER_MODES
from .experiment import (DEFAULT_RATIOS, HISTORY_COLUMNS, HISTORY_KEY, MEAN_COLUMNS, METHODS,
                         SUMMARY_COLUMNS, ConfigError, ExperimentConfig, cells_for, load_dataset,
                         mean_table, run_cells, thread_cap)

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

SWEEP_METHODS = ("dual_teaching", "self_training", "co_training")
SWEEP_BASES = ("lr", "svm", "ada")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# --------------------------------------------------------------------------
# CSV output

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render_csv(columns, rows, meta: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {meta}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


# --------------------------------------------------------------------------
# Config assembly

def _floats(s: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {s!r}") from None


def _ints(s: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated integers, got {s!r}") from None


def _names(s) -> tuple[str, ...]:
    if isinstance(s, (list, tuple)):
        return tuple(s)
    return tuple(x.strip() for x in str(s).split(",") if x.strip())


def _seq(v, conv):
    if isinstance(v, (list, tuple)):
        return tuple(conv(x) for x in v)
    return (conv(v),)


def _read_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


_CONFIG_KEYS = {"dataset", "synthetic", "method", "methods", "base", "bases", "teacher_mode",
                "ratio", "ratios", "train_fraction", "seed", "seeds", "max_generations",
                "gate_sum", "out"}


def build_config(args, sweep: bool) -> ExperimentConfig:
    raw = _read_config_file(args.config) if args.config else {}
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kw: dict = {}
    try:
        if "dataset" in raw:
            kw["dataset"] = str(raw["dataset"])
        if "synthetic" in raw:
            kw["synthetic"] = _seq(raw["synthetic"], float) if raw["synthetic"] is not None else None
        for k in ("method", "methods"):
            if k in raw:
                kw["methods"] = _names(raw[k])
        for k in ("base", "bases"):
            if k in raw:
                kw["bases"] = _names(raw[k])
        for k in ("ratio", "ratios"):
            if k in raw:
                kw["ratios"] = _seq(raw[k], float)
        for k in ("seed", "seeds"):
            if k in raw:
                kw["seeds"] = _seq(raw[k], int)
        for k, conv in (("teacher_mode", str), ("train_fraction", float), ("max_generations", int),
                        ("gate_sum", float), ("out", str)):
            if k in raw:
                kw[k] = conv(raw[k])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value in config file: {e}") from None

    # flags win over the file
    if args.dataset is not None:
        kw["dataset"] = args.dataset
        kw["synthetic"] = None
    if args.synthetic is not None:
        kw["synthetic"] = _floats(args.synthetic, "--synthetic")
    if args.method is not None:
        kw["methods"] = _names(args.method)
    if args.base is not None:
        kw["bases"] = _names(args.base)
    if args.teacher_mode is not None:
        kw["teacher_mode"] = args.teacher_mode
    if args.ratio is not None:
        kw["ratios"] = (args.ratio,)
    if args.ratios is not None:
        kw["ratios"] = _floats(args.ratios, "--ratios")
    if args.seed is not None:
        kw["seeds"] = (args.seed,)
    if args.seeds is not None:
        kw["seeds"] = _ints(args.seeds, "--seeds")
    if args.train_fraction is not None:
        kw["train_fraction"] = args.train_fraction
    if args.max_generations is not None:
        kw["max_generations"] = args.max_generations
    if args.gate_sum is not None:
        kw["gate_sum"] = args.gate_sum
    if args.out is not None:
        kw["out"] = args.out

    if sweep:
        if "ratios" not in kw:
            raise ConfigError("sweep needs a ratio list (--ratios or 'ratios' in the config)")
        kw.setdefault("methods", SWEEP_METHODS)
        kw.setdefault("bases", SWEEP_BASES)
    return ExperimentConfig(**kw)


# --------------------------------------------------------------------------
# Subcommands

def _meta(cfg: ExperimentConfig) -> str:
    return f"config_hash={cfg.digest()} seed={','.join(str(s) for s in cfg.seeds)}"


def _execute(cfg: ExperimentConfig):
    data = load_dataset(cfg)
    cells = cells_for(cfg)
    results = run_cells(data, cfg, cells, thread_cap())
    summaries = [r.summary for r in results]
    history = [h for r in results for h in r.history]
    return summaries, history


def cmd_run(args) -> int:
    cfg = build_config(args, sweep=False)
    summaries, history = _execute(cfg)
    meta = _meta(cfg)
    summary_csv = render_csv(SUMMARY_COLUMNS, summaries, meta)
    if cfg.out is None:
        sys.stdout.write(summary_csv)
        return EXIT_OK
    out = Path(cfg.out)
    _emit(summary_csv, out / "summary.csv")
    _emit(render_csv(HISTORY_KEY + HISTORY_COLUMNS, history, meta), out / "history.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = build_config(args, sweep=True)
    summaries, history = _execute(cfg)
    meta = _meta(cfg)
    means = render_csv(MEAN_COLUMNS, mean_table(summaries), meta)
    if cfg.out is None:
        sys.stdout.write(means)
        return EXIT_OK
    out = Path(cfg.out)
    _emit(render_csv(SUMMARY_COLUMNS, summaries, meta), out / "summary.csv")
    _emit(means, out / "mean.csv")
    _emit(render_csv(HISTORY_KEY + HISTORY_COLUMNS, history, meta), out / "history.csv")
    return EXIT_OK


SURFACE_COLUMNS = ("p_plus", "p_minus", "r_plus", "r_minus", "lambda1", "lambda2", "delta", "max_magnitude")
TRAJECTORY_COLUMNS = ("step", "alpha", "beta", "norm")
ORACLE_COLUMNS = ("step", "mean_alpha", "mean_beta", "se_alpha", "se_beta",
                  "model_alpha", "model_beta", "warnings")
_STEP_RE = re.compile(r"step (\d+):")


def _pair(s: str, what: str) -> tuple[float, float]:
    v = _floats(s, what)
    if len(v) != 2:
        raise ConfigError(f"{what} takes two numbers")
    return v


def dynamics_rows(args) -> tuple[tuple, list[dict]]:
    mode = args.mode
    try:
        if mode in ("surface_precision", "surface_recall"):
            rp, rm = _pair(args.recalls, "--recalls")
            pp, pm = _pair(args.precisions, "--precisions")
            vary = "precision" if mode == "surface_precision" else "recall"
            rows = dynamics.sweep_eigen_surface(args.resolution, vary, r_plus=rp, r_minus=rm,
                                                p_plus=pp, p_minus=pm)
            return SURFACE_COLUMNS, [r.__dict__ for r in rows]
        q = _floats(args.q, "--q")
        if len(q) != 4:
            raise ConfigError("--q takes p_plus,r_plus,p_minus,r_minus")
        if mode == "trajectory":
            traj = dynamics.simulate_trajectory(q, _pair(args.e0, "--e0"), args.steps)
            return TRAJECTORY_COLUMNS, [dict(step=k, alpha=e.alpha, beta=e.beta, norm=e.norm)
                                        for k, e in enumerate(traj)]
        run = dynamics.simulate_oracle_run(q, args.n, args.positive_fraction, args.steps,
                                           args.trials, args.seed)
        n_pos = int(round(args.positive_fraction * args.n))
        model = dynamics.simulate_trajectory(q, (0.0, float(n_pos)), args.steps)
        by_step: dict[int, list[str]] = {}
        for w in run.warnings:
            m = _STEP_RE.search(w)
            by_step.setdefault(int(m.group(1)) if m else 0, []).append(w)
        rows = []
        for k, (mu, se, th) in enumerate(zip(run.mean, run.std_err, model)):
            rows.append(dict(step=k, mean_alpha=mu.alpha, mean_beta=mu.beta, se_alpha=se[0], se_beta=se[1],
                             model_alpha=th.alpha, model_beta=th.beta,
                             warnings="; ".join(by_step.get(k, []))))
        return ORACLE_COLUMNS, rows
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def cmd_dynamics(args) -> int:
    columns, rows = dynamics_rows(args)
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "command")}
    digest = hashlib.sha256(json.dumps(params, sort_keys=True).encode()).hexdigest()[:16]
    text = render_csv(columns, rows, f"config_hash={digest} seed={args.seed}")
    _emit(text, Path(args.out) if args.out else None)
    return EXIT_OK


def cmd_inspect(args) -> int:
    cfg = build_config(args, sweep=False)
    d = load_dataset(cfg)
    counts = d.class_counts()
    nnz = int((d.X != 0).sum())
    rows = [dict(field="name", value=cfg.dataset_name),
            dict(field="examples", value=len(d)),
            dict(field="features", value=d.feature_dim),
            dict(field="positives", value=counts.get(1, 0)),
            dict(field="negatives", value=counts.get(-1, 0)),
            dict(field="density", value=nnz / max(1, d.X.size))]
    sys.stdout.write(render_csv(("field", "value"), rows, f"config_hash={cfg.digest()} seed=-"))
    return EXIT_OK


# --------------------------------------------------------------------------

def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with experiment settings; flags override it")
    p.add_argument("--dataset", help=f"LIBSVM file path or builtin ({', '.join(BUILTIN_DATASETS)})")
    p.add_argument("--synthetic", metavar="N,DIM,SEP,FLIP",
                   help="two-Gaussian data: examples per class, dimension, mean separation, label flip rate")
    p.add_argument("--method", help=f"one or a comma list of {', '.join(METHODS)}")
    p.add_argument("--base", help="lr, svm or ada (comma list allowed)")
    p.add_argument("--teacher-mode", dest="teacher_mode", choices=TEACHER_MODES)
    p.add_argument("--ratio", type=float, help="labeled fraction of the training split")
    p.add_argument("--ratios", help="comma list of labeled fractions, e.g. "
                   + ",".join(f"{r:g}" for r in DEFAULT_RATIOS))
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma list of seeds")
    p.add_argument("--max-generations", dest="max_generations", type=int)
    p.add_argument("--gate-sum", dest="gate_sum", type=float)
    p.add_argument("--out", help="output directory (default: summary to stdout)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualteach", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one configuration over its ratios and seeds")
    _add_experiment_flags(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="accuracy against labeled ratio for several methods and bases")
    _add_experiment_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)

    dyn = sub.add_parser("dynamics", help="eigenvalue surfaces and error trajectories")
    dyn.add_argument("mode", choices=("surface_precision", "surface_recall", "trajectory", "oracle"))
    dyn.add_argument("--resolution", type=int, default=101)
    dyn.add_argument("--recalls", default="0.5,0.5", help="R+,R- held fixed by surface_precision")
    dyn.add_argument("--precisions", default="0.4,0.6", help="P+,P- held fixed by surface_recall")
    dyn.add_argument("--q", default="0.8,0.5,0.8,0.5", help="P+,R+,P-,R-")
    dyn.add_argument("--e0", default="100,100", help="initial false positives,false negatives")
    dyn.add_argument("--steps", type=int, default=50)
    dyn.add_argument("--n", type=int, default=20000, help="unlabeled examples (oracle)")
    dyn.add_argument("--positive-fraction", dest="positive_fraction", type=float, default=0.5)
    dyn.add_argument("--trials", type=int, default=50)
    dyn.add_argument("--seed", type=int, default=0)
    dyn.add_argument("--out", help="output CSV file (default stdout)")
    dyn.set_defaults(func=cmd_dynamics)

    ins = sub.add_parser("inspect", help="dataset statistics")
    _add_experiment_flags(ins)
    ins.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"dualteach: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError, SplitError) as e:
        print(f"dualteach: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

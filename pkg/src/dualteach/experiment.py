"""Experiment cells: one (method, base, teacher mode, ratio, seed) run each.

A cell goes parse -> split train/test -> normalize -> split labeled/unlabeled
-> method, and yields one summary row plus per-generation history rows.
The CLI gathers cells and writes them; nothing here touches the filesystem
except dataset loading.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines, learners
from .data import (BUILTIN_DATASETS, Dataset, generate_two_gaussians, load_libsvm,
                   normalize_features, split_labeled_unlabeled, split_train_test)
from .dual_teaching import TEACHER_MODES, DEFAULT_GATE_SUM, DTOptions, run_dual_teaching
from .learners import BASE_ALIASES, LearnerSpec
from .metrics import accuracy_of, confusion, precision, recall

METHODS = ("dual_teaching", "self_training", "co_training", "supervised")
DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

SUMMARY_COLUMNS = ("dataset", "method", "base", "teacher_mode", "labeled_ratio", "seed",
                   "generations_run", "final_test_accuracy", "baseline_supervised_accuracy", "delta")
HISTORY_COLUMNS = ("generation", "p1", "r1", "p2", "r2", "T", "assumptions_met",
                   "retraining_set_size", "precision_labeled", "recall_labeled",
                   "precision_unlabeled", "recall_unlabeled", "accuracy_test")
# history rows carry the cell key in front so a multi-cell file stays readable
HISTORY_KEY = ("dataset", "method", "base", "teacher_mode", "labeled_ratio", "seed")


class ConfigError(ValueError):
    """Bad or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "heart_scale"
    synthetic: tuple | None = None  # (n_per_class, dim, separation, flip_rate)
    methods: tuple = ("dual_teaching",)
    bases: tuple = ("svm",)
    teacher_mode: str = "balanced_tuned"
    ratios: tuple = (0.2,)
    train_fraction: float = 0.75
    seeds: tuple = (0,)
    max_generations: int = 30
    gate_sum: float = DEFAULT_GATE_SUM
    out: str | None = None

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for b in self.bases:
            if b not in BASE_ALIASES:
                raise ConfigError(f"unknown base {b!r}; choose from {', '.join(BASE_ALIASES)}")
        if self.teacher_mode not in TEACHER_MODES:
            raise ConfigError(f"unknown teacher mode {self.teacher_mode!r}")
        if not self.ratios:
            raise ConfigError("at least one labeled ratio is required")
        for r in self.ratios:
            if not 0.0 < r <= 1.0:
                raise ConfigError(f"labeled ratio {r} outside (0, 1]")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be >= 1")
        if self.synthetic is not None and len(self.synthetic) != 4:
            raise ConfigError("synthetic takes n,dim,sep,flip")

    def digest(self) -> str:
        doc = asdict(self)
        doc.pop("out")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def dataset_name(self) -> str:
        if self.synthetic is not None:
            n, d, s, f = self.synthetic
            return f"synthetic_{int(n)}x{int(d)}_sep{s:g}_flip{f:g}"
        if self.dataset in BUILTIN_DATASETS:
            return self.dataset
        return os.path.basename(self.dataset)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    """Raises OSError / ParseError for unreadable input."""
    if cfg.synthetic is not None:
        n, d, s, f = cfg.synthetic
        # the data itself is fixed; seeds vary the splits
        return generate_two_gaussians(int(n), int(d), float(s), float(f), seed=0)
    if cfg.dataset in BUILTIN_DATASETS:
        return BUILTIN_DATASETS[cfg.dataset]()
    return load_libsvm(cfg.dataset)


@dataclass(frozen=True)
class Cell:
    method: str
    base: str
    teacher_mode: str
    ratio: float
    seed: int

    @property
    def key(self) -> tuple:
        return (self.method, self.base, self.teacher_mode, self.ratio, self.seed)


@dataclass
class CellResult:
    summary: dict
    history: list[dict] = field(default_factory=list)


def cells_for(cfg: ExperimentConfig) -> list[Cell]:
    out = []
    for m in cfg.methods:
        # teacher mode only means something for Dual Teaching
        mode = cfg.teacher_mode if m == "dual_teaching" else "none"
        for b in cfg.bases:
            for r in cfg.ratios:
                for s in cfg.seeds:
                    out.append(Cell(m, b, mode, r, s))
    return sorted(out, key=lambda c: (c.ratio, c.seed, METHODS.index(c.method), c.base))


def _pr(pred, truth):
    if len(truth) == 0:
        return None, None
    m = confusion(pred, truth)
    return precision(m), recall(m)


def _eval_row(generation, predict, view, hidden, test, **teacher_cols) -> dict:
    pl, rl = _pr(predict(view.X_l), view.y_l)
    pu, ru = _pr(predict(view.X_u), hidden) if len(hidden) else (None, None)
    row = dict.fromkeys(HISTORY_COLUMNS)
    row.update(generation=generation, precision_labeled=pl, recall_labeled=rl,
               precision_unlabeled=pu, recall_unlabeled=ru,
               accuracy_test=accuracy_of(predict(test.X), test.y))
    row.update(teacher_cols)
    return row


def run_cell(data: Dataset, cfg: ExperimentConfig, cell: Cell) -> CellResult:
    train, test = split_train_test(data, cfg.train_fraction, cell.seed)
    train, (test,) = normalize_features(train, [test])
    pd = split_labeled_unlabeled(train, cell.ratio, cell.seed)
    view = pd.training_view()
    spec = LearnerSpec(kind=cell.base)

    baseline = learners.fit(spec, view.X_l, view.y_l, seed=cell.seed)
    base_acc = accuracy_of(learners.predict(baseline, test.X), test.y)
    history: list[dict] = []

    if cell.method == "supervised":
        final_acc, gens = base_acc, 0
    elif cell.method == "dual_teaching":
        opts = DTOptions(teacher_mode=cell.teacher_mode, max_generations=cfg.max_generations,
                         seed=cell.seed, gate_sum=cfg.gate_sum)
        st = run_dual_teaching(pd, spec, opts, test_set=test)
        final_acc = accuracy_of(learners.predict(st.model, test.X), test.y)
        gens = st.generation
        for g in st.history:
            row = dict.fromkeys(HISTORY_COLUMNS)
            row.update(generation=g.generation, p1=g.p1, r1=g.r1, p2=g.p2, r2=g.r2, T=g.threshold,
                       assumptions_met=int(g.assumptions_met), retraining_set_size=g.retraining_set_size,
                       precision_labeled=g.precision_labeled, recall_labeled=g.recall_labeled,
                       precision_unlabeled=g.precision_unlabeled, recall_unlabeled=g.recall_unlabeled,
                       accuracy_test=g.accuracy_test)
            history.append(row)
    else:
        if cell.method == "self_training":
            res = baselines.run_self_training(pd, spec, seed=cell.seed)

            def predict_of(m):
                return lambda X: learners.predict(m, X)
        else:
            res = baselines.run_co_training(pd, spec, seed=cell.seed)

            def predict_of(m):
                return m.predict
        final_acc = accuracy_of(predict_of(res.model)(test.X), test.y)
        gens = len(res.history)
        for rec in res.history:
            # pseudo-labeled pool size stands in for the re-training set
            history.append(_eval_row(rec.iteration, predict_of(rec.model), view, pd.hidden_truth, test,
                                     retraining_set_size=rec.training_size - pd.n_labeled))

    summary = dict(dataset=cfg.dataset_name, method=cell.method, base=cell.base,
                   teacher_mode=cell.teacher_mode, labeled_ratio=cell.ratio, seed=cell.seed,
                   generations_run=gens, final_test_accuracy=final_acc,
                   baseline_supervised_accuracy=base_acc, delta=final_acc - base_acc)
    key = {k: summary[k] for k in HISTORY_KEY}
    return CellResult(summary, [{**key, **h} for h in history])


def _run_one(args):
    data, cfg, cell = args
    return run_cell(data, cfg, cell)


def thread_cap() -> int:
    raw = os.environ.get("DUALTEACH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DUALTEACH_THREADS={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError("DUALTEACH_THREADS must be >= 1")
    return n


def run_cells(data: Dataset, cfg: ExperimentConfig, cells: list[Cell], workers: int = 1) -> list[CellResult]:
    """Results come back in ``cells`` order whatever the worker count."""
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(data, cfg, c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as ex:
        return list(ex.map(_run_one, [(data, cfg, c) for c in cells]))


def mean_table(summaries: list[dict]) -> list[dict]:
    """Per (method, base, teacher_mode, ratio) means over seeds."""
    groups: dict[tuple, list[dict]] = {}
    for s in summaries:
        k = (s["dataset"], s["method"], s["base"], s["teacher_mode"], s["labeled_ratio"])
        groups.setdefault(k, []).append(s)
    out = []
    for k in sorted(groups, key=lambda k: (k[4], METHODS.index(k[1]), k[2], k[0])):
        rows = groups[k]
        out.append(dict(dataset=k[0], method=k[1], base=k[2], teacher_mode=k[3], labeled_ratio=k[4],
                        n_seeds=len(rows),
                        mean_final_test_accuracy=float(np.mean([r["final_test_accuracy"] for r in rows])),
                        mean_baseline_supervised_accuracy=float(np.mean(
                            [r["baseline_supervised_accuracy"] for r in rows])),
                        mean_delta=float(np.mean([r["delta"] for r in rows])),
                        median_delta=float(np.median([r["delta"] for r in rows]))))
    return out


MEAN_COLUMNS = ("dataset", "method", "base", "teacher_mode", "labeled_ratio", "n_seeds",
                "mean_final_test_accuracy", "mean_baseline_supervised_accuracy", "mean_delta",
                "median_delta")

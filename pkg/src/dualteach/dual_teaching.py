"""Dual Teaching: a base learner refit each generation from unlabeled examples
whose labels were corrected by two error-spotting teachers.

The FP teacher looks at examples the base learner calls positive and flags
the ones it believes are wrong; the FN teacher does the same for negative
outputs. Teachers are logistic models trained on half the labeled data and
checked on the other half before they are allowed to touch the
re-training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import learners
from .data import Dataset, LabeledView, PartialDataset, SplitError
from .learners import LearnerSpec, Model
from .metrics import accuracy_of, confusion, precision, recall

TEACHER_MODES = ("equal_weight", "balanced", "balanced_tuned")

T_START = 0.10
T_STEP = 0.05
T_MAX = 1.0
FIXED_THRESHOLD = 0.5
DEFAULT_GATE_SUM = 1.1


def threshold_schedule() -> list[float]:
    """0.10, 0.15, ..., 1.00 (19 values), computed without float drift."""
    n = int(round((T_MAX - T_START) / T_STEP)) + 1
    return [round(T_START + i * T_STEP, 2) for i in range(n)]


# --------------------------------------------------------------------------
# Re-training set

@dataclass(frozen=True)
class RetrainingSet:
    """Unlabeled-example id -> corrected label. Re-adding an id overwrites it."""

    entries: dict = field(default_factory=dict)
    generation_added: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, i) -> bool:
        return i in self.entries

    def ids(self) -> np.ndarray:
        return np.array(sorted(self.entries), dtype=np.int64)

    def labels(self) -> np.ndarray:
        return np.array([self.entries[i] for i in sorted(self.entries)], dtype=np.int64)


def update_retraining_set(R: RetrainingSet, fp_flagged, fn_flagged, generation: int) -> RetrainingSet:
    fp_flagged, fn_flagged = set(fp_flagged), set(fn_flagged)
    if fp_flagged & fn_flagged:
        raise ValueError("an example cannot be both a false positive and a false negative")
    entries = dict(R.entries)
    added = dict(R.generation_added)
    for ids, label in ((fp_flagged, -1), (fn_flagged, 1)):
        for i in ids:
            i = int(i)
            entries[i] = label
            added.setdefault(i, generation)
    return RetrainingSet(entries, added)


# --------------------------------------------------------------------------
# Teacher statistics

@dataclass(frozen=True)
class ChannelStats:
    """Quality of one teacher on its validation channel.

    ``precision``/``recall`` are None when undefined. A vacuous channel (no
    examples, or nothing wrong and nothing flagged) counts as perfect.
    """

    precision: float | None
    recall: float | None
    vacuous: bool = False
    flagged: int = 0
    errors: int = 0

    @property
    def effective_precision(self) -> float:
        if self.vacuous:
            return 1.0
        return 0.0 if self.precision is None else self.precision

    @property
    def effective_recall(self) -> float:
        if self.vacuous:
            return 1.0
        # no errors to find: nothing was missed
        return 1.0 if self.recall is None else self.recall


VACUOUS = ChannelStats(None, None, vacuous=True)


def channel_stats(flags: np.ndarray, is_error: np.ndarray) -> ChannelStats:
    flags = np.asarray(flags, dtype=bool)
    is_error = np.asarray(is_error, dtype=bool)
    if flags.size == 0:
        return VACUOUS
    n_err = int(is_error.sum())
    n_flag = int(flags.sum())
    if n_err == 0 and n_flag == 0:
        return ChannelStats(None, None, vacuous=True)
    m = confusion(np.where(flags, 1, -1), np.where(is_error, 1, -1))
    return ChannelStats(precision(m), recall(m), False, n_flag, n_err)


@dataclass(frozen=True)
class TeacherStats:
    fp: ChannelStats
    fn: ChannelStats
    gate_sum: float = DEFAULT_GATE_SUM

    vacuous_rule: str = "mirror"

    def _precision(self, own: ChannelStats, other: ChannelStats) -> float:
        if own.vacuous and not other.vacuous and self.vacuous_rule == "mirror":
            return other.effective_precision
        return own.effective_precision

    @property
    def p1(self) -> float:
        return self._precision(self.fp, self.fn)

    @property
    def r1(self) -> float:
        return self.fp.effective_recall

    @property
    def p2(self) -> float:
        return self._precision(self.fn, self.fp)

    @property
    def r2(self) -> float:
        return self.fn.effective_recall

    @property
    def assumptions_met(self) -> bool:
        return self.p1 + self.p2 > self.gate_sum and self.r1 * self.r2 > 0


@dataclass(frozen=True)
class TeacherPair:
    fp_teacher: Model
    fn_teacher: Model
    threshold: float
    stats: TeacherStats
    evaluations: int = 1

    def __post_init__(self):
        for t in (self.fp_teacher, self.fn_teacher):
            if t.spec.kind != "logistic":
                raise ValueError("teachers must be logistic models")
        if not 0.0 < self.threshold <= T_MAX + T_STEP + 1e-9:
            raise ValueError(f"threshold {self.threshold} outside (0, 1.05]")

    @property
    def assumptions_met(self) -> bool:
        # a threshold past the schedule means tuning gave up
        return self.threshold <= T_MAX and self.stats.assumptions_met


# --------------------------------------------------------------------------
# Steps

def teacher_spec(teacher_mode: str, base: LearnerSpec | None = None) -> LearnerSpec:
    if teacher_mode not in TEACHER_MODES:
        raise ValueError(f"teacher_mode must be one of {TEACHER_MODES}")
    weighting = "equal" if teacher_mode == "equal_weight" else "balanced"
    base = base or LearnerSpec("logistic")
    return LearnerSpec(**{**base.__dict__, "kind": "logistic", "class_weighting": weighting})


def zero_initialize(spec: LearnerSpec, feature_dim: int) -> DTState:
    return DTState(learners.zero_model(spec, feature_dim), RetrainingSet(), 0, ())


def split_teacher_data(view: LabeledView, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified half/half split of the labeled pool into (TX_l, VX_l) indices.

    Odd class counts put the extra example in TX_l.
    """
    y = view.y_l
    counts = {c: int(np.sum(y == c)) for c in (1, -1)}
    if y.size < 4 or min(counts.values()) < 2:
        raise SplitError(
            f"teacher split needs >= 2 labeled examples per class (have {counts}); "
            "use a larger labeled ratio"
        )
    rng = np.random.default_rng(seed)
    t_idx, v_idx = [], []
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        k = (idx.size + 1) // 2
        t_idx.append(idx[:k])
        v_idx.append(idx[k:])
    # rebalance so |TX| = ceil(l/2) when both classes are odd
    t, v = np.concatenate(t_idx), np.concatenate(v_idx)
    while t.size > v.size + 1:
        v = np.append(v, t[-1])
        t = t[:-1]
    return np.sort(t), np.sort(v)


def train_teachers(X_t, y_t, base_model: Model, teacher_mode: str = "balanced_tuned",
                   spec: LearnerSpec | None = None) -> tuple[Model, Model]:
    """Fit the FP teacher on TX_l examples the base model calls positive and
    the FN teacher on those it calls negative; target +1 means "base is wrong".
    """
    X_t = np.asarray(X_t, dtype=np.float64)
    y_t = np.asarray(y_t)
    if X_t.shape[0] == 0:
        raise ValueError("teacher training set is empty")
    tspec = teacher_spec(teacher_mode, spec)
    d = X_t.shape[1]
    pred = learners.predict(base_model, X_t)
    teachers = []
    for side in (1, -1):
        mask = pred == side
        if not mask.any():
            teachers.append(learners.constant_model(tspec, d, -1))
            continue
        target = np.where(y_t[mask] != side, 1, -1)
        teachers.append(learners.fit(tspec, X_t[mask], target))
    return teachers[0], teachers[1]


def tune_teachers(fp_teacher: Model, fn_teacher: Model, X_v, y_v, base_model: Model,
                  gate_sum: float = DEFAULT_GATE_SUM,
                  fixed_threshold: float | None = None) -> TeacherPair:
    """Raise the shared flag threshold from 0.10 in steps of 0.05 until
    p1 + p2 > gate_sum and r1 * r2 > 0, or the threshold passes 1.

    On failure the pair comes back with threshold 1.05 and the stats of the
    last (T = 1.00) evaluation. With ``fixed_threshold`` only that value is
    evaluated.
    """
    X_v = np.asarray(X_v, dtype=np.float64)
    y_v = np.asarray(y_v)
    if X_v.shape[0] == 0:
        raise ValueError("validation set is empty")
    pred = learners.predict(base_model, X_v)
    plus, minus = pred == 1, pred == -1
    p_fp = learners.predict_proba(fp_teacher, X_v[plus]) if plus.any() else np.empty(0)
    p_fn = learners.predict_proba(fn_teacher, X_v[minus]) if minus.any() else np.empty(0)
    err_fp = y_v[plus] == -1
    err_fn = y_v[minus] == 1

    def evaluate(T):
        return TeacherStats(channel_stats(p_fp > T, err_fp), channel_stats(p_fn > T, err_fn), gate_sum)

    if fixed_threshold is not None:
        return TeacherPair(fp_teacher, fn_teacher, fixed_threshold, evaluate(fixed_threshold), 1)

    stats = None
    schedule = threshold_schedule()
    for n_eval, T in enumerate(schedule, start=1):
        stats = evaluate(T)
        if stats.assumptions_met:
            return TeacherPair(fp_teacher, fn_teacher, T, stats, n_eval)
    return TeacherPair(fp_teacher, fn_teacher, round(T_MAX + T_STEP, 2), stats, len(schedule))


def estimate_errors(pair: TeacherPair, X_u, base_predictions, enforce_gate: bool = True):
    """Ids of unlabeled examples flagged as false positives / false negatives."""
    if enforce_gate and not pair.assumptions_met:
        raise RuntimeError("teachers failed the tuning gate; skip this generation instead")
    X_u = np.asarray(X_u, dtype=np.float64)
    base_predictions = np.asarray(base_predictions)
    if base_predictions.shape != (X_u.shape[0],):
        raise ValueError("base_predictions must cover X_u")
    flagged = []
    for side, teacher in ((1, pair.fp_teacher), (-1, pair.fn_teacher)):
        idx = np.flatnonzero(base_predictions == side)
        if idx.size == 0:
            flagged.append(frozenset())
            continue
        hit = learners.predict_proba(teacher, X_u[idx]) > pair.threshold
        flagged.append(frozenset(int(i) for i in idx[hit]))
    return flagged[0], flagged[1]


def retrain(spec: LearnerSpec, R: RetrainingSet, X_u, seed: int = 0, extra=None) -> Model:
    """Fresh fit on the re-training set (plus optional ``extra`` = (X, y))."""
    if len(R) == 0:
        raise ValueError("re-training set is empty; keep the previous model")
    X_u = np.asarray(X_u, dtype=np.float64)
    X, y = X_u[R.ids()], R.labels()
    if extra is not None:
        X = np.vstack([X, extra[0]])
        y = np.concatenate([y, extra[1]])
    return learners.fit(spec, X, y, seed=seed)


# --------------------------------------------------------------------------
# Generation loop

@dataclass(frozen=True)
class Teaching:
    """Outcome of one generation's teacher step."""

    assumptions_met: bool
    threshold: float
    stats: TeacherStats | None
    fp_flagged: frozenset
    fn_flagged: frozenset


# (model, unlabeled predictions, generation) -> Teaching; lets tests plug in oracles
TeacherOverride = Callable[[Model, np.ndarray, int], Teaching]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    p1: float | None
    r1: float | None
    p2: float | None
    r2: float | None
    threshold: float
    assumptions_met: bool
    retraining_set_size: int
    fp_flagged: int
    fn_flagged: int
    precision_labeled: float | None
    recall_labeled: float | None
    precision_unlabeled: float | None
    recall_unlabeled: float | None
    accuracy_unlabeled: float | None
    accuracy_test: float | None


@dataclass(frozen=True)
class DTState:
    model: Model
    retraining_set: RetrainingSet
    generation: int
    history: tuple[GenerationRecord, ...]
    stable: bool = False

    def __post_init__(self):
        if self.generation < 0 or len(self.history) != self.generation:
            raise ValueError("history must hold one record per generation")


@dataclass(frozen=True)
class DTOptions:
    teacher_mode: str = "balanced_tuned"
    max_generations: int = 30
    seed: int = 0
    gate_sum: float = DEFAULT_GATE_SUM
    # ablation: also fit on TX_l with its true labels every generation
    include_labeled: bool = False
    teacher_spec: LearnerSpec | None = None

    def __post_init__(self):
        if self.teacher_mode not in TEACHER_MODES:
            raise ValueError(f"teacher_mode must be one of {TEACHER_MODES}")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")


def _pr(pred, truth):
    if len(truth) == 0:
        return None, None, None
    m = confusion(pred, truth)
    return precision(m), recall(m), accuracy_of(pred, truth)


def run_dual_teaching(pd: PartialDataset, spec: LearnerSpec, options: DTOptions | None = None,
                      test_set: Dataset | None = None,
                      teachers: TeacherOverride | None = None) -> DTState:
    """Zero-initialize, then repeat classify / teach / correct / refit until
    the re-training set stops changing or ``max_generations`` is reached.

    A generation whose teachers fail the gate leaves model and re-training
    set untouched. Only the evaluation columns of the history look at
    ``pd.hidden_truth`` and the test set.
    """
    opts = options or DTOptions()
    view = pd.training_view()
    state = zero_initialize(spec, view.feature_dim)

    def record(gen, teach, R, model):
        pl, rl, _ = _pr(learners.predict(model, view.X_l), view.y_l)
        pu, ru, au = _pr(learners.predict(model, view.X_u), pd.hidden_truth) if len(view.X_u) else (None, None, None)
        at = None
        if test_set is not None:
            at = accuracy_of(learners.predict(model, test_set.X), test_set.y)
        st = teach.stats
        return GenerationRecord(
            gen,
            st.p1 if st else None, st.r1 if st else None,
            st.p2 if st else None, st.r2 if st else None,
            teach.threshold, teach.assumptions_met, len(R),
            len(teach.fp_flagged), len(teach.fn_flagged),
            pl, rl, pu, ru, au, at,
        )

    if view.X_u.shape[0] == 0:
        # every training example is labeled: plain supervised fit
        model = learners.fit(spec, view.X_l, view.y_l, seed=opts.seed)
        return DTState(model, RetrainingSet(), 0, (), stable=True)

    extra = None
    if teachers is None:
        t_idx, v_idx = split_teacher_data(view, opts.seed)
        X_t, y_t = view.X_l[t_idx], view.y_l[t_idx]
        X_v, y_v = view.X_l[v_idx], view.y_l[v_idx]
        if opts.include_labeled:
            extra = (X_t, y_t)
        tuned = opts.teacher_mode == "balanced_tuned"

        def teachers(model, u_pred, gen):
            fp_t, fn_t = train_teachers(X_t, y_t, model, opts.teacher_mode, opts.teacher_spec)
            pair = tune_teachers(fp_t, fn_t, X_v, y_v, model, opts.gate_sum,
                                 None if tuned else FIXED_THRESHOLD)
            # fixed-threshold strategies apply their teachers ungated
            apply = pair.assumptions_met or not tuned
            if not apply:
                return Teaching(False, pair.threshold, pair.stats, frozenset(), frozenset())
            fp, fn = estimate_errors(pair, view.X_u, u_pred, enforce_gate=tuned)
            return Teaching(pair.assumptions_met, pair.threshold, pair.stats, fp, fn)

    model, R = state.model, state.retraining_set
    history = []
    stable = False
    for gen in range(1, opts.max_generations + 1):
        u_pred = learners.predict(model, view.X_u)
        teach = teachers(model, u_pred, gen)
        new_R = R
        if teach.fp_flagged or teach.fn_flagged:
            new_R = update_retraining_set(R, teach.fp_flagged, teach.fn_flagged, gen)
        if new_R != R and len(new_R):
            model = retrain(spec, new_R, view.X_u, opts.seed, extra)
        stable = new_R == R
        R = new_R
        history.append(record(gen, teach, R, model))
        if stable:
            break
    return DTState(model, R, len(history), tuple(history), stable)

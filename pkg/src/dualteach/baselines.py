"""Self-Training and Co-Training wrappers around the same base learners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import learners
from .data import PartialDataset
from .learners import LearnerSpec, Model


@dataclass(frozen=True)
class SelfTrainOptions:
    add_fraction_per_iter: float = 0.1
    confidence_floor: float = 0.0
    max_iters: int = 20

    def __post_init__(self):
        if not 0.0 < self.add_fraction_per_iter <= 1.0:
            raise ValueError("add_fraction_per_iter must lie in (0, 1]")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass(frozen=True)
class CoTrainOptions:
    feature_split_seed: int = 0
    adds_per_class_per_round: int = 1
    max_rounds: int = 30

    def __post_init__(self):
        if self.adds_per_class_per_round < 1:
            raise ValueError("adds_per_class_per_round must be >= 1")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    training_size: int
    unlabeled_remaining: int
    added: int
    # model after this iteration's refit, kept for per-iteration reporting
    model: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SelfTrainResult:
    model: Model
    history: tuple[IterationRecord, ...]
    pseudo_labels: dict  # unlabeled id -> label assigned when it was added


def run_self_training(pd: PartialDataset, spec: LearnerSpec,
                      opts: SelfTrainOptions | None = None, seed: int = 0) -> SelfTrainResult:
    """Fit on the labeled pool, then repeatedly adopt the most confident
    predictions on the unlabeled pool as labels and refit.

    Confidence is ``|predict_score|``; ties are broken by id. Pseudo-labels
    are fixed once assigned.
    """
    opts = opts or SelfTrainOptions()
    view = pd.training_view()
    X_train, y_train = view.X_l, view.y_l
    model = learners.fit(spec, X_train, y_train, seed=seed)
    remaining = np.arange(view.X_u.shape[0])
    pseudo: dict[int, int] = {}
    history = []
    for it in range(1, opts.max_iters + 1):
        if remaining.size == 0:
            break
        per_iter = max(1, math.ceil(round(opts.add_fraction_per_iter * remaining.size, 9)))
        scores = learners.predict_score(model, view.X_u[remaining])
        conf = np.abs(scores)
        order = np.lexsort((remaining, -conf))
        eligible = order[conf[order] > opts.confidence_floor] if opts.confidence_floor > 0 else order
        chosen = eligible[:per_iter]
        if chosen.size == 0:
            break
        ids = remaining[chosen]
        labels = np.where(scores[chosen] > 0, 1, -1)
        pseudo.update(zip(ids.tolist(), labels.tolist()))
        X_train = np.vstack([X_train, view.X_u[ids]])
        y_train = np.concatenate([y_train, labels])
        remaining = np.setdiff1d(remaining, ids)
        model = learners.fit(spec, X_train, y_train, seed=seed)
        history.append(IterationRecord(it, len(y_train), remaining.size, ids.size, model))
    return SelfTrainResult(model, tuple(history), pseudo)


@dataclass(frozen=True, eq=False)
class CoTrainModel:
    """Two single-view models; the decision is the sign of their summed scores."""

    views: tuple[np.ndarray, np.ndarray]
    models: tuple[Model, Model]

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return sum(learners.predict_score(m, X[:, v]) for v, m in zip(self.views, self.models))

    def predict(self, X) -> np.ndarray:
        return np.where(self.score(X) > 0, 1, -1)


@dataclass(frozen=True)
class CoTrainResult:
    model: CoTrainModel
    history: tuple[IterationRecord, ...]
    donated: dict  # unlabeled id -> (donor view, label)


def split_features(feature_dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if feature_dim < 2:
        raise ValueError("co-training needs at least two features")
    perm = np.random.default_rng(seed).permutation(feature_dim)
    half = feature_dim // 2
    return np.sort(perm[:half]), np.sort(perm[half:])


def run_co_training(pd: PartialDataset, spec: LearnerSpec,
                    opts: CoTrainOptions | None = None, seed: int = 0) -> CoTrainResult:
    """Two models on disjoint random feature halves take turns donating
    their most confident positive and negative unlabeled examples to the
    other model's training pool.
    """
    opts = opts or CoTrainOptions()
    view = pd.training_view()
    views = split_features(view.feature_dim, opts.feature_split_seed)
    pools = [(view.X_l, view.y_l), (view.X_l, view.y_l)]
    models = [learners.fit(spec, view.X_l[:, v], view.y_l, seed=seed) for v in views]
    remaining = np.arange(view.X_u.shape[0])
    donated: dict[int, tuple[int, int]] = {}
    history = []
    k = opts.adds_per_class_per_round

    for rnd in range(1, opts.max_rounds + 1):
        if remaining.size == 0:
            break
        donor = (rnd - 1) % 2
        receiver = 1 - donor
        scores = learners.predict_score(models[donor], view.X_u[remaining][:, views[donor]])
        picks = []
        for side in (1, -1):
            cand = np.flatnonzero(np.where(scores > 0, 1, -1) == side)
            if cand.size == 0:
                continue
            # most confident first, ties by id
            order = cand[np.lexsort((remaining[cand], -np.abs(scores[cand])))]
            picks.extend((int(remaining[i]), side) for i in order[:k])
        if not picks:
            break
        ids = np.array([i for i, _ in picks])
        labels = np.array([s for _, s in picks])
        for i, s in picks:
            donated[i] = (donor, s)
        X_r, y_r = pools[receiver]
        pools[receiver] = (np.vstack([X_r, view.X_u[ids]]), np.concatenate([y_r, labels]))
        models[receiver] = learners.fit(spec, pools[receiver][0][:, views[receiver]], pools[receiver][1], seed=seed)
        remaining = np.setdiff1d(remaining, ids)
        history.append(IterationRecord(rnd, len(pools[receiver][1]), remaining.size, len(picks),
                                       CoTrainModel(views, tuple(models))))
    return CoTrainResult(CoTrainModel(views, tuple(models)), tuple(history), donated)

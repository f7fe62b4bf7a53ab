"""Supervised base learners: logistic regression, linear SVM, AdaBoost stumps.

All three are fit from scratch with numpy and are deterministic given
(spec, data, weights, seed). A model's decision is ``score > 0``; a score of
exactly zero (e.g. the all-zero initial model) is a negative prediction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

KINDS = ("logistic", "linear_svm", "adaboost_stumps")
BASE_ALIASES = {"lr": "logistic", "svm": "linear_svm", "ada": "adaboost_stumps"}
WEIGHTINGS = ("equal", "balanced")

MODEL_FORMAT = "dualteach.model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "logistic"
    class_weighting: str = "equal"
    # logistic regression: full-batch gradient descent
    l2: float = 1e-4
    learning_rate: float = 0.1
    max_epochs: int = 500
    tol: float = 1e-6
    # linear SVM: epoch-ordered subgradient descent on the primal
    C: float = 1.0
    svm_epochs: int = 200
    # AdaBoost
    n_rounds: int = 50

    def __post_init__(self):
        kind = BASE_ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.class_weighting not in WEIGHTINGS:
            raise ValueError(f"class_weighting must be one of {WEIGHTINGS}")
        if self.l2 < 0 or self.learning_rate <= 0 or self.tol < 0:
            raise ValueError("l2 and tol must be >= 0, learning_rate > 0")
        if self.max_epochs < 1 or self.svm_epochs < 1 or self.n_rounds < 1:
            raise ValueError("epoch and round counts must be >= 1")
        if self.C <= 0:
            raise ValueError("C must be positive")


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int  # +1: predict +1 when x[feature] > threshold
    alpha: float


@dataclass(frozen=True, eq=False)
class Model:
    spec: LearnerSpec
    feature_dim: int
    weights: np.ndarray
    bias: float = 0.0
    stumps: tuple[Stump, ...] = ()
    # +1/-1 for a constant classifier (single-class training data), else None
    constant: int | None = None
    trained_on_count: int = 0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
        if w.size != self.feature_dim:
            raise ValueError("weights must have feature_dim entries")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.feature_dim == other.feature_dim
            and np.array_equal(self.weights, other.weights)
            and self.bias == other.bias
            and self.stumps == other.stumps
            and self.constant == other.constant
            and self.trained_on_count == other.trained_on_count
        )

    @property
    def is_zero(self) -> bool:
        return (
            self.constant is None
            and not self.stumps
            and self.bias == 0.0
            and not np.any(self.weights)
        )


def zero_model(spec: LearnerSpec, feature_dim: int) -> Model:
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    return Model(spec, feature_dim, np.zeros(feature_dim))


def constant_model(spec: LearnerSpec, feature_dim: int, label: int, count: int = 0) -> Model:
    return Model(spec, feature_dim, np.zeros(feature_dim), constant=int(label), trained_on_count=count)


# --------------------------------------------------------------------------
# Prediction

def _as_matrix(m: Model, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != m.feature_dim:
        raise ValueError(f"expected {m.feature_dim} features, got shape {np.shape(x)}")
    return X, single


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z)))


def _stump_votes(stumps, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for s in stumps:
        h = np.where(X[:, s.feature] > s.threshold, 1.0, -1.0) * s.polarity
        out += s.alpha * h
    return out


def _scores(m: Model, X: np.ndarray) -> np.ndarray:
    if m.constant is not None:
        bound = 0.5 if m.spec.kind == "logistic" else 1.0
        return np.full(X.shape[0], bound * m.constant)
    if m.spec.kind == "adaboost_stumps":
        return _stump_votes(m.stumps, X)
    z = X @ m.weights + m.bias
    if m.spec.kind == "logistic":
        return _sigmoid(z) - 0.5
    return z


def predict_score(m: Model, x):
    """Real-valued score; positive means class +1.

    Logistic models report sigma(w.x + b) - 0.5, SVMs the margin w.x + b,
    AdaBoost the weighted stump vote. Accepts one example or a 2-D batch.
    """
    X, single = _as_matrix(m, x)
    s = _scores(m, X)
    return float(s[0]) if single else s


def predict(m: Model, x):
    s = predict_score(m, x)
    if np.ndim(s) == 0:
        return 1 if s > 0 else -1
    return np.where(s > 0, 1, -1)


def predict_proba(m: Model, x):
    """P(y = +1 | x) for logistic models."""
    if m.spec.kind != "logistic":
        raise TypeError(f"predict_proba needs a logistic model, got {m.spec.kind}")
    X, single = _as_matrix(m, x)
    if m.constant is not None:
        p = np.full(X.shape[0], 1.0 if m.constant == 1 else 0.0)
    else:
        p = _sigmoid(X @ m.weights + m.bias)
    return float(p[0]) if single else p


# --------------------------------------------------------------------------
# Fitting

def class_balance_weights(y: np.ndarray) -> np.ndarray:
    """n_total / (2 * n_class) per example; all ones for a 50/50 split."""
    y = np.asarray(y)
    n = y.size
    n_pos = int(np.sum(y == 1))
    n_neg = n - n_pos
    w = np.empty(n)
    w[y == 1] = n / (2.0 * n_pos) if n_pos else 0.0
    w[y != 1] = n / (2.0 * n_neg) if n_neg else 0.0
    return w


def logistic_loss(w, b, X, y, c, l2):
    """Weighted mean log-loss plus (l2/2)||w||^2 (bias unpenalized)."""
    margins = y * (X @ w + b)
    return float(np.sum(c * np.logaddexp(0.0, -margins)) / np.sum(c) + 0.5 * l2 * (w @ w))


def logistic_gradient(w, b, X, y, c, l2):
    margins = y * (X @ w + b)
    coef = -c * y * _sigmoid(-margins) / np.sum(c)
    return X.T @ coef + l2 * w, float(np.sum(coef))


def _fit_logistic(spec: LearnerSpec, X, y, c):
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(spec.max_epochs):
        gw, gb = logistic_gradient(w, b, X, y, c, spec.l2)
        if np.sqrt(gw @ gw + gb * gb) < spec.tol:
            break
        w -= spec.learning_rate * gw
        b -= spec.learning_rate * gb
    return w, b


def _fit_linear_svm(spec: LearnerSpec, X, y, c, seed):
    """Pegasos-style subgradient descent on
    (lam/2)||(w, b)||^2 + mean_i c_i * hinge(y_i (w.x_i + b)), lam = 1/(C n).

    The bias is folded in as a constant feature. ``w = scale * v`` keeps the
    shrink step O(1); the visiting order is one seeded permutation reused
    every epoch.
    """
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    lam = 1.0 / (spec.C * n)
    order = np.random.default_rng(seed).permutation(n)
    rows = [Xa[i] for i in order]
    ys = [float(y[i]) for i in order]
    cs = [float(c[i]) for i in order]
    v = np.zeros(d + 1)
    scale = 1.0
    t = 0
    for _ in range(spec.svm_epochs):
        for x_i, y_i, c_i in zip(rows, ys, cs):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y_i * scale * (v @ x_i)
            scale *= 1.0 - eta * lam
            if scale == 0.0:  # only at t == 1
                v[:] = 0.0
                scale = 1.0
            if margin < 1.0:
                v += (eta * c_i * y_i / scale) * x_i
        if scale < 1e-9:
            v *= scale
            scale = 1.0
    wa = scale * v
    return wa[:d], float(wa[d])


def _best_stump(X, y, dist):
    """Weighted-error-minimizing stump over midpoint thresholds.

    Candidates are enumerated in (feature, threshold ascending, polarity +1
    then -1) order and the first minimum wins.
    """
    best = None
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        pos_w = np.where(y[order] == 1, dist[order], 0.0)
        neg_w = dist[order] - pos_w
        # boundaries between distinct sorted values
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        thresholds = 0.5 * (xs[cut] + xs[cut + 1])
        pos_below = np.cumsum(pos_w)[cut]
        neg_below = np.cumsum(neg_w)[cut]
        neg_above = neg_w.sum() - neg_below
        pos_above = pos_w.sum() - pos_below
        err_plus = pos_below + neg_above  # polarity +1: predict +1 above
        err_minus = neg_below + pos_above
        errs = np.column_stack([err_plus, err_minus]).ravel()
        k = int(np.argmin(errs))
        if best is None or errs[k] < best[0]:
            best = (float(errs[k]), f, float(thresholds[k // 2]), 1 if k % 2 == 0 else -1)
    return best


def _fit_adaboost(spec: LearnerSpec, X, y, c):
    dist = c / c.sum()
    stumps = []
    for _ in range(spec.n_rounds):
        found = _best_stump(X, y, dist)
        if found is None:
            break
        err, f, thr, pol = found
        if err >= 0.5:
            break
        err = max(err, 1e-10)
        alpha = 0.5 * np.log((1.0 - err) / err)
        stumps.append(Stump(f, thr, pol, float(alpha)))
        h = np.where(X[:, f] > thr, 1.0, -1.0) * pol
        dist = dist * np.exp(-alpha * y * h)
        dist /= dist.sum()
        if err <= 1e-10:
            break
    return tuple(stumps)


def fit(spec: LearnerSpec, X, y, sample_weight=None, seed: int = 0) -> Model:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit needs a nonempty 2-D training set")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must match examples")
    n, d = X.shape
    if sample_weight is None:
        c = np.ones(n)
    else:
        c = np.asarray(sample_weight, dtype=np.float64)
        if c.shape != (n,) or np.any(c <= 0) or not np.all(np.isfinite(c)):
            raise ValueError("sample weights must be positive, finite and one per example")
    classes = np.unique(y)
    if classes.size == 1:
        return constant_model(spec, d, int(classes[0]), n)
    if spec.class_weighting == "balanced":
        c = c * class_balance_weights(y)
    yf = y.astype(np.float64)

    if spec.kind == "logistic":
        w, b = _fit_logistic(spec, X, yf, c)
        return Model(spec, d, w, b, trained_on_count=n)
    if spec.kind == "linear_svm":
        w, b = _fit_linear_svm(spec, X, yf, c, seed)
        return Model(spec, d, w, b, trained_on_count=n)
    stumps = _fit_adaboost(spec, X, yf, c)
    if not stumps:
        # every feature constant: fall back to the weighted majority
        label = 1 if c[y == 1].sum() > c[y == -1].sum() else -1
        return constant_model(spec, d, label, n)
    return Model(spec, d, np.zeros(d), stumps=stumps, trained_on_count=n)


# --------------------------------------------------------------------------
# Serialization

def model_to_dict(m: Model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": m.spec.kind,
        "hyperparameters": asdict(m.spec),
        "feature_dim": m.feature_dim,
        "trained_on_count": m.trained_on_count,
        "constant": m.constant,
        "weights": m.weights.tolist(),
        "bias": m.bias,
        "stumps": [[s.feature, s.threshold, s.polarity, s.alpha] for s in m.stumps],
    }


def model_from_dict(doc: dict) -> Model:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized dualteach model")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    spec = LearnerSpec(**doc["hyperparameters"])
    return Model(
        spec,
        int(doc["feature_dim"]),
        np.asarray(doc["weights"], dtype=np.float64),
        float(doc["bias"]),
        tuple(Stump(int(f), float(t), int(p), float(a)) for f, t, p, a in doc["stumps"]),
        doc["constant"],
        int(doc["trained_on_count"]),
    )


def dumps_model(m: Model) -> str:
    return json.dumps(model_to_dict(m), sort_keys=True)


def loads_model(text: str) -> Model:
    return model_from_dict(json.loads(text))

"""Binary-classification datasets: LIBSVM parsing, synthetic generation,
normalization and the train/test and labeled/unlabeled splits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed LIBSVM input. ``line`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class SplitError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        y = np.array(self.y, dtype=np.int64, copy=True)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if X.shape[0] == 0:
            raise ValueError("dataset must contain at least one example")
        if X.shape[1] == 0:
            raise ValueError("feature_dim must be positive")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be +1 or -1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    def subset(self, idx, name: str | None = None) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], name or self.name)

    def class_counts(self) -> dict[int, int]:
        return {1: int(np.sum(self.y == 1)), -1: int(np.sum(self.y == -1))}


@dataclass(frozen=True, eq=False)
class LabeledView:
    """What learning code is allowed to see: labeled pool plus raw unlabeled features."""

    X_l: np.ndarray
    y_l: np.ndarray
    X_u: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.X_l.shape[1]


@dataclass(frozen=True, eq=False)
class PartialDataset:
    X_l: np.ndarray
    y_l: np.ndarray
    X_u: np.ndarray
    hidden_truth: np.ndarray = field(repr=False)
    name: str = "dataset"

    def __post_init__(self):
        X_l = np.array(self.X_l, dtype=np.float64, copy=True)
        y_l = np.array(self.y_l, dtype=np.int64, copy=True)
        d = X_l.shape[1]
        X_u = np.array(self.X_u, dtype=np.float64, copy=True).reshape(-1, d)
        truth = np.array(self.hidden_truth, dtype=np.int64, copy=True).reshape(-1)
        if X_l.shape[0] != y_l.shape[0]:
            raise ValueError("labeled examples and labels differ in length")
        if X_u.shape[0] != truth.shape[0]:
            raise ValueError("hidden_truth must cover every unlabeled example")
        if y_l.shape[0] < 2 or not (np.any(y_l == 1) and np.any(y_l == -1)):
            raise SplitError("labeled pool needs at least one example of each class")
        for name, arr in (("X_l", X_l), ("y_l", y_l), ("X_u", X_u), ("hidden_truth", truth)):
            object.__setattr__(self, name, _frozen(arr))

    @property
    def feature_dim(self) -> int:
        return self.X_l.shape[1]

    @property
    def n_labeled(self) -> int:
        return self.X_l.shape[0]

    @property
    def n_unlabeled(self) -> int:
        return self.X_u.shape[0]

    def training_view(self) -> LabeledView:
        return LabeledView(self.X_l, self.y_l, self.X_u)


# --------------------------------------------------------------------------
# LIBSVM format

def _map_labels(raw: list[float]) -> list[int]:
    distinct = sorted(set(raw))
    if set(distinct) <= {1.0, -1.0}:
        return [1 if v > 0 else -1 for v in raw]
    if len(distinct) == 1:
        return [1 if distinct[0] > 0 else -1] * len(raw)
    if len(distinct) > 2:
        raise ParseError(f"expected a binary problem, found {len(distinct)} distinct labels")
    low = distinct[0]
    return [-1 if v == low else 1 for v in raw]


def parse_libsvm(text: str, name: str = "dataset") -> Dataset:
    """Parse LIBSVM sparse text (``label idx:val ...``) into a dense Dataset.

    Labels other than +/-1 are mapped by order: the smaller of two distinct
    values becomes -1. Absent indices are 0.0; blank lines are skipped.
    """
    labels: list[float] = []
    rows: list[dict[int, float]] = []
    max_index = 0
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ParseError(f"non-numeric label {parts[0]!r}", line_no) from None
        if not math.isfinite(label):
            raise ParseError(f"non-finite label {parts[0]!r}", line_no)
        feats: dict[int, float] = {}
        prev = 0
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"token {tok!r} is not idx:val", line_no)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"non-numeric token {tok!r}", line_no) from None
            if idx <= 0:
                raise ParseError(f"index {idx} must be >= 1", line_no)
            if idx in feats:
                raise ParseError(f"duplicate index {idx}", line_no)
            if idx < prev:
                raise ParseError(f"index {idx} follows {prev}; indices must increase", line_no)
            if not math.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", line_no)
            feats[idx] = val
            prev = idx
        max_index = max(max_index, prev)
        labels.append(label)
        rows.append(feats)

    if not rows:
        raise ParseError("empty input")
    X = np.zeros((len(rows), max(max_index, 1)))
    for i, feats in enumerate(rows):
        for idx, val in feats.items():
            X[i, idx - 1] = val
    return Dataset(X, np.array(_map_labels(labels)), name)


def format_libsvm(d: Dataset) -> str:
    """Inverse of :func:`parse_libsvm`; zero entries are omitted.

    If the last column is all zero the first row spells it out so that the
    parsed feature_dim survives the round trip.
    """
    d_last = d.feature_dim - 1
    pad_last = not np.any(d.X[:, d_last])
    lines = []
    for i, (x, label) in enumerate(zip(d.X, d.y)):
        toks = ["+1" if label == 1 else "-1"]
        toks.extend(f"{j + 1}:{float(v)!r}" for j, v in enumerate(x) if v != 0.0)
        if i == 0 and pad_last:
            toks.append(f"{d_last + 1}:0.0")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def load_libsvm(path: str | Path) -> Dataset:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_libsvm(text, name=path.stem)


def load_heart_scale() -> Dataset:
    """The 270-example heart scale set shipped with LIBSVM (bundled)."""
    text = resources.files("dualteach.datasets").joinpath("heart_scale").read_text("utf-8")
    return parse_libsvm(text, name="heart_scale")


BUILTIN_DATASETS = {"heart_scale": load_heart_scale}


# --------------------------------------------------------------------------
# Preprocessing and splits

def normalize_features(train: Dataset, others=()) -> tuple[Dataset, list[Dataset]]:
    """Min-max scale every feature to [0, 1] using ranges from ``train`` only.

    Constant training columns map to 0.0. The same affine map is applied to
    ``others``, whose values may land outside [0, 1].
    """
    lo = train.X.min(axis=0)
    span = train.X.max(axis=0) - lo
    constant = span == 0
    scale = np.where(constant, 1.0, span)

    def apply(d: Dataset) -> Dataset:
        if d.feature_dim != train.feature_dim:
            raise ValueError("all datasets must share feature_dim")
        Z = (d.X - lo) / scale
        Z[:, constant] = 0.0
        return Dataset(Z, d.y, d.name)

    return apply(train), [apply(o) for o in others]


def _stratified_take(y: np.ndarray, fraction: float, rng: np.random.Generator, rounding):
    """Shuffle each class and take ``rounding(fraction * n_class)`` from it.

    Returns (taken, rest) index arrays, each sorted.
    """
    taken, rest = [], []
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        k = int(rounding(fraction * idx.size))
        taken.append(idx[:k])
        rest.append(idx[k:])
    return np.sort(np.concatenate(taken)), np.sort(np.concatenate(rest))


def _largest_remainder(counts: dict[int, int], total: int) -> dict[int, int]:
    """Integer allocation of ``total`` across classes proportional to counts."""
    n = sum(counts.values())
    exact = {c: total * k / n for c, k in counts.items()}
    alloc = {c: int(math.floor(v)) for c, v in exact.items()}
    # ties go to the larger class, then to +1
    order = sorted(counts, key=lambda c: (-(exact[c] - alloc[c]), -counts[c], -c))
    for c in order[: total - sum(alloc.values())]:
        alloc[c] += 1
    return alloc


def split_train_test(d: Dataset, train_fraction: float = 0.75, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise SplitError("train_fraction must lie in (0, 1)")
    counts = d.class_counts()
    for cls, k in counts.items():
        if k < 2:
            raise SplitError(f"class {cls:+d} has {k} example(s); need at least 2 to split")
    n_train = int(round(train_fraction * len(d)))
    n_train = min(max(n_train, 2), len(d) - 2)
    alloc = _largest_remainder(counts, n_train)
    for cls in alloc:
        alloc[cls] = min(max(alloc[cls], 1), counts[cls] - 1)

    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (1, -1):
        idx = np.flatnonzero(d.y == cls)
        idx = idx[rng.permutation(idx.size)]
        train_idx.append(idx[: alloc[cls]])
        test_idx.append(idx[alloc[cls]:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return d.subset(train_idx, f"{d.name}:train"), d.subset(test_idx, f"{d.name}:test")


def split_labeled_unlabeled(train: Dataset, labeled_ratio: float, seed: int = 0) -> PartialDataset:
    """Stratified selection of ceil(labeled_ratio * n) labeled examples.

    The remainder becomes the unlabeled pool; its labels move to
    ``hidden_truth`` and are never handed to training code.
    """
    if not 0.0 < labeled_ratio <= 1.0:
        raise SplitError("labeled_ratio must lie in (0, 1]")
    n = len(train)
    n_lab = min(n, math.ceil(round(labeled_ratio * n, 9)))
    counts = train.class_counts()
    alloc = _largest_remainder(counts, n_lab)
    for cls in alloc:
        if counts[cls] == 0:
            raise SplitError("training set holds a single class")
        alloc[cls] = max(alloc[cls], 1)
    if sum(alloc.values()) > n_lab:
        raise SplitError(
            f"labeled pool of {n_lab} cannot hold both classes; raise labeled_ratio"
        )

    rng = np.random.default_rng(seed)
    lab, unl = [], []
    for cls in (1, -1):
        idx = np.flatnonzero(train.y == cls)
        idx = idx[rng.permutation(idx.size)]
        lab.append(idx[: alloc[cls]])
        unl.append(idx[alloc[cls]:])
    lab = np.sort(np.concatenate(lab))
    unl = np.sort(np.concatenate(unl))
    return PartialDataset(
        train.X[lab], train.y[lab], train.X[unl].reshape(-1, train.feature_dim), train.y[unl], train.name
    )


def generate_two_gaussians(
    n_per_class: int,
    dim: int,
    separation: float,
    noise_flip_rate: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Two isotropic unit-variance Gaussians centred at +/- separation/2 * ones."""
    if n_per_class < 1 or dim < 1:
        raise ValueError("n_per_class and dim must be >= 1")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    if not 0.0 <= noise_flip_rate < 0.5:
        raise ValueError("noise_flip_rate must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    centre = np.full(dim, separation / 2.0)
    X = np.vstack([
        rng.standard_normal((n_per_class, dim)) + centre,
        rng.standard_normal((n_per_class, dim)) - centre,
    ])
    y = np.concatenate([np.ones(n_per_class, np.int64), -np.ones(n_per_class, np.int64)])
    flips = rng.random(y.size) < noise_flip_rate
    y = np.where(flips, -y, y)
    return Dataset(X, y, f"gauss{n_per_class}x{dim}")

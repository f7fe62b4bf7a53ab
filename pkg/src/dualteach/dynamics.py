"""Expected false-positive/false-negative counts as a 2x2 linear system.

With FP-teacher quality (P+, R+) and FN-teacher quality (P-, R-), one
generation maps e = (alpha, beta) to M e with

    M = [[1 - R+,             (1 - P-)/P- * R-],
         [(1 - P+)/P+ * R+,   1 - R-          ]]

The error decays iff the spectral radius of M is below one, which holds
exactly when R+ R- > 0 and P+ + P- > 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EIGEN_TOL = 1e-12


@dataclass(frozen=True)
class TeacherQuality:
    p_plus: float
    r_plus: float
    p_minus: float
    r_minus: float

    def __post_init__(self):
        for name in ("p_plus", "r_plus", "p_minus", "r_minus"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.p_plus == 0.0 and self.r_plus > 0.0:
            raise ValueError("p_plus = 0 with r_plus > 0 makes the transition undefined")
        if self.p_minus == 0.0 and self.r_minus > 0.0:
            raise ValueError("p_minus = 0 with r_minus > 0 makes the transition undefined")

    @classmethod
    def of(cls, q) -> TeacherQuality:
        return q if isinstance(q, cls) else cls(*q)


@dataclass(frozen=True)
class ErrorState:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta >= 0 and math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("error counts must be finite and nonnegative")

    @property
    def norm(self) -> float:
        return math.hypot(self.alpha, self.beta)


@dataclass(frozen=True)
class TransitionMatrix:
    m11: float
    m12: float
    m21: float
    m22: float

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])


@dataclass(frozen=True)
class EigenReport:
    lambda1: float
    lambda2: float
    delta: float
    max_magnitude: float


def _mis_flag_rate(p: float, r: float) -> float:
    # a channel with zero recall moves no error mass, whatever its precision
    if r == 0.0:
        return 0.0
    return (1.0 - p) / p * r


def transition_matrix(q) -> TransitionMatrix:
    q = TeacherQuality.of(q)
    return TransitionMatrix(
        1.0 - q.r_plus,
        _mis_flag_rate(q.p_minus, q.r_minus),
        _mis_flag_rate(q.p_plus, q.r_plus),
        1.0 - q.r_minus,
    )


def _discriminant(q: TeacherQuality, slack: float) -> float:
    """delta = (R+ - R-)^2 + 4 m12 m21, with slack = 1 - P+ - P-.

    On the line slack = 0 the product m12 m21 equals R+ R- exactly, so delta
    is (R+ + R-)^2 and |lambda|max is exactly 1; computing the product from
    rounded factors would land a few ulps either side.
    """
    prod = q.r_plus * q.r_minus
    if prod == 0.0:
        # a dead channel zeroes one off-diagonal entry
        return (q.r_plus - q.r_minus) ** 2
    if slack == 0.0:
        return (q.r_plus + q.r_minus) ** 2
    M = transition_matrix(q)
    return (q.r_plus - q.r_minus) ** 2 + 4.0 * M.m12 * M.m21


def _report(q: TeacherQuality, slack: float) -> EigenReport:
    delta = _discriminant(q, slack)
    trace = 2.0 - q.r_minus - q.r_plus
    root = math.sqrt(delta)
    lam1 = (trace + root) / 2.0
    lam2 = (trace - root) / 2.0
    return EigenReport(lam1, lam2, delta, max(abs(lam1), abs(lam2)))


def eigen_report(q, check: bool = True) -> EigenReport:
    """Closed-form eigenvalues of the transition matrix.

    lambda = ((2 - R- - R+) +/- sqrt(delta)) / 2 with
    delta = (R+ - R-)^2 + 4 (1-P+)(1-P-)/(P+ P-) R+ R-  (always >= 0).
    With ``check`` the result is compared against a numeric eigensolve;
    disagreement beyond 1e-12 (scaled by the matrix magnitude) raises.
    """
    q = TeacherQuality.of(q)
    report = _report(q, math.fsum((1.0, -q.p_plus, -q.p_minus)))
    if check:
        M = transition_matrix(q)
        num = numeric_eigenvalues(M)
        scale = max(1.0, float(np.max(np.abs(M.array))))
        if abs(num[0] - report.lambda1) > EIGEN_TOL * scale or abs(num[1] - report.lambda2) > EIGEN_TOL * scale:
            raise ArithmeticError(f"closed form {report.lambda1, report.lambda2} disagrees with numeric {num}")
    return report


def numeric_eigenvalues(M: TransitionMatrix) -> tuple[float, float]:
    """Eigenvalues via LAPACK, real parts, descending."""
    ev = np.linalg.eigvals(M.array)
    ev = np.sort(ev.real)[::-1]
    return float(ev[0]), float(ev[1])


def converges(q) -> bool:
    q = TeacherQuality.of(q)
    return q.r_plus * q.r_minus > 0 and q.p_plus + q.p_minus > 1.0


def simulate_trajectory(q, e0, steps: int) -> list[ErrorState]:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    A = transition_matrix(q).array
    e = np.array([e0.alpha, e0.beta] if isinstance(e0, ErrorState) else e0, dtype=np.float64)
    out = [ErrorState(*e)]
    for _ in range(steps):
        e = A @ e
        # float round-off can leave -0.0 style residue
        e = np.maximum(e, 0.0)
        out.append(ErrorState(*e))
    return out


# --------------------------------------------------------------------------
# Surfaces

@dataclass(frozen=True)
class SweepRow:
    p_plus: float
    p_minus: float
    r_plus: float
    r_minus: float
    lambda1: float
    lambda2: float
    delta: float
    max_magnitude: float


def _row(pp, pm, rp, rm, slack) -> SweepRow:
    if (pp == 0.0 and rp > 0.0) or (pm == 0.0 and rm > 0.0):
        inf = math.inf
        return SweepRow(pp, pm, rp, rm, inf, -inf, inf, inf)
    rep = _report(TeacherQuality(pp, rp, pm, rm), slack)
    return SweepRow(pp, pm, rp, rm, rep.lambda1, rep.lambda2, rep.delta, rep.max_magnitude)


def sweep_eigen_surface(grid_resolution: int, vary: str = "precision",
                        r_plus: float = 0.5, r_minus: float = 0.5,
                        p_plus: float = 0.4, p_minus: float = 0.6) -> list[SweepRow]:
    """|lambda|max over a grid on the unit square.

    ``vary="precision"`` sweeps (P+, P-) over i/(n-1) at the given recalls;
    cells with a zero precision against a positive recall have an unbounded
    spectral radius and are reported as inf. ``vary="recall"`` sweeps
    (R+, R-) at the given precisions.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    if vary not in ("precision", "recall"):
        raise ValueError("vary must be 'precision' or 'recall'")
    n = grid_resolution - 1
    grid = [i / n for i in range(grid_resolution)]
    rows = []
    if vary == "precision":
        for i, a in enumerate(grid):
            for j, b in enumerate(grid):
                # slack from the grid indices, so cells on P+ + P- = 1 hit it exactly
                rows.append(_row(a, b, r_plus, r_minus, (n - i - j) / n))
    else:
        slack = math.fsum((1.0, -p_plus, -p_minus))
        for a in grid:
            for b in grid:
                rows.append(_row(p_plus, p_minus, a, b, slack))
    return rows


# --------------------------------------------------------------------------
# Monte-Carlo check of the recursion

@dataclass
class OracleRun:
    mean: list[ErrorState]
    std_err: list[tuple[float, float]]
    samples: np.ndarray  # trials x (steps + 1) x 2
    warnings: list[str] = field(default_factory=list)


def _stochastic_round(x: float, rng: np.random.Generator) -> int:
    lo = math.floor(x)
    return lo + int(rng.random() < x - lo)


def _oracle_trial(q: TeacherQuality, truth: np.ndarray, steps: int, rng, warnings: list, trial: int):
    n = truth.size
    stored = np.zeros(n, dtype=np.int8)  # memorizer: 0 = not in re-training set
    out = np.empty((steps + 1, 2))

    def errors(pred):
        return (int(np.sum((pred == 1) & (truth == -1))), int(np.sum((pred == -1) & (truth == 1))))

    pred = np.where(stored != 0, stored, -1)
    out[0] = errors(pred)
    channels = ((1, q.p_plus, q.r_plus), (-1, q.p_minus, q.r_minus))
    for k in range(1, steps + 1):
        updates = []
        for side, p, r in channels:
            in_channel = pred == side
            wrong = np.flatnonzero(in_channel & (truth != side))
            right = np.flatnonzero(in_channel & (truth == side))
            caught = wrong[rng.random(wrong.size) < r] if r > 0 else wrong[:0]
            n_false = _stochastic_round(caught.size * (1.0 - p) / p, rng) if caught.size else 0
            if n_false > right.size:
                warnings.append(f"trial {trial} step {k}: channel {side:+d} saturated "
                                f"({n_false} mis-flags requested, {right.size} available)")
                n_false = right.size
            false = rng.choice(right, n_false, replace=False) if n_false else right[:0]
            # a flagged example is relabelled to the opposite of the base output
            updates.append((np.concatenate([caught, false]), -side))
        for idx, label in updates:
            stored[idx] = label
        pred = np.where(stored != 0, stored, -1)
        out[k] = errors(pred)
    return out


def simulate_oracle_run(q, n_unlabeled: int, positive_fraction: float, steps: int,
                        trials: int, seed: int = 0) -> OracleRun:
    """Stochastic realization of the recursion with oracle teachers.

    The learner memorizes its re-training set (predicting -1 elsewhere), so
    flagged mistakes are never repeated. Each step a teacher catches each
    true error in its channel with probability R and mis-flags
    (caught * (1-P)/P) correct examples from the same channel, rounded
    stochastically so the count is unbiased. Starting state is
    (0, number of positives).
    """
    q = TeacherQuality.of(q)
    if n_unlabeled < 1 or trials < 1 or steps < 1:
        raise ValueError("n_unlabeled, trials and steps must be >= 1")
    if not 0.0 <= positive_fraction <= 1.0:
        raise ValueError("positive_fraction must lie in [0, 1]")
    n_pos = int(round(positive_fraction * n_unlabeled))
    truth = np.concatenate([np.ones(n_pos, np.int8), -np.ones(n_unlabeled - n_pos, np.int8)])
    warnings: list[str] = []
    children = np.random.SeedSequence(seed).spawn(trials)
    samples = np.stack([
        _oracle_trial(q, truth, steps, np.random.default_rng(c), warnings, t)
        for t, c in enumerate(children)
    ])
    mean = samples.mean(axis=0)
    if trials > 1:
        se = samples.std(axis=0, ddof=1) / math.sqrt(trials)
    else:
        se = np.zeros_like(mean)
    return OracleRun(
        [ErrorState(float(a), float(b)) for a, b in mean],
        [(float(a), float(b)) for a, b in se],
        samples,
        warnings,
    )

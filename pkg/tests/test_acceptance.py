"""One test per acceptance criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the terminal summary under "acceptance criteria".
"""

import statistics
import time

import numpy as np

from dualteach import learners
from dualteach.data import (Dataset, ParseError, format_libsvm, generate_two_gaussians, load_heart_scale,
                            normalize_features, parse_libsvm, split_labeled_unlabeled, split_train_test)
from dualteach.dual_teaching import (DTOptions, Teaching, TeacherStats, channel_stats, run_dual_teaching,
                                     threshold_schedule, tune_teachers)
from dualteach.dynamics import (TeacherQuality, converges, eigen_report, numeric_eigenvalues,
                                simulate_oracle_run, simulate_trajectory, sweep_eigen_surface,
                                transition_matrix)
from dualteach.experiment import Cell, ExperimentConfig, run_cell
from dualteach.learners import LearnerSpec, Model
from dualteach.metrics import accuracy_of

SEEDS = range(10)


def test_criterion_1_theory_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    mismatches = 0
    worst = 0.0
    n = 0
    while n < 10_000:
        pp, rp, pm, rm = rng.uniform(0.0, 1.0, 4)
        if pp == 0.0 or pm == 0.0:
            continue
        q = TeacherQuality(pp, rp, pm, rm)
        r = eigen_report(q, check=False)
        if converges(q) != (r.max_magnitude < 1 - 1e-12):
            mismatches += 1
        M = transition_matrix(q)
        num = numeric_eigenvalues(M)
        scale = max(1.0, float(np.abs(M.array).max()))
        worst = max(worst, abs(num[0] - r.lambda1) / scale, abs(num[1] - r.lambda2) / scale)
        n += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and worst <= 1e-12 and elapsed < 5
    report(1, ok, f"{mismatches} predicate mismatches / 10000, max eigen gap {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_surfaces(report):
    t0 = time.perf_counter()
    res = 101
    worst_line = 0.0
    for pp in (0.3, 0.4, 0.5, 0.75):
        for r in sweep_eigen_surface(res, "recall", p_plus=pp, p_minus=1 - pp):
            worst_line = max(worst_line, abs(r.max_magnitude - 1.0))
    bad = 0
    for r in sweep_eigen_surface(res, "precision", r_plus=0.5, r_minus=0.5):
        # nominal grid sums, from the grid indices
        total = round(r.p_plus * (res - 1)) + round(r.p_minus * (res - 1))
        if total > 1.01 * (res - 1) and not r.max_magnitude < 1:
            bad += 1
        if total <= res - 1 and not r.max_magnitude >= 1:
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = worst_line <= 1e-12 and bad == 0 and elapsed < 5
    report(2, ok, f"recall surface max |1-|lambda|max| = {worst_line:.1e}, "
                  f"{bad} precision-surface cells on the wrong side, {elapsed:.2f}s")


def test_criterion_3_monte_carlo(report):
    t0 = time.perf_counter()
    q = (0.8, 0.5, 0.8, 0.5)
    n = 20_000
    run = simulate_oracle_run(q, n, 0.5, 20, 50, seed=0)
    model = simulate_trajectory(q, (0.0, n / 2), 20)
    worst = 0.0
    ok = True
    for k in range(21):
        mu, se, th = run.mean[k], run.std_err[k], model[k]
        for m, s, t in ((mu.alpha, se[0], th.alpha), (mu.beta, se[1], th.beta)):
            if s == 0:
                ok &= m == t
            else:
                z = abs(m - t) / s
                worst = max(worst, z)
                ok &= z <= 3
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60 and not run.warnings
    report(3, ok, f"max |mean - model| = {worst:.2f} standard errors over steps 0..20, {elapsed:.1f}s")


def _never(model, u_pred, gen):
    return Teaching(False, 1.05, None, frozenset(), frozenset())


def test_criterion_4_safety_and_oracle(report):
    d = generate_two_gaussians(100, 2, 8.0, seed=1)
    pd = split_labeled_unlabeled(d, 0.2, seed=1)
    spec = LearnerSpec("svm")
    floor = run_dual_teaching(pd, spec, DTOptions(max_generations=10), teachers=_never)
    safe = floor.model.is_zero and len(floor.retraining_set) == 0

    truth = pd.hidden_truth

    def oracle(model, u_pred, gen):
        fp = frozenset(np.flatnonzero((u_pred == 1) & (truth == -1)).tolist())
        fn = frozenset(np.flatnonzero((u_pred == -1) & (truth == 1)).tolist())
        return Teaching(True, 0.5, None, fp, fn)

    st = run_dual_teaching(pd, spec, DTOptions(), teachers=oracle)
    acc = accuracy_of(learners.predict(st.model, pd.X_u), truth)
    ok = safe and acc == 1.0 and st.stable and st.generation <= 3
    report(4, ok, f"failed-gate run: zero model={floor.model.is_zero}, |R|={len(floor.retraining_set)}; "
                  f"oracle run: unlabeled accuracy {acc:.3f}, stable at generation {st.generation}")


def _heart_cell(method, ratio, seed, mode="balanced_tuned"):
    cfg = ExperimentConfig(dataset="heart_scale", teacher_mode=mode)
    return run_cell(_heart_cell.data, cfg, Cell(method, "svm", mode, ratio, seed)).summary


_heart_cell.data = load_heart_scale()


def test_criterion_5_heart_scale(report):
    t0 = time.perf_counter()
    dt = [_heart_cell("dual_teaching", 0.2, s) for s in SEEDS]
    full = [_heart_cell("supervised", 1.0, s) for s in SEEDS]
    deltas = [r["delta"] for r in dt]
    med = statistics.median(deltas)
    mean_dt = statistics.fmean(r["final_test_accuracy"] for r in dt)
    mean_full = statistics.fmean(r["final_test_accuracy"] for r in full)
    elapsed = time.perf_counter() - t0
    ok = med >= 0 and mean_dt >= mean_full - 0.10 and elapsed < 120
    report(5, ok, f"median delta {med:+.4f} (need >= 0); mean accuracy {mean_dt:.4f} vs fully supervised "
                  f"{mean_full:.4f} (need within 0.10); {elapsed:.1f}s")


def _unlabeled_accuracy(mode, seed):
    train, test = split_train_test(_heart_cell.data, 0.75, seed)
    train, _ = normalize_features(train, [test])
    pd = split_labeled_unlabeled(train, 0.3, seed)
    st = run_dual_teaching(pd, LearnerSpec("svm"), DTOptions(teacher_mode=mode, seed=seed))
    return accuracy_of(learners.predict(st.model, pd.X_u), pd.hidden_truth)


def test_criterion_6_strategy_ordering(report):
    means = {m: statistics.fmean(_unlabeled_accuracy(m, s) for s in SEEDS)
             for m in ("balanced_tuned", "balanced", "equal_weight")}
    ok = means["balanced_tuned"] >= means["balanced"] >= means["equal_weight"] - 0.02
    report(6, ok, "mean unlabeled accuracy " + ", ".join(f"{m} {v:.4f}" for m, v in means.items())
                  + " (need tuned >= balanced >= equal - 0.02)")


def test_criterion_7_tuning_mechanics(report):
    import math
    # teachers read sigmoid(x0); x1 = 1 marks examples the base calls positive
    base = Model(LearnerSpec("svm"), 2, np.array([0.0, 1.0]), -0.5)
    teacher = Model(LearnerSpec("lr"), 2, np.array([1.0, 0.0]), 0.0)
    table = ([(0.9, 1, True)] * 4 + [(0.29, 1, True)] * 2 + [(0.9, 1, False)] + [(0.29, 1, False)] * 3
             + [(0.9, 0, True)] * 2 + [(0.29, 0, True)] * 2 + [(0.9, 0, False)] * 2 + [(0.29, 0, False)] * 4)
    X = np.array([[math.log(p / (1 - p)), c] for p, c, _ in table])
    y = np.array([(-1 if w else 1) if c else (1 if w else -1) for _, c, w in table])
    pair = tune_teachers(teacher, teacher, X, y, base)

    # a gate nothing can pass, and random teachers, bound the loop
    fail = tune_teachers(teacher, teacher, X, y, base, gate_sum=2.0)
    rng = np.random.default_rng(0)
    worst_T, most = 0.0, 0
    for _ in range(200):
        t1 = Model(LearnerSpec("lr"), 2, rng.normal(size=2), float(rng.normal()))
        t2 = Model(LearnerSpec("lr"), 2, rng.normal(size=2), float(rng.normal()))
        p = tune_teachers(t1, t2, rng.normal(size=(12, 2)), rng.choice([-1, 1], 12), base,
                          gate_sum=float(rng.uniform(0.5, 2.0)))
        worst_T, most = max(worst_T, p.threshold), max(most, p.evaluations)
    ok = (pair.threshold == 0.30 and fail.evaluations == 19 and fail.threshold == 1.05
          and most <= 19 and worst_T <= 1.05 and len(threshold_schedule()) == 19)
    report(7, ok, f"fixture T={pair.threshold:.2f}; failing gate: {fail.evaluations} evaluations, "
                  f"T={fail.threshold:.2f}; random teachers: max {most} evaluations, max T {worst_T:.2f}")


def test_criterion_8_numerical_hygiene(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n, d = rng.integers(2, 15), rng.integers(1, 6)
        X, y = rng.normal(size=(n, d)), rng.choice([-1.0, 1.0], n)
        c = rng.uniform(0.2, 3.0, n)
        w, b, l2 = rng.normal(size=d), float(rng.normal()), 1e-4
        gw, gb = learners.logistic_gradient(w, b, X, y, c, l2)
        h = 1e-6
        num = []
        for j in range(d + 1):
            e = np.zeros(d + 1)
            e[j] = h
            f = lambda v: learners.logistic_loss(v[:d], v[d], X, y, c, l2)
            v = np.r_[w, b]
            num.append((f(v + e) - f(v - e)) / (2 * h))
        num, an = np.array(num), np.r_[gw, gb]
        worst = max(worst, np.linalg.norm(an - num) / max(np.linalg.norm(num), 1e-12))

    data = load_heart_scale()
    same = True
    for seed in (0, 1, 2):
        a_tr, a_te = split_train_test(data, 0.75, seed)
        b_tr, b_te = split_train_test(data, 0.75, seed)
        same &= a_tr.X.tobytes() == b_tr.X.tobytes() and a_te.y.tobytes() == b_te.y.tobytes()
        pa = split_labeled_unlabeled(a_tr, 0.2, seed)
        pb = split_labeled_unlabeled(b_tr, 0.2, seed)
        same &= pa.X_l.tobytes() == pb.X_l.tobytes() and pa.X_u.tobytes() == pb.X_u.tobytes()
        for kind in ("lr", "svm", "ada"):
            for weighting in ("equal", "balanced"):
                spec = LearnerSpec(kind, weighting)
                same &= learners.dumps_model(learners.fit(spec, pa.X_l, pa.y_l, seed=seed)) == \
                    learners.dumps_model(learners.fit(spec, pb.X_l, pb.y_l, seed=seed))
    ok = worst <= 1e-5 and same
    report(8, ok, f"max relative gradient error {worst:.1e} over 100 instances; "
                  f"splits and fits byte-identical: {same}")


def test_criterion_9_parser(report):
    rng = np.random.default_rng(9)
    n, d = 1000, 40
    X = np.where(rng.random((n, d)) < 0.15, rng.normal(scale=10, size=(n, d)), 0.0)
    y = rng.choice([-1, 1], n)
    ds = Dataset(X, y)
    whole = parse_libsvm(format_libsvm(ds)) == ds
    each = all(parse_libsvm(format_libsvm(ds.subset([i]))) == ds.subset([i]) for i in range(n))

    cases = {
        "non-numeric token": "+1 1:0.5\n-1 2:abc\n",
        "duplicate index": "+1 1:1\n+1 1:2 2:1\n-1 3:1 3:1\n",
        "index <= 0": "+1 0:1\n",
        "non-increasing": "-1 1:1\n+1 2:1 1:1\n",
    }
    expected_line = {"non-numeric token": 2, "duplicate index": 3, "index <= 0": 1, "non-increasing": 2}
    rejected = {}
    for name, text in cases.items():
        try:
            parse_libsvm(text)
            rejected[name] = None
        except ParseError as e:
            rejected[name] = e.line
    ok = whole and each and rejected == expected_line
    report(9, ok, f"1000-record round trip {whole}, per-record round trips {each}; "
                  f"violations rejected at lines {rejected}")


def test_acceptance_vacuous_gate_rule_documented():
    # not a numbered criterion: pins the one-channel gate the loop relies on
    live = channel_stats(np.array([True] * 3), np.array([True, True, False]))
    assert TeacherStats(channel_stats([], []), live).assumptions_met

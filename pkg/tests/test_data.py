import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualteach import learners
from dualteach.data import (Dataset, ParseError, PartialDataset, SplitError, format_libsvm,
                            generate_two_gaussians, load_heart_scale, normalize_features,
                            parse_libsvm, split_labeled_unlabeled, split_train_test)
from dualteach.learners import LearnerSpec


# --------------------------------------------------------------------------
# parsing

def test_parse_basic_records():
    d = parse_libsvm("+1 1:0.5 3:-1.2\n-1 2:2.0")
    assert len(d) == 2 and d.feature_dim == 3
    np.testing.assert_array_equal(d.X, [[0.5, 0.0, -1.2], [0.0, 2.0, 0.0]])
    np.testing.assert_array_equal(d.y, [1, -1])


def test_parse_label_only_record_promotes_dim():
    d = parse_libsvm("-1\n")
    assert len(d) == 1 and d.feature_dim == 1
    np.testing.assert_array_equal(d.X, [[0.0]])


def test_parse_accepts_plain_one_and_crlf():
    d = parse_libsvm("1 1:2\r\n-1 1:3\r\n")
    np.testing.assert_array_equal(d.y, [1, -1])


def test_parse_maps_other_labels_by_order():
    d = parse_libsvm("2 1:1\n4 1:2\n2 1:3\n")
    np.testing.assert_array_equal(d.y, [-1, 1, -1])
    d = parse_libsvm("0 1:1\n-3 1:2\n")
    np.testing.assert_array_equal(d.y, [1, -1])


def test_parse_rejects_three_labels():
    with pytest.raises(ParseError):
        parse_libsvm("1 1:1\n2 1:1\n3 1:1\n")


@pytest.mark.parametrize("text, line", [
    ("+1 2:1 1:1", 1),
    ("+1 1:1\n-1 1:x", 2),
    ("+1 1:1\n\n-1 1:1 1:2", 3),
    ("+1 0:1", 1),
    ("+1 -2:1", 1),
    ("abc 1:1", 1),
    ("+1 1:1 2", 1),
])
def test_parse_errors_carry_line_number(text, line):
    with pytest.raises(ParseError) as exc:
        parse_libsvm(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


@pytest.mark.parametrize("text", ["", "\n\n", "   \n"])
def test_parse_empty_input(text):
    with pytest.raises(ParseError):
        parse_libsvm(text)


@st.composite
def sparse_datasets(draw):
    n = draw(st.integers(1, 12))
    d = draw(st.integers(1, 8))
    finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
    X = np.zeros((n, d))
    for i in range(n):
        for j in range(d):
            if draw(st.booleans()):
                X[i, j] = draw(finite)
    y = np.array(draw(st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n)))
    return Dataset(X, y)


@settings(max_examples=200, deadline=None)
@given(sparse_datasets())
def test_libsvm_round_trip(d):
    assert parse_libsvm(format_libsvm(d)) == d


def test_round_trip_preserves_trailing_zero_column():
    d = Dataset(np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), np.array([1, -1]))
    assert parse_libsvm(format_libsvm(d)).feature_dim == 3


def test_heart_scale_bundle():
    d = load_heart_scale()
    assert len(d) == 270 and d.feature_dim == 13
    assert d.class_counts() == {1: 120, -1: 150}
    assert d.X.min() >= -1.0 and d.X.max() <= 1.0


def test_dataset_is_read_only():
    d = parse_libsvm("+1 1:1\n-1 1:2")
    with pytest.raises(ValueError):
        d.X[0, 0] = 5.0


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.array([1, 0]))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.array([1]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 1)), np.zeros(0))


# --------------------------------------------------------------------------
# normalization

def test_normalize_examples():
    train = Dataset(np.array([[-1.0, 3.0], [0.0, 3.0], [1.0, 3.0]]), np.array([1, -1, 1]))
    test = Dataset(np.array([[2.0, 7.0]]), np.array([1]))
    ntr, (nte,) = normalize_features(train, [test])
    np.testing.assert_allclose(ntr.X[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(ntr.X[:, 1], [0.0, 0.0, 0.0])
    assert nte.X[0, 0] == pytest.approx(1.5)
    assert nte.X[0, 1] == 0.0


def test_normalize_idempotent_on_train():
    d = generate_two_gaussians(20, 4, 2.0, seed=3)
    once, _ = normalize_features(d)
    twice, _ = normalize_features(once)
    np.testing.assert_allclose(twice.X, once.X, atol=1e-15)


# --------------------------------------------------------------------------
# splits

def _balanced(n_per_class, dim=2, seed=0):
    return generate_two_gaussians(n_per_class, dim, 2.0, seed=seed)


def test_split_train_test_counts():
    d = _balanced(50)
    tr, te = split_train_test(d, 0.75, seed=1)
    assert len(tr) == 75 and len(te) == 25
    assert sorted(tr.class_counts().values()) == [37, 38]


def test_split_train_test_four_examples():
    d = _balanced(2)
    tr, te = split_train_test(d, 0.5, seed=0)
    assert tr.class_counts() == {1: 1, -1: 1}
    assert te.class_counts() == {1: 1, -1: 1}


def test_split_train_test_union_and_determinism():
    d = load_heart_scale()
    a = split_train_test(d, 0.75, seed=5)
    b = split_train_test(d, 0.75, seed=5)
    assert a[0] == b[0] and a[1] == b[1]
    rows = sorted(map(tuple, np.vstack([a[0].X, a[1].X]).tolist()))
    assert rows == sorted(map(tuple, d.X.tolist()))
    c = split_train_test(d, 0.75, seed=6)
    assert not c[0] == a[0]


def test_split_train_test_needs_two_per_class():
    d = Dataset(np.arange(5.0).reshape(-1, 1), np.array([1, -1, -1, -1, -1]))
    with pytest.raises(SplitError):
        split_train_test(d, 0.75, 0)


def test_split_labeled_ratio_point_two_on_270():
    pd = split_labeled_unlabeled(load_heart_scale(), 0.2, seed=0)
    assert pd.n_labeled == 54 and pd.n_unlabeled == 216
    assert len(pd.hidden_truth) == 216


def test_split_labeled_ratio_one():
    d = _balanced(10)
    pd = split_labeled_unlabeled(d, 1.0, 0)
    assert pd.n_labeled == 20 and pd.n_unlabeled == 0


def test_split_labeled_single_class_pool_rejected():
    d = Dataset(np.arange(10.0).reshape(-1, 1), np.array([1] + [-1] * 9))
    with pytest.raises(SplitError):
        split_labeled_unlabeled(d, 0.1, 0)


def test_split_labeled_union_reconstructs_train():
    d = _balanced(30, seed=2)
    pd = split_labeled_unlabeled(d, 0.3, seed=4)
    X = np.vstack([pd.X_l, pd.X_u])
    y = np.concatenate([pd.y_l, pd.hidden_truth])
    key = lambda X, y: sorted(zip(map(tuple, X.tolist()), y.tolist()))
    assert key(X, y) == key(d.X, d.y)


def test_training_view_hides_truth():
    pd = split_labeled_unlabeled(_balanced(10), 0.5, 0)
    view = pd.training_view()
    assert not hasattr(view, "hidden_truth")


def test_hidden_truth_does_not_reach_training():
    pd = split_labeled_unlabeled(_balanced(20), 0.3, 0)
    flipped = PartialDataset(pd.X_l, pd.y_l, pd.X_u, -pd.hidden_truth)
    from dualteach.dual_teaching import DTOptions, run_dual_teaching
    spec = LearnerSpec("svm")
    a = run_dual_teaching(pd, spec, DTOptions(max_generations=5))
    b = run_dual_teaching(flipped, spec, DTOptions(max_generations=5))
    assert a.model == b.model
    assert a.retraining_set == b.retraining_set


def test_partial_dataset_requires_both_classes():
    with pytest.raises(SplitError):
        PartialDataset(np.zeros((2, 1)), np.array([1, 1]), np.zeros((0, 1)), np.zeros(0))


# --------------------------------------------------------------------------
# synthetic data

def test_two_gaussians_deterministic():
    a = generate_two_gaussians(30, 3, 1.5, 0.1, seed=9)
    b = generate_two_gaussians(30, 3, 1.5, 0.1, seed=9)
    assert a == b


def test_two_gaussians_separated_is_linearly_separable():
    d = generate_two_gaussians(50, 2, 10.0, 0.0, seed=0)
    m = learners.fit(LearnerSpec("lr"), d.X, d.y)
    assert np.mean(learners.predict(m, d.X) == d.y) >= 0.99


def test_two_gaussians_no_separation_is_chance():
    # identical class distributions: a fresh sample scores ~0.5
    train = generate_two_gaussians(500, 2, 0.0, seed=1)
    test = generate_two_gaussians(2000, 2, 0.0, seed=2)
    m = learners.fit(LearnerSpec("lr"), train.X, train.y)
    acc = np.mean(learners.predict(m, test.X) == test.y)
    assert abs(acc - 0.5) < 0.05


def test_two_gaussians_validation():
    with pytest.raises(ValueError):
        generate_two_gaussians(0, 2, 1.0)
    with pytest.raises(ValueError):
        generate_two_gaussians(5, 2, 1.0, noise_flip_rate=0.5)

import numpy as np
import pytest

from msns.data import (
    CV_VALUES,
    CvGrid,
    Dataset,
    cv_grid_search,
    generate_synthetic,
    kfold_split,
    load_csv,
    load_libsvm,
    write_csv,
)
from msns.exceptions import DataError, SolverError
from msns.svm import predict_accuracy


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_csv_basic(tmp_path):
    d = load_csv(write(tmp_path, "a.csv", "1,0.5,2.0\n-1,1.5,0.0\n"))
    assert len(d) == 2 and d.n == 2 and d.dropped == 0
    np.testing.assert_array_equal(d.Z, [[0.5, 2.0], [1.5, 0.0]])
    np.testing.assert_array_equal(d.y, [1.0, -1.0])


def test_csv_short_row_names_line(tmp_path):
    with pytest.raises(DataError, match=r"a\.csv:3"):
        load_csv(write(tmp_path, "a.csv", "1,0.5,2.0\n-1,1.5,0.0\n1,0.5\n"))


def test_csv_missing_rows_dropped(tmp_path):
    text = "1,0.5,2.0\n-1,?,0.0\n1,NA,1\n-1,3,\n-1,1.5,0.0\n"
    d = load_csv(write(tmp_path, "a.csv", text))
    assert len(d) == 2 and d.dropped == 3


def test_csv_label_map_header(tmp_path):
    d = load_csv(write(tmp_path, "bc.csv", "#label_map 2:-1 4:1\n2,1.0\n4,2.0\n4,3.0\n"))
    np.testing.assert_array_equal(d.y, [-1.0, 1.0, 1.0])


def test_csv_label_map_from_config(tmp_path):
    d = load_csv(write(tmp_path, "bc.csv", "2,1.0\n4,2.0\n"), label_map={2: -1, 4: 1})
    np.testing.assert_array_equal(d.y, [-1.0, 1.0])


@pytest.mark.parametrize("text,msg", [
    ("3,1.0\n", "not -1/\\+1"),
    ("#label_map 2:-1\n4,1.0\n", "not in the label map"),
    ("yes,1.0\n", "unmappable"),
    ("1,abc\n", ":1"),
    ("", "no usable rows"),
    ("1\n", "at least one feature"),
])
def test_csv_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(write(tmp_path, "e.csv", text))


def test_csv_round_trip(tmp_path, small_synthetic):
    train, _, _ = small_synthetic
    p = tmp_path / "t.csv"
    write_csv(p, train)
    back = load_csv(p)
    np.testing.assert_array_equal(back.Z, train.Z)
    np.testing.assert_array_equal(back.y, train.y)


def test_libsvm_examples(tmp_path):
    d = load_libsvm(write(tmp_path, "a.svm", "+1 1:0.5 3:2.0\n-1\n0 2:1 # comment\n"))
    np.testing.assert_array_equal(d.Z, [[0.5, 0.0, 2.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_array_equal(d.y, [1.0, -1.0, -1.0])


def test_libsvm_label_map(tmp_path):
    d = load_libsvm(write(tmp_path, "a.svm", "2 1:1\n4 1:2\n"), label_map={"2": -1, "4": 1})
    np.testing.assert_array_equal(d.y, [-1.0, 1.0])


@pytest.mark.parametrize("text,msg", [
    ("1 3:1 2:1\n", "strictly increasing"),
    ("1 2:1 2:3\n", "strictly increasing"),
    ("1 0:1\n", "bad token"),
    ("1 a:1\n", "bad token"),
    ("1 2\n", "bad token"),
    ("\n\n", "empty"),
])
def test_libsvm_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_libsvm(write(tmp_path, "e.svm", text))


def test_libsvm_error_names_line(tmp_path):
    with pytest.raises(DataError, match=r"e\.svm:2"):
        load_libsvm(write(tmp_path, "e.svm", "1 1:1\n-1 4:1 2:2\n"))


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan, 1.0]]), np.array([1.0]))


@pytest.mark.parametrize("ns,sizes", [(6, [2, 2, 2]), (7, [3, 2, 2]), (8, [3, 3, 2])])
def test_kfold_sizes_and_partition(ns, sizes):
    folds = kfold_split(ns, 3, rng_seed=4)
    assert [len(v) for _, v in folds] == sizes
    allv = np.concatenate([v for _, v in folds])
    assert sorted(allv) == list(range(ns))
    for tr, va in folds:
        assert not set(tr) & set(va) and len(tr) + len(va) == ns


def test_kfold_too_small():
    with pytest.raises(DataError):
        kfold_split(2, 3)


def test_synthetic_properties():
    train, test, x_bar = generate_synthetic(50, 2000, 300, 10.0, 3)
    assert train.Z.shape == (2000, 50) and test.Z.shape == (300, 50)
    assert 0.08 <= np.mean(train.Z != 0) <= 0.12
    assert x_bar @ x_bar <= 10.0
    assert predict_accuracy(x_bar, train.Z, train.y) == 1.0
    assert predict_accuracy(x_bar, test.Z, test.y) == 1.0
    again = generate_synthetic(50, 2000, 300, 10.0, 3)
    np.testing.assert_array_equal(again[0].Z, train.Z)
    np.testing.assert_array_equal(again[2], x_bar)


def test_synthetic_rejects_bad_sizes():
    with pytest.raises(DataError):
        generate_synthetic(0, 10, 10, 1.0, 0)


def test_cv_grid_defaults():
    g = CvGrid()
    assert g.t_values == g.lambda_values == CV_VALUES == (0.01, 0.1, 0.25, 0.5, 1.0)
    assert (g.folds, g.repeats) == (3, 20)
    with pytest.raises(ValueError):
        CvGrid(t_values=(0.0, 1.0))


CV_SOLVER = {"eps": 0.5}


def test_cv_single_cell(small_synthetic):
    train, _, _ = small_synthetic
    res = cv_grid_search(train, CvGrid((0.5,), (0.25,), 3, 2), CV_SOLVER, rng_seed=1)
    assert (res.best_t, res.best_lambda1) == (0.5, 0.25)
    assert list(res.accuracy) == [(0.5, 0.25)]


def test_cv_recoverable_cell_wins(small_synthetic):
    train, _, _ = small_synthetic
    res = cv_grid_search(train, CvGrid((1e-10, 10.0), (0.01,), 3, 2), CV_SOLVER, rng_seed=1)
    assert res.best_t == 10.0
    assert res.accuracy[(10.0, 0.01)] > res.accuracy[(1e-10, 0.01)]


def test_cv_ties_prefer_smaller_values():
    # all-positive labels: every classifier predicts +1 (ties go to +1), so all cells tie
    Z = np.random.default_rng(0).normal(size=(30, 2))
    d = Dataset(np.abs(Z), np.ones(30))
    res = cv_grid_search(d, CvGrid((1.0, 0.5), (0.25, 0.1), 3, 1), {"N": 2, "m": 1, "mu": 0.5}, rng_seed=0)
    assert set(res.accuracy.values()) == {1.0}
    assert (res.best_t, res.best_lambda1) == (0.5, 0.1)


def test_cv_deterministic_and_worker_independent(small_synthetic):
    train, _, _ = small_synthetic
    grid = CvGrid((0.1, 1.0), (0.1, 1.0), 3, 2)
    a = cv_grid_search(train, grid, CV_SOLVER, rng_seed=7)
    b = cv_grid_search(train, grid, CV_SOLVER, rng_seed=7, workers=2)
    assert a.accuracy == b.accuracy and a.iterations == b.iterations
    assert (a.best_t, a.best_lambda1) == (b.best_t, b.best_lambda1)


def test_cv_failure_names_cell():
    d = Dataset(np.array([[1.0], [1.0], [1.0], [1.0], [1.0], [1.0]]), np.array([1.0, -1.0] * 3))
    with pytest.raises(SolverError, match="t=1.0, lambda1=0.5"):
        cv_grid_search(d, CvGrid((1.0,), (0.5,), 3, 1), {"eps": 0.5}, rng_seed=0)

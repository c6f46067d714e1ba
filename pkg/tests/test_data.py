import numpy as np
import pytest

from imbenhance.data import (
    ClassStats,
    Dataset,
    DegenerateDatasetError,
    Preprocessor,
    SplitSpec,
    canonicalize_binary,
    class_stats,
    concat_datasets,
    generate_synthetic_benchmark,
    largest_remainder,
    load_csv,
    preprocess,
    stratified_split,
    write_csv,
)


def make_labeled(X, y):
    return Dataset(features=np.asarray(X, dtype=float), labels=np.asarray(y, dtype=int))


# ---------------------------------------------------------------- load_csv

def test_load_csv_basic(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n1,2,0\n3,4,1\n5,6,0\n")
    d = load_csv(p, label_column="y")
    assert d.n_rows == 3 and d.n_features == 2
    assert d.feature_names == ["a", "b"]
    assert list(d.labels) == ["0", "1", "0"]


def test_load_csv_unlabeled(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    d = load_csv(p, label_column=None)
    assert d.labels is None
    assert d.n_features == 2


def test_load_csv_non_rectangular(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n1,2,0\n3,1\n")
    with pytest.raises(ValueError, match="non-rectangular"):
        load_csv(p, label_column="y")


def test_load_csv_missing_label_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="label column"):
        load_csv(p, label_column="y")


def test_load_csv_missing_markers(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y\n1,0\n,1\nNA,0\nnan,1\n")
    d = load_csv(p, label_column="y")
    assert d.features[0, 0] == "1"
    assert d.features[1, 0] is None
    assert d.features[2, 0] is None
    assert d.features[3, 0] is None


def test_csv_roundtrip_with_provenance(tmp_path):
    d = make_labeled([[1.0, 2.5], [3.0, 4.0]], [0, 1])
    p = tmp_path / "out.csv"
    write_csv(d, p, label_column="y")
    back = load_csv(p, label_column="y")
    assert "provenance" not in back.feature_names
    assert list(back.provenance) == ["original", "original"]
    pre = preprocess(back)
    assert np.allclose(pre.features, d.features)
    assert np.array_equal(pre.labels, d.labels)


# -------------------------------------------------------------- preprocess

def test_preprocess_drops_column_over_half_missing():
    X = np.array([[None, 1.0]] * 6 + [["2", 1.0]] * 4, dtype=object)
    d = Dataset(features=X, feature_names=["mostly_missing", "ok"])
    out = preprocess(d)
    assert out.feature_names == ["ok"]


def test_preprocess_exactly_half_missing_is_kept():
    X = np.array([[None], [None], ["1"], ["2"]], dtype=object)
    d = Dataset(features=X, feature_names=["half"])
    out = preprocess(d)
    assert out.feature_names == ["half"]


def test_preprocess_mode_fill_numeric():
    X = np.array([["1"], [None], ["1"], ["2"]], dtype=object)
    out = preprocess(Dataset(features=X))
    assert list(out.features[:, 0]) == [1.0, 1.0, 1.0, 2.0]


def test_preprocess_mode_tiebreak_smallest():
    X = np.array([["2"], ["1"], [None], ["2"], ["1"]], dtype=object)
    out = preprocess(Dataset(features=X))
    assert out.features[2, 0] == 1.0


def test_preprocess_string_first_appearance_encoding():
    X = np.array([["b"], ["a"], ["b"]], dtype=object)
    out = preprocess(Dataset(features=X))
    assert list(out.features[:, 0]) == [0.0, 1.0, 0.0]
    assert out.column_kinds == ["categorical-encoded"]


def test_preprocess_all_columns_dropped():
    X = np.array([[None, None]] * 4, dtype=object)
    with pytest.raises(DegenerateDatasetError):
        preprocess(Dataset(features=X))


def test_preprocess_idempotent():
    X = np.array([["b", "1", None], ["a", None, "3"], ["b", "1", "4"]], dtype=object)
    d = Dataset(features=X, labels=np.array(["1", "0", "1"], dtype=object))
    once = preprocess(d)
    twice = preprocess(once)
    assert once.equals(twice)


def test_preprocess_encodes_string_labels():
    X = np.array([["1"], ["2"], ["3"]], dtype=object)
    d = Dataset(features=X, labels=np.array(["bad", "good", "bad"], dtype=object))
    out = preprocess(d)
    assert list(out.labels) == [0, 1, 0]


def test_preprocessor_transform_pool_matches_encoding():
    X = np.array([["b", "1"], ["a", "2"], ["b", None]], dtype=object)
    pre = Preprocessor()
    fitted = pre.fit_transform(Dataset(features=X, feature_names=["s", "v"]))
    pool_X = np.array([["a", "5"], ["c", None], [None, "7"]], dtype=object)
    pool = pre.transform(Dataset(features=pool_X, feature_names=["s", "v"]))
    # "a" keeps its fitted code, unseen "c" gets the next one, missing -> mode "b"
    assert list(pool.features[:, 0]) == [1.0, 2.0, 0.0]
    # missing numeric -> fitted mode (1.0)
    assert list(pool.features[:, 1]) == [5.0, 1.0, 7.0]
    assert pool.feature_names == fitted.feature_names


def test_preprocess_schema_hint_forces_categorical():
    X = np.array([["1"], ["2"], ["1"]], dtype=object)
    d = Dataset(features=X, feature_names=["c"], column_kinds=["categorical"])
    out = preprocess(d)
    assert out.column_kinds == ["categorical-encoded"]
    assert list(out.features[:, 0]) == [0.0, 1.0, 0.0]


def test_load_csv_schema_hints_flow_into_preprocess(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("code,y\n7,0\n9,1\n7,0\n")
    d = load_csv(p, label_column="y", schema_hints={"code": "categorical"})
    assert d.column_kinds == ["categorical"]
    out = preprocess(d)
    assert out.column_kinds == ["categorical-encoded"]
    assert list(out.features[:, 0]) == [0.0, 1.0, 0.0]


# -------------------------------------------------------------- class_stats

def test_class_stats_balanced():
    d = make_labeled([[0.0]] * 100, [0] * 50 + [1] * 50)
    s = class_stats(d)
    assert s.priors == (0.5, 0.5)
    assert s.imbalance_ratio == 1.0
    assert s.minority_label == 1  # tie goes to the larger label


def test_class_stats_zcd_shape():
    n, pos = 10_000, 1683
    d = make_labeled([[0.0]] * n, [1] * pos + [0] * (n - pos))
    s = class_stats(d)
    assert s.ratio_text == "1:4.94"
    assert abs(s.prior_of(1) - 0.1683) < 1e-12


def test_class_stats_blsd_shape():
    n = 10_000
    pos = 2252
    d = make_labeled([[0.0]] * n, [1] * pos + [0] * (n - pos))
    s = class_stats(d)
    assert s.ratio_text == "1:3.44"


def test_class_stats_requires_labels():
    d = Dataset(features=np.zeros((3, 1)))
    with pytest.raises(ValueError):
        class_stats(d)


def test_class_stats_priors_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = rng.integers(0, 2, size=rng.integers(2, 50))
        if len(np.unique(y)) < 2:
            continue
        s = class_stats(make_labeled(np.zeros((len(y), 1)), y))
        assert abs(sum(s.priors) - 1.0) < 1e-12


# -------------------------------------------------------- largest_remainder

def test_largest_remainder_exact():
    assert list(largest_remainder([0.8, 0.2], 100)) == [80, 20]


def test_largest_remainder_tie_lower_index():
    assert list(largest_remainder([0.5, 0.5], 3)) == [2, 1]


def test_largest_remainder_blsd_priors():
    assert list(largest_remainder([0.7748, 0.2252], 1000)) == [775, 225]


# --------------------------------------------------------- stratified_split

def test_holdout_split_exact_proportions():
    y = [1] * 20 + [0] * 80
    d = make_labeled(np.arange(100, dtype=float).reshape(100, 1), y)
    train, val = stratified_split(d, SplitSpec(mode="holdout", ratio=0.8, seed=42))
    assert train.n_rows == 80 and val.n_rows == 20
    assert int(np.sum(train.labels == 1)) == 16 and int(np.sum(train.labels == 0)) == 64
    assert int(np.sum(val.labels == 1)) == 4 and int(np.sum(val.labels == 0)) == 16


def test_kfold_split_exact_divisibility():
    y = [1] * 3 + [0] * 6
    d = make_labeled(np.arange(9, dtype=float).reshape(9, 1), y)
    folds = stratified_split(d, SplitSpec(mode="k-fold", k=3, seed=1))
    for f in folds:
        assert int(np.sum(f.labels == 1)) == 1 and int(np.sum(f.labels == 0)) == 2


def test_kfold_class_too_small():
    y = [1] * 2 + [0] * 7
    d = make_labeled(np.zeros((9, 1)), y)
    with pytest.raises(ValueError, match="fewer than k"):
        stratified_split(d, SplitSpec(mode="k-fold", k=3))


def test_split_parts_reunite_to_original_multiset():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(53, 3))
    y = (rng.random(53) < 0.3).astype(int)
    y[:3] = 1  # make sure both classes are big enough
    y[3:9] = 0
    d = make_labeled(X, y)
    folds = stratified_split(d, SplitSpec(mode="k-fold", k=3, seed=5))
    reunited = np.vstack([f.features for f in folds])
    assert sorted(map(tuple, reunited)) == sorted(map(tuple, X))
    assert sum(f.n_rows for f in folds) == 53


def test_split_part_priors_close_to_whole():
    y = [1] * 21 + [0] * 79
    d = make_labeled(np.arange(100, dtype=float).reshape(100, 1), y)
    whole = class_stats(d)
    for part in stratified_split(d, SplitSpec(mode="k-fold", k=3, seed=0)):
        ps = class_stats(part)
        for lbl in (0, 1):
            assert abs(ps.prior_of(lbl) - whole.prior_of(lbl)) <= 1.0 / part.n_rows + 1e-12


def test_split_deterministic():
    d = make_labeled(np.random.default_rng(0).normal(size=(40, 2)),
                     [0] * 30 + [1] * 10)
    a = stratified_split(d, SplitSpec(mode="holdout", ratio=0.7, seed=9))
    b = stratified_split(d, SplitSpec(mode="holdout", ratio=0.7, seed=9))
    assert a[0].equals(b[0]) and a[1].equals(b[1])


# ------------------------------------------------- canonicalize / benchmark

def test_canonicalize_keeps_standard_binary():
    d = make_labeled(np.zeros((10, 1)), [0] * 7 + [1] * 3)
    out, mapping = canonicalize_binary(d)
    assert mapping == {1: 1, 0: 0}
    assert np.array_equal(out.labels, d.labels)


def test_canonicalize_flips_when_minority_is_zero():
    d = make_labeled(np.zeros((10, 1)), [0] * 3 + [1] * 7)
    out, mapping = canonicalize_binary(d)
    assert mapping == {0: 1, 1: 0}
    assert int(np.sum(out.labels == 1)) == 3


def test_canonicalize_explicit_positive():
    d = make_labeled(np.zeros((4, 1)), [5, 5, 9, 5])
    out, mapping = canonicalize_binary(d, positive_label=5)
    assert mapping == {5: 1, 9: 0}
    assert list(out.labels) == [1, 1, 0, 1]


def test_generate_benchmark_minority_count():
    d = generate_synthetic_benchmark(n=2000, d=4, imbalance_ratio=20, seed=42)
    assert int(np.sum(d.labels == 1)) == 95  # 2000/21 rounded


def test_generate_benchmark_separable_when_far_apart():
    d = generate_synthetic_benchmark(n=400, d=2, imbalance_ratio=3,
                                     separation=60.0, noise_rate=0.0, seed=1)
    mid = d.features.sum(axis=1) > 30.0
    assert np.array_equal(mid.astype(int), d.labels)


def test_generate_benchmark_deterministic():
    a = generate_synthetic_benchmark(n=500, d=3, imbalance_ratio=10, noise_rate=0.1, seed=7)
    b = generate_synthetic_benchmark(n=500, d=3, imbalance_ratio=10, noise_rate=0.1, seed=7)
    assert a.equals(b)


def test_generate_benchmark_noise_flips_labels():
    clean = generate_synthetic_benchmark(n=500, d=3, imbalance_ratio=10, noise_rate=0.0, seed=3)
    noisy = generate_synthetic_benchmark(n=500, d=3, imbalance_ratio=10, noise_rate=0.1, seed=3)
    assert int(np.sum(clean.labels != noisy.labels)) == 50


# ----------------------------------------------------------------- dataset

def test_concat_and_take():
    a = make_labeled([[1.0], [2.0]], [0, 1])
    b = make_labeled([[3.0]], [1]).with_provenance("synthetic")
    c = concat_datasets([a, b])
    assert c.n_rows == 3
    assert list(c.provenance) == ["original", "original", "synthetic"]
    sub = c.take([2, 0])
    assert list(sub.features[:, 0]) == [3.0, 1.0]
    assert list(sub.labels) == [1, 0]


def test_concat_rejects_mixed_labeledness():
    a = make_labeled([[1.0]], [0])
    b = Dataset(features=np.array([[2.0]]))
    with pytest.raises(ValueError):
        concat_datasets([a, b])

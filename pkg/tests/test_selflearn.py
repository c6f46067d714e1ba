import numpy as np
import pytest

from imbenhance.classifiers import ClassifierSpec, TrainedModel, fit, predict
from imbenhance.data import Dataset, generate_synthetic_benchmark, stratified_split, SplitSpec
from imbenhance.selflearn import (
    PseudoLabelConfig,
    SelfLearnOutcome,
    dds,
    kfulf,
    select_strategy,
)


def labeled(X, y):
    return Dataset(features=np.asarray(X, dtype=float), labels=np.asarray(y, dtype=int))


def unlabeled(X):
    return Dataset(features=np.asarray(X, dtype=float))


def small_train():
    return labeled([[0.0], [1.0], [10.0], [11.0]], [0, 0, 1, 1])


class ConstantModel(TrainedModel):
    """Always predicts the same class with fixed confidence."""

    def __init__(self, label_set=(0, 1), p=(0.2, 0.8)):
        self.label_set = np.asarray(label_set)
        self.p = np.asarray(p, dtype=float)
        self.n_features_ = 1

    def _proba(self, X):
        return np.tile(self.p, (X.shape[0], 1))


# -------------------------------------------------------------------- kfulf

def test_kfulf_fold_bookkeeping_nine_rows():
    train = small_train()
    pool = unlabeled(np.arange(9).reshape(9, 1))
    cfg = PseudoLabelConfig(k_folds=3)
    artificial_counts = []
    fold_training_rows = []

    def trainer(ds):
        artificial_counts.append(int(np.sum(ds.labels == -1)))
        fold_training_rows.append(set(ds.features[ds.labels == -1, 0].tolist()))
        return fit(ClassifierSpec(kind="decision-tree"), ds)

    out = kfulf(train, pool, ClassifierSpec(), cfg, trainer=trainer)
    assert artificial_counts == [6, 6, 6]
    assert sum(e["tested"] for e in out.log) == 9
    # every pool row is tested exactly once and never trains its own fold's model
    tested = set()
    for k, rows in enumerate(fold_training_rows):
        fold_rows = set(np.array_split(np.arange(9), 3)[k].astype(float).tolist())
        assert rows.isdisjoint(fold_rows)
        tested |= fold_rows
    assert tested == set(float(i) for i in range(9))


def test_kfulf_never_emits_artificial_label():
    train = small_train()
    rng = np.random.default_rng(0)
    pool = unlabeled(rng.normal(5, 4, size=(20, 1)))
    out = kfulf(train, pool, ClassifierSpec(kind="decision-tree"), PseudoLabelConfig(k_folds=4))
    assert -1 not in set(out.enhanced.labels.tolist())
    if out.pseudo_count:
        pseudo = out.enhanced.labels[out.enhanced.provenance == "pseudo-labeled"]
        assert set(pseudo.tolist()) <= {0, 1}


def test_kfulf_total_abstention_contributes_nothing():
    train = small_train()
    pool = unlabeled(np.arange(6).reshape(6, 1))

    out = kfulf(train, pool, ClassifierSpec(), PseudoLabelConfig(k_folds=3),
                trainer=lambda ds: ConstantModel(label_set=(-1, 0, 1), p=(0.8, 0.1, 0.1)))
    assert out.pseudo_count == 0
    assert out.enhanced.equals(train.take(np.arange(train.n_rows)))


def test_kfulf_pool_smaller_than_k():
    with pytest.raises(ValueError, match="smaller"):
        kfulf(small_train(), unlabeled([[1.0], [2.0]]), ClassifierSpec(),
              PseudoLabelConfig(k_folds=3))


def test_kfulf_empty_pool_is_noop():
    out = kfulf(small_train(), None, ClassifierSpec(), PseudoLabelConfig())
    assert out.pseudo_count == 0
    assert out.strategy_used == "KFULF"


def test_kfulf_enhanced_contains_train_as_prefix():
    train = small_train()
    pool = unlabeled(np.linspace(-1, 12, 10).reshape(10, 1))
    out = kfulf(train, pool, ClassifierSpec(kind="decision-tree"), PseudoLabelConfig(k_folds=5))
    assert np.array_equal(out.enhanced.features[: train.n_rows], train.features)
    assert np.array_equal(out.enhanced.labels[: train.n_rows], train.labels)


def test_kfulf_pseudo_accuracy_beats_base_model_on_separated_pool():
    d = generate_synthetic_benchmark(n=600, d=3, imbalance_ratio=4,
                                     separation=6.0, noise_rate=0.1, seed=42)
    train, hidden = stratified_split(d, SplitSpec(mode="holdout", ratio=0.6, seed=42))
    truth = hidden.labels.copy()
    pool = hidden.without_labels()
    spec = ClassifierSpec(kind="decision-tree", max_depth=6)
    out = kfulf(train, pool, spec, PseudoLabelConfig(k_folds=5))
    assert out.pseudo_count > 0
    pseudo_acc = float(np.mean(out.pseudo_labels == truth[out.pseudo_indices]))
    base = fit(spec, train)
    base_acc = float(np.mean(predict(base, pool) == truth))
    assert pseudo_acc > base_acc


# ---------------------------------------------------------------------- dds

def scripted_score_fn(values):
    seq = iter(values)
    return lambda model, ds: next(seq)


def test_dds_selection_counts_and_acceptance():
    train = small_train()
    pool = unlabeled(np.arange(100).reshape(100, 1))
    cfg = PseudoLabelConfig(target_percentage=0.30)
    # base F1 0.2; two improving rounds (0.5, 0.7); then 0.6 stops the loop
    out = dds(train, pool, ClassifierSpec(), cfg,
              trainer=lambda ds: ConstantModel(),
              score_fn=scripted_score_fn([0.2, 0.5, 0.7, 0.6]))
    assert [e["selected"] for e in out.log] == [30, 21, 15]
    assert [e["accepted"] for e in out.log] == [True, True, False]
    assert out.pseudo_count == 51
    accepted_f1 = [e["f1_new"] for e in out.log if e["accepted"]]
    assert accepted_f1 == sorted(accepted_f1) and len(set(accepted_f1)) == len(accepted_f1)


def test_dds_immediate_stop_keeps_train_unchanged():
    train = small_train()
    pool = unlabeled(np.arange(10).reshape(10, 1))
    out = dds(train, pool, ClassifierSpec(), PseudoLabelConfig(),
              trainer=lambda ds: ConstantModel(),
              score_fn=scripted_score_fn([0.5, 0.5]))  # not strictly better
    assert out.pseudo_count == 0
    assert out.enhanced.equals(train.take(np.arange(train.n_rows)))
    assert len(out.log) == 1 and not out.log[0]["accepted"]


def test_dds_max_iterations_cap():
    train = small_train()
    pool = unlabeled(np.arange(200).reshape(200, 1))
    cfg = PseudoLabelConfig(target_percentage=0.01, max_iterations=5)
    rising = iter([0.1 + 0.01 * i for i in range(1000)])
    out = dds(train, pool, ClassifierSpec(), cfg,
              trainer=lambda ds: ConstantModel(),
              score_fn=lambda model, ds: next(rising))
    assert len(out.log) == 5


def test_dds_confidence_ties_resolve_to_original_order():
    train = small_train()
    pool = unlabeled(np.arange(10).reshape(10, 1))
    out = dds(train, pool, ClassifierSpec(), PseudoLabelConfig(target_percentage=0.30),
              trainer=lambda ds: ConstantModel(),  # equal confidence everywhere
              score_fn=scripted_score_fn([0.2, 0.9, 0.1]))
    first_batch = out.pseudo_indices[:3]
    assert list(first_batch) == [0, 1, 2]


def test_dds_empty_pool_is_noop():
    out = dds(small_train(), unlabeled(np.empty((0, 1))), ClassifierSpec(),
              PseudoLabelConfig())
    assert out.pseudo_count == 0 and out.strategy_used == "DDS"


def test_dds_real_run_pool_shrinks_and_is_deterministic():
    d = generate_synthetic_benchmark(n=400, d=3, imbalance_ratio=4,
                                     separation=5.0, noise_rate=0.05, seed=9)
    train, hidden = stratified_split(d, SplitSpec(mode="holdout", ratio=0.7, seed=9))
    pool = hidden.without_labels()
    spec = ClassifierSpec(kind="decision-tree", max_depth=6)
    a = dds(train, pool, spec, PseudoLabelConfig())
    b = dds(train, pool, spec, PseudoLabelConfig())
    assert a.enhanced.equals(b.enhanced)
    sizes = [e["pool_size"] for e in a.log]
    assert sizes == sorted(sizes, reverse=True) and len(set(sizes)) == len(sizes)
    assert len(a.log) <= PseudoLabelConfig().max_iterations


# ------------------------------------------------------------ select_strategy

def rigged_outcome(train, name):
    return SelfLearnOutcome(enhanced=train, strategy_used=name, pseudo_count=0)


def test_select_strategy_rigged_scores_pick_dds():
    train = small_train()
    holdout = labeled([[0.5], [10.5]], [0, 1])
    strategies = [("KFULF", lambda: rigged_outcome(train, "KFULF")),
                  ("DDS", lambda: rigged_outcome(train, "DDS"))]
    scores = {"KFULF": 0.5, "DDS": 0.6}
    out = select_strategy(train, None, holdout, ClassifierSpec(), PseudoLabelConfig(),
                          strategies=strategies,
                          score_fn=lambda o: scores[o.strategy_used])
    assert out.strategy_used == "DDS"
    assert out.selection_f1 == {"KFULF": 0.5, "DDS": 0.6}


def test_select_strategy_tie_goes_to_kfulf():
    train = small_train()
    holdout = labeled([[0.5], [10.5]], [0, 1])
    strategies = [("KFULF", lambda: rigged_outcome(train, "KFULF")),
                  ("DDS", lambda: rigged_outcome(train, "DDS"))]
    out = select_strategy(train, None, holdout, ClassifierSpec(), PseudoLabelConfig(),
                          strategies=strategies, score_fn=lambda o: 0.7)
    assert out.strategy_used == "KFULF"


def test_select_strategy_empty_pool_defaults_to_kfulf():
    train = small_train()
    holdout = labeled([[0.5], [10.5]], [0, 1])
    out = select_strategy(train, None, holdout,
                          ClassifierSpec(kind="decision-tree"), PseudoLabelConfig())
    assert out.strategy_used == "KFULF"
    assert out.pseudo_count == 0


def test_select_strategy_winner_scores_at_least_loser():
    d = generate_synthetic_benchmark(n=500, d=3, imbalance_ratio=4,
                                     separation=4.0, noise_rate=0.1, seed=21)
    train, rest = stratified_split(d, SplitSpec(mode="holdout", ratio=0.5, seed=21))
    holdout, hidden = stratified_split(rest, SplitSpec(mode="holdout", ratio=0.4, seed=21))
    pool = hidden.without_labels()
    out = select_strategy(train, pool, holdout,
                          ClassifierSpec(kind="decision-tree", max_depth=6),
                          PseudoLabelConfig(k_folds=4))
    assert out.selection_f1[out.strategy_used] == max(out.selection_f1.values())

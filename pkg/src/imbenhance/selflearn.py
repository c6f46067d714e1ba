"""Pseudo-label self-learning: KFULF, DDS, and adaptive selection between them.

KFULF trains per-fold models where out-of-fold pool rows carry an artificial
abstention label; predictions that avoid it become pseudo-labels. DDS
iteratively drafts the top-confidence slice of the pool, keeping each batch
only while the model's F1 on its own training pool keeps improving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import ClassifierSpec, fit, predict, predict_proba
from .data import Dataset, concat_datasets
from .metrics import f1_score


@dataclass
class PseudoLabelConfig:
    k_folds: int = 5
    artificial_label: int = -1
    target_percentage: float = 0.30
    max_iterations: int = 100

    def __post_init__(self):
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if not 0.0 < self.target_percentage < 1.0:
            raise ValueError("target_percentage must be in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class SelfLearnOutcome:
    enhanced: Dataset            # train plus accepted pseudo-labeled rows
    strategy_used: str           # "KFULF" | "DDS"
    pseudo_count: int
    log: list = field(default_factory=list)
    pseudo_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    pseudo_labels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    selection_f1: dict | None = None  # set by select_strategy


def _noop_outcome(train: Dataset, strategy: str, note: str) -> SelfLearnOutcome:
    return SelfLearnOutcome(enhanced=train.take(np.arange(train.n_rows)),
                            strategy_used=strategy, pseudo_count=0,
                            log=[{"event": note}])


def _pseudo_dataset(unlabeled: Dataset, indices, labels) -> Dataset:
    ds = unlabeled.take(indices).with_labels(np.asarray(labels, dtype=int))
    return ds.with_provenance("pseudo-labeled")


def kfulf(train: Dataset, unlabeled: Dataset | None, classifier_spec: ClassifierSpec,
          cfg: PseudoLabelConfig, trainer=None) -> SelfLearnOutcome:
    """K-fold unknown-label filtering.

    The pool splits into k folds. For each fold, every other fold joins the
    training set under the artificial label; the fold itself is predicted by
    the resulting model and rows predicted as anything but the artificial
    label are kept with that prediction. All keeps are appended to the
    training set.
    """
    if train.labels is None:
        raise ValueError("kfulf requires a labeled training set")
    if unlabeled is None or unlabeled.n_rows == 0:
        return _noop_outcome(train, "KFULF", "empty unlabeled pool")
    if unlabeled.n_rows < cfg.k_folds:
        raise ValueError(f"unlabeled pool of {unlabeled.n_rows} rows is smaller "
                         f"than k_folds={cfg.k_folds}")
    if trainer is None:
        trainer = lambda ds: fit(classifier_spec, ds)

    art = cfg.artificial_label
    folds = np.array_split(np.arange(unlabeled.n_rows), cfg.k_folds)
    kept_idx: list[int] = []
    kept_labels: list[int] = []
    log = []
    for k, fold in enumerate(folds):
        rest = np.concatenate([f for j, f in enumerate(folds) if j != k])
        pool_part = unlabeled.take(rest).with_labels(np.full(len(rest), art, dtype=int))
        model = trainer(concat_datasets([train, pool_part]))
        preds = predict(model, unlabeled.take(fold))
        keep = preds != art
        kept_idx.extend(fold[keep].tolist())
        kept_labels.extend(np.asarray(preds)[keep].tolist())
        log.append({"event": "fold", "fold": k, "tested": int(len(fold)),
                    "kept": int(np.sum(keep))})

    pseudo_idx = np.array(kept_idx, dtype=int)
    pseudo_lbl = np.array(kept_labels, dtype=int)
    enhanced = train if len(pseudo_idx) == 0 else concat_datasets(
        [train, _pseudo_dataset(unlabeled, pseudo_idx, pseudo_lbl)])
    return SelfLearnOutcome(enhanced=enhanced, strategy_used="KFULF",
                            pseudo_count=len(pseudo_idx), log=log,
                            pseudo_indices=pseudo_idx, pseudo_labels=pseudo_lbl)


def _selection_size(pct: float, pool: int) -> int:
    # ceil with a nudge so exact products like 0.3 * 100 stay at 30
    return max(1, math.ceil(pct * pool - 1e-9))


def dds(train: Dataset, unlabeled: Dataset | None, classifier_spec: ClassifierSpec,
        cfg: PseudoLabelConfig, trainer=None, score_fn=None,
        diagnostic_holdout: Dataset | None = None) -> SelfLearnOutcome:
    """Delay-decision strategy.

    Each round ranks the remaining pool by model confidence (max class
    probability, ties by original row order), drafts the top
    ``target_percentage`` slice (at least one row), pseudo-labels it with the
    current model, retrains on train + accepted + draft, and keeps the draft
    only if F1 on that training pool strictly improves. Stops on the first
    non-improvement, an empty pool, or the iteration cap.
    """
    if train.labels is None:
        raise ValueError("dds requires a labeled training set")
    if trainer is None:
        trainer = lambda ds: fit(classifier_spec, ds)
    if score_fn is None:
        score_fn = lambda model, ds: f1_score(ds.labels, predict(model, ds, threshold=0.5))
    if unlabeled is None or unlabeled.n_rows == 0:
        return _noop_outcome(train, "DDS", "empty unlabeled pool")

    model = trainer(train)
    f1_base = score_fn(model, train)
    pool_ids = np.arange(unlabeled.n_rows)
    accepted_idx: list[int] = []
    accepted_labels: list[int] = []
    log = []

    iterations = 0
    while len(pool_ids) > 0 and iterations < cfg.max_iterations:
        iterations += 1
        pool_ds = unlabeled.take(pool_ids)
        confidence = predict_proba(model, pool_ds).max(axis=1)
        order = np.argsort(-confidence, kind="stable")
        top = order[:_selection_size(cfg.target_percentage, len(pool_ids))]
        selected = unlabeled.take(pool_ids[top])
        y_sel = predict(model, selected, threshold=0.5)

        tmp_parts = [train]
        if accepted_idx:
            tmp_parts.append(_pseudo_dataset(unlabeled, accepted_idx, accepted_labels))
        tmp_parts.append(_pseudo_dataset(unlabeled, pool_ids[top], y_sel))
        tmp = concat_datasets(tmp_parts)

        model = trainer(tmp)
        f1_new = score_fn(model, tmp)
        accepted = f1_new > f1_base
        entry = {"event": "iteration", "iteration": iterations,
                 "pool_size": int(len(pool_ids)), "selected": int(len(top)),
                 "f1_base": float(f1_base), "f1_new": float(f1_new),
                 "accepted": bool(accepted)}
        if diagnostic_holdout is not None:
            entry["holdout_f1"] = float(score_fn(model, diagnostic_holdout))
        log.append(entry)

        if not accepted:
            break
        f1_base = f1_new
        accepted_idx.extend(pool_ids[top].tolist())
        accepted_labels.extend(np.asarray(y_sel).tolist())
        pool_ids = np.delete(pool_ids, top)

    pseudo_idx = np.array(accepted_idx, dtype=int)
    pseudo_lbl = np.array(accepted_labels, dtype=int)
    enhanced = train if len(pseudo_idx) == 0 else concat_datasets(
        [train, _pseudo_dataset(unlabeled, pseudo_idx, pseudo_lbl)])
    return SelfLearnOutcome(enhanced=enhanced, strategy_used="DDS",
                            pseudo_count=len(pseudo_idx), log=log,
                            pseudo_indices=pseudo_idx, pseudo_labels=pseudo_lbl)


def select_strategy(train: Dataset, unlabeled: Dataset | None,
                    selection_holdout: Dataset, classifier_spec: ClassifierSpec,
                    cfg: PseudoLabelConfig, strategies=None,
                    score_fn=None) -> SelfLearnOutcome:
    """Run KFULF and DDS, score each enhanced set on the holdout, keep the winner.

    A fresh model is fitted on each strategy's enhanced dataset and scored by
    F1 on ``selection_holdout``; ties go to the first strategy listed (KFULF).
    """
    if selection_holdout.labels is None:
        raise ValueError("selection holdout must be labeled")
    if strategies is None:
        strategies = [
            ("KFULF", lambda: kfulf(train, unlabeled, classifier_spec, cfg)),
            ("DDS", lambda: dds(train, unlabeled, classifier_spec, cfg)),
        ]
    if score_fn is None:
        def score_fn(outcome):
            model = fit(classifier_spec, outcome.enhanced)
            return f1_score(selection_holdout.labels,
                            predict(model, selection_holdout, threshold=0.5))

    outcomes = [(name, run()) for name, run in strategies]
    scores = [score_fn(outcome) for _, outcome in outcomes]
    best = int(np.argmax(scores))  # first max wins ties
    winner = outcomes[best][1]
    winner.selection_f1 = {name: float(s) for (name, _), s in zip(outcomes, scores)}
    return winner

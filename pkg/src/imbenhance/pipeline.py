"""Three-stage enhancement pipeline (synthesis -> filtering -> self-learning),
the cross-validated before/after benchmark, and report emission."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifiers import ClassifierSpec, fit, predict
from .data import (
    ClassStats,
    Dataset,
    SplitSpec,
    class_stats,
    concat_datasets,
    stratified_split,
    write_csv,
)
from .filtering import DEFAULT_THRESHOLD_GRID, FilterOutcome, filter_sweep
from .metrics import EVAL_CSV_COLUMNS, EvalReport, evaluate
from .selflearn import PseudoLabelConfig, SelfLearnOutcome, dds, kfulf, select_strategy
from .synthesis import (
    RandomOversampleTechnique,
    ReplayFileTechnique,
    SmoteTechnique,
    SynthesisOutcome,
    meta_synthesize,
)

METRIC_NAMES = ["precision", "recall", "f1", "accuracy", "auc", "ks"]


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, original: Exception):
        super().__init__(f"{stage}: {original}")
        self.stage = stage
        self.original = original


@dataclass
class PipelineConfig:
    """Everything a pipeline run depends on; serializable as flat key = value."""

    seed: int = 42
    label_column: str = "y"
    positive_label: int | None = None
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    techniques: list = field(default_factory=lambda: ["random-oversample", "smote"])
    smote_k_neighbors: int = 5
    target_ratio: float = 1.0
    synthesis_split_ratio: float = 0.8
    threshold_grid: tuple = DEFAULT_THRESHOLD_GRID
    retention: bool = True
    pseudo: PseudoLabelConfig = field(default_factory=PseudoLabelConfig)
    strategy: str = "auto"  # auto | kfulf | dds
    disable_synthesis: bool = False
    disable_filtering: bool = False
    disable_selflearning: bool = False
    benchmark_folds: int = 3
    hide_labels: float = 0.0
    input_path: str = ""
    unlabeled_path: str = ""

    def __post_init__(self):
        if self.strategy not in ("auto", "kfulf", "dds"):
            raise ValueError("strategy must be auto, kfulf, or dds")
        if not 0.0 <= self.hide_labels < 1.0:
            raise ValueError("hide_labels must be in [0, 1)")
        if self.benchmark_folds < 2:
            raise ValueError("benchmark_folds must be at least 2")

    def build_techniques(self):
        built = []
        for name in self.techniques:
            if name == "random-oversample":
                built.append(RandomOversampleTechnique(self.target_ratio))
            elif name == "smote":
                built.append(SmoteTechnique(self.smote_k_neighbors, self.target_ratio))
            elif name.startswith("replay:"):
                built.append(ReplayFileTechnique(name.split(":", 1)[1]))
            else:
                raise ValueError(f"unknown synthesis technique {name!r}")
        return built


@dataclass
class EnhancementResult:
    enhanced: Dataset
    aug: Dataset
    filtered: Dataset
    input_data: Dataset          # the labeled data the pipeline actually ran on
    input_stats: ClassStats
    synthesis: SynthesisOutcome | None
    filtering: FilterOutcome | None
    selflearn: SelfLearnOutcome | None
    timings_ms: dict = field(default_factory=dict)
    pool_size: int = 0
    pseudo_accuracy: float | None = None    # vs hidden ground truth, when known
    base_pool_accuracy: float | None = None
    notes: list = field(default_factory=list)


def _validate_pipeline_input(d: Dataset):
    if d.labels is None:
        raise ValueError("pipeline input must be labeled")
    present = set(np.unique(d.labels).tolist())
    if present != {0, 1}:
        raise ValueError(f"pipeline input labels must be exactly {{0, 1}}, got {sorted(present)}")


def _stage(name, fn):
    start = time.perf_counter()
    try:
        out = fn()
    except Exception as exc:
        raise StageError(name, exc) from exc
    return out, (time.perf_counter() - start) * 1000.0


def run_pipeline(input_ds: Dataset, unlabeled: Dataset | None,
                 cfg: PipelineConfig, pool_truth=None) -> EnhancementResult:
    """Run synthesis, filtering, and self-learning in order on a labeled
    {0, 1} dataset; a disabled stage passes its input through unchanged.

    ``cfg.hide_labels`` carves a stratified fraction of the input into the
    unlabeled pool (their labels are kept aside as ground truth so the report
    can score the pseudo-labels). ``pool_truth`` optionally supplies hidden
    labels for an externally provided pool, -1 where unknown.
    """
    _validate_pipeline_input(input_ds)
    timings = {}
    notes = []

    work = input_ds
    pool = unlabeled
    truth = None
    if pool is not None and pool_truth is not None:
        truth = np.asarray(pool_truth, dtype=int)
        if len(truth) != pool.n_rows:
            raise ValueError("pool_truth length does not match the unlabeled pool")
    elif pool is not None:
        truth = np.full(pool.n_rows, -1, dtype=int)

    if cfg.hide_labels > 0.0:
        keep, hidden = stratified_split(
            work, SplitSpec(mode="holdout", ratio=1.0 - cfg.hide_labels, seed=cfg.seed))
        work = keep
        hidden_truth = np.asarray(hidden.labels, dtype=int)
        if pool is None:
            pool, truth = hidden.without_labels(), hidden_truth
        else:
            pool = concat_datasets([hidden.without_labels(), pool])
            truth = np.concatenate([hidden_truth, truth])

    input_stats = class_stats(work)

    # --- stage 1: synthesis -------------------------------------------------
    def synthesis_stage():
        if cfg.disable_synthesis:
            return None, work
        out = meta_synthesize(work, cfg.build_techniques(), cfg.classifier,
                              SplitSpec(mode="holdout", ratio=cfg.synthesis_split_ratio,
                                        seed=cfg.seed))
        return out, out.augmented

    (syn_outcome, aug), timings["synthesis"] = _stage("synthesis", synthesis_stage)

    # --- stage 2: filtering -------------------------------------------------
    def filtering_stage():
        if cfg.disable_filtering:
            return None, aug
        if syn_outcome is not None:
            model, mis = syn_outcome.model, syn_outcome.misclassified
        else:
            # synthesis was skipped: recreate its partition to get a model and
            # a misclassified set to score the sweep against
            tr, val = stratified_split(work, SplitSpec(
                mode="holdout", ratio=cfg.synthesis_split_ratio, seed=cfg.seed))
            model = fit(cfg.classifier, tr)
            preds = predict(model, val, threshold=0.5)
            mis = val.take(np.flatnonzero(preds != val.labels))
        if mis.n_rows == 0:
            notes.append("filtering skipped: no misclassified validation rows to score against")
            return None, aug
        out = filter_sweep(aug, mis, model, cfg.classifier,
                           thresholds=cfg.threshold_grid, original_stats=input_stats,
                           retention=cfg.retention)
        return out, out.filtered

    (filt_outcome, filtered), timings["filtering"] = _stage("filtering", filtering_stage)

    # --- stage 3: self-learning ----------------------------------------------
    def selflearn_stage():
        if cfg.disable_selflearning:
            return None, filtered, None, None
        if pool is None or pool.n_rows == 0:
            notes.append("self-learning skipped: empty unlabeled pool")
            return None, filtered, None, None
        if cfg.strategy == "auto":
            sl_train, holdout = stratified_split(filtered, SplitSpec(
                mode="holdout", ratio=0.8, seed=cfg.seed))
            outcome = select_strategy(sl_train, pool, holdout, cfg.classifier, cfg.pseudo)
            final = concat_datasets([outcome.enhanced, holdout])
        else:
            sl_train = filtered
            runner = kfulf if cfg.strategy == "kfulf" else dds
            outcome = runner(sl_train, pool, cfg.classifier, cfg.pseudo)
            final = outcome.enhanced
        pseudo_acc = base_acc = None
        if truth is not None and np.any(truth >= 0):
            known = truth >= 0
            if outcome.pseudo_count:
                sel = truth[outcome.pseudo_indices] >= 0
                if np.any(sel):
                    pseudo_acc = float(np.mean(
                        outcome.pseudo_labels[sel]
                        == truth[outcome.pseudo_indices][sel]))
            base_model = fit(cfg.classifier, sl_train)
            base_preds = predict(base_model, pool.take(np.flatnonzero(known)))
            base_acc = float(np.mean(base_preds == truth[known]))
        return outcome, final, pseudo_acc, base_acc

    (sl_outcome, enhanced, pseudo_acc, base_acc), timings["self-learning"] = _stage(
        "self-learning", selflearn_stage)

    return EnhancementResult(enhanced=enhanced, aug=aug, filtered=filtered,
                             input_data=work,
                             input_stats=input_stats, synthesis=syn_outcome,
                             filtering=filt_outcome, selflearn=sl_outcome,
                             timings_ms=timings,
                             pool_size=0 if pool is None else pool.n_rows,
                             pseudo_accuracy=pseudo_acc, base_pool_accuracy=base_acc,
                             notes=notes)


@dataclass
class BenchmarkResult:
    """Per-fold before/after evaluation reports plus fold details."""

    baseline: list          # EvalReport per fold
    enhanced: list
    fold_sizes: list
    pipeline_results: list  # EnhancementResult per fold

    def summary(self, which: str) -> dict:
        """metric -> (mean, sample std) across folds."""
        reports = self.baseline if which == "baseline" else self.enhanced
        table = {}
        for name in METRIC_NAMES:
            vals = np.array([getattr(r, name) for r in reports])
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            table[name] = (float(np.mean(vals)), std)
        return table


def benchmark(input_ds: Dataset, cfg: PipelineConfig,
              unlabeled: Dataset | None = None, pool_truth=None) -> BenchmarkResult:
    """Stratified k-fold before/after comparison.

    For each fold, the same classifier is trained once on the raw training
    fold and once on the pipeline-enhanced training fold; both are evaluated
    on the untouched test fold. Enhancement happens strictly inside each
    training fold. Per-fold seeds are the base seed plus the fold index.
    """
    _validate_pipeline_input(input_ds)
    folds = stratified_split(input_ds, SplitSpec(mode="k-fold", k=cfg.benchmark_folds,
                                                 seed=cfg.seed))
    baseline_reports, enhanced_reports, results, sizes = [], [], [], []
    for i, test_fold in enumerate(folds):
        train_fold = concat_datasets([f for j, f in enumerate(folds) if j != i])
        fold_cfg = replace(cfg, seed=cfg.seed + i,
                           classifier=replace(cfg.classifier, seed=cfg.classifier.seed + i))
        baseline_model = fit(fold_cfg.classifier, train_fold)
        baseline_reports.append(evaluate(baseline_model, test_fold))

        result = run_pipeline(train_fold, unlabeled, fold_cfg, pool_truth)
        enhanced_model = fit(fold_cfg.classifier, result.enhanced)
        enhanced_reports.append(evaluate(enhanced_model, test_fold))
        results.append(result)
        sizes.append(test_fold.n_rows)
    return BenchmarkResult(baseline=baseline_reports, enhanced=enhanced_reports,
                           fold_sizes=sizes, pipeline_results=results)


# ------------------------------------------------------------ configuration

_CONFIG_KEYS = [
    "input", "unlabeled", "label_column", "positive_label", "seed",
    "classifier", "max_depth", "n_estimators", "learning_rate", "n_iterations",
    "techniques", "smote_k_neighbors", "target_ratio", "synthesis_split_ratio",
    "threshold_grid", "retention", "strategy", "k_folds", "target_percentage",
    "max_iterations", "disable_synthesis", "disable_filtering",
    "disable_selflearning", "benchmark_folds", "hide_labels",
]


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; unknown keys are errors."""
    mapping = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        mapping[key] = value
    return mapping


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def config_from_mapping(mapping: dict) -> PipelineConfig:
    """Build a PipelineConfig from string key/value pairs (file or CLI)."""
    m = dict(mapping)

    def pop(key, cast, default):
        if key not in m or m[key] == "":
            m.pop(key, None)
            return default
        return cast(m.pop(key))

    classifier = ClassifierSpec(
        kind=pop("classifier", str, "decision-tree"),
        max_depth=pop("max_depth", int, 12),
        n_estimators=pop("n_estimators", int, 50),
        learning_rate=pop("learning_rate", float, 0.1),
        n_iterations=pop("n_iterations", int, 500),
        seed=pop("seed", int, 42),
    )
    pseudo = PseudoLabelConfig(
        k_folds=pop("k_folds", int, 5),
        target_percentage=pop("target_percentage", float, 0.30),
        max_iterations=pop("max_iterations", int, 100),
    )
    grid = pop("threshold_grid",
               lambda s: tuple(float(t) for t in s.split(",") if t.strip() != ""),
               DEFAULT_THRESHOLD_GRID)
    techniques = pop("techniques",
                     lambda s: [t.strip() for t in s.split(",") if t.strip()],
                     ["random-oversample", "smote"])
    cfg = PipelineConfig(
        seed=classifier.seed,
        label_column=pop("label_column", str, "y"),
        positive_label=pop("positive_label", int, None),
        classifier=classifier,
        techniques=techniques,
        smote_k_neighbors=pop("smote_k_neighbors", int, 5),
        target_ratio=pop("target_ratio", float, 1.0),
        synthesis_split_ratio=pop("synthesis_split_ratio", float, 0.8),
        threshold_grid=grid,
        retention=pop("retention", _parse_bool, True),
        pseudo=pseudo,
        strategy=pop("strategy", str, "auto"),
        disable_synthesis=pop("disable_synthesis", _parse_bool, False),
        disable_filtering=pop("disable_filtering", _parse_bool, False),
        disable_selflearning=pop("disable_selflearning", _parse_bool, False),
        benchmark_folds=pop("benchmark_folds", int, 3),
        hide_labels=pop("hide_labels", float, 0.0),
        input_path=pop("input", str, ""),
        unlabeled_path=pop("unlabeled", str, ""),
    )
    if m:
        raise ValueError(f"unknown config keys: {sorted(m)}")
    return cfg


def serialize_config(cfg: PipelineConfig) -> str:
    """Resolved key = value text; parsing it back reproduces the same config."""
    lines = [
        f"input = {cfg.input_path}",
        f"unlabeled = {cfg.unlabeled_path}",
        f"label_column = {cfg.label_column}",
        f"positive_label = {'' if cfg.positive_label is None else cfg.positive_label}",
        f"seed = {cfg.seed}",
        f"classifier = {cfg.classifier.kind}",
        f"max_depth = {cfg.classifier.max_depth}",
        f"n_estimators = {cfg.classifier.n_estimators}",
        f"learning_rate = {cfg.classifier.learning_rate}",
        f"n_iterations = {cfg.classifier.n_iterations}",
        f"techniques = {','.join(cfg.techniques)}",
        f"smote_k_neighbors = {cfg.smote_k_neighbors}",
        f"target_ratio = {cfg.target_ratio}",
        f"synthesis_split_ratio = {cfg.synthesis_split_ratio}",
        f"threshold_grid = {','.join(repr(t) for t in cfg.threshold_grid)}",
        f"retention = {str(cfg.retention).lower()}",
        f"strategy = {cfg.strategy}",
        f"k_folds = {cfg.pseudo.k_folds}",
        f"target_percentage = {cfg.pseudo.target_percentage}",
        f"max_iterations = {cfg.pseudo.max_iterations}",
        f"disable_synthesis = {str(cfg.disable_synthesis).lower()}",
        f"disable_filtering = {str(cfg.disable_filtering).lower()}",
        f"disable_selflearning = {str(cfg.disable_selflearning).lower()}",
        f"benchmark_folds = {cfg.benchmark_folds}",
        f"hide_labels = {cfg.hide_labels}",
    ]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ reports

def _distribution_summary(name: str, d: Dataset) -> str:
    lines = [f"[{name}] rows = {d.n_rows}"]
    if d.labels is not None:
        for cls in np.unique(d.labels):
            lines.append(f"[{name}] class {cls} count = {int(np.sum(d.labels == cls))}")
    for tag in np.unique(d.provenance):
        lines.append(f"[{name}] provenance {tag} = {int(np.sum(d.provenance == tag))}")
    feats = np.asarray(d.features, dtype=float)
    for j, col in enumerate(d.feature_names):
        mean = float(np.mean(feats[:, j])) if d.n_rows else 0.0
        std = float(np.std(feats[:, j])) if d.n_rows else 0.0
        lines.append(f"[{name}] feature {col} mean = {mean:.6f} stdev = {std:.6f}")
    return "\n".join(lines)


def _write_rows(path: Path, header: list, rows: list):
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _report_rows(reports: list[EvalReport]) -> list:
    rows = [[f"fold{i}"] + r.to_csv_row() for i, r in enumerate(reports)]
    if reports:
        cols = list(zip(*(r.to_csv_row() for r in reports)))
        means = [float(np.mean(c)) for c in cols]
        stds = [float(np.std(c, ddof=1)) if len(reports) > 1 else 0.0 for c in cols]
        rows.append(["mean"] + means)
        rows.append(["std"] + stds)
    return rows


def emit_report(result: EnhancementResult | None, reports: BenchmarkResult | None,
                out_dir, cfg: PipelineConfig) -> list:
    """Write the enhanced dataset, stage summaries, metric tables, and the
    resolved config into ``out_dir``. Returns the written paths.

    Timings are intentionally left out of the files so identical runs produce
    byte-identical reports; they are returned in-memory on the result instead.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def record(path):
        written.append(path)
        return path

    (out / "config_resolved.txt").write_text(serialize_config(cfg), encoding="utf-8")
    record(out / "config_resolved.txt")

    if result is not None:
        write_csv(result.enhanced, record(out / "enhanced.csv"),
                  label_column=cfg.label_column, include_provenance=True)

        race_rows = []
        if result.synthesis is not None:
            race_rows = [[name, f1, "chosen" if name == result.synthesis.chosen_technique else ""]
                         for name, f1 in result.synthesis.f1_scores]
        _write_rows(record(out / "synthesis_race.csv"),
                    ["technique", "f1", "chosen"], race_rows)

        sweep_rows = []
        if result.filtering is not None:
            sweep_rows = [[e.threshold, e.f1, e.kept_count, e.filtered_out_count,
                           e.retained_count] for e in result.filtering.table]
        _write_rows(record(out / "filter_sweep.csv"),
                    ["threshold", "f1", "kept_count", "filtered_out_count", "retained_count"],
                    sweep_rows)

        log_rows = []
        if result.selflearn is not None:
            for e in result.selflearn.log:
                log_rows.append([result.selflearn.strategy_used, e.get("event", ""),
                                 e.get("fold", e.get("iteration", "")),
                                 e.get("pool_size", ""), e.get("selected", ""),
                                 e.get("tested", ""), e.get("kept", ""),
                                 e.get("f1_base", ""), e.get("f1_new", ""),
                                 e.get("accepted", ""), e.get("holdout_f1", "")])
        _write_rows(record(out / "selflearn_log.csv"),
                    ["strategy", "event", "index", "pool_size", "selected",
                     "tested", "kept", "f1_base", "f1_new", "accepted", "holdout_f1"],
                    log_rows)

        lines = [_distribution_summary("input", result.input_data)]
        lines.append(_distribution_summary("augmented", result.aug))
        lines.append(_distribution_summary("filtered", result.filtered))
        lines.append(_distribution_summary("enhanced", result.enhanced))
        if result.synthesis is not None:
            lines.append(f"chosen_technique = {result.synthesis.chosen_technique}")
        if result.filtering is not None:
            lines.append(f"chosen_threshold = {result.filtering.chosen_threshold}")
            lines.append(f"retained_counts = {result.filtering.retained_counts}")
        if result.selflearn is not None:
            lines.append(f"strategy_used = {result.selflearn.strategy_used}")
            lines.append(f"pseudo_count = {result.selflearn.pseudo_count}")
            if result.selflearn.selection_f1:
                lines.append(f"selection_f1 = {result.selflearn.selection_f1}")
        if result.pseudo_accuracy is not None:
            lines.append(f"pseudo_accuracy = {result.pseudo_accuracy:.6f}")
        if result.base_pool_accuracy is not None:
            lines.append(f"base_pool_accuracy = {result.base_pool_accuracy:.6f}")
        for note in result.notes:
            lines.append(f"note = {note}")
        (record(out / "summary.txt")).write_text("\n".join(lines) + "\n", encoding="utf-8")

    if reports is not None:
        header = ["fold"] + EVAL_CSV_COLUMNS
        _write_rows(record(out / "benchmark_baseline.csv"), header,
                    _report_rows(reports.baseline))
        _write_rows(record(out / "benchmark_enhanced.csv"), header,
                    _report_rows(reports.enhanced))
        lines = ["metric, baseline_mean±std, enhanced_mean±std"]
        base, enh = reports.summary("baseline"), reports.summary("enhanced")
        for name in METRIC_NAMES:
            bm, bs = base[name]
            em, es = enh[name]
            lines.append(f"{name}, {bm:.4f}±{bs:.4f}, {em:.4f}±{es:.4f}")
        (record(out / "benchmark_summary.txt")).write_text("\n".join(lines) + "\n",
                                                           encoding="utf-8")
    return written

"""Dataset container, CSV ingestion, preprocessing, splits, and a synthetic benchmark generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROVENANCE_TAGS = ("original", "synthetic", "retained", "pseudo-labeled", "validation-merged")

# cell values (after strip, lowercased) treated as missing in raw CSV data
_MISSING_MARKERS = {"", "na", "nan"}


class DegenerateDatasetError(ValueError):
    """Raised when preprocessing drops every column."""


def _is_missing_marker(cell) -> bool:
    if cell is None:
        return True
    return str(cell).strip().lower() in _MISSING_MARKERS


def _try_float(cell):
    try:
        return float(str(cell).strip())
    except ValueError:
        return None


@dataclass
class Dataset:
    """Feature matrix with optional labels and per-row provenance.

    ``features`` is float64 once preprocessed; straight from ``load_csv`` it is
    an object array of raw cell strings (missing cells are ``None``).
    ``labels`` is None for unlabeled pools. ``provenance`` tracks each row's
    origin through the pipeline stages.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    column_kinds: list[str] = field(default_factory=list)
    provenance: np.ndarray | None = None
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n, d = self.features.shape
        if not self.feature_names:
            self.feature_names = [f"f{j}" for j in range(d)]
        if len(self.feature_names) != d:
            raise ValueError("feature_names length does not match feature count")
        if not self.column_kinds:
            self.column_kinds = ["unknown"] * d
        if len(self.column_kinds) != d:
            raise ValueError("column_kinds length does not match feature count")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if len(self.labels) != n:
                raise ValueError("labels length does not match row count")
        if self.provenance is None:
            self.provenance = np.array(["original"] * n, dtype=object)
        else:
            self.provenance = np.asarray(self.provenance, dtype=object)
            if len(self.provenance) != n:
                raise ValueError("provenance length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def take(self, indices) -> "Dataset":
        """Row subset (copy), preserving labels and provenance."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[idx].copy(),
            labels=None if self.labels is None else self.labels[idx].copy(),
            column_kinds=list(self.column_kinds),
            provenance=self.provenance[idx].copy(),
            feature_names=list(self.feature_names),
        )

    def with_provenance(self, tag: str) -> "Dataset":
        if tag not in PROVENANCE_TAGS:
            raise ValueError(f"unknown provenance tag {tag!r}")
        return Dataset(
            features=self.features.copy(),
            labels=None if self.labels is None else self.labels.copy(),
            column_kinds=list(self.column_kinds),
            provenance=np.array([tag] * self.n_rows, dtype=object),
            feature_names=list(self.feature_names),
        )

    def with_labels(self, labels) -> "Dataset":
        return Dataset(
            features=self.features.copy(),
            labels=np.asarray(labels),
            column_kinds=list(self.column_kinds),
            provenance=self.provenance.copy(),
            feature_names=list(self.feature_names),
        )

    def without_labels(self) -> "Dataset":
        return Dataset(
            features=self.features.copy(),
            labels=None,
            column_kinds=list(self.column_kinds),
            provenance=self.provenance.copy(),
            feature_names=list(self.feature_names),
        )

    def equals(self, other: "Dataset") -> bool:
        if self.feature_names != other.feature_names:
            return False
        if self.column_kinds != other.column_kinds:
            return False
        if self.features.shape != other.features.shape:
            return False
        if not np.array_equal(self.features, other.features):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        return bool(np.array_equal(self.provenance, other.provenance))


def concat_datasets(parts: list[Dataset]) -> Dataset:
    """Stack datasets row-wise; schemas and labeledness must agree."""
    if not parts:
        raise ValueError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if p.feature_names != first.feature_names:
            raise ValueError("feature name mismatch in concat")
    labeled = [p.is_labeled for p in parts]
    if any(labeled) and not all(labeled):
        raise ValueError("cannot concatenate labeled with unlabeled datasets")
    return Dataset(
        features=np.vstack([p.features for p in parts]),
        labels=np.concatenate([p.labels for p in parts]) if all(labeled) else None,
        column_kinds=list(first.column_kinds),
        provenance=np.concatenate([p.provenance for p in parts]),
        feature_names=list(first.feature_names),
    )


def load_csv(path, label_column: str | None = None, schema_hints: dict | None = None) -> Dataset:
    """Read a comma-delimited file with a header row into a raw Dataset.

    Missing cells (empty, "NA", "NaN", any case) become ``None``. A column
    literally named ``provenance`` is peeled off into row tags instead of
    features. ``schema_hints`` maps column name -> "numeric"/"categorical"
    and is honored later by preprocessing.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"unreadable file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required")
        header = [h.strip() for h in header]
        rows = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: non-rectangular row at line {i} "
                                 f"({len(row)} fields, expected {len(header)})")
            rows.append([c.strip() for c in row])

    if label_column is not None and label_column not in header:
        raise ValueError(f"label column {label_column!r} not found in {path}")

    label_idx = header.index(label_column) if label_column is not None else None
    prov_idx = header.index("provenance") if "provenance" in header else None
    feat_idx = [j for j in range(len(header)) if j not in (label_idx, prov_idx)]
    feature_names = [header[j] for j in feat_idx]

    n = len(rows)
    features = np.empty((n, len(feat_idx)), dtype=object)
    for i, row in enumerate(rows):
        for k, j in enumerate(feat_idx):
            features[i, k] = None if _is_missing_marker(row[j]) else row[j]

    labels = None
    if label_idx is not None:
        labels = np.array([row[label_idx] for row in rows], dtype=object)

    provenance = None
    if prov_idx is not None:
        tags = [row[prov_idx] for row in rows]
        for t in tags:
            if t not in PROVENANCE_TAGS:
                raise ValueError(f"{path}: unknown provenance tag {t!r}")
        provenance = np.array(tags, dtype=object)

    hints = schema_hints or {}
    kinds = [hints.get(name, "unknown") for name in feature_names]
    for name, kind in hints.items():
        if kind not in ("numeric", "categorical"):
            raise ValueError(f"schema hint for {name!r} must be numeric or categorical")

    return Dataset(features=features, labels=labels, column_kinds=kinds,
                   provenance=provenance, feature_names=feature_names)


def write_csv(d: Dataset, path, label_column: str = "y", include_provenance: bool = True):
    """Write a dataset back to CSV, optionally with a trailing provenance column."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(d.feature_names)
        if d.labels is not None:
            header.append(label_column)
        if include_provenance:
            header.append("provenance")
        writer.writerow(header)
        for i in range(d.n_rows):
            row = [_format_cell(v) for v in d.features[i]]
            if d.labels is not None:
                row.append(str(int(d.labels[i])))
            if include_provenance:
                row.append(str(d.provenance[i]))
            writer.writerow(row)


def _format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _mode_numeric(values: np.ndarray) -> float:
    # most frequent value, ties broken by smallest value
    uniq, counts = np.unique(values, return_counts=True)
    return float(uniq[np.argmax(counts)])


def _mode_first_appearance(values) -> str:
    counts, order = {}, {}
    for v in values:
        if v not in counts:
            order[v] = len(order)
        counts[v] = counts.get(v, 0) + 1
    best = max(counts, key=lambda v: (counts[v], -order[v]))
    return best


class Preprocessor:
    """Column cleanup fitted on one dataset and replayable on another.

    Drops columns whose missing fraction exceeds ``missing_drop_threshold``
    (strictly), mode-fills the remaining gaps, and label-encodes non-numeric
    columns in first-appearance order. ``transform`` applies the fitted drops,
    fill values, and category codes to new data (the unlabeled pool); unseen
    categories there get fresh codes past the fitted range, local to that call.
    """

    def __init__(self, missing_drop_threshold: float = 0.5):
        if not 0 <= missing_drop_threshold <= 1:
            raise ValueError("missing_drop_threshold must be in [0, 1]")
        self.missing_drop_threshold = missing_drop_threshold
        self.kept_names_: list[str] | None = None
        self.kept_kinds_: list[str] | None = None
        self.fill_values_: list = []          # per kept column: float or raw category string
        self.category_codes_: list[dict | None] = []

    def fit_transform(self, raw: Dataset) -> Dataset:
        n, d = raw.features.shape
        numeric_input = raw.features.dtype != object

        kept_cols, kinds, out_columns = [], [], []
        self.fill_values_, self.category_codes_ = [], []
        for j in range(d):
            col = raw.features[:, j]
            kind = self._resolve_kind(col, raw.column_kinds[j], numeric_input)
            if kind == "categorical":
                missing = np.array([_is_missing_marker(c) for c in col])
                if n > 0 and np.mean(missing) > self.missing_drop_threshold:
                    continue
                raw_strings = [str(col[i]) if not missing[i] else None for i in range(n)]
                fill = _mode_first_appearance([s for s in raw_strings if s is not None])
                codes: dict[str, int] = {}
                encoded = np.empty(n, dtype=float)
                for i in range(n):
                    s = raw_strings[i] if raw_strings[i] is not None else fill
                    if s not in codes:
                        codes[s] = len(codes)
                    encoded[i] = codes[s]
                out_columns.append(encoded)
                self.fill_values_.append(fill)
                self.category_codes_.append(codes)
                kind = "categorical-encoded"
            else:
                # numeric or already-encoded: parse, drop-check, mode-fill
                values, missing = self._parse_column(col, numeric_input)
                if n > 0 and np.mean(missing) > self.missing_drop_threshold:
                    continue
                present = values[~missing]
                if present.size == 0:
                    continue  # nothing to fill from; treat as dropped
                fill = _mode_numeric(present)
                out_columns.append(np.where(missing, fill, values).astype(float))
                self.fill_values_.append(fill)
                self.category_codes_.append(None)
            kept_cols.append(j)
            kinds.append(kind)

        if not kept_cols:
            raise DegenerateDatasetError("preprocessing dropped every column")

        self.kept_names_ = [raw.feature_names[j] for j in kept_cols]
        self.kept_kinds_ = kinds
        features = np.column_stack(out_columns)
        labels = None if raw.labels is None else _encode_labels(raw.labels)
        return Dataset(features=features, labels=labels, column_kinds=list(kinds),
                       provenance=raw.provenance.copy(), feature_names=list(self.kept_names_))

    def transform(self, raw: Dataset) -> Dataset:
        if self.kept_names_ is None:
            raise ValueError("preprocessor is not fitted")
        name_to_col = {name: j for j, name in enumerate(raw.feature_names)}
        for name in self.kept_names_:
            if name not in name_to_col:
                raise ValueError(f"column {name!r} missing from dataset to transform")
        n = raw.n_rows
        numeric_input = raw.features.dtype != object
        out_columns = []
        for k, name in enumerate(self.kept_names_):
            col = raw.features[:, name_to_col[name]]
            codes = self.category_codes_[k]
            if codes is None or numeric_input:
                values, missing = self._parse_column(col, numeric_input)
                # encoded columns fall back to the fitted mode's code
                fill = self.fill_values_[k] if codes is None \
                    else float(codes[self.fill_values_[k]])
                out_columns.append(np.where(missing, fill, values).astype(float))
            else:
                local = dict(codes)  # unseen categories get codes local to this call
                encoded = np.empty(n, dtype=float)
                for i in range(n):
                    s = str(col[i]) if not _is_missing_marker(col[i]) else self.fill_values_[k]
                    if s not in local:
                        local[s] = len(local)
                    encoded[i] = local[s]
                out_columns.append(encoded)
        features = np.column_stack(out_columns)
        labels = None if raw.labels is None else _encode_labels(raw.labels)
        return Dataset(features=features, labels=labels, column_kinds=list(self.kept_kinds_),
                       provenance=raw.provenance.copy(), feature_names=list(self.kept_names_))

    def _resolve_kind(self, col, declared: str, numeric_input: bool) -> str:
        if declared == "numeric":
            return "numeric"
        if declared == "categorical-encoded" or (declared == "categorical" and numeric_input):
            return "categorical-encoded"
        if declared == "categorical":
            return "categorical"
        if numeric_input:
            return "numeric"
        # undeclared raw column: numeric iff every non-missing cell parses
        for cell in col:
            if not _is_missing_marker(cell) and _try_float(cell) is None:
                return "categorical"
        return "numeric"

    @staticmethod
    def _parse_column(col, numeric_input: bool):
        """Numeric parse; unparseable and non-finite cells count as missing."""
        if numeric_input:
            values = col.astype(float)
            return values, ~np.isfinite(values)
        n = len(col)
        values = np.zeros(n, dtype=float)
        missing = np.zeros(n, dtype=bool)
        for i, cell in enumerate(col):
            v = None if _is_missing_marker(cell) else _try_float(cell)
            if v is None or not math.isfinite(v):
                missing[i] = True
            else:
                values[i] = v
        return values, missing


def _encode_labels(raw_labels: np.ndarray) -> np.ndarray:
    """Labels as ints; non-numeric label values get first-appearance codes."""
    if raw_labels.dtype != object:
        arr = np.asarray(raw_labels)
        if not np.all(arr == np.floor(np.asarray(arr, dtype=float))):
            raise ValueError("labels must be integer-valued")
        return arr.astype(int)
    parsed = []
    all_numeric = True
    for v in raw_labels:
        if _is_missing_marker(v):
            raise ValueError("missing label value")
        f = _try_float(v)
        if f is None:
            all_numeric = False
            break
        parsed.append(f)
    if all_numeric:
        if any(not float(f).is_integer() for f in parsed):
            raise ValueError("numeric labels must be integer-valued")
        return np.array([int(f) for f in parsed], dtype=int)
    codes: dict[str, int] = {}
    out = np.empty(len(raw_labels), dtype=int)
    for i, v in enumerate(raw_labels):
        s = str(v)
        if s not in codes:
            codes[s] = len(codes)
        out[i] = codes[s]
    return out


def preprocess(raw: Dataset, missing_drop_threshold: float = 0.5) -> Dataset:
    """One-shot fit-and-transform cleanup; see ``Preprocessor``."""
    return Preprocessor(missing_drop_threshold).fit_transform(raw)


@dataclass
class ClassStats:
    """Per-class counts and priors plus the minority:majority imbalance ratio."""

    labels: tuple
    counts: tuple
    priors: tuple
    minority_label: int
    majority_label: int
    imbalance_ratio: float  # majority_count / minority_count

    def prior_of(self, label) -> float:
        return self.priors[self.labels.index(label)]

    def count_of(self, label) -> int:
        return self.counts[self.labels.index(label)]

    @property
    def ratio_text(self) -> str:
        return f"1:{self.imbalance_ratio:.2f}"


def class_stats(d: Dataset) -> ClassStats:
    if d.labels is None:
        raise ValueError("class_stats requires a labeled dataset")
    uniq, counts = np.unique(d.labels, return_counts=True)
    labels = tuple(int(v) for v in uniq)
    counts = tuple(int(c) for c in counts)
    total = sum(counts)
    priors = tuple(c / total for c in counts)
    # minority tie -> larger label id (so balanced {0,1} keeps 1 as positive)
    order = sorted(range(len(labels)), key=lambda i: (counts[i], -labels[i]))
    minority, majority = labels[order[0]], labels[order[-1]]
    return ClassStats(labels=labels, counts=counts, priors=priors,
                      minority_label=minority, majority_label=majority,
                      imbalance_ratio=counts[order[-1]] / counts[order[0]])


@dataclass
class SplitSpec:
    """Holdout or k-fold stratified split parameters."""

    mode: str = "holdout"   # "holdout" | "k-fold"
    ratio: float = 0.8      # train fraction, holdout mode
    k: int = 3              # fold count, k-fold mode
    stratified: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.mode not in ("holdout", "k-fold"):
            raise ValueError("mode must be 'holdout' or 'k-fold'")
        if self.mode == "holdout" and not 0 < self.ratio < 1:
            raise ValueError("holdout ratio must be in (0, 1)")
        if self.mode == "k-fold" and self.k < 2:
            raise ValueError("k must be at least 2")


def largest_remainder(fractions, total: int) -> np.ndarray:
    """Integer allocation of ``total`` across ``fractions`` (floor + largest remainder).

    Ties in fractional remainder go to the lower index. Fractions must sum to 1.
    """
    quotas = np.asarray(fractions, dtype=float) * total
    base = np.floor(quotas).astype(int)
    leftover = total - int(base.sum())
    if leftover < 0:
        raise ValueError("fractions must sum to at most 1")
    frac = quotas - base
    order = np.lexsort((np.arange(len(frac)), -frac))
    base[order[:leftover]] += 1
    return base


def stratified_split(d: Dataset, spec: SplitSpec) -> list[Dataset]:
    """Partition rows preserving per-class proportions within +/-1 per part.

    Holdout mode returns [train, validation]; k-fold mode returns k disjoint
    folds covering the dataset. Deterministic for a fixed seed; row order
    within each part follows the original dataset.
    """
    if d.labels is None:
        raise ValueError("stratified_split requires a labeled dataset")
    if spec.mode == "holdout":
        fractions = [spec.ratio, 1.0 - spec.ratio]
    else:
        fractions = [1.0 / spec.k] * spec.k
    n_parts = len(fractions)

    rng = np.random.default_rng(spec.seed)
    part_indices: list[list[int]] = [[] for _ in range(n_parts)]
    for cls in np.unique(d.labels):
        idx = np.flatnonzero(d.labels == cls)
        if spec.mode == "k-fold" and len(idx) < spec.k:
            raise ValueError(f"class {cls} has {len(idx)} rows, fewer than k={spec.k}")
        perm = rng.permutation(idx)
        alloc = largest_remainder(fractions, len(idx))
        start = 0
        for p in range(n_parts):
            part_indices[p].extend(perm[start:start + alloc[p]].tolist())
            start += alloc[p]
    return [d.take(np.sort(np.array(pi, dtype=int))) for pi in part_indices]


def canonicalize_binary(d: Dataset, positive_label=None) -> tuple[Dataset, dict]:
    """Map the two label values onto {0, 1} with the positive class as 1.

    Default positive class is the minority; ties keep the larger original
    label as positive, so a dataset already in {0, 1} maps to itself.
    Returns the relabeled dataset and the {original: new} mapping.
    """
    if d.labels is None:
        raise ValueError("canonicalize_binary requires labels")
    stats = class_stats(d)
    if len(stats.labels) != 2:
        raise ValueError(f"expected exactly 2 classes, found {len(stats.labels)}")
    if positive_label is None:
        positive = stats.minority_label
    else:
        positive = int(positive_label)
        if positive not in stats.labels:
            raise ValueError(f"positive label {positive} not present in data")
    negative = next(l for l in stats.labels if l != positive)
    mapping = {positive: 1, negative: 0}
    new_labels = np.where(d.labels == positive, 1, 0)
    return d.with_labels(new_labels), mapping


def generate_synthetic_benchmark(n: int, d: int, imbalance_ratio: float,
                                 separation: float = 3.0, noise_rate: float = 0.0,
                                 seed: int = 42) -> Dataset:
    """Two Gaussian clusters with a 1:r class imbalance and optional label noise.

    Minority prior is 1/(1+r); cluster means sit ``separation`` apart in
    Euclidean distance; ``noise_rate`` of all labels are flipped. Deterministic
    per seed.
    """
    if imbalance_ratio < 1:
        raise ValueError("imbalance_ratio must be >= 1")
    if not 0 <= noise_rate < 0.5:
        raise ValueError("noise_rate must be in [0, 0.5)")
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")

    n_min = max(1, int(math.floor(n / (1.0 + imbalance_ratio) + 0.5)))
    n_maj = n - n_min
    rng = np.random.default_rng(seed)
    offset = separation / math.sqrt(d)
    X_maj = rng.normal(0.0, 1.0, size=(n_maj, d))
    X_min = rng.normal(0.0, 1.0, size=(n_min, d)) + offset
    X = np.vstack([X_maj, X_min])
    y = np.concatenate([np.zeros(n_maj, dtype=int), np.ones(n_min, dtype=int)])

    perm = rng.permutation(n)
    X, y = X[perm], y[perm]

    n_flip = int(math.floor(noise_rate * n + 0.5))
    if n_flip:
        flip = rng.choice(n, size=n_flip, replace=False)
        y[flip] = 1 - y[flip]

    return Dataset(features=X, labels=y, column_kinds=["numeric"] * d,
                   feature_names=[f"f{j}" for j in range(d)])

"""Time-batched labeled streams: loading, scaling, rebalancing, synthesis."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    EmptyClassError,
    InsufficientDataError,
    ParseError,
    SchemaError,
    ValidationError,
)


PERIOD_COLUMN = "period"
LABEL_COLUMN = "label"


def as_feature_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Coerce to a finite float64 2-D array, optionally checking the width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and n_features is not None:
        X = X.reshape(-1, n_features) if X.size else np.empty((0, n_features))
    if X.ndim != 2:
        raise SchemaError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if X.shape[1] < 1:
        raise SchemaError("feature matrix needs at least one column")
    if n_features is not None and X.shape[1] != n_features:
        raise SchemaError(f"expected {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix contains NaN or infinite values")
    return X


@dataclass(frozen=True)
class LabeledBatch:
    period: int
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = as_feature_matrix(self.X)
        y = np.asarray(self.y)
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise SchemaError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if y.size and not np.isin(y, (0, 1)).all():
            raise ValidationError("labels must be 0 or 1")
        if len(self.feature_names) != X.shape[1]:
            raise SchemaError("feature_names length does not match column count")
        if self.period < 0:
            raise ValidationError("period must be non-negative")
        X.setflags(write=False)
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())


@dataclass(frozen=True)
class BatchStream:
    batches: tuple[LabeledBatch, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        batches = tuple(self.batches)
        names = tuple(self.feature_names)
        for i, b in enumerate(batches):
            if b.feature_names != names:
                raise SchemaError(f"batch {i} has a different schema")
            if b.period != i:
                raise ValidationError(
                    f"periods must be contiguous from 0; batch {i} has period {b.period}"
                )
        object.__setattr__(self, "batches", batches)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return len(self.batches)

    def __iter__(self):
        return iter(self.batches)

    def __getitem__(self, i):
        return self.batches[i]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def fingerprint(self) -> str:
        """SHA-256 over schema, periods, labels and raw feature bytes."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.feature_names).encode())
        for b in self.batches:
            h.update(np.int64(b.period).tobytes())
            h.update(np.ascontiguousarray(b.X, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(b.y, dtype=np.int8).tobytes())
        return h.hexdigest()


def reindexed(batches: Sequence[LabeledBatch], feature_names: Sequence[str]) -> BatchStream:
    """Build a stream from ordered batches, renumbering periods from 0."""
    return BatchStream(
        tuple(LabeledBatch(i, b.X, b.y, tuple(feature_names)) for i, b in enumerate(batches)),
        tuple(feature_names),
    )


def concat_batches(batches: Iterable[LabeledBatch], n_features: int) -> tuple[np.ndarray, np.ndarray]:
    batches = list(batches)
    if not batches:
        return np.empty((0, n_features)), np.empty(0, dtype=np.int8)
    return (
        np.concatenate([b.X for b in batches], axis=0),
        np.concatenate([b.y for b in batches]),
    )


# --------------------------------------------------------------------------- CSV


def load_csv_stream(
    path, label_column: str = LABEL_COLUMN, period_column: str = PERIOD_COLUMN
) -> BatchStream:
    """Read a header-row CSV into one batch per distinct period value.

    Periods are renumbered 0..P-1 in ascending order of their original
    values; rows keep file order within a period.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row missing") from None
        header = [h.strip() for h in header]
        for col in (label_column, period_column):
            if col not in header:
                raise SchemaError(f"{path}: required column {col!r} missing")
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        li, pi = header.index(label_column), header.index(period_column)
        feat_idx = [i for i in range(len(header)) if i not in (li, pi)]
        if not feat_idx:
            raise SchemaError(f"{path}: no feature columns")
        names = tuple(header[i] for i in feat_idx)

        rows: dict[int, tuple[list, list]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                period = int(row[pi])
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: period {row[pi]!r} is not an integer") from None
            if period < 0:
                raise ParseError(f"{path}: row {lineno}: negative period {period}")
            try:
                label = float(row[li])
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: label {row[li]!r} is not numeric") from None
            if label not in (0.0, 1.0):
                raise ValidationError(f"{path}: row {lineno}: label {row[li]!r} is not binary")
            try:
                values = [float(row[i]) for i in feat_idx]
            except ValueError:
                bad = next(row[i] for i in feat_idx if not _is_float(row[i]))
                raise ParseError(f"{path}: row {lineno}: non-numeric feature value {bad!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(f"{path}: row {lineno}: non-finite feature value")
            xs, ys = rows.setdefault(period, ([], []))
            xs.append(values)
            ys.append(int(label))

    if not rows:
        raise InsufficientDataError(f"{path}: no data rows")
    batches = [
        LabeledBatch(0, np.array(rows[p][0], dtype=np.float64), np.array(rows[p][1]), names)
        for p in sorted(rows)
    ]
    return reindexed(batches, names)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_csv_stream(stream: BatchStream, path) -> None:
    """Write a stream in the loader's schema; floats use repr so reads are exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([PERIOD_COLUMN, LABEL_COLUMN, *stream.feature_names])
        for b in stream:
            for x, y in zip(b.X, b.y):
                w.writerow([b.period, int(y), *(repr(float(v)) for v in x)])


# ----------------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-column z-scoring with population std; constant columns map to 0."""

    def fit(self, X, y=None):
        X = as_feature_matrix(X)
        if X.shape[0] < 2:
            raise InsufficientDataError("scaler needs at least 2 rows")
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        # spread below float resolution of the column is roundoff, not signal
        scale[scale <= 16 * np.finfo(float).eps * np.abs(X).max(axis=0)] = 0.0
        self.scale_ = scale
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = as_feature_matrix(X, self.n_features_in_)
        safe = np.where(self.scale_ > 0, self.scale_, 1.0)
        out = (X - self.mean_) / safe
        out[:, self.scale_ == 0] = 0.0
        return out

    @property
    def params(self) -> ScalerParams:
        return ScalerParams(self.mean_.copy(), self.scale_.copy())

    @classmethod
    def from_params(cls, params: ScalerParams) -> "Standardizer":
        s = cls()
        s.mean_ = np.asarray(params.means, dtype=np.float64)
        s.scale_ = np.asarray(params.stds, dtype=np.float64)
        s.n_features_in_ = len(s.mean_)
        return s


def fit_scaler(train) -> ScalerParams:
    return Standardizer().fit(train).params


def apply_scaler(params: ScalerParams, data) -> np.ndarray:
    if len(params.means) != np.shape(data)[-1]:
        raise SchemaError(
            f"scaler fitted on {len(params.means)} features, data has {np.shape(data)[-1]}"
        )
    return Standardizer.from_params(params).transform(data)


# ------------------------------------------------------------------ rebalancing


def downsample_indices(y: np.ndarray, ratio: int, rng: np.random.Generator) -> np.ndarray:
    """Row indices kept when thinning negatives to `ratio` per positive."""
    if ratio < 1:
        raise ValidationError("downsample ratio must be >= 1")
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size == 0:
        raise EmptyClassError("cannot downsample: no positive samples")
    target = ratio * pos.size
    if neg.size <= target:
        return np.arange(y.size)
    keep_neg = rng.choice(neg, size=target, replace=False)
    return np.sort(np.concatenate([pos, keep_neg]))


def downsample(batch: LabeledBatch, ratio: int, seed) -> LabeledBatch:
    idx = downsample_indices(batch.y, ratio, np.random.default_rng(seed))
    if idx.size == batch.n_rows:
        return batch
    return LabeledBatch(batch.period, batch.X[idx], batch.y[idx], batch.feature_names)


# ------------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class DriftEvent:
    period: int
    feature: int
    mean_shift: float


@dataclass(frozen=True)
class SyntheticDriftSpec:
    n_features: int
    n_periods: int
    samples_per_period: int
    failure_rate: float
    drift_events: tuple[DriftEvent, ...] = ()
    label_signal_features: tuple[int, ...] = (0,)
    seed: int = 0
    signal_strength: float = 2.0

    def __post_init__(self):
        events = tuple(e if isinstance(e, DriftEvent) else DriftEvent(*e) for e in self.drift_events)
        object.__setattr__(self, "drift_events", events)
        object.__setattr__(self, "label_signal_features", tuple(self.label_signal_features))
        if self.n_features < 1 or self.n_periods < 1 or self.samples_per_period < 1:
            raise ValidationError("n_features, n_periods and samples_per_period must be >= 1")
        if not 0.0 < self.failure_rate < 1.0:
            raise ValidationError("failure_rate must be in (0, 1)")
        for e in events:
            if not 1 <= e.period < self.n_periods:
                raise ValidationError(f"drift period {e.period} outside [1, {self.n_periods})")
            if not 0 <= e.feature < self.n_features:
                raise ValidationError(f"drift feature {e.feature} out of range")
        for f in self.label_signal_features:
            if not 0 <= f < self.n_features:
                raise ValidationError(f"signal feature {f} out of range")

    def means_at(self, period: int) -> np.ndarray:
        mu = np.zeros(self.n_features)
        for e in self.drift_events:
            if e.period <= period:
                mu[e.feature] += e.mean_shift
        return mu


def _logistic_intercept(rate: float, spread: float) -> float:
    # E[sigmoid(b + spread * Z)] = rate, Z ~ N(0, 1), by Gauss-Hermite quadrature
    if spread == 0:
        return math.log(rate / (1 - rate))
    nodes, weights = np.polynomial.hermite_e.hermegauss(80)
    weights = weights / weights.sum()

    def gap(b):
        return float(weights @ (1.0 / (1.0 + np.exp(-(b + spread * nodes))))) - rate

    return brentq(gap, -60.0, 60.0, xtol=1e-12)


def generate_synthetic_stream(spec: SyntheticDriftSpec) -> BatchStream:
    """Draw a stream of unit-variance Gaussian features with mean-shift drift.

    Labels follow a logistic link on the signal features measured relative to
    their current generating mean. A drift event therefore moves both the
    marginal distribution and the feature-to-label mapping, while the base
    failure rate stays at ``spec.failure_rate`` in every period.
    """
    rng = np.random.default_rng(spec.seed)
    signal = list(spec.label_signal_features)
    weight = spec.signal_strength / math.sqrt(len(signal)) if signal else 0.0
    intercept = _logistic_intercept(spec.failure_rate, spec.signal_strength if signal else 0.0)
    names = tuple(f"f{i}" for i in range(spec.n_features))
    batches = []
    for t in range(spec.n_periods):
        mu = spec.means_at(t)
        Z = rng.standard_normal((spec.samples_per_period, spec.n_features))
        logit = intercept + weight * Z[:, signal].sum(axis=1)
        y = (rng.random(spec.samples_per_period) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int8)
        batches.append(LabeledBatch(t, Z + mu, y, names))
    return BatchStream(tuple(batches), names)


def split_initial(stream: BatchStream) -> tuple[BatchStream, BatchStream]:
    """First ceil(P/2) periods for initial training, the rest for evaluation.

    The evaluation half keeps its original period numbers relative to the
    full stream via ``LabeledBatch.period``; it is returned as a
    renumbered stream so it satisfies the contiguity invariant.
    """
    n = len(stream)
    if n < 2:
        raise InsufficientDataError("need at least 2 periods to split")
    cut = math.ceil(n / 2)
    return (
        BatchStream(stream.batches[:cut], stream.feature_names),
        reindexed(stream.batches[cut:], stream.feature_names),
    )

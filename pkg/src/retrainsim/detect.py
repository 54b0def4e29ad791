"""Unsupervised drift detection with two-sample Kolmogorov-Smirnov tests.

Three variants compare a reference (training) window with an incoming
batch: on every raw feature (KS-ALL), on principal components covering a
target share of variance (KS-PCA), or on the features whose Gini importance
is at least the mean importance (KS-FI). Per-dimension p-values are
combined with a Bonferroni-corrected minimum-p rule.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import as_feature_matrix
from .energy import EnergyMeter, MeasurementScope, NullMeter, SubPhase, measure_scope
from .exceptions import ConfigurationError, InsufficientDataError, SchemaError, ValidationError

MIN_WINDOW_ROWS = 10


class DetectorMethod(str, enum.Enum):
    KS_ALL = "ks_all"
    KS_PCA = "ks_pca"
    KS_FI = "ks_fi"

    @classmethod
    def parse(cls, value) -> "DetectorMethod":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown detector method {value!r}") from None


# ------------------------------------------------------------------------ KS


def _check_sample(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise InsufficientDataError("KS test needs non-empty samples")
    return x


def ks_statistic_sorted(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample D for already-sorted samples."""
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_statistic(a, b) -> float:
    """sup |F_a(x) - F_b(x)| over the empirical CDFs."""
    a, b = _check_sample(a), _check_sample(b)
    return ks_statistic_sorted(np.sort(a), np.sort(b))


def ks_pvalue(D: float, m: int, n: int) -> float:
    """Asymptotic two-sided p-value from the Kolmogorov distribution.

    Sums 2 * sum_k (-1)^(k-1) exp(-2 k^2 lambda^2) until terms drop below
    1e-12. An approximation for small samples.
    """
    if m < 1 or n < 1:
        raise ValidationError("sample sizes must be >= 1")
    if not 0.0 <= D <= 1.0:
        raise ValidationError(f"D must be in [0, 1], got {D}")
    lam = D * math.sqrt(m * n / (m + n))
    if lam == 0.0:
        return 1.0
    lam2 = lam * lam
    # last k whose term is still >= 1e-12
    k_max = max(1, int(math.sqrt(-math.log(1e-12) / (2.0 * lam2))) + 1)
    k = np.arange(1, k_max + 1, dtype=np.float64)
    terms = np.exp(-2.0 * k * k * lam2)
    terms = terms[terms >= 1e-12] if terms[0] >= 1e-12 else terms[:1]
    signs = np.where(np.arange(terms.size) % 2 == 0, 1.0, -1.0)
    p = 2.0 * float(np.sum(signs * terms))
    return min(1.0, max(0.0, p))


# ----------------------------------------------------------------------- PCA


@dataclass(frozen=True)
class PcaProjection:
    components: np.ndarray
    explained_variance: np.ndarray
    center: np.ndarray
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance


class PCAReducer(TransformerMixin, BaseEstimator):
    """Covariance eigendecomposition keeping the fewest components whose
    cumulative explained-variance share reaches ``variance_retained``."""

    def __init__(self, variance_retained: float = 0.95):
        self.variance_retained = variance_retained

    def fit(self, X, y=None):
        if not 0.0 < self.variance_retained <= 1.0:
            raise ValidationError("variance_retained must be in (0, 1]")
        X = as_feature_matrix(X)
        if X.shape[0] < 2:
            raise InsufficientDataError("PCA needs at least 2 rows")
        center = X.mean(axis=0)
        cov = np.atleast_2d(np.cov(X - center, rowvar=False, ddof=1))
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order].T
        # deterministic orientation: largest-magnitude loading positive
        pivot = np.argmax(np.abs(evecs), axis=1)
        evecs *= np.sign(evecs[np.arange(len(evecs)), pivot])[:, None]
        total = float(np.trace(cov))
        if total > 0:
            cum = np.cumsum(evals) / evals.sum()
            k = int(np.searchsorted(cum, self.variance_retained - 1e-12) + 1)
        else:
            k = 1
        k = min(k, X.shape[0], X.shape[1])
        self.projection_ = PcaProjection(evecs[:k].copy(), evals[:k].copy(), center, total)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        return project(self.projection_, X)


def fit_pca(reference, variance_retained: float = 0.95) -> PcaProjection:
    return PCAReducer(variance_retained).fit(reference).projection_


def project(p: PcaProjection, data) -> np.ndarray:
    data = as_feature_matrix(data)
    if data.shape[1] != p.center.size:
        raise SchemaError(f"PCA fitted on {p.center.size} features, data has {data.shape[1]}")
    return (data - p.center) @ p.components.T


def select_important_features(importances) -> np.ndarray:
    """Indices whose importance is not below the mean importance."""
    imp = np.asarray(importances, dtype=np.float64)
    if imp.ndim != 1 or imp.size == 0:
        raise SchemaError("importances must be a non-empty vector")
    return np.flatnonzero(imp >= imp.mean())


# ------------------------------------------------------------------ detection


@dataclass(frozen=True)
class DetectorConfig:
    method: DetectorMethod = DetectorMethod.KS_ALL
    alpha: float = 0.05
    variance_retained: float = 0.95
    max_samples: int = 5000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", DetectorMethod.parse(self.method))
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must be in (0, 1)")
        if not 0.0 < self.variance_retained <= 1.0:
            raise ValidationError("variance_retained must be in (0, 1]")
        if self.max_samples < 10:
            raise ValidationError("max_samples must be >= 10")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        return d


@dataclass(frozen=True)
class DimensionResult:
    dimension: str
    statistic: float
    p_value: float


@dataclass(frozen=True)
class DriftVerdict:
    drift: bool
    per_dimension: tuple[DimensionResult, ...]
    corrected_alpha: float
    config: DetectorConfig
    dimensions_tested: int
    energy_j: dict = field(default_factory=dict, compare=False)

    @property
    def min_p_value(self) -> float:
        return min(d.p_value for d in self.per_dimension)

    @property
    def most_significant(self) -> DimensionResult:
        return min(self.per_dimension, key=lambda d: d.p_value)

    def to_dict(self) -> dict:
        return {
            "drift": self.drift,
            "method": self.config.to_dict(),
            "corrected_alpha": self.corrected_alpha,
            "dimensions_tested": self.dimensions_tested,
            "per_dimension": [asdict(d) for d in self.per_dimension],
            "energy_j": dict(self.energy_j),
        }


def _cap_rows(X: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if X.shape[0] <= cap:
        return X
    return X[np.sort(rng.choice(X.shape[0], size=cap, replace=False))]


def detect_drift(
    config: DetectorConfig,
    train_window,
    incoming,
    model=None,
    *,
    importances=None,
    meter: EnergyMeter | None = None,
    feature_names: Sequence[str] | None = None,
) -> DriftVerdict:
    """Compare a training window with an incoming batch.

    For KS-FI the feature filter comes from ``model.feature_importances_``
    or an explicit ``importances`` vector. When a meter is given, each
    sub-phase is measured separately and reported in ``energy_j``.
    """
    meter = meter or NullMeter()
    ref = as_feature_matrix(train_window)
    cur = as_feature_matrix(incoming)
    d = ref.shape[1]
    if cur.shape[1] != d:
        raise SchemaError(f"window has {d} features, incoming batch has {cur.shape[1]}")
    method = config.method
    if method is DetectorMethod.KS_FI:
        if importances is None:
            if model is None:
                raise ConfigurationError("KS-FI needs a fitted model or importances")
            importances = model.feature_importances_
        importances = np.asarray(importances, dtype=np.float64)
        if importances.size != d:
            raise SchemaError("importance vector length does not match feature count")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(d)]

    rng = np.random.default_rng([int(config.seed), 0xD7])
    ref = _cap_rows(ref, config.max_samples, rng)
    cur = _cap_rows(cur, config.max_samples, rng)
    if ref.shape[0] < MIN_WINDOW_ROWS or cur.shape[0] < MIN_WINDOW_ROWS:
        raise InsufficientDataError(f"both windows need >= {MIN_WINDOW_ROWS} rows")
    rows = ref.shape[0] + cur.shape[0]
    energy: dict[str, float] = {}

    def charge(sub, action, work):
        out, j = measure_scope(meter, MeasurementScope.of(sub), action, work)
        energy[sub.value] = energy.get(sub.value, 0.0) + j
        return out

    if method is DetectorMethod.KS_PCA:
        def reduce():
            p = fit_pca(ref, config.variance_retained)
            return project(p, ref), project(p, cur), [f"pc{i}" for i in range(p.k)]
        ref, cur, dims = charge(SubPhase.REDUCTION, reduce, rows * d)
    elif method is DetectorMethod.KS_FI:
        def reduce():
            keep = select_important_features(importances)
            return ref[:, keep], cur[:, keep], [names[i] for i in keep]
        ref, cur, dims = charge(SubPhase.REDUCTION, reduce, rows * d)
    else:
        dims = names

    k = ref.shape[1]
    sorted_ref, sorted_cur = charge(
        SubPhase.DIST_ESTIMATION, lambda: (np.sort(ref, axis=0), np.sort(cur, axis=0)), rows * k
    )

    def test():
        m, n = sorted_ref.shape[0], sorted_cur.shape[0]
        out = []
        for j in range(k):
            D = ks_statistic_sorted(sorted_ref[:, j], sorted_cur[:, j])
            out.append(DimensionResult(dims[j], D, ks_pvalue(D, m, n)))
        return tuple(out)

    results = charge(SubPhase.STAT_TEST, test, k)
    corrected = config.alpha / k
    drift = min(r.p_value for r in results) < corrected
    return DriftVerdict(drift, results, corrected, config, k, energy)


class KSDriftDetector(BaseEstimator):
    """Estimator-style wrapper: ``fit`` stores the reference window,
    ``test`` returns a :class:`DriftVerdict` for an incoming batch."""

    def __init__(self, method="ks_all", alpha=0.05, variance_retained=0.95, max_samples=5000, seed=0):
        self.method = method
        self.alpha = alpha
        self.variance_retained = variance_retained
        self.max_samples = max_samples
        self.seed = seed

    @property
    def config(self) -> DetectorConfig:
        return DetectorConfig(self.method, self.alpha, self.variance_retained, self.max_samples, self.seed)

    def fit(self, X, y=None, importances=None):
        self.reference_ = as_feature_matrix(X)
        self.importances_ = None if importances is None else np.asarray(importances, dtype=np.float64)
        self.config  # validates parameters
        return self

    def test(self, X, meter: EnergyMeter | None = None) -> DriftVerdict:
        check_is_fitted(self, "reference_")
        return detect_drift(self.config, self.reference_, X, importances=self.importances_, meter=meter)

    def predict(self, X) -> bool:
        return self.test(X).drift

"""When to retrain (trigger) and on which periods (training window)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .dataset import LabeledBatch
from .detect import DetectorConfig, DetectorMethod, DriftVerdict
from .exceptions import ConfigurationError, SequencingError, ValidationError


class TriggerKind(str, enum.Enum):
    STATIC = "static"
    PERIODIC = "periodic"
    INFORMED = "informed"


class WindowKind(str, enum.Enum):
    SLIDING_WINDOW = "sw"
    FULL_HISTORY = "fh"


@dataclass(frozen=True)
class RetrainTrigger:
    kind: TriggerKind
    detector: DetectorConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TriggerKind(self.kind))
        if (self.kind is TriggerKind.INFORMED) != (self.detector is not None):
            raise ConfigurationError("a detector is required for informed triggers and only for them")


@dataclass(frozen=True)
class WindowPolicy:
    kind: WindowKind
    window_periods: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if self.kind is WindowKind.SLIDING_WINDOW:
            if self.window_periods is not None and self.window_periods < 1:
                raise ValidationError("window_periods must be >= 1")
        elif self.window_periods is not None:
            raise ConfigurationError("window_periods only applies to sliding windows")


@dataclass(frozen=True)
class TrainingWindow:
    batches: tuple[LabeledBatch, ...]
    policy: WindowPolicy

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(b.period for b in self.batches)

    @property
    def n_rows(self) -> int:
        return sum(b.n_rows for b in self.batches)


def should_retrain(trigger: RetrainTrigger, period_index: int, verdict: DriftVerdict | None = None) -> bool:
    """Retrain decision before evaluating the ``period_index``-th evaluation period.

    Nothing new has been streamed in before the first evaluation period, so
    no trigger retrains there.
    """
    if trigger.kind is TriggerKind.STATIC:
        return False
    if period_index < 1:
        return False
    if trigger.kind is TriggerKind.PERIODIC:
        return True
    if verdict is None:
        raise ConfigurationError("informed trigger needs a drift verdict")
    return bool(verdict.drift)


def update_window(window: TrainingWindow, new_batch: LabeledBatch) -> TrainingWindow:
    if window.batches and new_batch.period <= window.batches[-1].period:
        raise SequencingError(
            f"period {new_batch.period} does not follow {window.batches[-1].period}"
        )
    batches = window.batches + (new_batch,)
    policy = window.policy
    if policy.kind is WindowKind.SLIDING_WINDOW and policy.window_periods is not None:
        batches = batches[-policy.window_periods:]
    return TrainingWindow(batches, policy)


# ----------------------------------------------------------- configuration names

CONFIGURATION_NAMES = (
    "static",
    "periodic_sw",
    "periodic_fh",
    "ks_all_sw",
    "ks_all_fh",
    "ks_pca_sw",
    "ks_pca_fh",
    "ks_fi_sw",
    "ks_fi_fh",
)


def parse_configuration_name(name: str) -> tuple[TriggerKind, WindowKind | None, DetectorMethod | None]:
    if name not in CONFIGURATION_NAMES:
        raise ConfigurationError(f"unknown configuration {name!r}; expected one of {CONFIGURATION_NAMES}")
    if name == "static":
        return TriggerKind.STATIC, None, None
    head, window = name.rsplit("_", 1)
    if head == "periodic":
        return TriggerKind.PERIODIC, WindowKind(window), None
    return TriggerKind.INFORMED, WindowKind(window), DetectorMethod(head)


def configuration_name(trigger: RetrainTrigger, window: WindowPolicy) -> str:
    if trigger.kind is TriggerKind.STATIC:
        return "static"
    head = "periodic" if trigger.kind is TriggerKind.PERIODIC else trigger.detector.method.value
    return f"{head}_{window.kind.value}"

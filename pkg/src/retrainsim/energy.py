"""Energy meters, per-phase ledgers and derived energy quantities.

All quantities are joules. Meters bracket a region with
``begin_scope``/``end_scope``; ``measure_scope`` runs a callable inside one
leaf scope and returns its result with the joules attributed to it.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .exceptions import ConfigurationError, InstrumentationError, ValidationError

logger = logging.getLogger(__name__)

JOULES_PER_KWH = 3.6e6


class Phase(str, enum.Enum):
    TRAIN = "train"
    DETECT = "detect"
    INFER = "infer"


class SubPhase(str, enum.Enum):
    TUNING = "tuning"
    FIT = "fit"
    DIST_ESTIMATION = "dist_estimation"
    STAT_TEST = "stat_test"
    REDUCTION = "reduction"
    PREDICT = "predict"


PHASE_OF = {
    SubPhase.TUNING: Phase.TRAIN,
    SubPhase.FIT: Phase.TRAIN,
    SubPhase.DIST_ESTIMATION: Phase.DETECT,
    SubPhase.STAT_TEST: Phase.DETECT,
    SubPhase.REDUCTION: Phase.DETECT,
    SubPhase.PREDICT: Phase.INFER,
}


@dataclass(frozen=True)
class MeasurementScope:
    phase: Phase
    subphase: SubPhase

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        object.__setattr__(self, "subphase", SubPhase(self.subphase))
        if PHASE_OF[self.subphase] is not self.phase:
            raise ValidationError(f"{self.subphase.value} is not part of {self.phase.value}")

    @classmethod
    def of(cls, subphase: SubPhase) -> "MeasurementScope":
        return cls(PHASE_OF[SubPhase(subphase)], subphase)


# ----------------------------------------------------------------------- meters


class EnergyMeter:
    """Base meter. Subclasses implement ``_start`` and ``_stop``."""

    name = "abstract"
    #: a process-wide hardware counter; runs sharing it must be serialized
    process_global = False

    def __init__(self):
        self._open: list[tuple[MeasurementScope, Any]] = []

    @property
    def depth(self) -> int:
        return len(self._open)

    def begin_scope(self, scope: MeasurementScope, work: float = 0.0) -> int:
        self._open.append((scope, self._start(scope, work)))
        return len(self._open)

    def end_scope(self, token: int) -> float:
        if token != len(self._open):
            raise InstrumentationError("scopes must be closed in LIFO order")
        scope, state = self._open.pop()
        joules = self._stop(scope, state)
        if joules < 0:
            raise InstrumentationError(f"meter {self.name} reported negative energy")
        return joules

    def _start(self, scope, work):
        raise NotImplementedError

    def _stop(self, scope, state) -> float:
        raise NotImplementedError


class NullMeter(EnergyMeter):
    name = "null"

    def _start(self, scope, work):
        return None

    def _stop(self, scope, state):
        return 0.0


class VirtualMeter(EnergyMeter):
    """Deterministic proxy: joules = per-phase coefficient x declared work units.

    Work units are supplied by the caller: rows x candidates for tuning,
    rows for fitting and prediction, rows x dimensions for detection.
    """

    name = "virtual"

    def __init__(self, c_train: float = 1e-3, c_detect: float = 1e-5, c_infer: float = 1e-4):
        super().__init__()
        for c in (c_train, c_detect, c_infer):
            if c < 0:
                raise ValidationError("meter coefficients must be non-negative")
        self.coefficients = {Phase.TRAIN: c_train, Phase.DETECT: c_detect, Phase.INFER: c_infer}

    def _start(self, scope, work):
        if work < 0:
            raise ValidationError("work units must be non-negative")
        return work

    def _stop(self, scope, work):
        return self.coefficients[scope.phase] * work


class CpuTimeMeter(EnergyMeter):
    """Process CPU seconds times an assumed average package power."""

    name = "cputime"

    def __init__(self, watts: float = 65.0):
        super().__init__()
        if watts <= 0:
            raise ValidationError("watts must be positive")
        self.watts = watts

    def _start(self, scope, work):
        return time.process_time()

    def _stop(self, scope, start):
        return max(0.0, time.process_time() - start) * self.watts


class RaplMeter(EnergyMeter):
    """Package energy counter exposed through the Linux powercap interface."""

    name = "rapl"
    process_global = True
    default_zone = Path("/sys/class/powercap/intel-rapl:0")

    def __init__(self, zone: Path | str | None = None):
        super().__init__()
        self.zone = Path(zone) if zone else self.default_zone
        if not self.available(self.zone):
            raise ConfigurationError(f"no readable energy counter at {self.zone}")
        self._range = int((self.zone / "max_energy_range_uj").read_text())

    @classmethod
    def available(cls, zone: Path | str | None = None) -> bool:
        zone = Path(zone) if zone else cls.default_zone
        try:
            int((zone / "energy_uj").read_text())
            int((zone / "max_energy_range_uj").read_text())
        except (OSError, ValueError):
            return False
        return True

    def _read(self) -> int:
        return int((self.zone / "energy_uj").read_text())

    def _start(self, scope, work):
        return self._read()

    def _stop(self, scope, start):
        delta = self._read() - start
        if delta < 0:  # counter wrapped
            delta += self._range
        return delta * 1e-6


METERS = {"virtual": VirtualMeter, "cputime": CpuTimeMeter, "rapl": RaplMeter, "null": NullMeter}


def meter_class(name: str) -> type[EnergyMeter]:
    try:
        return METERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown meter {name!r}; choose from {sorted(METERS)}") from None


def make_meter(name: str, **options) -> EnergyMeter:
    return meter_class(name)(**options)


def measure_scope(
    meter: EnergyMeter, scope: MeasurementScope, action: Callable[[], Any], work: float = 0.0
) -> tuple[Any, float]:
    """Run ``action`` inside a leaf scope; returns ``(result, joules)``."""
    if meter.depth:
        raise InstrumentationError(
            f"cannot open {scope.subphase.value}: another scope is already open on this meter"
        )
    token = meter.begin_scope(scope, work)
    try:
        result = action()
    except BaseException:
        meter.end_scope(token)
        raise
    return result, meter.end_scope(token)


# ----------------------------------------------------------------------- ledger


@dataclass
class PeriodEnergy:
    period: int
    train_j: float = 0.0
    detect_j: float = 0.0
    infer_j: float = 0.0
    subphase_j: dict = field(default_factory=dict)

    @property
    def total_j(self) -> float:
        return self.train_j + self.detect_j + self.infer_j


@dataclass
class EnergyLedger:
    configuration: str = ""
    seed: int = 0
    records: dict[int, PeriodEnergy] = field(default_factory=dict)

    def add(self, period: int, phase, joules: float) -> "EnergyLedger":
        """Charge joules to a phase (or a sub-phase, which also feeds its phase)."""
        if not joules >= 0:
            raise ValidationError(f"energy must be non-negative, got {joules}")
        rec = self.records.get(period)
        if rec is None:
            rec = self.records[period] = PeriodEnergy(period)
            self.records = dict(sorted(self.records.items()))
        if isinstance(phase, MeasurementScope):
            sub, phase = phase.subphase, phase.phase
        elif isinstance(phase, SubPhase) or phase in SubPhase._value2member_map_:
            sub = SubPhase(phase)
            phase = PHASE_OF[sub]
        else:
            sub, phase = None, Phase(phase)
        attr = f"{phase.value}_j"
        setattr(rec, attr, getattr(rec, attr) + joules)
        if sub is not None:
            rec.subphase_j[sub.value] = rec.subphase_j.get(sub.value, 0.0) + joules
        return self

    @property
    def periods(self) -> list[int]:
        return list(self.records)

    def series(self, phase) -> list[float]:
        attr = f"{Phase(phase).value}_j"
        return [getattr(r, attr) for r in self.records.values()]

    def cumulative(self, phase) -> list[float]:
        out, acc = [], 0.0
        for v in self.series(phase):
            acc += v
            out.append(acc)
        return out

    def total(self, phase=None) -> float:
        if phase is None:
            return self.total(Phase.TRAIN) + self.total(Phase.DETECT) + self.total(Phase.INFER)
        return math.fsum(self.series(phase))

    @property
    def train_total(self) -> float:
        return self.total(Phase.TRAIN)

    @property
    def detect_total(self) -> float:
        return self.total(Phase.DETECT)

    @property
    def infer_total(self) -> float:
        return self.total(Phase.INFER)

    def to_dicts(self) -> list[dict]:
        cum = {p: self.cumulative(p) for p in Phase}
        rows = []
        for i, rec in enumerate(self.records.values()):
            rows.append(
                {
                    "period": rec.period,
                    "train_j": rec.train_j,
                    "detect_j": rec.detect_j,
                    "infer_j": rec.infer_j,
                    "subphase_j": dict(sorted(rec.subphase_j.items())),
                    "cumulative_train_j": cum[Phase.TRAIN][i],
                    "cumulative_detect_j": cum[Phase.DETECT][i],
                    "cumulative_infer_j": cum[Phase.INFER][i],
                }
            )
        return rows

    def summary(self, span_value: float | None = None, span_unit: str | None = None) -> dict:
        train, detect = self.train_total, self.detect_total
        out = {
            "train_total_j": train,
            "detect_total_j": detect,
            "infer_total_j": self.infer_total,
            "total_j": self.total(),
            "overhead_pct": detector_overhead_pct(detect, train) if detect > 0 else None,
            "annual_estimate_j": None,
        }
        if span_value and span_unit:
            out["annual_estimate_j"] = extrapolate_annual(train + detect, span_value, span_unit)
        return out

    @classmethod
    def from_dicts(cls, rows: list[dict], configuration: str = "", seed: int = 0) -> "EnergyLedger":
        ledger = cls(configuration, seed)
        for row in rows:
            ledger.records[int(row["period"])] = PeriodEnergy(
                int(row["period"]), row["train_j"], row["detect_j"], row["infer_j"],
                dict(row.get("subphase_j", {})),
            )
        ledger.records = dict(sorted(ledger.records.items()))
        return ledger


def ledger_add(ledger: EnergyLedger, period: int, phase, joules: float) -> EnergyLedger:
    return ledger.add(period, phase, joules)


def detector_overhead_pct(detect_total: float, train_total: float) -> float:
    """Detector share of train+detect energy, in percent."""
    denom = train_total + detect_total
    if not denom > 0:
        raise ValidationError("overhead undefined: train and detect energy are both zero")
    return 100.0 * detect_total / denom


_PERIODS_PER_YEAR = {"weeks": 52, "months": 12}


def extrapolate_annual(observed: float, span_value: float, span_unit: str) -> float:
    """Scale energy observed over ``span_value`` weeks/months linearly to a year."""
    if span_unit not in _PERIODS_PER_YEAR:
        raise ValidationError(f"span unit must be 'weeks' or 'months', got {span_unit!r}")
    if not span_value > 0:
        raise ValidationError("observed span must be positive")
    return observed * _PERIODS_PER_YEAR[span_unit] / span_value

"""Model lifecycle replay: initial training, then per-period detect/retrain/infer."""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .dataset import BatchStream, LabeledBatch, Standardizer, concat_batches, downsample_indices, split_initial
from .detect import DetectorConfig, DriftVerdict, detect_drift
from .energy import EnergyLedger, EnergyMeter, MeasurementScope, SubPhase, make_meter, measure_scope, meter_class
from .exceptions import ConfigurationError, UndefinedMetricError, ValidationError
from .model import RandomForest, SearchSpace, predict_proba, randomized_search, roc_auc, train_forest
from .policy import (
    RetrainTrigger,
    TrainingWindow,
    TriggerKind,
    WindowKind,
    WindowPolicy,
    configuration_name,
    parse_configuration_name,
    should_retrain,
    update_window,
)

logger = logging.getLogger(__name__)

DetectFn = Callable[..., DriftVerdict]

# RNG stream tags
_DOWNSAMPLE, _TRAIN, _DETECT = 1, 2, 3


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass(frozen=True)
class SimulationConfig:
    name: str
    trigger: RetrainTrigger
    window: WindowPolicy
    search: SearchSpace = field(default_factory=SearchSpace)
    downsample_ratio: int | None = 10
    meter: str = "virtual"
    meter_options: dict = field(default_factory=dict)
    seed: int = 0
    span_value: float | None = None
    span_unit: str | None = None

    def __post_init__(self):
        expected = configuration_name(self.trigger, self.window)
        if self.name != expected:
            raise ConfigurationError(f"name {self.name!r} does not match its trigger/window ({expected!r})")
        if self.downsample_ratio is not None and self.downsample_ratio < 1:
            raise ValidationError("downsample ratio must be >= 1")

    @property
    def detector(self) -> DetectorConfig | None:
        return self.trigger.detector

    @classmethod
    def from_name(
        cls,
        name: str,
        *,
        detector: DetectorConfig | None = None,
        window_periods: int | None = None,
        **kwargs,
    ) -> "SimulationConfig":
        trigger_kind, window_kind, method = parse_configuration_name(name)
        if trigger_kind is TriggerKind.INFORMED:
            base = detector or DetectorConfig()
            trigger = RetrainTrigger(trigger_kind, replace(base, method=method))
        else:
            trigger = RetrainTrigger(trigger_kind)
        if window_kind is None:
            window = WindowPolicy(WindowKind.SLIDING_WINDOW)
        elif window_kind is WindowKind.SLIDING_WINDOW:
            window = WindowPolicy(window_kind, window_periods)
        else:
            window = WindowPolicy(window_kind)
        return cls(name, trigger, window, **kwargs)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trigger": self.trigger.kind.value,
            "detector": self.detector.to_dict() if self.detector else None,
            "window": self.window.kind.value if self.name != "static" else None,
            "window_periods": self.window.window_periods,
            "search": self.search.to_dict(),
            "downsample_ratio": self.downsample_ratio,
            "meter": self.meter,
            "meter_options": dict(sorted(self.meter_options.items())),
            "seed": self.seed,
            "span_value": self.span_value,
            "span_unit": self.span_unit,
        }


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    retrained: bool
    drift_detected: bool | None
    roc_auc: float | None
    train_j: float
    detect_j: float
    infer_j: float
    train_rows: int
    trained_through: int


@dataclass
class LifecycleReport:
    config: dict
    records: list[PeriodRecord]
    ledger: EnergyLedger
    stream_fingerprint: str
    initial_period: int
    final_importances: list[float]
    verdicts: list[dict] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.config["name"]

    @property
    def seed(self) -> int:
        return self.config["seed"]

    @property
    def retrain_count(self) -> int:
        return sum(r.retrained for r in self.records)

    @property
    def mean_roc_auc(self) -> float | None:
        scores = [r.roc_auc for r in self.records if r.roc_auc is not None]
        return float(np.mean(scores)) if scores else None

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "stream_fingerprint": self.stream_fingerprint,
            "initial_period": self.initial_period,
            "retrain_count": self.retrain_count,
            "mean_roc_auc": self.mean_roc_auc,
            "records": [asdict(r) for r in self.records],
            "ledger": {
                "configuration": self.ledger.configuration,
                "seed": self.ledger.seed,
                "periods": self.ledger.to_dicts(),
                "summary": self.ledger.summary(self.config.get("span_value"), self.config.get("span_unit")),
            },
            "final_importances": self.final_importances,
            "verdicts": self.verdicts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "LifecycleReport":
        led = d["ledger"]
        return cls(
            config=d["config"],
            records=[PeriodRecord(**r) for r in d["records"]],
            ledger=EnergyLedger.from_dicts(led["periods"], led["configuration"], led["seed"]),
            stream_fingerprint=d["stream_fingerprint"],
            initial_period=d["initial_period"],
            final_importances=list(d.get("final_importances", [])),
            verdicts=list(d.get("verdicts", [])),
        )

    def file_name(self) -> str:
        return f"{self.name}_seed{self.seed}.json"


@dataclass
class _Deployed:
    scaler: Standardizer
    model: RandomForest
    train_rows: int
    trained_through: int


def run_lifecycle(
    stream: BatchStream,
    config: SimulationConfig,
    *,
    meter: EnergyMeter | None = None,
    detect_fn: DetectFn = detect_drift,
) -> LifecycleReport:
    """Replay ``stream`` under one retraining configuration.

    The first half of the stream trains the initial model. Each later
    period p is then, in order: checked for drift (informed triggers),
    possibly retrained on the window holding periods < p, predicted and
    scored, and finally appended to the window.
    """
    meter = meter or make_meter(config.meter, **config.meter_options)
    train_part, _ = split_initial(stream)
    cut = len(train_part)
    names = stream.feature_names
    d = stream.n_features
    ledger = EnergyLedger(config.name, config.seed)
    policy = config.window
    if policy.kind is WindowKind.SLIDING_WINDOW and policy.window_periods is None:
        policy = WindowPolicy(policy.kind, cut)
    window = TrainingWindow(tuple(train_part.batches), policy)

    def measured(sub: SubPhase, period: int, action, work: float):
        result, joules = measure_scope(meter, MeasurementScope.of(sub), action, work)
        ledger.add(period, sub, joules)
        return result

    def train(at_period: int) -> _Deployed:
        X, y = concat_batches(window.batches, d)
        scaler = Standardizer().fit(X)
        Xs = scaler.transform(X)
        if config.downsample_ratio is not None:
            idx = downsample_indices(y, config.downsample_ratio, np.random.default_rng(
                derive_seed(config.seed, at_period, _DOWNSAMPLE)))
            Xs, y = Xs[idx], y[idx]
        batch = LabeledBatch(at_period, Xs, y, names)
        seed = derive_seed(config.seed, at_period, _TRAIN)
        rows = batch.n_rows
        hp, _ = measured(SubPhase.TUNING, at_period,
                         lambda: randomized_search(batch, config.search, seed),
                         rows * config.search.n_candidates)
        model = measured(SubPhase.FIT, at_period, lambda: train_forest(batch, hp, seed), rows)
        logger.debug("%s seed=%d trained at %d on %d rows (%s)", config.name, config.seed, at_period, rows, hp)
        return _Deployed(scaler, model, rows, window.periods[-1])

    deployed = train(cut - 1)
    records: list[PeriodRecord] = []
    verdicts: list[dict] = []
    for i, batch in enumerate(stream.batches[cut:]):
        p = batch.period
        verdict = None
        if config.trigger.kind is TriggerKind.INFORMED and i >= 1:
            ref = deployed.scaler.transform(concat_batches(window.batches, d)[0])
            incoming = deployed.scaler.transform(batch.X)
            det_cfg = replace(config.detector, seed=derive_seed(config.seed, p, _DETECT))
            verdict = detect_fn(det_cfg, ref, incoming, deployed.model, meter=meter, feature_names=names)
            for sub, joules in verdict.energy_j.items():
                ledger.add(p, SubPhase(sub), joules)
            verdicts.append({"period": p, **verdict.to_dict()})
        retrained = should_retrain(config.trigger, i, verdict)
        if retrained:
            deployed = train(p)

        X = deployed.scaler.transform(batch.X)
        scores = measured(SubPhase.PREDICT, p, lambda: predict_proba(deployed.model, X), batch.n_rows)
        try:
            auc = roc_auc(scores, batch.y)
        except UndefinedMetricError:
            logger.warning("%s: period %d has a single class; ROC AUC undefined", config.name, p)
            auc = None
        rec = ledger.records[p]
        records.append(PeriodRecord(
            period=p,
            retrained=retrained,
            drift_detected=None if verdict is None else bool(verdict.drift),
            roc_auc=auc,
            train_j=rec.train_j,
            detect_j=rec.detect_j,
            infer_j=rec.infer_j,
            train_rows=deployed.train_rows,
            trained_through=deployed.trained_through,
        ))
        window = update_window(window, batch)

    return LifecycleReport(
        config=config.to_dict(),
        records=records,
        ledger=ledger,
        stream_fingerprint=stream.fingerprint(),
        initial_period=cut - 1,
        final_importances=[float(v) for v in deployed.model.feature_importances_],
        verdicts=verdicts,
    )


# ------------------------------------------------------------ experiment grid


def execution_order(n_configs: int, n_seeds: int, shuffle_seed: int) -> list[tuple[int, int]]:
    """Shuffled (config index, seed index) order for the run grid."""
    grid = [(c, s) for c in range(n_configs) for s in range(n_seeds)]
    random.Random(shuffle_seed).shuffle(grid)
    return grid


def _run_one(args):
    stream, config = args
    return run_lifecycle(stream, config)


def run_experiment_matrix(
    stream: BatchStream,
    configs: Sequence[SimulationConfig],
    seeds: Sequence[int],
    shuffle_seed: int = 0,
    *,
    n_jobs: int = 1,
    on_report: Callable[[LifecycleReport], None] | None = None,
) -> list[LifecycleReport]:
    """Run every (config, seed) pair in shuffled order.

    Reports come back in canonical config-major, seed-minor order. Runs are
    serialized whenever the selected meter is process-global.
    """
    if not configs or not seeds:
        raise ValidationError("need at least one configuration and one seed")
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate configurations in {names}")
    if len(set(seeds)) != len(seeds):
        raise ValidationError(f"duplicate seeds in {list(seeds)}")

    order = execution_order(len(configs), len(seeds), shuffle_seed)
    logger.info("execution order: %s", ", ".join(f"{names[c]}/seed{seeds[s]}" for c, s in order))
    jobs = [(stream, replace(configs[c], seed=int(seeds[s]))) for c, s in order]

    serial = n_jobs <= 1 or any(meter_class(c.meter).process_global for c in configs)
    if serial:
        results = []
        for job in jobs:
            results.append(_run_one(job))
            if on_report:
                on_report(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_one, jobs))
        if on_report:
            for r in results:
                on_report(r)

    by_key = {(c, s): r for (c, s), r in zip(order, results)}
    return [by_key[(c, s)] for c in range(len(configs)) for s in range(len(seeds))]

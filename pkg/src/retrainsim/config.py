"""INI-style configuration files for experiments and synthetic streams.

Experiment file::

    [experiment]
    configurations = static, periodic_sw, ks_all_sw
    seeds = 5
    shuffle_seed = 0
    downsample_ratio = 10        ; or "none"
    window_periods = 12          ; optional, sliding-window length
    span_value = 12
    span_unit = weeks            ; weeks | months

    [detector]
    alpha = 0.05
    variance_retained = 0.95
    max_samples = 5000

    [search]
    n_trees = 50, 100, 200
    max_depth = 4, 8, 16, none
    min_samples_leaf = 1, 2, 5
    max_features = sqrt, half, all
    bootstrap_fraction = 1.0
    n_candidates = 10
    holdout_fraction = 0.2

    [meter]
    c_train = 1e-3
    c_detect = 1e-5
    c_infer = 1e-4
    watts = 65

Synthetic stream file::

    [synthetic]
    n_features = 20
    n_periods = 24
    samples_per_period = 1000
    failure_rate = 0.05
    label_signal_features = 0, 1, 2
    drift_events = 8:0:1.0, 16:1:1.0    ; period:feature:shift_in_sigma
    seed = 0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .dataset import DriftEvent, SyntheticDriftSpec
from .detect import DetectorConfig
from .exceptions import ConfigurationError, RetrainSimError
from .model import SearchSpace
from .policy import CONFIGURATION_NAMES
from .sim import SimulationConfig

_NONE = {"none", "unbounded", "null", ""}


def _read(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror or exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return parser


def _list(raw: str) -> list[str]:
    return [p.strip() for p in raw.split(",") if p.strip()]


def _int_or_none(s: str) -> int | None:
    return None if s.lower() in _NONE else int(s)


def _max_features(s: str):
    s = s.lower()
    return int(s) if s.isdigit() else s


def _section(parser, name: str, allowed: set[str]) -> dict[str, str]:
    if not parser.has_section(name):
        return {}
    items = dict(parser.items(name))
    unknown = set(items) - allowed
    if unknown:
        raise ConfigurationError(f"[{name}]: unknown keys {sorted(unknown)}")
    return items


def _convert(section: str, key: str, raw: str, fn):
    try:
        return fn(raw)
    except (ValueError, RetrainSimError) as exc:
        raise ConfigurationError(f"[{section}] {key} = {raw!r}: {exc}") from None


@dataclass
class ExperimentConfig:
    configurations: list[str]
    seeds: int = 1
    shuffle_seed: int = 0
    downsample_ratio: int | None = 10
    window_periods: int | None = None
    span_value: float | None = None
    span_unit: str | None = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    search: SearchSpace = field(default_factory=SearchSpace)
    meter_options: dict = field(default_factory=dict)

    def simulation_configs(self, meter: str = "virtual") -> list[SimulationConfig]:
        options = {
            "virtual": {k: v for k, v in self.meter_options.items() if k.startswith("c_")},
            "cputime": {k: v for k, v in self.meter_options.items() if k == "watts"},
        }.get(meter, {})
        return [
            SimulationConfig.from_name(
                name,
                detector=self.detector,
                window_periods=self.window_periods,
                search=self.search,
                downsample_ratio=self.downsample_ratio,
                meter=meter,
                meter_options=options,
                span_value=self.span_value,
                span_unit=self.span_unit,
            )
            for name in self.configurations
        ]


def load_experiment_config(path) -> ExperimentConfig:
    parser = _read(path)
    unknown = set(parser.sections()) - {"experiment", "detector", "search", "meter"}
    if unknown:
        raise ConfigurationError(f"{path}: unknown sections {sorted(unknown)}")

    exp = _section(parser, "experiment", {
        "configurations", "seeds", "shuffle_seed", "downsample_ratio",
        "window_periods", "span_value", "span_unit",
    })
    names = _list(exp.get("configurations", ",".join(CONFIGURATION_NAMES)))
    for n in names:
        if n not in CONFIGURATION_NAMES:
            raise ConfigurationError(f"[experiment] unknown configuration {n!r}")
    if len(set(names)) != len(names):
        raise ConfigurationError("[experiment] configurations contain duplicates")
    span_unit = exp.get("span_unit")
    if span_unit is not None and span_unit not in ("weeks", "months"):
        raise ConfigurationError("[experiment] span_unit must be 'weeks' or 'months'")
    cfg = ExperimentConfig(
        configurations=names,
        seeds=_convert("experiment", "seeds", exp.get("seeds", "1"), int),
        shuffle_seed=_convert("experiment", "shuffle_seed", exp.get("shuffle_seed", "0"), int),
        downsample_ratio=_convert("experiment", "downsample_ratio", exp.get("downsample_ratio", "10"), _int_or_none),
        window_periods=_convert("experiment", "window_periods", exp.get("window_periods", "none"), _int_or_none),
        span_value=_convert("experiment", "span_value", exp["span_value"], float) if "span_value" in exp else None,
        span_unit=span_unit,
    )
    if (cfg.span_value is None) != (cfg.span_unit is None):
        raise ConfigurationError("[experiment] span_value and span_unit go together")

    det = _section(parser, "detector", {"alpha", "variance_retained", "max_samples"})
    cfg.detector = _convert("detector", "*", None, lambda _: DetectorConfig(
        alpha=float(det.get("alpha", 0.05)),
        variance_retained=float(det.get("variance_retained", 0.95)),
        max_samples=int(det.get("max_samples", 5000)),
    ))

    search = _section(parser, "search", {
        "n_trees", "max_depth", "min_samples_leaf", "max_features",
        "bootstrap_fraction", "n_candidates", "holdout_fraction",
    })
    kwargs = {}
    parsers = {
        "n_trees": int, "max_depth": _int_or_none, "min_samples_leaf": int,
        "max_features": _max_features, "bootstrap_fraction": float,
    }
    for key, fn in parsers.items():
        if key in search:
            kwargs[key] = tuple(_convert("search", key, v, fn) for v in _list(search[key]))
    if "n_candidates" in search:
        kwargs["n_candidates"] = _convert("search", "n_candidates", search["n_candidates"], int)
    if "holdout_fraction" in search:
        kwargs["holdout_fraction"] = _convert("search", "holdout_fraction", search["holdout_fraction"], float)
    cfg.search = _convert("search", "*", None, lambda _: SearchSpace(**kwargs))

    meter = _section(parser, "meter", {"c_train", "c_detect", "c_infer", "watts"})
    cfg.meter_options = {k: _convert("meter", k, v, float) for k, v in meter.items()}
    return cfg


def _drift_event(raw: str) -> DriftEvent:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ValueError("expected period:feature:shift")
    return DriftEvent(int(parts[0]), int(parts[1]), float(parts[2]))


def load_synthetic_spec(path) -> SyntheticDriftSpec:
    parser = _read(path)
    sec = _section(parser, "synthetic", {
        "n_features", "n_periods", "samples_per_period", "failure_rate",
        "label_signal_features", "drift_events", "seed", "signal_strength",
    })
    if not sec:
        raise ConfigurationError(f"{path}: missing [synthetic] section")
    try:
        return SyntheticDriftSpec(
            n_features=int(sec["n_features"]),
            n_periods=int(sec["n_periods"]),
            samples_per_period=int(sec["samples_per_period"]),
            failure_rate=float(sec["failure_rate"]),
            drift_events=tuple(_drift_event(e) for e in _list(sec.get("drift_events", ""))),
            label_signal_features=tuple(int(v) for v in _list(sec.get("label_signal_features", "0"))),
            seed=int(sec.get("seed", 0)),
            signal_strength=float(sec.get("signal_strength", 2.0)),
        )
    except KeyError as exc:
        raise ConfigurationError(f"{path}: [synthetic] missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None

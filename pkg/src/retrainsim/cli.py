"""Command-line entry point: ``retrainsim generate|simulate|detect|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_experiment_config, load_synthetic_spec
from .dataset import Standardizer, concat_batches, generate_synthetic_stream, load_csv_stream, write_csv_stream
from .detect import DetectorConfig, DetectorMethod, detect_drift
from .exceptions import ConfigurationError, DataError, RetrainSimError
from .report import compare_runs, emit_tables, load_runs, summarize_runs
from .sim import run_experiment_matrix

logger = logging.getLogger("retrainsim")


def _cmd_generate(args) -> int:
    spec = load_synthetic_spec(args.spec)
    stream = generate_synthetic_stream(spec)
    write_csv_stream(stream, args.out)
    logger.info("wrote %d periods x %d rows to %s", len(stream), spec.samples_per_period, args.out)
    return 0


def _cmd_simulate(args) -> int:
    exp = load_experiment_config(args.config)
    stream = load_csv_stream(args.data)
    configs = exp.simulation_configs(args.meter)
    n_seeds = args.seeds if args.seeds is not None else exp.seeds
    if n_seeds < 1:
        raise ConfigurationError("--seeds must be >= 1")
    shuffle_seed = args.shuffle_seed if args.shuffle_seed is not None else exp.shuffle_seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def write(report):
        path = out / report.file_name()
        path.write_text(report.to_json(), encoding="utf-8")
        logger.info("%s: retrains=%d mean_auc=%s", path.name, report.retrain_count, report.mean_roc_auc)

    run_experiment_matrix(stream, configs, list(range(n_seeds)), shuffle_seed, n_jobs=args.jobs, on_report=write)
    return 0


def _features(path) -> tuple[np.ndarray, tuple[str, ...]]:
    stream = load_csv_stream(path)
    return concat_batches(stream.batches, stream.n_features)[0], stream.feature_names


def _cmd_detect(args) -> int:
    train, names = _features(args.train)
    infer, infer_names = _features(args.infer)
    if infer_names != names:
        raise DataError("training and inference files have different feature columns")
    method = DetectorMethod.parse(args.method)
    importances = None
    if args.model:
        try:
            importances = json.loads(Path(args.model).read_text(encoding="utf-8"))["final_importances"]
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"{args.model}: cannot read model importances ({exc})") from exc
    if method is DetectorMethod.KS_FI and importances is None:
        raise ConfigurationError("ks-fi needs --model <run file>")
    config = DetectorConfig(method, args.alpha, args.variance_retained, args.max_samples, args.seed)
    scaler = Standardizer().fit(train)
    verdict = detect_drift(
        config, scaler.transform(train), scaler.transform(infer),
        importances=importances, feature_names=names,
    )
    out = verdict.to_dict()
    out.pop("energy_j")
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _pair(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError(f"expected A,B, got {text!r}")
    return parts[0], parts[1]


def _cmd_report(args) -> int:
    runs = load_runs(args.runs)
    summary = summarize_runs(runs)
    comparisons = compare_runs(runs, args.compare or [], args.alpha)
    for path in emit_tables(summary, comparisons, args.out):
        logger.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retrainsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic drifting stream to CSV")
    p.add_argument("--spec", required=True, help="synthetic stream config file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("simulate", help="run the configuration x seed matrix")
    p.add_argument("--data", required=True, help="input stream CSV")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", required=True, help="directory for run reports")
    p.add_argument("--seeds", type=int, default=None, help="number of seeds (0..N-1)")
    p.add_argument("--meter", choices=("virtual", "cputime", "rapl"), default="virtual")
    p.add_argument("--shuffle-seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (ignored for rapl)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="one-shot drift verdict between two CSV files")
    p.add_argument("--train", required=True)
    p.add_argument("--infer", required=True)
    p.add_argument("--method", required=True, choices=("ks-all", "ks-pca", "ks-fi"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--model", help="run report whose final importances drive ks-fi")
    p.add_argument("--variance-retained", type=float, default=0.95)
    p.add_argument("--max-samples", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("report", help="summaries, comparisons and figure data from run reports")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--compare", nargs="*", type=_pair, metavar="A,B")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except RetrainSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

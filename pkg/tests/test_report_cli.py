import csv
import json

import pytest

from retrainsim.cli import main
from retrainsim.energy import EnergyLedger
from retrainsim.exceptions import DataError, InsufficientDataError, ValidationError
from retrainsim.policy import CONFIGURATION_NAMES
from retrainsim.report import (
    COMPARISON_COLUMNS,
    SUMMARY_COLUMNS,
    compare_runs,
    emit_tables,
    load_runs,
    make_artifact,
    summarize_runs,
)
from retrainsim.sim import LifecycleReport, PeriodRecord


def hand_report(name, seed=0, train=99.0, detect=1.0, infer=2.0, auc=0.8, fingerprint="abc", span=None):
    trigger = "static" if name == "static" else "periodic" if name.startswith("periodic") else "informed"
    ledger = EnergyLedger(name, seed).add(0, "train", train).add(1, "infer", infer)
    if detect:
        ledger.add(1, "detect", detect)
    rec = PeriodRecord(1, False, None, auc, 0.0, detect, infer, 10, 0)
    config = {"name": name, "seed": seed, "trigger": trigger, "span_value": span and span[0], "span_unit": span and span[1]}
    return LifecycleReport(config, [rec], ledger, fingerprint, 0, [1.0])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSummary:
    def test_overhead_passthrough(self):
        row = summarize_runs(make_artifact([hand_report("ks_all_sw")])).rows[0]
        assert row["overhead_pct"] == 1.0
        assert row["train_detect_j_median"] == 100.0

    def test_periodic_has_no_overhead(self):
        row = summarize_runs(make_artifact([hand_report("periodic_sw", detect=0.0)])).rows[0]
        assert row["overhead_pct"] is None

    def test_identical_seeds_zero_iqr(self):
        rows = summarize_runs(make_artifact([hand_report("static", 0, detect=0), hand_report("static", 1, detect=0)])).rows
        assert rows[0]["n_seeds"] == 2
        assert rows[0]["train_detect_j_iqr"] == 0.0

    def test_annual_extrapolation(self):
        row = summarize_runs(make_artifact([hand_report("static", detect=0, train=6.3e3, span=(6, "months"))])).rows[0]
        assert row["annual_train_detect_j"] == pytest.approx(12.6e3)

    def test_mixed_fingerprints(self):
        with pytest.raises(ValidationError):
            make_artifact([hand_report("static"), hand_report("periodic_sw", fingerprint="zzz")])

    def test_duplicate_runs(self):
        with pytest.raises(ValidationError):
            make_artifact([hand_report("static"), hand_report("static")])

    def test_nine_rows_in_canonical_order(self):
        runs = make_artifact([hand_report(n) for n in reversed(CONFIGURATION_NAMES)])
        assert [r["config"] for r in summarize_runs(runs).rows] == list(CONFIGURATION_NAMES)


class TestComparisons:
    def test_wilcoxon_pairs(self):
        reports = [hand_report("periodic_sw", s, train=100 + s, detect=0) for s in range(6)]
        reports += [hand_report("ks_all_sw", s, train=50 + s, detect=1) for s in range(6)]
        rows = compare_runs(make_artifact(reports), [("periodic_sw", "ks_all_sw")])
        by_metric = {r["metric"]: r for r in rows}
        td = by_metric["train_detect_j"]
        assert td["n_pairs"] == 6 and td["wilcoxon_w"] == 0.0
        assert td["p_value"] == pytest.approx(2 / 64)
        assert td["median_difference"] == 49.0 and td["significant"] == 1
        # identical inference energy: all differences zero, no test possible
        assert by_metric["infer_j"]["p_value"] is None

    def test_swap_negates_median_keeps_p(self):
        reports = [hand_report("static", s, train=10 + s * s, detect=0) for s in range(7)]
        reports += [hand_report("periodic_fh", s, train=20 + 3 * s, detect=0) for s in range(7)]
        runs = make_artifact(reports)
        ab = compare_runs(runs, [("static", "periodic_fh")])[0]
        ba = compare_runs(runs, [("periodic_fh", "static")])[0]
        assert ab["median_difference"] == -ba["median_difference"]
        assert ab["p_value"] == ba["p_value"]

    def test_unknown_configuration(self):
        with pytest.raises(ValidationError):
            compare_runs(make_artifact([hand_report("static")]), [("static", "ks_fi_fh")])


class TestEmit:
    def test_files(self, tmp_path):
        runs = make_artifact([hand_report(n, s) for n in CONFIGURATION_NAMES for s in range(2)])
        paths = emit_tables(summarize_runs(runs), [], tmp_path)
        assert sorted(p.name for p in paths) == ["comparisons.csv", "figure_data.csv", "summary.csv"]
        assert (tmp_path / "comparisons.csv").read_text() == ",".join(COMPARISON_COLUMNS) + "\n"
        summary = _rows(tmp_path / "summary.csv")
        assert len(summary) == 9 and tuple(summary[0]) == SUMMARY_COLUMNS
        assert summary[1]["overhead_pct"] == ""  # periodic_sw
        # one row per (config, seed, period)
        assert len(_rows(tmp_path / "figure_data.csv")) == 9 * 2 * 1

    def test_load_runs_errors(self, tmp_path):
        with pytest.raises(DataError):
            load_runs(tmp_path / "missing")
        with pytest.raises(InsufficientDataError):
            load_runs(tmp_path)
        (tmp_path / "static_seed0.json").write_text("{not json")
        with pytest.raises(DataError):
            load_runs(tmp_path)


EXPERIMENT = """\
[experiment]
configurations = static, periodic_sw, ks_all_sw, ks_fi_fh
seeds = 2
shuffle_seed = 3
span_value = 8
span_unit = weeks

[search]
n_trees = 4
max_depth = 3, 4
min_samples_leaf = 2
max_features = sqrt
n_candidates = 2
"""

SYNTHETIC = """\
[synthetic]
n_features = 5
n_periods = 6
samples_per_period = 200
failure_rate = 0.1
label_signal_features = 0, 1
drift_events = 4:0:2.0
seed = 1
"""


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "exp.ini").write_text(EXPERIMENT)
    (root / "syn.ini").write_text(SYNTHETIC)
    assert main(["generate", "--spec", str(root / "syn.ini"), "--out", str(root / "data.csv")]) == 0
    assert main(["simulate", "--data", str(root / "data.csv"), "--config", str(root / "exp.ini"),
                 "--out", str(root / "runs")]) == 0
    return root


class TestCli:
    def test_simulate_writes_run_files(self, pipeline):
        names = sorted(p.name for p in (pipeline / "runs").iterdir())
        assert len(names) == 8 and "ks_fi_fh_seed1.json" in names

    def test_report(self, pipeline, tmp_path):
        assert main(["report", "--runs", str(pipeline / "runs"), "--out", str(tmp_path),
                     "--compare", "static,periodic_sw"]) == 0
        assert len(_rows(tmp_path / "summary.csv")) == 4
        assert len(_rows(tmp_path / "comparisons.csv")) == 3

    def test_detect(self, pipeline, tmp_path, capsys):
        assert main(["detect", "--train", str(pipeline / "data.csv"), "--infer", str(pipeline / "data.csv"),
                     "--method", "ks-all", "--alpha", "0.05"]) == 0
        verdict = json.loads(capsys.readouterr().out)
        assert verdict["drift"] is False and verdict["dimensions_tested"] == 5

    def test_detect_fi_uses_run_file(self, pipeline, capsys):
        assert main(["detect", "--train", str(pipeline / "data.csv"), "--infer", str(pipeline / "data.csv"),
                     "--method", "ks-fi", "--model", str(pipeline / "runs" / "ks_fi_fh_seed0.json")]) == 0
        assert json.loads(capsys.readouterr().out)["dimensions_tested"] < 5

    def test_exit_codes(self, pipeline, tmp_path):
        data = str(pipeline / "data.csv")
        # configuration error
        assert main(["detect", "--train", data, "--infer", data, "--method", "ks-fi"]) == 2
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\nconfigurations = static, nonsense\n")
        assert main(["simulate", "--data", data, "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
        # data error
        assert main(["simulate", "--data", str(tmp_path / "nope.csv"), "--config", str(pipeline / "exp.ini"),
                     "--out", str(tmp_path / "o")]) == 3
        assert main(["report", "--runs", str(tmp_path / "empty"), "--out", str(tmp_path)]) == 3

    def test_bad_compare_argument(self, pipeline, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["report", "--runs", str(pipeline / "runs"), "--out", str(tmp_path), "--compare", "static"])
        assert exc.value.code == 2

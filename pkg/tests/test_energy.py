import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrainsim.energy import (
    CpuTimeMeter,
    EnergyLedger,
    MeasurementScope,
    NullMeter,
    Phase,
    RaplMeter,
    SubPhase,
    VirtualMeter,
    detector_overhead_pct,
    extrapolate_annual,
    ledger_add,
    make_meter,
    measure_scope,
)
from retrainsim.exceptions import ConfigurationError, InstrumentationError, ValidationError


class TestVirtualMeter:
    def test_coefficients(self):
        m = VirtualMeter()
        assert measure_scope(m, MeasurementScope.of("fit"), lambda: None, 1000)[1] == pytest.approx(1.0)
        assert measure_scope(m, MeasurementScope.of("stat_test"), lambda: None, 1000)[1] == pytest.approx(0.01)
        assert measure_scope(m, MeasurementScope.of("predict"), lambda: None, 1000)[1] == pytest.approx(0.1)

    def test_returns_action_result(self):
        out, j = measure_scope(VirtualMeter(), MeasurementScope.of("tuning"), lambda: 42, 0)
        assert out == 42 and j == 0.0

    def test_configurable(self):
        m = make_meter("virtual", c_train=2.0)
        assert measure_scope(m, MeasurementScope.of("fit"), lambda: None, 3)[1] == 6.0

    def test_negative_work(self):
        with pytest.raises(ValidationError):
            measure_scope(VirtualMeter(), MeasurementScope.of("fit"), lambda: None, -1)

    def test_nested_scope_rejected(self):
        m = VirtualMeter()
        m.begin_scope(MeasurementScope.of("fit"))
        with pytest.raises(InstrumentationError):
            measure_scope(m, MeasurementScope.of("predict"), lambda: None, 1)

    def test_scope_closed_after_exception(self):
        m = VirtualMeter()
        with pytest.raises(ZeroDivisionError):
            measure_scope(m, MeasurementScope.of("fit"), lambda: 1 / 0, 1)
        assert m.depth == 0

    def test_mismatched_scope(self):
        with pytest.raises(ValidationError):
            MeasurementScope(Phase.TRAIN, SubPhase.PREDICT)


def test_cputime_meter_measures_work():
    m = CpuTimeMeter(watts=10.0)
    _, j = measure_scope(m, MeasurementScope.of("fit"), lambda: sum(i * i for i in range(200_000)))
    assert j > 0


def test_null_meter():
    assert measure_scope(NullMeter(), MeasurementScope.of("fit"), lambda: None, 99)[1] == 0.0


def test_unknown_meter():
    with pytest.raises(ConfigurationError):
        make_meter("wattmeter")


@pytest.mark.skipif(not RaplMeter.available(), reason="no powercap energy counter")
def test_rapl_meter():
    _, j = measure_scope(RaplMeter(), MeasurementScope.of("fit"), lambda: sum(range(100_000)))
    assert j >= 0


def test_rapl_missing_zone(tmp_path):
    with pytest.raises(ConfigurationError):
        RaplMeter(tmp_path)


def test_rapl_wraparound(tmp_path):
    (tmp_path / "energy_uj").write_text("900")
    (tmp_path / "max_energy_range_uj").write_text("1000")
    m = RaplMeter(tmp_path)
    token = m.begin_scope(MeasurementScope.of("fit"))
    (tmp_path / "energy_uj").write_text("100")
    assert m.end_scope(token) == pytest.approx(200e-6)


class TestLedger:
    def test_cumulative(self):
        led = EnergyLedger()
        ledger_add(led, 0, "train", 5.0)
        ledger_add(led, 1, "train", 3.0)
        assert led.cumulative("train") == [5.0, 8.0]

    def test_no_detect_entries(self):
        led = EnergyLedger().add(0, "train", 1.0)
        assert led.detect_total == 0.0
        assert led.summary()["overhead_pct"] is None

    def test_zero_add(self):
        led = EnergyLedger().add(0, "train", 5.0).add(1, "train", 0.0)
        assert led.cumulative("train") == [5.0, 5.0]

    def test_negative(self):
        with pytest.raises(ValidationError):
            EnergyLedger().add(0, "train", -1.0)

    def test_subphase_feeds_phase(self):
        led = EnergyLedger().add(0, SubPhase.TUNING, 2.0).add(0, "fit", 1.0)
        rec = led.records[0]
        assert rec.train_j == 3.0
        assert rec.subphase_j == {"tuning": 2.0, "fit": 1.0}

    def test_round_trip(self):
        led = EnergyLedger("x", 3).add(2, "infer", 1.5).add(0, "stat_test", 0.25)
        back = EnergyLedger.from_dicts(json.loads(json.dumps(led.to_dicts())), "x", 3)
        assert back.to_dicts() == led.to_dicts()
        assert led.periods == [0, 2]

    def test_summary_annual(self):
        led = EnergyLedger().add(0, "train", 10.0).add(0, "detect", 2.0)
        s = led.summary(6, "months")
        assert s["annual_estimate_j"] == 24.0
        assert s["total_j"] == 12.0

    @given(st.lists(st.tuples(st.integers(0, 8), st.sampled_from(list(SubPhase)), st.floats(0, 1e3)), max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_additivity_and_monotonicity(self, entries):
        led = EnergyLedger()
        for period, sub, j in entries:
            led.add(period, sub, j)
        for rec in led.records.values():
            for phase in Phase:
                parts = [v for k, v in rec.subphase_j.items() if MeasurementScope.of(k).phase is phase]
                assert sum(parts) == pytest.approx(getattr(rec, f"{phase.value}_j"), rel=1e-9, abs=1e-12)
        for phase in Phase:
            c = led.cumulative(phase)
            assert all(a <= b for a, b in zip(c, c[1:]))


class TestOverhead:
    @pytest.mark.parametrize("detect,train,pct", [(1, 99, 1.0), (0, 50, 0.0), (2, 48, 4.0)])
    def test_examples(self, detect, train, pct):
        assert detector_overhead_pct(detect, train) == pct

    def test_undefined(self):
        with pytest.raises(ValidationError):
            detector_overhead_pct(0, 0)


class TestExtrapolate:
    @pytest.mark.parametrize("observed,span,unit,annual", [
        (6.3e3, 6, "months", 12.6e3),
        (191.3e3, 1, "months", 2295.6e3),
        (393.7e3, 2, "weeks", 10236.2e3),
    ])
    def test_examples(self, observed, span, unit, annual):
        assert extrapolate_annual(observed, span, unit) == pytest.approx(annual, rel=1e-12)

    @pytest.mark.parametrize("span,unit", [(0, "weeks"), (-1, "months"), (2, "days")])
    def test_invalid(self, span, unit):
        with pytest.raises(ValidationError):
            extrapolate_annual(1.0, span, unit)

    @given(st.floats(0, 1e9), st.floats(0, 1e3), st.integers(1, 52), st.sampled_from(["weeks", "months"]))
    @settings(max_examples=100, deadline=None)
    def test_linear(self, x, k, span, unit):
        assert extrapolate_annual(k * x, span, unit) == pytest.approx(k * extrapolate_annual(x, span, unit), rel=1e-12, abs=1e-300)

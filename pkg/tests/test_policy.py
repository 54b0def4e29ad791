import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrainsim.dataset import LabeledBatch
from retrainsim.detect import DetectorConfig, DetectorMethod, DriftVerdict
from retrainsim.exceptions import ConfigurationError, SequencingError, ValidationError
from retrainsim.policy import (
    CONFIGURATION_NAMES,
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


def _verdict(drift):
    return DriftVerdict(drift, (), 0.05, DetectorConfig(), 1)


def _b(period):
    return LabeledBatch(period, np.zeros((1, 1)), np.array([0]), ("a",))


INFORMED = RetrainTrigger(TriggerKind.INFORMED, DetectorConfig())


class TestShouldRetrain:
    def test_static_never(self):
        t = RetrainTrigger("static")
        assert not any(should_retrain(t, i) for i in range(10))

    def test_periodic_after_first_period(self):
        t = RetrainTrigger("periodic")
        assert [should_retrain(t, i) for i in range(4)] == [False, True, True, True]

    def test_informed_follows_verdict(self):
        assert should_retrain(INFORMED, 3, _verdict(True))
        assert not should_retrain(INFORMED, 3, _verdict(False))

    def test_informed_first_period(self):
        assert not should_retrain(INFORMED, 0, _verdict(True))

    def test_informed_without_verdict(self):
        with pytest.raises(ConfigurationError):
            should_retrain(INFORMED, 2)

    def test_detector_pairing(self):
        with pytest.raises(ConfigurationError):
            RetrainTrigger("informed")
        with pytest.raises(ConfigurationError):
            RetrainTrigger("periodic", DetectorConfig())


class TestWindow:
    def test_sliding_drops_oldest(self):
        w = TrainingWindow((_b(0), _b(1), _b(2)), WindowPolicy("sw", 3))
        assert update_window(w, _b(3)).periods == (1, 2, 3)

    def test_full_history_grows(self):
        w = TrainingWindow((_b(0), _b(1)), WindowPolicy("fh"))
        assert update_window(w, _b(2)).periods == (0, 1, 2)

    def test_out_of_order(self):
        w = TrainingWindow((_b(0), _b(1)), WindowPolicy("fh"))
        with pytest.raises(SequencingError):
            update_window(w, _b(1))

    def test_policy_validation(self):
        with pytest.raises(ValidationError):
            WindowPolicy("sw", 0)
        with pytest.raises(ConfigurationError):
            WindowPolicy("fh", 3)

    @given(st.integers(1, 6), st.integers(0, 6), st.integers(1, 12))
    @settings(max_examples=80, deadline=None)
    def test_sizes(self, w, initial, steps):
        sw = TrainingWindow(tuple(_b(i) for i in range(initial)), WindowPolicy("sw", w))
        fh = TrainingWindow(tuple(_b(i) for i in range(initial)), WindowPolicy("fh"))
        for p in range(initial, initial + steps):
            sw, fh = update_window(sw, _b(p)), update_window(fh, _b(p))
            assert len(sw.batches) == min(w, p + 1)
            assert len(fh.batches) == p + 1
            assert set(sw.periods) <= set(fh.periods)
            assert sw.periods[-1] == fh.periods[-1] == p


class TestNames:
    def test_nine_names_round_trip(self):
        assert len(CONFIGURATION_NAMES) == 9
        for name in CONFIGURATION_NAMES:
            kind, window, method = parse_configuration_name(name)
            detector = DetectorConfig(method=method) if method else None
            trigger = RetrainTrigger(kind, detector)
            policy = WindowPolicy(window or WindowKind.SLIDING_WINDOW)
            assert configuration_name(trigger, policy) == name

    def test_examples(self):
        assert parse_configuration_name("ks_pca_fh") == (TriggerKind.INFORMED, WindowKind.FULL_HISTORY, DetectorMethod.KS_PCA)
        assert parse_configuration_name("static") == (TriggerKind.STATIC, None, None)

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            parse_configuration_name("ks_all_xx")

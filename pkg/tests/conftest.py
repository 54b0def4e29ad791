import pytest

from retrainsim.dataset import DriftEvent, SyntheticDriftSpec, generate_synthetic_stream
from retrainsim.model import SearchSpace

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_search():
    return SearchSpace(
        n_trees=(5,), max_depth=(3, 5), min_samples_leaf=(2,),
        max_features=("sqrt",), n_candidates=2,
    )


@pytest.fixture(scope="session")
def small_stream():
    """8 periods of 300 rows; one 1.5 sigma shift on a signal feature at period 5."""
    spec = SyntheticDriftSpec(
        n_features=6, n_periods=8, samples_per_period=300, failure_rate=0.08,
        drift_events=(DriftEvent(5, 0, 1.5),), label_signal_features=(0, 1), seed=11,
    )
    return generate_synthetic_stream(spec)

import numpy as np
import pytest

from fatigue_mlp import dataset as ds
from fatigue_mlp import nn, pipeline as pl


@pytest.fixture(scope="session")
def synthetic():
    """The twelve-condition synthetic dataset used throughout (seed 42, 150 points)."""
    return ds.generate_synthetic(ds.STANDARD_CONDITIONS, 150, 42)


@pytest.fixture(scope="session")
def synthetic_splits(synthetic):
    return pl.make_splits(synthetic, pl.SplitSpec(seed=42))


@pytest.fixture(scope="session")
def quick_model(synthetic_splits):
    """A briefly trained 3-75-1 net; good enough for interface tests."""
    m = nn.init(nn.MlpConfig(init_seed=42))
    model, report = nn.train(m, synthetic_splits, nn.TrainConfig(max_epochs=60, seed=42))
    return model, report


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])

import numpy as np
import pytest

from credal_decal import LabeledLogits


def random_labeled(rng, n, K, scale=2.0):
    z = scale * rng.standard_normal((n, K))
    y = rng.integers(0, K, size=n)
    # keep every class present so base-mode intervals are finite on both sides
    y[:K] = np.arange(K)
    return LabeledLogits.from_one_based(z, y + 1)


@pytest.fixture
def toy():
    """Two rows of zero logits, one label per class."""
    return LabeledLogits.from_one_based([[0.0, 0.0], [0.0, 0.0]], [1, 2])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

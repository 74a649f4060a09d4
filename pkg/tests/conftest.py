import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cranfront.model import random_instance, random_quantizer, scalar_unit

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit():
    return scalar_unit(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_pair(seed, K, L, M, N, snr_db=10.0, fronthaul=None, background=False):
    inst = random_instance(seed, K, L, M, N, snr_db, fronthaul=fronthaul)
    if background:
        from cranfront.model import background_quantizer
        return inst, background_quantizer(inst)
    return inst, random_quantizer(inst, np.random.default_rng(seed + 7))


dims = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.integers(1, 2))
snrs = st.sampled_from([0.0, 10.0, 20.0])
seeds = st.integers(0, 10_000)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

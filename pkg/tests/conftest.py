import os
import sys

import pytest

# Ensure the project root is on sys.path so tests can import `src` consistently
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: hbar sweeps and long evolutions")


@pytest.fixture
def hbar():
    return 1e-3


@pytest.fixture
def grid():
    from src.quantum_state import GridSpec
    return GridSpec(-2.0, 2.0, 4096)

import sys

import numpy as np
import pytest

from netmor.massspring import demo_system
from netmor.network import assemble_network
from netmor.reduction import balance, compute_gramians


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def demo():
    """Stand-in two-body model: (plant, edges, net)."""
    plant, edges = demo_system(10.0)
    return plant, edges, assemble_network(edges, plant)


@pytest.fixture(scope="session")
def demo_balanced(demo):
    plant, _, net = demo
    return balance(plant, compute_gramians(plant, net))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])

import numpy as np
import pytest

from fjbounds.chain import ModulatingChain
from fjbounds.workload import Discipline, WorkloadSpec


@pytest.fixture
def mm1():
    return ModulatingChain([[1.0]]), WorkloadSpec([0.5], [[1.0]])


@pytest.fixture
def two_state_chain():
    return ModulatingChain([[0.9, 0.1], [0.2, 0.8]])


def random_instance(rng, k=3, n=3, discipline=Discipline.WORK_CONSERVING, load=0.7):
    """Random stable instance with a strictly positive chain."""
    from fjbounds.scenario import generate_scenario

    seed = int(rng.integers(2**32))
    sc = generate_scenario(k, seed, discipline, modulate_services=True, num_servers=n)
    return sc.chain, sc.workload


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

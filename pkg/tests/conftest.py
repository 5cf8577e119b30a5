import pytest
from hypothesis import settings

from swapsim.core import load_scenario
from swapsim.docksim import RoverBody
from swapsim.optimize import DockSetup, PortBuilder

# fixed example streams so a rerun sees the same cases
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def canonical():
    return load_scenario("canonical")


@pytest.fixture(scope="session")
def builder(canonical):
    return PortBuilder(canonical.port, canonical.rover.length)


@pytest.fixture(scope="session")
def port(canonical, builder):
    return builder(canonical.curve)


@pytest.fixture(scope="session")
def rover(canonical):
    return RoverBody.from_spec(canonical.rover)


@pytest.fixture(scope="session")
def setup(canonical):
    return DockSetup.from_scenario(canonical)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    lines = [test_acceptance.RESULTS[k] for k in sorted(test_acceptance.RESULTS)]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

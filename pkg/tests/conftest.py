import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zps_sim import (  # noqa: E402
    coherent_distribution,
    fock_distribution,
    heralded_single,
    smsv_distribution,
    thermal_distribution,
)
from zps_sim.states import PureAmplitudes  # noqa: E402


def _superposition():
    return PureAmplitudes.normalized([0, 1, 0, 0, 0, 1]).distribution()


STATE_FACTORIES = {
    "coherent": lambda: coherent_distribution(1.0),
    "thermal": lambda: thermal_distribution(0.5),
    "smsv": lambda: smsv_distribution(1e-4),
    "heralded": lambda: heralded_single(0.38),
    "fock3": lambda: fock_distribution(3),
    "one_plus_five": _superposition,
}


@pytest.fixture(params=sorted(STATE_FACTORIES))
def any_state(request):
    return STATE_FACTORIES[request.param]()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

import pytest

from slipfric.core import ControlAction, Observation, TelemetryRecord, VehicleGeometry


def make_record(t, v=1.0, delta=0.0, ax=0.0, ay=0.0, vx=None, vy=0.0, wpsi=0.0, surface=None, slip=None):
    return TelemetryRecord(
        t=t,
        u=ControlAction(v, delta),
        y=Observation(ax, ay, v if vx is None else vx, vy, wpsi),
        surface=surface,
        slip_label=slip,
    )


@pytest.fixture
def geom():
    return VehicleGeometry(l_f=0.165, l_r=0.165)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

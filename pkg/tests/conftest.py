import pytest

from ris_stats.channel import ChannelParams

#: the twelve reference parameter sets (m1 in {1,2}, m2 in {1,2,3}, N in {5,10})
REFERENCE_GRID = [ChannelParams(n, m1, m2) for m1 in (1, 2) for m2 in (1, 2, 3) for n in (5, 10)]

#: small cascade scale, where every series converges
CONVERGENT = ChannelParams(2, 1, 1, omega1=0.1, omega2=0.1, sigma_h_sq=1.0)


@pytest.fixture
def convergent_params():
    return CONVERGENT


@pytest.fixture
def unit_params():
    return ChannelParams(5, 1, 1)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines in one block at the end of the run."""
    import sys

    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "REPORT", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.REPORT:
                terminalreporter.write_line(line)

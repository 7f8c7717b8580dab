
import sys

import numpy as np
import pytest

from noon_ocm import ArrayGeometry, FringeConfig, GaussianEnvelope

PITCH = 250e-6
D = 11

def fig_fringe(visibility=1.0, phase0=0.0):
    """Settings used across the acceptance runs: Gaussian envelope, 3-pixel singles period."""
    return FringeConfig.from_period(
        3 * PITCH,
        singles_visibility=visibility,
        phase0=phase0,
        envelope=GaussianEnvelope(5 * PITCH, 1.8 * PITCH),
    )

def point_geometry():
    return ArrayGeometry(D, PITCH, 0.0)

@pytest.fixture
def geom():
    return point_geometry()

@pytest.fixture
def fringe():
    return fig_fringe()

@pytest.fixture
def uniform_fringe():
    # one fringe every 5 pixels, flat envelope
    return FringeConfig.from_period(5 * PITCH)

def self_convolve(p, n):
    out = np.array([1.0])
    for _ in range(n):
        out = np.convolve(out, p)
    return out

def cosine_amplitude(y, k):
    """Exact Fourier amplitude of a pattern at angular frequency k per bin."""
    s = np.arange(len(y))
    return 2 * abs(np.sum(y * np.exp(-1j * k * s))) / np.sum(y)



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

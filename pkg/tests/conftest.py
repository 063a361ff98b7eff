"""Shared fixtures: small meshes, spaces and cached solves."""

import sys
from pathlib import Path

# Add repository root for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import pytest

from extremals.mountain_pass import ProblemSpec, solve_extremal
from extremals.spaces import Ball, Rectangle, build_space


@pytest.fixture(scope='session')
def square8():
    return build_space(Rectangle(1.0, 1.0), nx=8)


@pytest.fixture(scope='session')
def square16():
    return build_space(Rectangle(1.0, 1.0), nx=16)


@pytest.fixture(scope='session')
def disk64():
    return build_space(Ball(n=2), nr=64)


@pytest.fixture(scope='session')
def square_p4_report():
    """Converged mountain-pass solve of Lap u + u^3 = 0 on the unit square."""
    return solve_extremal(ProblemSpec(Rectangle(1.0, 1.0), 4.0, nx=8))


@pytest.fixture(scope='session')
def disk_torsion_report():
    return solve_extremal(ProblemSpec(Ball(n=2), 1.0, nr=64))

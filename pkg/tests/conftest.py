"""Shared fixtures; puts src/, app/ and the project root on sys.path."""

import os
import sys

import numpy as np
import pytest

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
sys.path.insert(0, os.path.join(project_root, "src"))
sys.path.insert(0, os.path.join(project_root, "app"))

from geometry.cube_geometry import CubeSpec, ParticlePoint  # noqa: E402
from model.disorder import DisorderField, SiteWindow  # noqa: E402
from model.hamiltonian_builder import DomainSpec  # noqa: E402


def cube_at(coords, half_side, d=1):
    return CubeSpec.around(coords, half_side, d=d)


def window_for(cube, spacing=1.0):
    return DomainSpec(cube, spacing).site_window()


def stark_field(window, F=1.0):
    """V(x) = F x: deterministic and strongly localizing."""
    return DisorderField.from_function(window, lambda x: F * x)


def zero_field(window):
    return DisorderField(window, np.zeros(window.shape))


@pytest.fixture
def small_cube():
    return cube_at([0], 8)


@pytest.fixture
def two_particle_cube():
    return cube_at([0, 0], 4)


@pytest.fixture
def wide_window():
    return SiteWindow.interval(-200, 200)


@pytest.fixture
def origin_point():
    return ParticlePoint.of([0, 0])

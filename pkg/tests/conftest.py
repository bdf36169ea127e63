"""Shared test fixtures and configuration."""

import os

import numpy as np
import pytest

from src.analysis.sampled import GridSpec, SampledFunction
from src.core.group_factory import GroupFactory
from src.core.models import QuadratureConfig
from src.core.points import GroupMode, GroupPoint, VectorFieldId
from src.kernels.kernel_table import build_kernel


@pytest.fixture
def heisenberg_group():
    """Return H^1."""
    return GroupFactory.create_group("heisenberg", 1)


@pytest.fixture
def heisenberg2_group():
    """Return H^2."""
    return GroupFactory.create_group("heisenberg", 2)


@pytest.fixture
def sample_point():
    """Return a generic point of H^1."""
    return GroupPoint.heisenberg([0.7], [-0.4], 0.3)


@pytest.fixture
def rng():
    """Return a seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def quadrature():
    """Return the default quadrature settings."""
    return QuadratureConfig()


@pytest.fixture
def field_x1():
    """Return X_1 on H^1."""
    return VectorFieldId.parse("X1", 1)


@pytest.fixture
def kernel_x1(field_x1):
    """Return the Riesz kernel K_1 on H^1 with its fitted constant."""
    return build_kernel("heisenberg", 1, field_x1)


@pytest.fixture
def small_grid():
    """Return a coarse 12^3 grid on [-1, 1]^3."""
    return GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, 12)


@pytest.fixture
def abelian_grid():
    """Return a fine grid on [-4, 4] for the Hilbert transform."""
    return GridSpec.cube(GroupMode.ABELIAN, 1, 4.0, 512)


@pytest.fixture
def abelian_kernel():
    """Return the Hilbert kernel -1/(pi x)."""
    return build_kernel("abelian", 1, VectorFieldId.parse("X1", 1, GroupMode.ABELIAN))


@pytest.fixture
def x1_function(small_grid):
    """Return b(g) = x_1 sampled on the small grid."""
    return SampledFunction.from_callable(small_grid, lambda c: c[:, 0])


@pytest.fixture(scope="module")
def sector_spec_x1():
    """Return a sector spec for K_1 on H^1 (built once per module)."""
    from src.analysis.sector import find_direction_point

    kernel = build_kernel("heisenberg", 1, VectorFieldId.parse("X1", 1))
    return find_direction_point(kernel, sphere_grid=32, seed=0, ball_samples=2000)


# Skip integration tests unless explicitly requested
def pytest_collection_modifyitems(config, items):
    """Automatically skip integration tests unless RUN_INTEGRATION_TESTS is set."""
    skip_integration = pytest.mark.skip(reason="Integration tests disabled (set RUN_INTEGRATION_TESTS=true to enable)")

    for item in items:
        if "integration" in item.keywords:
            if not os.getenv("RUN_INTEGRATION_TESTS", "").lower() == "true":
                item.add_marker(skip_integration)

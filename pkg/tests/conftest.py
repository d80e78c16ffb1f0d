"""Shared fixtures: the canonical square-in-disk configuration at desk scale.

Session-scoped meshes and solves are reused across test modules to keep
the suite fast; tests must not mutate them.
"""

import numpy as np
import pytest

from polyshape.corner_analysis import Contrast, build_spectrum
from polyshape.fem_core import ForwardSolver, fourier_current
from polyshape.geometry import (
    ExtensionGeometry,
    OuterDomain,
    build_polygon,
    generate_mesh,
)

SQUARE_VERTICES = [(0.3, 0.3), (-0.3, 0.3), (-0.3, -0.3), (0.3, -0.3)]


@pytest.fixture(scope="session")
def outer():
    return OuterDomain.disk(1.0)


@pytest.fixture(scope="session")
def square(outer):
    return build_polygon(SQUARE_VERTICES, outer=outer)


@pytest.fixture(scope="session")
def contrast2():
    return Contrast.finite(2.0)


@pytest.fixture(scope="session")
def ext_geometry(square):
    return ExtensionGeometry(square)


@pytest.fixture(scope="session")
def mesh_002(square, outer, ext_geometry):
    """hmax=0.02 duplicated mesh conforming to the extension buffers."""
    return generate_mesh(
        square, outer, hmax=0.02, grading=0.5, levels=7,
        duplicate_interface=True, constraints=ext_geometry.constraint_polylines(),
    )


@pytest.fixture(scope="session")
def solver_002(mesh_002, contrast2):
    return ForwardSolver(mesh_002, contrast2)


@pytest.fixture(scope="session")
def forward_002(solver_002, mesh_002):
    return solver_002.solve_current(fourier_current(mesh_002, 1, "cos"))


@pytest.fixture(scope="session")
def spectrum2(square, contrast2):
    return build_spectrum(square.alphas, contrast2)


@pytest.fixture(scope="session")
def fits_002(mesh_002, square, spectrum2, forward_002):
    from polyshape.verification_recon import corner_probe_fits

    return corner_probe_fits(mesh_002, square, spectrum2, forward_002)


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)

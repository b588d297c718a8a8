"""Shared fixtures: the 1D benchmark problem and its expensive derived data."""

import numpy as np
import pytest

from gapeig import bloch, model, supercell


@pytest.fixture(scope="session")
def lat1d():
    return model.Lattice(1, 2 * np.pi)


@pytest.fixture(scope="session")
def V1d(lat1d):
    # cos(x) + 3 sin(2x + 1) on the 2pi lattice
    return model.PeriodicPotential(lat1d, [(1.0, "cos", 1, 0.0), (3.0, "sin", 2, 1.0)])


@pytest.fixture(scope="session")
def W1d(lat1d):
    # -(x+2)^2 exp(-x^2)
    return model.Perturbation(
        lat1d, [{"coefficient": -1.0, "factors": [(2.0, 2)], "center": (0.0,), "sigma": 1.0}]
    )


@pytest.fixture(scope="session")
def lat2d():
    return model.Lattice(2, 2 * np.pi)


@pytest.fixture(scope="session")
def V2d(lat2d):
    # cos(x) + 3 sin(2(x+y) + 1)
    return model.PeriodicPotential(
        lat2d, [(1.0, "cos", (1, 0), 0.0), (3.0, "sin", (2, 2), 1.0)]
    )


@pytest.fixture(scope="session")
def W2d(lat2d):
    # -(x+2)^2 (2y-1)^2 exp(-(x^2+y^2))
    return model.Perturbation(
        lat2d,
        [
            {
                "coefficient": -4.0,
                "factors": [(2.0, 2), (-0.5, 2)],
                "center": (0.0, 0.0),
                "sigma": 1.0,
            }
        ],
    )


@pytest.fixture(scope="session")
def gap1d(V1d):
    bs = bloch.band_structure(V1d)
    return bloch.find_gap(bs, 1)


@pytest.fixture(scope="session")
def window1d(gap1d):
    return (gap1d.alpha, gap1d.beta)


@pytest.fixture(scope="session")
def reference1d(V1d, W1d, window1d):
    """Converged supercell gap eigenvalues for the 1D benchmark."""
    res = supercell.supercell_spectrum(V1d, W1d, 40, 640, window1d)
    return res.interior()

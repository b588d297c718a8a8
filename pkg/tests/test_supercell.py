"""Supercell discretization: exact embeddings, free-particle oracle,
dense/iterative agreement, commensurability breaking, set utilities."""

import numpy as np
import pytest

from gapeig import model, supercell
from gapeig.errors import BasisTooLarge

# converged 1D gap eigenvalues (L=40, N=640), stable to ~1e-12 under L and N
# refinement within this package and matching the independent FEM route
# (augmented) to ~1e-6
REF_1D = (-1.0451627964356383, -0.6541194618386763)
# seam state of the incommensurate (L + 0.5)-cell periodization with W = 0,
# converged under N refinement (see test_mismatched_seam_state)
SEAM_VALUE = -0.645116

WIN_1D = (-1.1442549263927626, -0.6450826051490102)


@pytest.fixture(scope="module")
def empty_w(lat1d):
    return model.Perturbation(lat1d, [])


def test_hausdorff_conventions():
    assert supercell.hausdorff([], []) == 0.0
    assert supercell.hausdorff([1.0], []) == np.inf
    assert supercell.hausdorff([], [2.0]) == np.inf
    assert supercell.hausdorff([0.0, 1.0], [0.0, 1.0]) == 0.0
    assert supercell.hausdorff([0.0, 1.0], [0.1, 1.0, 5.0]) == pytest.approx(4.0)


def test_hausdorff_symmetric():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=5), rng.normal(size=8)
    assert supercell.hausdorff(a, b) == supercell.hausdorff(b, a)


def test_persistent_values():
    runs = [[1.0, 2.0, 7.0], [1.004, 2.3, 7.002], [0.998, 7.001]]
    kept = supercell.persistent_values(runs, tol=0.01)
    assert np.allclose(kept, [1.0, 7.0])
    assert len(supercell.persistent_values([], tol=0.01)) == 0
    # an empty later run kills everything
    assert len(supercell.persistent_values([[1.0], []], tol=0.01)) == 0


def test_spectrum_result_window_and_interior():
    res = supercell.SpectrumResult((0.0, 1.0), [-0.5, 0.001, 0.5, 0.9999, 1.5])
    assert np.allclose(res.eigenvalues, [0.001, 0.5, 0.9999])
    assert np.allclose(res.interior(), [0.5])


def test_wavevectors_1d_and_ball_2d():
    m1 = supercell.supercell_wavevectors(1, 2, 8)
    assert m1.shape == (17, 1)
    m2 = supercell.supercell_wavevectors(2, 2, 8)
    assert np.all(np.sum(m2 * m2, axis=1) <= 64)
    # strictly smaller than the full square grid: corners are cut
    assert len(m2) < 17 * 17
    with pytest.raises(ValueError):
        supercell.supercell_wavevectors(1, 2, 7)


def test_budget_refusal(V1d, W1d):
    with pytest.raises(BasisTooLarge):
        supercell.supercell_spectrum(V1d, W1d, 10, 160, WIN_1D, max_planewaves=100)


def test_free_particle_supercell_exact(lat1d, empty_w):
    free = model.PeriodicPotential(lat1d, [])
    win = (0.002, 0.3)
    res = supercell.supercell_spectrum(free, empty_w, 5, 20, win)
    ms = np.arange(-20, 21)
    k2 = (2 * np.pi * ms / (5 * lat1d.b)) ** 2
    want = np.sort(k2[(k2 > win[0]) & (k2 < win[1])])
    assert np.max(np.abs(res.eigenvalues - want)) <= 1e-12


def test_v_embedding_exact(V1d, empty_w):
    # V coefficients land exactly on supercell frequency L*m
    L, N = 5, 20
    pencil = supercell.assemble_supercell(V1d, empty_w, L, N)
    H = pencil.A
    offs = supercell.supercell_wavevectors(1, L, N)[:, 0]
    c = V1d.fourier_coefficients()
    i = int(np.flatnonzero(offs == L)[0])
    j = int(np.flatnonzero(offs == 0)[0])
    assert H[i, j] == c[(1,)]
    i2 = int(np.flatnonzero(offs == 2 * L)[0])
    assert H[i2, j] == c[(2,)]
    # no coupling at non-multiples of L
    assert H[int(np.flatnonzero(offs == 1)[0]), j] == 0.0


def test_no_perturbation_no_gap_values(V1d, empty_w):
    res = supercell.supercell_spectrum(V1d, empty_w, 10, 160, WIN_1D)
    assert len(res.interior()) == 0


def test_reference_eigenvalues(V1d, W1d, window1d):
    res = supercell.supercell_spectrum(V1d, W1d, 40, 640, window1d)
    assert len(res.eigenvalues) == 2
    assert res.eigenvalues[0] == pytest.approx(REF_1D[0], abs=1e-9)
    assert res.eigenvalues[1] == pytest.approx(REF_1D[1], abs=1e-9)


def test_small_L_already_close(V1d, W1d, window1d):
    res = supercell.supercell_spectrum(V1d, W1d, 10, 160, window1d)
    assert supercell.hausdorff(res.interior(), np.array(REF_1D)) <= 1e-5


def test_convergence_scan_deltas(V1d, W1d, window1d):
    rows = supercell.convergence_scan(V1d, W1d, [10, 20], 16, window1d)
    assert rows[0]["delta_prev"] is None
    assert rows[1]["delta_prev"] <= 1e-5
    assert len(rows[1]["interior"]) == 2


def test_mismatched_t0_matches_commensurate(V1d, W1d, window1d):
    a = supercell.supercell_spectrum(V1d, W1d, 20, 320, window1d)
    b = supercell.mismatched_supercell_spectrum(V1d, W1d, 20, 0.0, 320, window1d)
    assert np.max(np.abs(a.eigenvalues - b.eigenvalues)) <= 1e-12


def test_mismatched_seam_state(V1d, empty_w, window1d):
    # with W = 0 the commensurate cell has nothing in the gap, but the
    # incommensurate periodization carries a potential jump at the cell seam
    # that binds a state just below the upper edge; it persists under N
    runs = []
    for N in (328, 656):
        res = supercell.mismatched_supercell_spectrum(V1d, empty_w, 20, 0.5, N, window1d)
        runs.append(res.eigenvalues)
    kept = supercell.persistent_values(runs, tol=1e-4)
    assert len(kept) == 1
    assert kept[0] == pytest.approx(SEAM_VALUE, abs=1e-5)
    # the seam also degrades the coefficient tail by orders of magnitude
    assert res.diagnostics["edge_ratio"] > 1e-7


def test_mismatched_preconditions(V1d, W1d, V2d, W2d, window1d):
    with pytest.raises(ValueError):
        supercell.mismatched_supercell_spectrum(V1d, W1d, 20, 1.5, 320, window1d)
    with pytest.raises(ValueError):
        supercell.mismatched_supercell_spectrum(V1d, W1d, 20, 0.5, 60, window1d)
    with pytest.raises(ValueError):
        supercell.mismatched_supercell_spectrum(V2d, W2d, 8, 0.5, 64, (-0.3, -0.1))


def test_dense_vs_iterative_2d(V2d, W2d):
    win = (-0.361330513742, -0.005748116668)
    dense = supercell.supercell_spectrum(V2d, W2d, 4, 32, win, method="dense")
    iter_ = supercell.supercell_spectrum(V2d, W2d, 4, 32, win, method="iterative")
    assert supercell.hausdorff(dense.eigenvalues, iter_.eigenvalues) <= 1e-8


def test_iterative_rejects_1d(V1d, W1d, window1d):
    with pytest.raises(ValueError):
        supercell.supercell_spectrum(V1d, W1d, 10, 160, window1d, method="iterative")

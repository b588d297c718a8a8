"""Bloch band structure of -Laplacian + V_per via planewave fiber matrices.

For each quasimomentum q in the Brillouin zone the fiber operator is
diagonalized in the planewave basis e^{i(q+G).x} with |G|_inf <= 2*pi*M_pw/b.
Band functions are sampled on a symmetric midpoint grid of M_q points per
axis (which contains no high-symmetry points and is invariant under
q -> -q), and spectral gaps are located from the sampled band ranges with a
finite-difference estimate of what the grid can actually resolve.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from gapeig import eigcore
from gapeig.errors import NoGap, QGridAsymmetric

GAP_TOL = 1e-6
DEGENERACY_TOL = 1e-10
DEFAULT_M_PW = {1: 32, 2: 9}
DEFAULT_M_Q = {1: 64, 2: 32}


def fiber_offsets(d, M_pw):
    """Integer planewave offsets with sup-norm at most M_pw, lexicographic order."""
    rng = np.arange(-M_pw, M_pw + 1)
    if d == 1:
        return rng.reshape(-1, 1)
    A, B = np.meshgrid(rng, rng, indexing="ij")
    return np.column_stack([A.ravel(), B.ravel()])


def _offset_index(offsets_matrix, M_pw, d):
    """Linear index of each row of an integer offset matrix, -1 when out of range."""
    n1 = 2 * M_pw + 1
    ok = np.all(np.abs(offsets_matrix) <= M_pw, axis=1)
    lin = np.zeros(len(offsets_matrix), dtype=int)
    for ax in range(d):
        lin = lin * n1 + (offsets_matrix[:, ax] + M_pw)
    lin[~ok] = -1
    return lin


def assemble_fiber(V, q, M_pw):
    """Fiber pencil at quasimomentum q: kinetic diagonal plus V Fourier couplings."""
    lat = V.lattice
    d = lat.d
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (d,):
        raise ValueError("q must have %d components" % d)
    offs = fiber_offsets(d, M_pw)
    n = len(offs)
    k = q[None, :] + lat.reciprocal * offs
    H = np.zeros((n, n), dtype=complex)
    H[np.diag_indices(n)] = np.sum(k * k, axis=1)
    cols = np.arange(n)
    for m, c in V.fourier_coefficients().items():
        if c == 0:
            continue
        rows = _offset_index(offs + np.asarray(m, dtype=int)[None, :], M_pw, d)
        keep = rows >= 0
        H[rows[keep], cols[keep]] += c
    return eigcore.SymmetricPencil(H)


def fiber_bands(V, q, M_pw, J_max, with_vectors=False):
    """Lowest J_max eigenpairs of the fiber at q."""
    pencil = assemble_fiber(V, q, M_pw)
    return eigcore.solve_lowest(pencil, J_max, with_vectors=with_vectors)


def midpoint_grid(lattice, M_q):
    """Per-axis symmetric midpoint quasimomentum grid over (-pi/b, pi/b]."""
    if M_q < 2 or M_q % 2:
        raise QGridAsymmetric("M_q must be an even integer >= 2 for a +-q symmetric grid")
    k0 = lattice.reciprocal
    return k0 * (-0.5 + (np.arange(M_q) + 0.5) / M_q)


class BandStructure:
    """Sampled band functions: qpoints (N, d) and bands (N, J_max), plus grid shape."""

    def __init__(self, lattice, M_pw, M_q, qpoints, bands):
        self.lattice = lattice
        self.M_pw = M_pw
        self.M_q = M_q
        self.qpoints = qpoints
        self.bands = bands

    @property
    def J_max(self):
        return self.bands.shape[1]

    def grid_bands(self):
        """Bands reshaped onto the (M_q,)*d quasimomentum grid."""
        d = self.lattice.d
        return self.bands.reshape((self.M_q,) * d + (self.J_max,))

    def band_range(self, j):
        """(min, max) of band j (1-based) over the grid."""
        col = self.bands[:, j - 1]
        return float(np.min(col)), float(np.max(col))


def band_structure(V, M_pw=None, M_q=None, J_max=4, threads=1):
    """Sample the lowest J_max bands on the midpoint quasimomentum grid."""
    lat = V.lattice
    d = lat.d
    if M_pw is None:
        M_pw = DEFAULT_M_PW[d]
    if M_q is None:
        M_q = DEFAULT_M_Q[d]
    axis = midpoint_grid(lat, M_q)
    qpoints = np.array(list(itertools.product(axis, repeat=d)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda q: fiber_bands(V, q, M_pw, J_max), qpoints))
    else:
        results = [fiber_bands(V, q, M_pw, J_max) for q in qpoints]
    bands = np.array([r.eigenvalues for r in results])
    return BandStructure(lat, M_pw, M_q, qpoints, bands)


def _resolution_estimate(grid, point):
    """Bound on how far the true band extremum can exceed the grid extremum.

    Uses periodic one-sided differences and second differences at the given
    grid point; first order term delta_q/2 * slope plus a curvature margin.
    Bands are Lipschitz in q, so a gap narrower than this cannot be certified
    at the current M_q.
    """
    d = grid.ndim
    M_q = grid.shape[0]
    dq = 1.0 / M_q  # in units of the reciprocal cell width
    g = 0.0
    c = 0.0
    for ax in range(d):
        up = list(point)
        dn = list(point)
        up[ax] = (point[ax] + 1) % M_q
        dn[ax] = (point[ax] - 1) % M_q
        e0 = grid[tuple(point)]
        ep = grid[tuple(up)]
        em = grid[tuple(dn)]
        g += max(abs(ep - e0), abs(e0 - em)) / dq
        c += abs(ep - 2.0 * e0 + em) / dq**2
    return 0.5 * dq * g + 0.625 * dq**2 * c


class GapWindow:
    """Open interval (alpha, beta) free of essential spectrum above component J."""

    def __init__(self, J, alpha, beta, info=None):
        self.J = J
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.info = info or {}

    @property
    def gamma(self):
        return 0.5 * (self.alpha + self.beta)

    @property
    def width(self):
        return self.beta - self.alpha

    def __repr__(self):
        return "GapWindow(J=%d, alpha=%.6f, beta=%.6f)" % (self.J, self.alpha, self.beta)


def find_gap(bs, J, gap_tol=GAP_TOL):
    """Locate the spectral gap above the J-th band component.

    Consecutive bands whose sampled ranges touch, overlap, or are closer than
    the grid resolution estimate are merged into one component; this is what
    makes touching bands (conical points, folded free bands) report NoGap
    instead of a spurious narrow window.  Band edges are the sampled grid
    extrema; no off-grid refinement is performed.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    grid = bs.grid_bands()
    nb = bs.J_max
    flat = grid.reshape(-1, nb)
    mins = flat.argmin(axis=0)
    maxs = flat.argmax(axis=0)
    shape = grid.shape[:-1]
    # gap between consecutive index bands, with resolution estimates at the
    # two facing extrema
    closed = []
    for j in range(nb - 1):
        top = float(flat[maxs[j], j])
        bot = float(flat[mins[j + 1], j + 1])
        raw = bot - top
        p_top = np.unravel_index(maxs[j], shape)
        p_bot = np.unravel_index(mins[j + 1], shape)
        est = _resolution_estimate(grid[..., j], p_top) + _resolution_estimate(
            grid[..., j + 1], p_bot
        )
        closed.append(raw <= gap_tol + est)
    # connected components of index bands
    comps = []
    start = 0
    for j in range(nb - 1):
        if not closed[j]:
            comps.append((start, j))
            start = j + 1
    comps.append((start, nb - 1))
    if J > len(comps):
        raise NoGap(
            "only %d band components resolved below band %d; no gap above component %d"
            % (len(comps), nb, J)
        )
    lo, hi = comps[J - 1]
    if hi == nb - 1:
        raise NoGap(
            "no resolvable gap above band component %d within the first %d bands "
            "(bands above merge into it at this resolution)" % (J, nb)
        )
    alpha = float(flat[maxs[hi], hi])
    beta = float(flat[mins[hi + 1], hi + 1])
    info = {
        "M_pw": bs.M_pw,
        "M_q": bs.M_q,
        "component_bands": (lo + 1, hi + 1),
        "band_ranges": [bs.band_range(j + 1) for j in range(nb)],
    }
    return GapWindow(J, alpha, beta, info)


def exact_projector_fiber(V, q, M_pw, J):
    """Rank-J spectral projector of the fiber at q in the planewave basis.

    Raises NoGap when bands J and J+1 are degenerate at q (within 1e-10), in
    which case the band projector is not well defined pointwise.
    """
    res = fiber_bands(V, q, M_pw, J + 1, with_vectors=True)
    w = res.eigenvalues
    if w[J] - w[J - 1] <= DEGENERACY_TOL:
        raise NoGap("bands %d and %d degenerate at q (split %.3e)" % (J, J + 1, w[J] - w[J - 1]))
    Vj = res.eigenvectors[:, :J]
    return Vj @ Vj.conj().T

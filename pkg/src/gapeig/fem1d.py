"""P1 finite elements on truncated 1D domains, plus spectral pollution diagnostics.

Truncating H = -d^2/dx^2 + V_per + W to a finite interval with Dirichlet
conditions and diagonalizing the P1 Galerkin pencil produces, alongside
approximations of the true defect eigenvalues, spurious eigenvalues inside
spectral gaps.  These are artifacts of the boundary: they localize near the
domain endpoints and move with the truncation offset.  This module assembles
the Galerkin pencils, measures where eigenfunctions live (boundary vs
compact mass), classifies gap eigenvalues against a pollution-free
reference, and builds the half-line / junction dislocation operators whose
spectra the boundary-localized modes track.
"""

import numpy as np

from gapeig import eigcore
from gapeig.errors import MeshOffsetError
from gapeig.supercell import DEFAULT_EDGE_GUARD, SpectrumResult, _window_pair

GAUSS_POINTS = 10
MATCH_TOL = 0.02


class Mesh1D:
    """Uniform mesh with n_c elements per lattice period b.

    Node positions are i*h for integer i in [i_lo, i_hi], h = b/n_c, so mesh
    endpoints are always commensurate with the element size; offsets that do
    not land on the element grid raise MeshOffsetError.  The domain must span
    at least four periods.
    """

    def __init__(self, b, n_c, i_lo, i_hi):
        if int(n_c) != n_c or n_c < 2:
            raise ValueError("n_c must be an integer >= 2")
        for name, v in (("i_lo", i_lo), ("i_hi", i_hi)):
            if abs(v - round(v)) > 1e-9:
                raise MeshOffsetError("%s = %s is not an integer element index" % (name, v))
        self.b = float(b)
        self.n_c = int(n_c)
        self.i_lo = int(round(i_lo))
        self.i_hi = int(round(i_hi))
        if self.i_hi - self.i_lo < 4 * self.n_c:
            raise ValueError("domain must span at least 4 periods")
        self.h = self.b / self.n_c

    @property
    def x_lo(self):
        return self.i_lo * self.h

    @property
    def x_hi(self):
        return self.i_hi * self.h

    @property
    def n_nodes(self):
        return self.i_hi - self.i_lo + 1

    @property
    def nodes(self):
        return np.arange(self.i_lo, self.i_hi + 1) * self.h

    def __repr__(self):
        return "Mesh1D([%g, %g], h=%g)" % (self.x_lo, self.x_hi, self.h)


def symmetric_mesh(lattice, n_c, n_half, t=0.0):
    """Mesh for the offset family of domains [-(n_half + t) b, (n_half + t) b].

    The offset t must be a multiple of 1/n_c so the endpoints stay on the
    element grid; otherwise MeshOffsetError.
    """
    if n_half < 2:
        raise ValueError("n_half must be at least 2")
    tn = t * n_c
    if abs(tn - round(tn)) > 1e-9:
        raise MeshOffsetError("offset t = %g is not a multiple of 1/n_c = 1/%d" % (t, n_c))
    i_hi = int(n_half) * int(n_c) + int(round(tn))
    return Mesh1D(lattice.b, n_c, -i_hi, i_hi)


def halfline_mesh(lattice, n_c, n_periods):
    """Mesh on [0, n_periods * b] for half-line dislocation operators."""
    return Mesh1D(lattice.b, n_c, 0, int(n_periods) * int(n_c))


def _forms(mesh, pot):
    """Tridiagonal stiffness+potential and mass forms on all nodes.

    Stiffness and mass are exact for P1; the potential term uses 10 point
    Gauss-Legendre per element, exact to machine precision for the smooth
    potentials used here.  Returns (dA, oA, dM, oM) with dA the diagonal and
    oA the first offdiagonal (one entry per element).
    """
    nodes = mesh.nodes
    h = mesh.h
    nn = len(nodes)
    xg, wg = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    a = nodes[:-1]
    xq = a[:, None] + 0.5 * h * (xg[None, :] + 1.0)
    wq = 0.5 * h * wg[None, :]
    pl = (nodes[1:, None] - xq) / h
    pr = (xq - a[:, None]) / h
    pv = pot(xq)
    wpv = wq * pv
    kll = np.sum(wpv * pl * pl, axis=1)
    klr = np.sum(wpv * pl * pr, axis=1)
    krr = np.sum(wpv * pr * pr, axis=1)
    dA = np.zeros(nn)
    oA = np.empty(nn - 1)
    dA[:-1] += 1.0 / h + kll
    dA[1:] += 1.0 / h + krr
    oA[:] = -1.0 / h + klr
    dM = np.zeros(nn)
    oM = np.full(nn - 1, h / 6.0)
    dM[:-1] += h / 3.0
    dM[1:] += h / 3.0
    return dA, oA, dM, oM


def _interior_pencil(dA, oA, dM, oM):
    """Dense pencil on interior nodes (homogeneous Dirichlet)."""
    A = np.diag(dA[1:-1]) + np.diag(oA[1:-1], 1) + np.diag(oA[1:-1], -1)
    M = np.diag(dM[1:-1]) + np.diag(oM[1:-1], 1) + np.diag(oM[1:-1], -1)
    return eigcore.SymmetricPencil(A, M)


def assemble_galerkin(V, W, mesh):
    """Dirichlet P1 pencil for -d^2/dx^2 + V + W on the mesh interior."""
    return _interior_pencil(*_forms(mesh, lambda x: V(x) + W(x)))


def _spectrum(pencil, window, with_vectors, extra_diag):
    alpha, beta = _window_pair(window)
    res = eigcore.solve_window(pencil, alpha, beta, with_vectors=with_vectors)
    diag = {"n_dof": pencil.n}
    diag.update(extra_diag)
    if with_vectors:
        diag["residual_bound"] = res.residual_bound
        return SpectrumResult((alpha, beta), res.eigenvalues, diag, res.eigenvectors)
    return SpectrumResult((alpha, beta), res.eigenvalues, diag)


def galerkin_spectrum(V, W, mesh, window, with_vectors=True):
    """Eigenvalues of the truncated Galerkin operator inside the window.

    Expect pollution: some of these are spurious boundary modes, which is
    what classify_modes is for.
    """
    pencil = assemble_galerkin(V, W, mesh)
    return _spectrum(
        pencil, window, with_vectors, {"method": "galerkin", "h": mesh.h, "n_c": mesh.n_c}
    )


def interval_mass(mesh, coeffs, lo, hi, interior=True):
    """Exact integral of |psi|^2 over [lo, hi] for a P1 function.

    coeffs are interior-node coefficients when interior=True (Dirichlet) or
    all-node coefficients otherwise.  Partial elements are integrated exactly
    (the integrand is piecewise quadratic).
    """
    if interior:
        full = np.zeros(mesh.n_nodes)
        full[1:-1] = np.real(coeffs)
        fi = np.zeros(mesh.n_nodes)
        fi[1:-1] = np.imag(coeffs) if np.iscomplexobj(coeffs) else 0.0
    else:
        full = np.real(np.asarray(coeffs))
        fi = np.imag(np.asarray(coeffs)) if np.iscomplexobj(coeffs) else np.zeros(mesh.n_nodes)
    lo = max(lo, mesh.x_lo)
    hi = min(hi, mesh.x_hi)
    if hi <= lo:
        return 0.0
    h = mesh.h
    nodes = mesh.nodes
    total = 0.0
    for c0, c1 in ((full[:-1], full[1:]), (fi[:-1], fi[1:])):
        if not np.any(c0) and not np.any(c1):
            continue
        u0 = np.clip((lo - nodes[:-1]) / h, 0.0, 1.0)
        u1 = np.clip((hi - nodes[:-1]) / h, 0.0, 1.0)
        dc = c1 - c0
        seg = h * (
            c0 * c0 * (u1 - u0)
            + c0 * dc * (u1 * u1 - u0 * u0)
            + dc * dc * (u1**3 - u0**3) / 3.0
        )
        total += float(np.sum(seg))
    return total


def boundary_mass(mesh, coeffs, R=None):
    """Mass of a P1 eigenfunction within distance R of either endpoint (default 2b)."""
    if R is None:
        R = 2.0 * mesh.b
    if not (0 < R < 0.5 * (mesh.x_hi - mesh.x_lo)):
        raise ValueError("R must lie in (0, half the domain length)")
    return interval_mass(mesh, coeffs, mesh.x_lo, mesh.x_lo + R) + interval_mass(
        mesh, coeffs, mesh.x_hi - R, mesh.x_hi
    )


def compact_mass(mesh, coeffs, K=None):
    """Mass of a P1 eigenfunction inside the compact set K (default central 4 periods)."""
    if K is None:
        K = (-2.0 * mesh.b, 2.0 * mesh.b)
    lo, hi = K
    if not (mesh.x_lo <= lo < hi <= mesh.x_hi):
        raise ValueError("K must be a nonempty interval inside the domain")
    return interval_mass(mesh, coeffs, lo, hi)


class LocalizationReport:
    """Per-eigenvalue localization and classification record."""

    def __init__(self, eigenvalue, mu_boundary, mu_compact, classification):
        self.eigenvalue = float(eigenvalue)
        self.mu_boundary = float(mu_boundary)
        self.mu_compact = float(mu_compact)
        self.classification = classification

    def __repr__(self):
        return "LocalizationReport(%.6f, mu_b=%.3f, mu_K=%.3f, %s)" % (
            self.eigenvalue,
            self.mu_boundary,
            self.mu_compact,
            self.classification,
        )


def classify_modes(
    mesh,
    result,
    reference,
    match_tol=MATCH_TOL,
    edge_guard_frac=DEFAULT_EDGE_GUARD,
    R=None,
    K=None,
):
    """Classify windowed Galerkin eigenvalues as true, spurious, or undetermined.

    A value within match_tol of a pollution-free reference eigenvalue is
    "true"; a value hugging a window endpoint (within edge_guard_frac of the
    window width) is "undetermined", since at fixed mesh size the numerical
    band edge intrudes slightly into the window and such values cannot be
    attributed either way; everything else is "spurious".  Each report
    carries the boundary and compact masses of the eigenfunction.
    """
    if result.eigenvectors is None:
        raise ValueError("classification needs eigenvectors; solve with with_vectors=True")
    reference = np.atleast_1d(np.asarray(reference, dtype=float))
    alpha, beta = result.window
    guard = edge_guard_frac * (beta - alpha)
    reports = []
    for i, ev in enumerate(result.eigenvalues):
        c = result.eigenvectors[:, i]
        mb = boundary_mass(mesh, c, R)
        mk = compact_mass(mesh, c, K)
        if ev <= alpha + guard or ev >= beta - guard:
            cls = "undetermined"
        elif len(reference) and np.min(np.abs(reference - ev)) <= match_tol:
            cls = "true"
        else:
            cls = "spurious"
        reports.append(LocalizationReport(ev, mb, mk, cls))
    return reports


def dislocation_spectrum(V, kind, t, window, n_periods=40, n_c=100, with_vectors=False):
    """Spectrum of a dislocated periodic operator inside the window.

    kind "halfline+" / "halfline-" is -d^2/dx^2 + V(x +- t b) on
    [0, n_periods*b] with Dirichlet ends; "junction" glues the two shifted
    potentials V(x + t b/2) for x < 0 and V(x - t b/2) for x > 0 on the
    symmetric domain.  Sweeping t moves edge spectrum across the gap, which
    is the mechanism the truncated-domain spurious modes follow.
    """
    if n_periods < 20:
        raise ValueError("n_periods must be at least 20")
    lat = V.lattice
    tb = t * lat.b
    if kind == "halfline+":
        mesh = halfline_mesh(lat, n_c, n_periods)
        pot = lambda x: V(x + tb)
    elif kind == "halfline-":
        mesh = halfline_mesh(lat, n_c, n_periods)
        pot = lambda x: V(x - tb)
    elif kind == "junction":
        mesh = symmetric_mesh(lat, n_c, n_periods)
        pot = lambda x: np.where(x < 0, V(x + 0.5 * tb), V(x - 0.5 * tb))
    else:
        raise ValueError("kind must be 'halfline+', 'halfline-', or 'junction'")
    pencil = _interior_pencil(*_forms(mesh, pot))
    result = _spectrum(
        pencil,
        window,
        with_vectors,
        {"method": "dislocation", "kind": kind, "t": float(t), "n_periods": int(n_periods)},
    )
    result.mesh = mesh
    return result

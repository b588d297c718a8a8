"""Planewave supercell discretization of H = -Laplacian + V_per + W.

The operator is restricted to a periodized supercell of side L*b with
planewave basis k in 2*pi/(L*b) * Z^d, |k| <= 2*pi*N/(L*b).  Periodic V_per
coefficients land exactly on supercell frequencies (integer L), W is
periodized by FFT sampling.  This discretization is pollution-free: gap
eigenvalues converge to the defect eigenvalues as L grows, with no spurious
values, which makes it the reference the FEM diagnostics compare against.

Small problems are solved densely; the large 2D case uses a matrix-free
FFT matvec with shift-invert Lanczos (same operator, iterative solver).
"""

import numpy as np
import scipy.sparse.linalg as spla

from gapeig import eigcore, model
from gapeig.errors import BasisTooLarge

MAX_PLANEWAVES = 20000
DEFAULT_EDGE_GUARD = 0.004
DENSE_LIMIT = 4200


def hausdorff(a, b):
    """Hausdorff distance between two finite point sets on the line.

    Both empty -> 0; exactly one empty -> inf.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return np.inf
    d1 = np.max([np.min(np.abs(b - x)) for x in a])
    d2 = np.max([np.min(np.abs(a - y)) for y in b])
    return float(max(d1, d2))


def persistent_values(runs, tol=0.01):
    """Values from the first run that reappear within tol in every other run."""
    if not runs:
        return np.array([])
    first = np.atleast_1d(np.asarray(runs[0], dtype=float))
    keep = []
    for x in first:
        if all(
            len(np.atleast_1d(r)) and np.min(np.abs(np.atleast_1d(r) - x)) <= tol
            for r in runs[1:]
        ):
            keep.append(x)
    return np.array(keep)


class SpectrumResult:
    """Eigenvalues found inside an open window (alpha, beta), with diagnostics."""

    def __init__(self, window, eigenvalues, diagnostics=None, eigenvectors=None):
        self.window = (float(window[0]), float(window[1]))
        ev = np.sort(np.atleast_1d(np.asarray(eigenvalues, dtype=float)))
        inside = (ev > self.window[0]) & (ev < self.window[1])
        self.eigenvalues = ev[inside]
        self.eigenvectors = None
        if eigenvectors is not None:
            self.eigenvectors = eigenvectors[:, inside]
        self.diagnostics = diagnostics or {}

    def interior(self, guard_frac=DEFAULT_EDGE_GUARD):
        """Eigenvalues further than guard_frac * window width from both endpoints.

        Values hugging a window endpoint sit at the numerical band edge and
        cannot be attributed to the defect at fixed resolution; counting only
        interior values makes gap-eigenvalue counts resolution-stable.
        """
        a, b = self.window
        g = guard_frac * (b - a)
        ev = self.eigenvalues
        return ev[(ev > a + g) & (ev < b - g)]

    def __len__(self):
        return len(self.eigenvalues)


def _window_pair(window):
    """Accept a GapWindow or an (alpha, beta) pair."""
    if hasattr(window, "alpha"):
        return float(window.alpha), float(window.beta)
    a, b = window
    return float(a), float(b)


def supercell_wavevectors(d, L, N):
    """Integer planewave indices m with |m|_2 <= N (frequencies 2*pi*m/(L*b))."""
    if not (int(N) == N and int(L) == L and N >= L >= 1):
        raise ValueError("need integers N >= L >= 1")
    if N < 4 * L:
        raise ValueError("resolution ratio N/L must be at least 4")
    N = int(N)
    if d == 1:
        return np.arange(-N, N + 1).reshape(-1, 1)
    rng = np.arange(-N, N + 1)
    A, B = np.meshgrid(rng, rng, indexing="ij")
    m = np.column_stack([A.ravel(), B.ravel()])
    return m[np.sum(m * m, axis=1) <= N * N]


def _check_budget(n, max_planewaves):
    if n > max_planewaves:
        raise BasisTooLarge(
            "%d planewaves exceed the budget of %d; refusing to truncate" % (n, max_planewaves)
        )


def _coeff_grid(L, N):
    """Power-of-two FFT grid covering both the 8L sampling floor and all
    pairwise frequency differences |m_i - m_j| <= 2N."""
    need = max(8 * int(L), 4 * int(N) + 2)
    g = 1
    while g < need:
        g *= 2
    return g


def assemble_supercell(V, W, L, N, grid=None, max_planewaves=MAX_PLANEWAVES):
    """Dense supercell pencil.  V enters through its exact Fourier coefficients
    (which sit on supercell frequencies L*m), W through FFT periodization."""
    lat = V.lattice
    d = lat.d
    offs = supercell_wavevectors(d, L, N)
    n = len(offs)
    _check_budget(n, max_planewaves)
    if grid is None:
        grid = _coeff_grid(L, N)
    kscale = 2.0 * np.pi / (L * lat.b)
    k = kscale * offs
    H = np.zeros((n, n), dtype=complex)
    H[np.diag_indices(n)] = np.sum(k * k, axis=1)
    # V_per: coefficient at lattice wavevector m couples supercell modes
    # differing by exactly L*m (integer, no interpolation)
    index = {tuple(row): i for i, row in enumerate(offs)}
    cols = np.arange(n)
    for m, c in V.fourier_coefficients().items():
        if c == 0:
            continue
        shift = np.asarray(m, dtype=int) * int(L)
        rows = np.array([index.get(tuple(row), -1) for row in offs + shift[None, :]])
        keep = rows >= 0
        H[rows[keep], cols[keep]] += c
    # W: all pairwise couplings from the periodized coefficient table
    cw = model.perturbation_supercell_coefficients(W, L, grid=grid)
    if d == 1:
        D = (offs[:, 0][:, None] - offs[:, 0][None, :]) % grid
        H += cw.data[D]
    else:
        Dx = (offs[:, 0][:, None] - offs[:, 0][None, :]) % grid
        Dy = (offs[:, 1][:, None] - offs[:, 1][None, :]) % grid
        H += cw.data[Dx, Dy]
    pencil = eigcore.SymmetricPencil(H)
    pencil.info = {"n_planewaves": n, "grid": grid, "edge_ratio": cw.edge_ratio}
    return pencil


def _iterative_window_2d(V, W, L, N, window, k=10, tol=1e-10, seed=7, max_planewaves=MAX_PLANEWAVES):
    """Matrix-free shift-invert Lanczos for the large 2D supercell.

    The matvec scatters coefficients onto an FFT grid, multiplies by the
    sampled potential in real space and gathers back; this realizes the same
    periodized operator as the dense assembly up to a unitary rephasing of
    the basis (which leaves eigenvalues unchanged).  The inner solves use
    MINRES on the realified system with a kinetic preconditioner.
    """
    lat = V.lattice
    b = lat.b
    L = int(L)
    offs = supercell_wavevectors(2, L, N)
    n = len(offs)
    _check_budget(n, max_planewaves)
    alpha, beta = _window_pair(window)
    sigma = 0.5 * (alpha + beta)
    # aliasing refusal and W bandwidth from the coefficient table
    cw = model.perturbation_supercell_coefficients(W, L, grid=_coeff_grid(L, N))
    mint = np.rint(np.fft.fftfreq(cw.grid) * cw.grid).astype(int)
    bw_w = 0
    for ax in (0, 1):
        prof = np.max(np.abs(cw.data), axis=1 - ax)
        sig = prof > 1e-13 * np.max(prof)
        if np.any(sig):
            bw_w = max(bw_w, int(np.max(np.abs(mint[sig]))))
    bw_v = max(
        (L * max(abs(c) for c in m) for m, cc in V.fourier_coefficients().items() if cc != 0),
        default=0,
    )
    bw = max(bw_w, bw_v)
    G = 1
    while G < 2 * N + bw + 2 or G < 8 * L:
        G *= 2
    xg = -0.5 * L * b + L * b * np.arange(G) / G
    X, Y = np.meshgrid(xg, xg, indexing="ij")
    U = V(X, Y) + W(X, Y)
    kscale = 2.0 * np.pi / (L * b)
    k2 = kscale * kscale * np.sum(offs * offs, axis=1).astype(float)
    ix = offs[:, 0] % G
    iy = offs[:, 1] % G

    def hmat(c):
        F = np.zeros((G, G), dtype=complex)
        F[ix, iy] = c
        psi = np.fft.ifft2(F)
        F2 = np.fft.fft2(U * psi)
        return k2 * c + F2[ix, iy]

    Hop = spla.LinearOperator((n, n), matvec=hmat, dtype=complex)

    # (H - sigma) z = r solved by MINRES on the equivalent real symmetric
    # 2n x 2n system [[Re, -Im], [Im, Re]]
    pinv = 1.0 / (np.abs(k2 - sigma) + 0.5)

    def shifted_real(xr):
        zc = xr[:n] + 1j * xr[n:]
        yc = hmat(zc) - sigma * zc
        return np.concatenate([yc.real, yc.imag])

    Aop = spla.LinearOperator((2 * n, 2 * n), matvec=shifted_real, dtype=float)
    Pop = spla.LinearOperator(
        (2 * n, 2 * n), matvec=lambda xr: np.concatenate([pinv * xr[:n], pinv * xr[n:]]), dtype=float
    )
    inner_iters = [0]

    def opinv(rc):
        rc = np.asarray(rc, dtype=complex)
        rhs = np.concatenate([rc.real, rc.imag])
        sol, info = spla.minres(Aop, rhs, M=Pop, rtol=1e-10, maxiter=4000)
        inner_iters[0] += 1
        return sol[:n] + 1j * sol[n:]

    OPinv = spla.LinearOperator((n, n), matvec=opinv, dtype=complex)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    w = spla.eigsh(
        Hop,
        k=k,
        sigma=sigma,
        which="LM",
        OPinv=OPinv,
        v0=v0,
        tol=tol,
        return_eigenvectors=False,
    )
    diag = {
        "method": "shift-invert",
        "n_planewaves": n,
        "fft_grid": G,
        "sigma": sigma,
        "inner_solves": inner_iters[0],
        "edge_ratio": cw.edge_ratio,
        "k": k,
    }
    return np.sort(w), diag


def supercell_spectrum(V, W, L, N, window, method="auto", k=10, max_planewaves=MAX_PLANEWAVES):
    """Gap eigenvalues of the supercell operator inside the window.

    method "dense" solves the assembled pencil with a windowed LAPACK call;
    "iterative" (2D only) uses the matrix-free path; "auto" picks by size.
    """
    lat = V.lattice
    alpha, beta = _window_pair(window)
    offs = supercell_wavevectors(lat.d, L, N)
    n = len(offs)
    _check_budget(n, max_planewaves)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT or lat.d == 1 else "iterative"
    if method == "dense":
        pencil = assemble_supercell(V, W, L, N, max_planewaves=max_planewaves)
        res = eigcore.solve_window(pencil, alpha, beta, with_vectors=False)
        diag = dict(pencil.info)
        diag.update({"method": "dense", "L": int(L), "N": int(N)})
        return SpectrumResult((alpha, beta), res.eigenvalues, diag)
    if lat.d != 2:
        raise ValueError("iterative path is for d=2")
    w, diag = _iterative_window_2d(
        V, W, L, N, (alpha, beta), k=k, max_planewaves=max_planewaves
    )
    diag.update({"L": int(L), "N": int(N)})
    return SpectrumResult((alpha, beta), w, diag)


def mismatched_supercell_spectrum(V, W, L, t, N, window, max_planewaves=MAX_PLANEWAVES):
    """Supercell spectrum on a deliberately incommensurate cell of side (L+t)*b.

    With 0 < t < 1 the periodic potential no longer fits the cell, so its
    periodization carries a jump at the cell boundary; the resulting slow
    Fourier tail is kept on purpose (no aliasing refusal here) because the
    point of this variant is to show how breaking commensurability pollutes
    the gap.  1D only.
    """
    lat = V.lattice
    if lat.d != 1:
        raise ValueError("mismatched supercell is 1D only")
    if not (0 <= t < 1):
        raise ValueError("offset t must lie in [0, 1)")
    alpha, beta = _window_pair(window)
    N = int(N)
    if N < 4 * (L + t):
        raise ValueError("resolution ratio N/(L+t) must be at least 4")
    n = 2 * N + 1
    _check_budget(n, max_planewaves)
    span = (L + t) * lat.b
    grid = _coeff_grid(int(np.ceil(L + t)), N)
    data, edge_ratio = model.fourier_sample(lambda x: V(x) + W(x), 1, span, grid)
    ms = np.arange(-N, N + 1)
    kscale = 2.0 * np.pi / span
    H = np.diag((kscale * ms) ** 2).astype(complex)
    D = (ms[:, None] - ms[None, :]) % grid
    H += data[D]
    pencil = eigcore.SymmetricPencil(H)
    res = eigcore.solve_window(pencil, alpha, beta, with_vectors=False)
    diag = {
        "method": "dense-mismatched",
        "L": float(L),
        "t": float(t),
        "N": N,
        "edge_ratio": edge_ratio,
        "n_planewaves": n,
    }
    return SpectrumResult((alpha, beta), res.eigenvalues, diag)


def convergence_scan(V, W, L_values, ratio, window, max_planewaves=MAX_PLANEWAVES):
    """Supercell spectra for increasing L at fixed N/L, with Hausdorff deltas.

    Returns a list of rows {L, N, eigenvalues, interior, delta_prev};
    delta_prev is the Hausdorff distance between consecutive interior gap
    eigenvalue sets (inf when one is empty, 0 when both are).  The distance
    uses interior sets because larger supercells sample the bands at more
    quasimomenta and pick up band-edge values just inside a window whose
    endpoints were themselves computed on a finite quasimomentum grid; those
    values are essential spectrum, not gap eigenvalues.
    """
    rows = []
    prev = None
    for L in L_values:
        N = int(ratio * L)
        res = supercell_spectrum(V, W, L, N, window, max_planewaves=max_planewaves)
        interior = res.interior()
        delta = None if prev is None else hausdorff(prev, interior)
        rows.append(
            {
                "L": int(L),
                "N": N,
                "eigenvalues": res.eigenvalues,
                "interior": interior,
                "delta_prev": delta,
                "diagnostics": res.diagnostics,
            }
        )
        prev = interior
    return rows

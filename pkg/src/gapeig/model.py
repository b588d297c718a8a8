"""Problem data: lattices, trigonometric periodic potentials, localized perturbations.

The operator under study is H = -Laplacian + V_per + W on R^d (d = 1 or 2).
V_per is a finite sum of cosine/sine modes on a cubic lattice of period b and
W is a finite sum of polynomial-times-Gaussian bumps.  Both are cheap to
evaluate pointwise and have closed-form or FFT-computable Fourier data, which
is what the discretizations in the other modules consume.
"""

import numpy as np

from gapeig.errors import ResolutionError

ALIASING_TOL = 1e-8


class Lattice:
    """Cubic lattice in dimension d with period b along every axis."""

    def __init__(self, d, b):
        if d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if not (b > 0):
            raise ValueError("lattice period must be positive")
        self.d = int(d)
        self.b = float(b)

    @property
    def reciprocal(self):
        """Reciprocal lattice spacing 2*pi/b."""
        return 2.0 * np.pi / self.b

    def __repr__(self):
        return "Lattice(d=%d, b=%g)" % (self.d, self.b)

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.d == other.d and self.b == other.b


def _as_wavevector(m, d):
    if np.isscalar(m):
        m = (m,)
    m = tuple(int(c) for c in m)
    if len(m) != d:
        raise ValueError("wavevector must have %d components" % d)
    return m


class PeriodicPotential:
    """Finite trigonometric sum V(x) = sum_k a_k trig(2*pi*m_k.x/b + phi_k).

    Each term is (amplitude, kind, wavevector, phase) with kind "cos" or
    "sin" and an integer wavevector.  Fourier coefficients on the lattice are
    exact: the term a*cos(2*pi*m.x/b + phi) contributes (a/2)*e^{i*phi} at +m
    and the conjugate at -m, and similarly for sine.
    """

    def __init__(self, lattice, terms):
        self.lattice = lattice
        norm = []
        for amp, kind, m, phase in terms:
            if kind not in ("cos", "sin"):
                raise ValueError("term kind must be 'cos' or 'sin'")
            norm.append((float(amp), kind, _as_wavevector(m, lattice.d), float(phase)))
        self.terms = norm

    def __call__(self, *xs):
        if len(xs) != self.lattice.d:
            raise ValueError("expected %d coordinate arrays" % self.lattice.d)
        xs = [np.asarray(x, dtype=float) for x in xs]
        out = 0.0
        k0 = self.lattice.reciprocal
        for amp, kind, m, phase in self.terms:
            theta = phase
            for mi, xi in zip(m, xs):
                theta = theta + k0 * mi * xi
            f = np.cos(theta) if kind == "cos" else np.sin(theta)
            out = out + amp * f
        return out

    def fourier_coefficients(self):
        """Exact Fourier coefficients as a dict mapping integer tuples to complex."""
        coeffs = {}
        for amp, kind, m, phase in self.terms:
            if kind == "cos":
                cplus = 0.5 * amp * np.exp(1j * phase)
            else:
                cplus = -0.5j * amp * np.exp(1j * phase)
            mneg = tuple(-c for c in m)
            coeffs[m] = coeffs.get(m, 0.0) + cplus
            coeffs[mneg] = coeffs.get(mneg, 0.0) + np.conj(cplus)
        return coeffs

    def sup_bound(self):
        """Upper bound on sup |V| (sum of term amplitudes)."""
        return sum(abs(t[0]) for t in self.terms)


def _axis_factor_max(shift, power, center, sigma):
    """Exact max over u of |u + shift|^power * exp(-(u - center)^2 / sigma^2)."""
    if power == 0:
        return 1.0
    # stationary points solve u^2 + (shift - center) u - (shift*center + p*sigma^2/2) = 0;
    # the discriminant (shift + center)^2 + 2 p sigma^2 is always positive
    bq = shift - center
    cq = -(shift * center + 0.5 * power * sigma * sigma)
    disc = bq * bq - 4.0 * cq
    best = 0.0
    for u in (0.5 * (-bq + np.sqrt(disc)), 0.5 * (-bq - np.sqrt(disc))):
        val = abs(u + shift) ** power * np.exp(-((u - center) ** 2) / sigma**2)
        best = max(best, val)
    return best


class Perturbation:
    """Localized perturbation W(x) = sum_k c_k prod_i (x_i + s_i)^{p_i} e^{-|x - x0|^2/sigma^2}.

    Terms are dicts with keys coefficient, factors (list of (shift, power) per
    axis), center, sigma.  W is bounded and Gaussian-decaying; sup_norm_bound
    gives a finite bound computed per term from the exact per-axis maxima.
    """

    def __init__(self, lattice, terms):
        self.lattice = lattice
        d = lattice.d
        norm = []
        for t in terms:
            coeff = float(t["coefficient"])
            factors = [(float(s), int(p)) for s, p in t["factors"]]
            if len(factors) != d:
                raise ValueError("need one (shift, power) factor per axis")
            if any(p < 0 for _, p in factors):
                raise ValueError("factor powers must be nonnegative")
            center = t.get("center", (0.0,) * d)
            if np.isscalar(center):
                center = (center,)
            center = tuple(float(c) for c in center)
            if len(center) != d:
                raise ValueError("center must have %d components" % d)
            sigma = float(t.get("sigma", 1.0))
            if not (sigma > 0):
                raise ValueError("sigma must be positive")
            norm.append((coeff, factors, center, sigma))
        self.terms = norm

    def __call__(self, *xs):
        if len(xs) != self.lattice.d:
            raise ValueError("expected %d coordinate arrays" % self.lattice.d)
        xs = [np.asarray(x, dtype=float) for x in xs]
        out = 0.0
        for coeff, factors, center, sigma in self.terms:
            r2 = 0.0
            poly = 1.0
            for (s, p), z, xi in zip(factors, center, xs):
                r2 = r2 + (xi - z) ** 2
                if p:
                    poly = poly * (xi + s) ** p
            out = out + coeff * poly * np.exp(-r2 / sigma**2)
        return out

    def sup_norm_bound(self):
        """Finite upper bound on sup |W|."""
        total = 0.0
        for coeff, factors, center, sigma in self.terms:
            prod = 1.0
            for (s, p), z in zip(factors, center):
                prod *= _axis_factor_max(s, p, z, sigma)
            total += abs(coeff) * prod
        return total


class SupercellCoefficients:
    """Fourier coefficients of a function periodized over the cell (-span/2, span/2]^d.

    data is the full FFT table (grid points per axis); coeff(m) reads the
    coefficient of e^{2*pi*i*m.x/span} for integer m, indexing modulo grid.
    """

    def __init__(self, d, span, grid, data, edge_ratio):
        self.d = d
        self.span = float(span)
        self.grid = int(grid)
        self.data = data
        self.edge_ratio = float(edge_ratio)

    def coeff(self, m):
        if np.isscalar(m):
            m = (m,)
        idx = tuple(int(c) % self.grid for c in m)
        return complex(self.data[idx])

    def max_abs(self):
        return float(np.max(np.abs(self.data)))


def fourier_sample(func, d, span, grid):
    """FFT Fourier coefficients of func periodized over a cube of side span.

    Samples on a uniform grid offset so the cell is centered at the origin,
    enforces Hermitian symmetry exactly, and returns (data, edge_ratio) where
    edge_ratio is the largest Nyquist-shell magnitude relative to the overall
    maximum (an aliasing estimate).
    """
    pts = [(-0.5 * span + span * np.arange(grid) / grid) for _ in range(d)]
    if d == 1:
        vals = np.asarray(func(pts[0]), dtype=float)
    else:
        X, Y = np.meshgrid(pts[0], pts[1], indexing="ij")
        vals = np.asarray(func(X, Y), dtype=float)
    data = np.fft.fftn(vals) / grid**d
    # undo the half-cell sample offset: multiply mode m by (-1)^(sum m_i)
    mint = np.rint(np.fft.fftfreq(grid) * grid).astype(int)
    sign = np.where(mint % 2 == 0, 1.0, -1.0)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = grid
        data = data * sign.reshape(shape)
    # enforce conj(data[-m]) == data[m] exactly
    rev = (-np.arange(grid)) % grid
    mirror = data[np.ix_(*[rev] * d)] if d > 1 else data[rev]
    data = 0.5 * (data + np.conj(mirror))
    maxall = np.max(np.abs(data))
    if maxall == 0.0:
        return data, 0.0
    nyq = grid // 2
    edge = 0.0
    for ax in range(d):
        sl = [slice(None)] * d
        sl[ax] = nyq
        edge = max(edge, np.max(np.abs(data[tuple(sl)])))
    return data, edge / maxall


def perturbation_supercell_coefficients(W, L, grid=None):
    """Fourier coefficients of W periodized over the supercell (-L*b/2, L*b/2]^d.

    grid must be a power of two with grid >= 8*L (default: smallest such).
    Raises ResolutionError when the relative aliasing estimate exceeds 1e-8,
    i.e. the grid cannot resolve W over this supercell.
    """
    lat = W.lattice
    if not (int(L) == L and L >= 1):
        raise ValueError("supercell side L must be a positive integer")
    L = int(L)
    if grid is None:
        grid = 1
        while grid < 8 * L:
            grid *= 2
    grid = int(grid)
    if grid & (grid - 1) or grid < 8 * L:
        raise ValueError("grid must be a power of two with grid >= 8*L")
    span = L * lat.b
    data, edge_ratio = fourier_sample(W, lat.d, span, grid)
    if edge_ratio > ALIASING_TOL:
        raise ResolutionError(
            "aliasing estimate %.3e exceeds %.0e: grid %d too coarse for L=%d"
            % (edge_ratio, ALIASING_TOL, grid, L)
        )
    return SupercellCoefficients(lat.d, span, grid, data, edge_ratio)

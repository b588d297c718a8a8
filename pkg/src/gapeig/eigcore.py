"""Dense Hermitian eigenvalue solves with validated inputs and checked outputs.

Wraps LAPACK (through scipy.linalg.eigh) behind a small pencil type so every
discretization in the package goes through the same validation: Hermitian
inputs, positive definite mass matrices, ascending eigenvalues, B-orthonormal
eigenvectors, and a reported residual bound.
"""

import numpy as np
import scipy.linalg as sla

from gapeig.errors import InvalidMatrix, PencilNotDefinite

SYMMETRY_TOL = 1e-12


def _check_hermitian(M, name):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidMatrix("%s must be square, got shape %s" % (name, (M.shape,)))
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix("%s contains non-finite entries" % name)
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    defect = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if defect > SYMMETRY_TOL * scale:
        raise InvalidMatrix(
            "%s is not Hermitian: defect %.3e exceeds %.0e * scale" % (name, defect, SYMMETRY_TOL)
        )
    return M


class SymmetricPencil:
    """Pencil (A, B) with A Hermitian and B Hermitian positive definite.

    B=None means the identity.  Construction validates shapes, finiteness,
    Hermiticity (within 1e-12 relative to the largest entry) and, when B is
    given, positive definiteness via a Cholesky factorization.
    """

    def __init__(self, A, B=None):
        self.A = _check_hermitian(A, "A")
        if B is None:
            self.B = None
        else:
            self.B = _check_hermitian(B, "B")
            if self.B.shape != self.A.shape:
                raise InvalidMatrix("A and B must have the same shape")
            try:
                np.linalg.cholesky(self.B)
            except np.linalg.LinAlgError:
                raise PencilNotDefinite("B is not positive definite") from None

    @property
    def n(self):
        return self.A.shape[0]


class EigResult:
    """Eigenvalues in ascending order plus optional eigenvectors and diagnostics.

    residual_bound is max_j ||A v_j - lambda_j B v_j||_2 and orthonormality
    is ||V^H B V - I||_max; both are None for value-only solves.
    """

    def __init__(self, eigenvalues, eigenvectors=None, residual_bound=None, orthonormality=None):
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.eigenvectors = eigenvectors
        self.residual_bound = residual_bound
        self.orthonormality = orthonormality

    def __len__(self):
        return len(self.eigenvalues)


def _diagnostics(pencil, w, V):
    if len(w) == 0:
        return 0.0, 0.0
    AV = pencil.A @ V
    BV = V if pencil.B is None else pencil.B @ V
    resid = float(np.max(np.linalg.norm(AV - BV * w[None, :], axis=0)))
    gram = V.conj().T @ BV
    ortho = float(np.max(np.abs(gram - np.eye(len(w)))))
    return resid, ortho


def _finish(pencil, w, V):
    order = np.argsort(w, kind="stable")
    w = np.asarray(w)[order]
    if V is None:
        return EigResult(w)
    V = V[:, order]
    resid, ortho = _diagnostics(pencil, w, V)
    return EigResult(w, V, resid, ortho)


def solve_pencil(pencil, with_vectors=True):
    """Full eigendecomposition of the pencil."""
    A, B = pencil.A, pencil.B
    if with_vectors:
        w, V = sla.eigh(A, B)
        return _finish(pencil, w, V)
    w = sla.eigvalsh(A, B)
    return _finish(pencil, w, None)


def solve_window(pencil, lo, hi, with_vectors=True):
    """Eigenpairs with eigenvalues inside the interval (lo, hi)."""
    if not (lo < hi):
        raise ValueError("window requires lo < hi")
    A, B = pencil.A, pencil.B
    driver = None if B is None else "gvx"
    if with_vectors:
        w, V = sla.eigh(A, B, subset_by_value=(lo, hi), driver=driver)
        return _finish(pencil, w, V)
    w = sla.eigh(A, B, subset_by_value=(lo, hi), driver=driver, eigvals_only=True)
    return _finish(pencil, w, None)


def solve_lowest(pencil, k, with_vectors=True):
    """The k smallest eigenpairs."""
    if not (1 <= k <= pencil.n):
        raise ValueError("k must be between 1 and n")
    A, B = pencil.A, pencil.B
    driver = None if B is None else "gvx"
    if with_vectors:
        w, V = sla.eigh(A, B, subset_by_index=(0, k - 1), driver=driver)
        return _finish(pencil, w, V)
    w = sla.eigh(A, B, subset_by_index=(0, k - 1), driver=driver, eigvals_only=True)
    return _finish(pencil, w, None)

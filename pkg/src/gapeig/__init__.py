"""gapeig: discrete eigenvalues of perturbed periodic Schrodinger operators.

Computes spectra of H = -Laplacian + V_per + W where V_per is periodic and W
is a localized perturbation.  Three discretizations are provided: a truncated
domain P1 finite element method (which pollutes spectral gaps with spurious
eigenvalues), a planewave supercell method (pollution-free), and a projector
augmented finite element method (pollution-free), together with diagnostics
that detect and classify spurious modes.
"""

from gapeig import augment, bloch, eigcore, fem1d, model, supercell
from gapeig.errors import (
    AugmentationDegenerate,
    BasisTooLarge,
    ConfigError,
    GapeigError,
    InvalidMatrix,
    MeshOffsetError,
    NoGap,
    PencilNotDefinite,
    QGridAsymmetric,
    ResolutionError,
    WindowTooSmall,
)

__version__ = "0.1.0"

__all__ = [
    "model",
    "eigcore",
    "bloch",
    "supercell",
    "fem1d",
    "augment",
    "GapeigError",
    "InvalidMatrix",
    "PencilNotDefinite",
    "ResolutionError",
    "BasisTooLarge",
    "NoGap",
    "MeshOffsetError",
    "QGridAsymmetric",
    "WindowTooSmall",
    "AugmentationDegenerate",
    "ConfigError",
    "__version__",
]

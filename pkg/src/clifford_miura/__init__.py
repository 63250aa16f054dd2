"""Clifford-analysis operators and a Miura-transform solver on box grids.

Submodules:

- ``algebra``: Cl(0,n) multivectors, optionally with a Witt pair f, f+
- ``grid``: box grids, Clifford-valued fields, discrete norms, CSV I/O
- ``operators``: finite-difference Dirac-type operators and factorization residuals
- ``integral``: Teodorescu transform, Cauchy boundary operator, parabolic kernels
- ``miura``: fixed-point solver for ``Da = V + |a|^2`` and the log-derivative oracle
- ``gp``: stationary Gross-Pitaevskii reduction to the Miura equation
- ``cli``: batch front end
"""

from .algebra import AlgebraError, Blade, CliffordAlgebra, Multivector, algebra, geometric_product, involution
from .grid import CliffordField, GridError, GridSpec, build_grid, sample_field
from .integral import KernelCache, cauchy_boundary_apply, kernel_cache, teodorescu_apply
from .miura import ConvergenceReport, MiuraConfig, MiuraError, miura_iterate
from .operators import dirac_apply, factorization_residual, laplacian_apply

__version__ = "0.1.0"

__all__ = [
    "AlgebraError",
    "Blade",
    "CliffordAlgebra",
    "CliffordField",
    "ConvergenceReport",
    "GridError",
    "GridSpec",
    "KernelCache",
    "MiuraConfig",
    "MiuraError",
    "Multivector",
    "algebra",
    "build_grid",
    "cauchy_boundary_apply",
    "dirac_apply",
    "factorization_residual",
    "geometric_product",
    "involution",
    "kernel_cache",
    "laplacian_apply",
    "miura_iterate",
    "sample_field",
    "teodorescu_apply",
]

"""Dirichlet Heisenberg Laplacian on cylinders over polygons.

Modules: ``geometry2d`` (polygon distance fields, inradius, l(omega)),
``hardy`` (lattice Hardy constant), ``operator`` (sparse assembly, plus the
lattice magnetic Laplacian), ``eigensolve`` (LOBPCG and a dense Jacobi
oracle), ``bounds`` (Riesz means and the Berezin-type bounds) and ``cli``.
"""

__version__ = "0.1.0"

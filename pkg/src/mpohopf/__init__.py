"""MPO representations of pre-bialgebras, weak bialgebras and weak Hopf
algebras, with string-net front-ends and generalized Kitaev models.

Layers, bottom up:

- ``tensors``:   dense complex kernels (contraction, nullspace, clustering)
- ``algebra``:   structure-constant algebras/coalgebras and axiom checks
- ``reptheory``: irrep decomposition, fusion tensors, F-symbols, pentagon
- ``mpo``:       the boundary calculus b(x), sector tensors, ring closures
- ``wha``:       antipode, Z-matrices, quantum dimensions, integrals,
                 pulling-through structures, C* re-gauging
- ``fusioncat``: weak Hopf algebras built from multiplicity-free fusion
                 category data (F-symbols), e.g. Fibonacci
- ``lattice``:   lattice graphs, symmetry-operator PEPS tensors, Kitaev
                 Hamiltonians, ground spaces, Drinfeld-double anyons
- ``cli``:       batch front-end emitting machine-readable reports
"""

from mpohopf.tensors import Tolerance

__all__ = ["Tolerance"]
__version__ = "0.1.0"

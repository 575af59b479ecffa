"""Dense complex multilinear algebra kernel.

All tensors are numpy arrays of dtype complex128 in row-major order.  The
helpers here are the only linear-algebra entry points the rest of the
package uses: Kronecker products, index contraction, nullspaces and
eigenvalue clustering.  Everything is pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tolerance",
    "ShapeError",
    "UsageError",
    "NumericalDegeneracyError",
    "as_tensor",
    "kron",
    "contract",
    "nullspace",
    "eig_cluster",
    "max_abs",
]


@dataclass(frozen=True)
class Tolerance:
    """Absolute/relative tolerance pair used by rank and cluster decisions."""

    abs: float = 1e-9
    rel: float = 1e-9

    def __post_init__(self):
        if self.abs < 0 or self.rel < 0:
            raise ValueError("tolerances must be non-negative")


DEFAULT_TOL = Tolerance()


class ShapeError(ValueError):
    """Input tensors have incompatible shapes or ranks."""


class UsageError(ValueError):
    """An operation was called with inconsistent arguments."""


class NumericalDegeneracyError(RuntimeError):
    """A spectral decomposition is too ill-conditioned at the requested
    tolerance; the caller should redraw its random element."""


def as_tensor(data) -> np.ndarray:
    """Convert to a complex128 array and reject non-finite entries."""
    t = np.asarray(data, dtype=complex)
    if not (np.all(np.isfinite(t.real)) and np.all(np.isfinite(t.imag))):
        raise ValueError("tensor contains NaN or Inf entries")
    return t


def max_abs(t) -> float:
    """Largest entry magnitude; 0.0 for empty tensors."""
    t = np.asarray(t)
    return 0.0 if t.size == 0 else float(np.max(np.abs(t)))


def kron(a, b) -> np.ndarray:
    """Kronecker product of two matrices, block (i,j) equal to a[i,j]*b."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"kron needs rank-2 inputs, got ranks {a.ndim}, {b.ndim}")
    return np.kron(a, b)


def contract(a, b, pairs) -> np.ndarray:
    """Contract tensors over the given (axis-of-a, axis-of-b) pairs.

    Result axes are the unpaired axes of `a` followed by those of `b`.
    """
    a, b = as_tensor(a), as_tensor(b)
    pairs = list(pairs)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise UsageError("an axis may be contracted at most once")
    for i, j in pairs:
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise UsageError(f"axis pair ({i},{j}) out of range")
        if a.shape[i] != b.shape[j]:
            raise ShapeError(
                f"axis {i} of a (length {a.shape[i]}) does not match "
                f"axis {j} of b (length {b.shape[j]})"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


def nullspace(m, tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the right kernel of a matrix.

    A singular value sigma counts as zero when sigma <= tol.abs + tol.rel * sigma_max.
    """
    m = as_tensor(m)
    if m.ndim != 2:
        raise ShapeError(f"nullspace needs a rank-2 input, got rank {m.ndim}")
    if m.size == 0:
        return [e for e in np.eye(m.shape[1], dtype=complex)]
    _, s, vh = np.linalg.svd(m)
    smax = s[0] if len(s) else 0.0
    cut = tol.abs + tol.rel * smax
    rank = int(np.sum(s > cut))
    return [vh[i].conj() for i in range(rank, m.shape[1])]


def eig_cluster(m, tol: Tolerance = DEFAULT_TOL):
    """Cluster the spectrum of a diagonalizable matrix.

    Returns a list of (eigenvalue, projector) pairs.  Eigenvalues are merged
    into one cluster when they are within tol.abs + tol.rel * max|lambda| of
    each other (transitively); the projectors are the spectral (in general
    oblique) projectors, they sum to the identity and are mutually
    annihilating.  Raises NumericalDegeneracyError when the eigenvector
    matrix is too ill-conditioned, which signals a defective input: the
    caller should redraw its random element.
    """
    m = as_tensor(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError("eig_cluster needs a square matrix")
    n = m.shape[0]
    if n == 0:
        return []
    evals, vecs = np.linalg.eig(m)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > 1e8:
        raise NumericalDegeneracyError(
            f"eigenvector matrix condition number {cond:.2e}; "
            "redraw the random element"
        )
    vinv = np.linalg.inv(vecs)
    scale = max_abs(evals)
    cut = tol.abs + tol.rel * scale
    # transitive merge on the real line of pairwise distances
    order = np.argsort(evals.real + 1e-3 * evals.imag)
    groups: list[list[int]] = []
    assigned = [False] * n
    for i in order:
        if assigned[i]:
            continue
        stack, grp = [i], []
        assigned[i] = True
        while stack:
            j = stack.pop()
            grp.append(j)
            for k in range(n):
                if not assigned[k] and abs(evals[j] - evals[k]) <= cut:
                    assigned[k] = True
                    stack.append(k)
        groups.append(grp)
    out = []
    for grp in groups:
        idx = np.array(grp)
        proj = vecs[:, idx] @ vinv[idx, :]
        lam = complex(np.mean(evals[idx]))
        out.append((lam, proj))
    out.sort(key=lambda p: (round(p[0].real, 9), round(p[0].imag, 9)))
    return out

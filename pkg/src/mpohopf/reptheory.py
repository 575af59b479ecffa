"""Representations of finite-dimensional semisimple algebras.

Decomposition into irreducibles is fully numerical: the commutant is found
as a nullspace, a random commutant element is spectrally clustered into
projectors onto irreducible invariant subspaces, and equivalence classes
are detected through intertwiner spaces.  Fusion multiplicities, fusion
tensors and F-symbols are computed on top of that.

Nothing here assumes a * structure; projectors may be oblique.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mpohopf.algebra import PreBialgebraData, dual, left_mult_matrix
from mpohopf.tensors import (
    DEFAULT_TOL,
    NumericalDegeneracyError,
    Tolerance,
    as_tensor,
    eig_cluster,
    max_abs,
    nullspace,
)

__all__ = [
    "Representation",
    "IrrepDecomposition",
    "FusionData",
    "FSymbols",
    "RadicalError",
    "regular_rep",
    "dual_regular_rep",
    "decompose",
    "intertwiners",
    "tensor_product_rep",
    "fusion_multiplicities",
    "fusion_tensors",
    "f_symbols",
    "check_pentagon",
]


class RadicalError(RuntimeError):
    """The represented algebra is not semisimple (or numerically far from it)."""


@dataclass
class Representation:
    """Matrices of the algebra basis elements: mats[i] = rho(e_i)."""

    mats: np.ndarray  # shape (n_alg, D, D)

    def __post_init__(self):
        self.mats = as_tensor(self.mats)
        if self.mats.ndim != 3 or self.mats.shape[1] != self.mats.shape[2]:
            raise ValueError("mats must have shape (n, D, D)")

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    @property
    def n_alg(self) -> int:
        return self.mats.shape[0]

    def apply(self, coeffs) -> np.ndarray:
        return np.tensordot(as_tensor(coeffs), self.mats, axes=([0], [0]))

    def check_homomorphism(self, mult, unit=None) -> float:
        """Max residual of rho(e_i) rho(e_j) = sum_k mult[i,j,k] rho(e_k)
        (and rho(1) = Id when the unit is given)."""
        lhs = np.einsum("iab,jbc->ijac", self.mats, self.mats)
        rhs = np.einsum("ijk,kac->ijac", as_tensor(mult), self.mats)
        r = max_abs(lhs - rhs)
        if unit is not None:
            r = max(r, max_abs(self.apply(unit) - np.eye(self.dim)))
        return r


@dataclass
class IrrepDecomposition:
    """Isotypic data of a representation of a semisimple algebra.

    ``basis_change`` U satisfies U^-1 rho(x) U = direct sum over labels of
    kron(irrep_a(x), Id_mult_a), blocks ordered like ``labels``.
    """

    labels: list[str]
    irreps: dict[str, np.ndarray]          # label -> (n_alg, D_a, D_a)
    multiplicities: dict[str, int]
    basis_change: np.ndarray
    source: Representation

    def dims(self) -> dict[str, int]:
        return {a: self.irreps[a].shape[1] for a in self.labels}

    def reconstruct(self, coeffs) -> np.ndarray:
        blocks = []
        for a in self.labels:
            block = np.tensordot(as_tensor(coeffs), self.irreps[a], axes=([0], [0]))
            blocks.append(np.kron(block, np.eye(self.multiplicities[a])))
        u = self.basis_change
        return u @ _block_diag(blocks) @ np.linalg.inv(u)

    def characters(self) -> dict[str, np.ndarray]:
        """Trace vector of each irrep over the algebra basis."""
        return {a: np.einsum("ixx->i", self.irreps[a]) for a in self.labels}


@dataclass
class FusionData:
    """Fusion multiplicities and splitting tensors of pairwise tensor products.

    V[(a,b,c,mu)] maps W_c -> W_a (x) W_b, W[(a,b,c,mu)] the other way,
    with W V = delta * Id and sum_c,mu V W = image of the dual unit.
    """

    labels: list[str]
    dims: dict[str, int]
    N: dict[tuple[str, str, str], int] = field(default_factory=dict)
    V: dict[tuple[str, str, str, int], np.ndarray] = field(default_factory=dict)
    W: dict[tuple[str, str, str, int], np.ndarray] = field(default_factory=dict)

    def nmat(self, a: str) -> np.ndarray:
        """Integer matrix (N_a)_b^c = N[a,b,c]."""
        k = len(self.labels)
        out = np.zeros((k, k), dtype=int)
        for i, b in enumerate(self.labels):
            for j, c in enumerate(self.labels):
                out[i, j] = self.N.get((a, b, c), 0)
        return out


@dataclass
class FSymbols:
    """Multiplicity-free recoupling coefficients on dense label axes.

    ``entries[a,b,c,e,k,f]`` is [F_{abc}^e]_k^f: the subscript k is the
    intermediate of the right-associated tree (b,c fuse to k, then a,k to e)
    and the superscript f that of the left-associated tree (a,b fuse to f,
    then f,c to e).  ``inverse[a,b,c,e,f,k]`` is the matrix inverse on each
    (a,b,c,e) block, so sum_k entries[...,k,f] inverse[...,k',f]... follows
    matrix composition row=sup, col=sub.
    """

    labels: list[str]
    N: np.ndarray            # (k,k,k) int
    entries: np.ndarray      # (k,k,k,k,k,k) complex
    inverse: np.ndarray

    def multiplicity_free(self) -> bool:
        return bool(np.all(self.N <= 1))


def _block_diag(blocks) -> np.ndarray:
    total = sum(b.shape[0] for b in blocks)
    out = np.zeros((total, total), dtype=complex)
    pos = 0
    for b in blocks:
        d = b.shape[0]
        out[pos : pos + d, pos : pos + d] = b
        pos += d
    return out


def regular_rep(pb: PreBialgebraData) -> Representation:
    """Left-regular representation of the algebra on its own coefficient space."""
    mats = np.stack([left_mult_matrix(pb, np.eye(pb.dim)[i]) for i in range(pb.dim)])
    return Representation(mats)


def dual_regular_rep(pb: PreBialgebraData) -> Representation:
    """Left-regular representation of the dual algebra (indexed by the dual basis)."""
    return regular_rep(dual(pb))


def intertwiners(mats_from, mats_to, tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    """Basis of {X : rho_to(e_i) X = X rho_from(e_i) for all i}."""
    mats_from, mats_to = as_tensor(mats_from), as_tensor(mats_to)
    d_from, d_to = mats_from.shape[1], mats_to.shape[1]
    rows = []
    eye_from = np.eye(d_from)
    eye_to = np.eye(d_to)
    for i in range(mats_from.shape[0]):
        rows.append(np.kron(mats_to[i], eye_from) - np.kron(eye_to, mats_from[i].T))
    big = np.concatenate(rows, axis=0)
    return [v.reshape(d_to, d_from) for v in nullspace(big, tol)]


def _range_basis(p: np.ndarray, tol: Tolerance) -> np.ndarray:
    """Orthonormal column basis of the range of a (possibly oblique) projector."""
    u, s, _ = np.linalg.svd(p)
    cut = tol.abs + tol.rel * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > max(cut, 0.5)))  # projector singular values are >= 1 or ~0
    return u[:, :rank]


def _decompose_once(rep: Representation, rng: np.random.Generator, tol: Tolerance):
    """One pass of the commutant/random-projector decomposition."""
    d = rep.dim
    comm = intertwiners(rep.mats, rep.mats, tol)
    coeffs = rng.standard_normal(len(comm)) + 1j * rng.standard_normal(len(comm))
    c = sum(co * m for co, m in zip(coeffs, comm))
    clusters = eig_cluster(c, Tolerance(abs=max(tol.abs, 1e-8), rel=1e-8))

    copies = []  # (orthonormal basis Q, restricted mats)
    for _, proj in clusters:
        q = _range_basis(proj, tol)
        sub = np.einsum("ba,ibc,cd->iad", q.conj(), rep.mats, q)
        # invariance residual of the subspace
        resid = max_abs(np.einsum("ibc,cd->ibd", rep.mats, q) - np.einsum("ad,ids->ias", q, sub))
        if resid > 1e-6 * max(1.0, max_abs(rep.mats)):
            raise NumericalDegeneracyError("cluster range is not invariant")
        if len(intertwiners(sub, sub, tol)) != 1:
            raise NumericalDegeneracyError("cluster carries a reducible subrepresentation")
        copies.append((q, sub))

    # group the irreducible copies into equivalence classes
    classes: list[list[int]] = []
    for i, (_, sub) in enumerate(copies):
        placed = False
        for cls in classes:
            ref = copies[cls[0]][1]
            if sub.shape == ref.shape and intertwiners(sub, ref, tol):
                cls.append(i)
                placed = True
                break
        if not placed:
            classes.append([i])

    # canonical ordering: dimension, then character fingerprint
    def fingerprint(cls):
        sub = copies[cls[0]][1]
        chi = np.einsum("ixx->i", sub)
        return tuple(np.round(chi.view(float), 6))

    classes.sort(key=lambda cls: (copies[cls[0]][1].shape[1], fingerprint(cls)))

    labels = [f"s{i}" for i in range(len(classes))]
    irreps, mults = {}, {}
    columns = []
    for lab, cls in zip(labels, classes):
        ref = copies[cls[0]][1]
        da, m = ref.shape[1], len(cls)
        irreps[lab] = ref
        mults[lab] = m
        # intertwiner from the reference onto each copy, then interleave
        cols = np.zeros((d, da * m), dtype=complex)
        for t, idx in enumerate(cls):
            q, sub = copies[idx]
            xs = intertwiners(ref, sub, tol)
            if len(xs) != 1:
                raise NumericalDegeneracyError("ambiguous intertwiner between copies")
            s = xs[0]
            qs = q @ s
            for alpha in range(da):
                cols[:, alpha * m + t] = qs[:, alpha]
        columns.append(cols)
    u = np.concatenate(columns, axis=1)
    if u.shape != (d, d):
        raise RadicalError(
            f"radical detected: invariant subspaces span dimension {u.shape[1]} != {d}"
        )
    return IrrepDecomposition(labels, irreps, mults, u, rep)


def decompose(rep: Representation, seed: int = 0, tol: Tolerance = DEFAULT_TOL,
              max_redraws: int = 8) -> IrrepDecomposition:
    """Decompose a representation of a semisimple algebra into irreps.

    Runs the randomized decomposition from two independent draws derived
    from the seed and cross-checks the isotypic structure; the returned
    basis change reconstructs the input within tolerance.
    """
    scale = max(1.0, max_abs(rep.mats))

    def run(salt):
        rng = np.random.default_rng((seed, salt))
        last = None
        for _ in range(max_redraws):
            try:
                dec = _decompose_once(rep, rng, tol)
            except NumericalDegeneracyError as exc:
                last = exc
                continue
            resid = _reconstruction_residual(dec)
            if resid < 1e-7 * scale:
                return dec
            last = RadicalError(
                f"radical detected: reconstruction residual {resid:.2e}"
            )
        if isinstance(last, RadicalError):
            raise last
        raise RadicalError(f"radical detected or persistent degeneracy: {last}")

    dec1 = run(0)
    dec2 = run(1)
    sig1 = sorted((v.shape[1], dec1.multiplicities[k]) for k, v in dec1.irreps.items())
    sig2 = sorted((v.shape[1], dec2.multiplicities[k]) for k, v in dec2.irreps.items())
    if sig1 != sig2:
        raise NumericalDegeneracyError(
            f"isotypic structure differs between random draws: {sig1} vs {sig2}"
        )
    return dec1


def _reconstruction_residual(dec: IrrepDecomposition) -> float:
    rep = dec.source
    n = rep.n_alg
    resid = 0.0
    uinv = np.linalg.inv(dec.basis_change)
    for i in range(n):
        blocks = [
            np.kron(dec.irreps[a][i], np.eye(dec.multiplicities[a]))
            for a in dec.labels
        ]
        resid = max(resid, max_abs(rep.mats[i] - dec.basis_change @ _block_diag(blocks) @ uinv))
    return resid


def tensor_product_rep(dual_pb: PreBialgebraData, mats_a, mats_b) -> np.ndarray:
    """Matrices of (psi_a (x) psi_b) composed with the coproduct of the dual algebra."""
    mats_a, mats_b = as_tensor(mats_a), as_tensor(mats_b)
    return np.einsum("ijk,jab,kcd->iacbd", dual_pb.comult, mats_a, mats_b,
                     optimize=True).reshape(
        dual_pb.dim, mats_a.shape[1] * mats_b.shape[1], mats_a.shape[1] * mats_b.shape[1]
    )


def _unit_projector(dual_pb: PreBialgebraData, tens: np.ndarray) -> np.ndarray:
    return np.tensordot(dual_pb.unit, tens, axes=([0], [0]))


def fusion_multiplicities(dec: IrrepDecomposition, dual_pb: PreBialgebraData,
                          seed: int = 0, tol: Tolerance = DEFAULT_TOL
                          ) -> dict[tuple[str, str, str], int]:
    """N[a,b,c]: multiplicity of irrep c inside the product of sectors a and b,
    computed on the support of the image of the dual unit."""
    out = {}
    for a in dec.labels:
        for b in dec.labels:
            tens = tensor_product_rep(dual_pb, dec.irreps[a], dec.irreps[b])
            proj = _unit_projector(dual_pb, tens)
            q = _range_basis(proj, tol)
            if q.shape[1] == 0:
                for c in dec.labels:
                    out[(a, b, c)] = 0
                continue
            sub = Representation(np.einsum("ba,ibc,cd->iad", q.conj(), tens, q))
            subdec = decompose(sub, seed=seed, tol=tol)
            for c in dec.labels:
                out[(a, b, c)] = 0
            for lab in subdec.labels:
                match = None
                for c in dec.labels:
                    if dec.irreps[c].shape == subdec.irreps[lab].shape and intertwiners(
                        subdec.irreps[lab], dec.irreps[c], tol
                    ):
                        match = c
                        break
                if match is None:
                    raise RadicalError(
                        "product representation contains an irrep outside the "
                        "reference set; the decomposition is incomplete"
                    )
                out[(a, b, match)] += subdec.multiplicities[lab]
    return out


def fusion_tensors(dec: IrrepDecomposition, dual_pb: PreBialgebraData,
                   n_table=None, seed: int = 0,
                   tol: Tolerance = DEFAULT_TOL) -> FusionData:
    """Splitting tensors V, W for every sector pair, normalized to W V = Id."""
    if n_table is None:
        n_table = fusion_multiplicities(dec, dual_pb, seed=seed, tol=tol)
    fd = FusionData(labels=list(dec.labels), dims=dec.dims(), N=dict(n_table))
    for a in dec.labels:
        for b in dec.labels:
            tens = tensor_product_rep(dual_pb, dec.irreps[a], dec.irreps[b])
            proj = _unit_projector(dual_pb, tens)
            for c in dec.labels:
                n = fd.N[(a, b, c)]
                if n == 0:
                    continue
                dc = fd.dims[c]
                vs = intertwiners(dec.irreps[c], tens, tol)
                ws = intertwiners(tens, dec.irreps[c], tol)
                if len(vs) != n or len(ws) != n:
                    raise NumericalDegeneracyError(
                        f"intertwiner count {len(vs)}/{len(ws)} != N={n} at {(a, b, c)}"
                    )
                gram = np.array([[np.trace(w @ v) / dc for v in vs] for w in ws])
                if np.linalg.cond(gram) > 1e8:
                    raise NumericalDegeneracyError(f"singular fusion Gram at {(a, b, c)}")
                ginv = np.linalg.inv(gram)
                for mu in range(n):
                    w_mu = sum(ginv[mu, nu] * ws[nu] for nu in range(n))
                    fd.V[(a, b, c, mu)] = vs[mu]
                    fd.W[(a, b, c, mu)] = w_mu
            # completeness: sum_c,mu V W equals the unit projector
            acc = np.zeros_like(proj)
            for c in dec.labels:
                for mu in range(fd.N[(a, b, c)]):
                    acc += fd.V[(a, b, c, mu)] @ fd.W[(a, b, c, mu)]
            if max_abs(acc - proj) > 1e-7 * max(1.0, max_abs(proj)):
                raise NumericalDegeneracyError(
                    f"fusion tensors incomplete for pair {(a, b)}"
                )
    return fd


def f_symbols(dec: IrrepDecomposition, fusion: FusionData,
              tol: Tolerance = DEFAULT_TOL) -> FSymbols:
    """Recoupling matrices between the two orders of pairwise fusion.

    The coefficient [F_{abc}^e]_k^f expresses the left-associated splitting
    tree with inner label f through the right-associated trees with inner
    label k; it is extracted by pairing trees against their duals, which by
    the orthogonality of the fusion tensors isolates single coefficients.
    """
    labels = fusion.labels
    k = len(labels)
    idx = {a: i for i, a in enumerate(labels)}
    nd = np.zeros((k, k, k), dtype=int)
    for (a, b, c), v in fusion.N.items():
        nd[idx[a], idx[b], idx[c]] = v
    if np.any(nd > 1):
        raise NotImplementedError("F-symbol export requires multiplicity-free fusion")
    dims = fusion.dims

    entries = np.zeros((k, k, k, k, k, k), dtype=complex)
    inverse = np.zeros_like(entries)
    for a in labels:
        for b in labels:
            for c in labels:
                for e in labels:
                    fs = [f for f in labels
                          if fusion.N.get((a, b, f), 0) and fusion.N.get((f, c, e), 0)]
                    gs = [g for g in labels
                          if fusion.N.get((b, c, g), 0) and fusion.N.get((a, g, e), 0)]
                    if not fs and not gs:
                        continue
                    if len(fs) != len(gs):
                        raise RadicalError(
                            f"associativity dimension mismatch at {(a, b, c, e)}"
                        )
                    de = dims[e]
                    ida = np.eye(dims[a])
                    idc = np.eye(dims[c])
                    fmat = np.zeros((len(fs), len(gs)), dtype=complex)
                    imat = np.zeros((len(gs), len(fs)), dtype=complex)
                    for i, f in enumerate(fs):
                        # W-side tree ((ab)c) -> e  and V-side tree e -> (ab)c
                        y1 = fusion.W[(f, c, e, 0)] @ np.kron(fusion.W[(a, b, f, 0)], idc)
                        x1 = np.kron(fusion.V[(a, b, f, 0)], idc) @ fusion.V[(f, c, e, 0)]
                        for j, g in enumerate(gs):
                            x2 = np.kron(ida, fusion.V[(b, c, g, 0)]) @ fusion.V[(a, g, e, 0)]
                            y2 = fusion.W[(a, g, e, 0)] @ np.kron(ida, fusion.W[(b, c, g, 0)])
                            fmat[i, j] = np.trace(y1 @ x2) / de
                            imat[j, i] = np.trace(y2 @ x1) / de
                    if max_abs(fmat @ imat - np.eye(len(fs))) > 1e-7:
                        raise NumericalDegeneracyError(
                            f"recoupling matrix not invertible at {(a, b, c, e)}"
                        )
                    # rows of fmat run over the ((ab)c)-intermediates = superscript
                    for i, f in enumerate(fs):
                        for j, g in enumerate(gs):
                            entries[idx[a], idx[b], idx[c], idx[e], idx[g], idx[f]] = fmat[i, j]
                            inverse[idx[a], idx[b], idx[c], idx[e], idx[f], idx[g]] = imat[j, i]
    return FSymbols(labels=list(labels), N=nd, entries=entries, inverse=inverse)


def check_pentagon(f: FSymbols, tol: Tolerance = DEFAULT_TOL) -> float:
    """Maximum residual of the multiplicity-free pentagon identity.

    With F[x1,x2,x3,e,sub,sup]:
        F[f,c,d,e,l,g] F[a,b,l,e,k,f]
            = sum_h F[a,b,c,g,h,f] F[a,h,d,e,k,g] F[b,c,d,k,l,h].
    """
    if not f.multiplicity_free():
        raise NotImplementedError("pentagon check requires multiplicity-free fusion")
    _check_complete(f)
    t = f.entries
    lhs = np.einsum("fcdelg,ablekf->abcdegkl", t, t, optimize=True)
    rhs = np.einsum("abcghf,ahdekg,bcdklh->abcdegkl", t, t, t, optimize=True)
    return max_abs(lhs - rhs)


def _check_complete(f: FSymbols) -> None:
    """Every admissible (a,b,c,e) block must carry a nonzero F entry."""
    k = len(f.labels)
    n = f.N
    missing = []
    for a in range(k):
        for b in range(k):
            for c in range(k):
                for e in range(k):
                    dim = sum(n[a, b, d] * n[d, c, e] for d in range(k))
                    if dim and max_abs(f.entries[a, b, c, e]) == 0.0:
                        missing.append((f.labels[a], f.labels[b], f.labels[c], f.labels[e]))
    if missing:
        raise ValueError(f"incomplete F-symbols; missing blocks: {missing[:10]}")

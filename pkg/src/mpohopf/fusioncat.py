"""Weak Hopf algebras from multiplicity-free fusion-category data.

The input is a label set with fusion rules N <= 1 and F-symbols satisfying
the pentagon identity.  A rank-4 string-net MPO tensor is formed on the
space of label triples; closing one site against block matrices X in the
direct sum of M_{D_l} realizes an algebra, growing the MPO realizes its
coproduct, and the block structure provides the dual irreps directly.  The
resulting structure constants pass the full weak-Hopf pipeline.

F-symbol index convention matches ``reptheory.FSymbols``: F[a,b,c,e,k,f]
holds [F_{abc}^e]_k^f with subscript k the right-associated intermediate
and superscript f the left-associated one.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from mpohopf.algebra import PreBialgebraData, check_star, dual
from mpohopf.reptheory import FSymbols, IrrepDecomposition, Representation, check_pentagon
from mpohopf.tensors import DEFAULT_TOL, Tolerance, as_tensor, max_abs

__all__ = [
    "FusionCatData",
    "fibonacci",
    "pointed",
    "load_fusion_data",
    "fusion_data_to_json",
    "stringnet_mpo",
    "build_wha_from_category",
    "StringNetWHA",
]


@dataclass
class FusionCatData:
    """Multiplicity-free fusion rules and F-symbols with a distinguished vacuum."""

    labels: list[str]
    vacuum: str
    N: np.ndarray          # (k,k,k) in {0,1}
    F: np.ndarray          # (k,k,k,k,k,k): [F_{abc}^e]_k^f
    Finv: np.ndarray
    alpha: dict[str, complex] = field(default_factory=dict)

    def __post_init__(self):
        if not self.alpha:
            self.alpha = {a: 1.0 + 0.0j for a in self.labels}
        if self.vacuum not in self.labels:
            raise ValueError("vacuum label missing from label set")
        if np.any(self.N > 1):
            raise ValueError("only multiplicity-free categories are supported")

    @property
    def index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.labels)}

    def nval(self, a: str, b: str, c: str) -> int:
        ix = self.index
        return int(self.N[ix[a], ix[b], ix[c]])

    def fval(self, a, b, c, e, k, f) -> complex:
        ix = self.index
        return complex(self.F[ix[a], ix[b], ix[c], ix[e], ix[k], ix[f]])

    def as_fsymbols(self) -> FSymbols:
        return FSymbols(labels=list(self.labels), N=self.N.copy(),
                        entries=self.F.copy(), inverse=self.Finv.copy())

    def validate(self, tol: Tolerance = DEFAULT_TOL) -> float:
        """Pentagon + block-inverse residual; raises on failure."""
        resid = check_pentagon(self.as_fsymbols(), tol)
        if resid > max(tol.abs, 1e-9):
            worst = _worst_pentagon_tuple(self)
            raise ValueError(
                f"pentagon identity fails with residual {resid:.3e}; "
                f"worst label tuple {worst}"
            )
        k = len(self.labels)
        rinv = 0.0
        for a, b, c, e in itertools.product(range(k), repeat=4):
            fm = self.F[a, b, c, e]
            im = self.Finv[a, b, c, e]
            prod = fm @ im
            # on the admissible block the product must restrict to the identity
            for f in range(k):
                if self.N[a, b, f] and self.N[f, c, e]:
                    for f2 in range(k):
                        want = 1.0 if f2 == f else 0.0
                        # row f of F times column f2 of Finv, summed over subscripts
                        val = sum(fm[x, f] * im[f2, x] for x in range(k))
                        rinv = max(rinv, abs(val - want))
        if rinv > 1e-9:
            raise ValueError(f"F and F^-1 are not mutually inverse (residual {rinv:.3e})")
        return resid


def _worst_pentagon_tuple(data: FusionCatData):
    t = data.F
    lhs = np.einsum("fcdelg,ablekf->abcdegkl", t, t, optimize=True)
    rhs = np.einsum("abcghf,ahdekg,bcdklh->abcdegkl", t, t, t, optimize=True)
    diff = np.abs(lhs - rhs)
    pos = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return tuple(data.labels[i] for i in pos)


def fibonacci() -> FusionCatData:
    """The two-label category with t x t = 1 + t and the golden-ratio F-matrix."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    labels = ["1", "t"]
    n = np.zeros((2, 2, 2), dtype=int)
    ix = {"1": 0, "t": 1}
    for a, b, c in [("1", "1", "1"), ("1", "t", "t"), ("t", "1", "t"),
                    ("t", "t", "1"), ("t", "t", "t")]:
        n[ix[a], ix[b], ix[c]] = 1
    f = np.zeros((2,) * 6, dtype=complex)
    for a, b, c, e, k, g in itertools.product(labels, repeat=6):
        if not (n[ix[b], ix[c], ix[k]] and n[ix[a], ix[k], ix[e]]
                and n[ix[a], ix[b], ix[g]] and n[ix[g], ix[c], ix[e]]):
            continue
        if (a, b, c, e) == ("t", "t", "t", "t"):
            val = {("1", "1"): phi, ("t", "t"): -phi}.get((k, g), np.sqrt(phi))
        else:
            val = 1.0
        f[ix[a], ix[b], ix[c], ix[e], ix[k], ix[g]] = val
    finv = np.transpose(f, (0, 1, 2, 3, 5, 4)).copy()  # (F^-1)_e^f = F_f^e here
    data = FusionCatData(labels=labels, vacuum="1", N=n, F=f, Finv=finv)
    data.validate()
    return data


def pointed(cayley, labels=None) -> FusionCatData:
    """Group fusion rules with the trivial cocycle (all F entries 1)."""
    table = np.asarray(cayley, dtype=int)
    size = table.shape[0]
    if labels is None:
        labels = [f"g{i}" for i in range(size)]
    ident = next(e for e in range(size)
                 if all(table[e, j] == j and table[j, e] == j for j in range(size)))
    n = np.zeros((size,) * 3, dtype=int)
    for i in range(size):
        for j in range(size):
            n[i, j, table[i, j]] = 1
    f = np.zeros((size,) * 6, dtype=complex)
    for a, b, c in itertools.product(range(size), repeat=3):
        k = table[b, c]
        g = table[a, b]
        e = table[a, k]
        f[a, b, c, e, k, g] = 1.0
    finv = np.transpose(f, (0, 1, 2, 3, 5, 4)).copy()
    data = FusionCatData(labels=list(labels), vacuum=labels[ident], N=n, F=f, Finv=finv)
    data.validate()
    return data


def load_fusion_data(path) -> FusionCatData:
    """Read the F-symbol JSON schema and validate the pentagon identity."""
    with open(path) as fh:
        doc = json.load(fh)
    return fusion_data_from_json(doc)


def fusion_data_from_json(doc: dict) -> FusionCatData:
    labels = [str(x) for x in doc["labels"]]
    k = len(labels)
    ix = {a: i for i, a in enumerate(labels)}
    n = np.zeros((k, k, k), dtype=int)
    for key, val in doc["N"].items():
        a, b, c = key.split(",")
        n[ix[a], ix[b], ix[c]] = int(val)
    f = np.zeros((k,) * 6, dtype=complex)
    for key, val in doc["F"].items():
        a, b, c, e, kk, g = key.split(",")
        f[ix[a], ix[b], ix[c], ix[e], ix[kk], ix[g]] = complex(val[0], val[1])
    if "Finv" in doc:
        finv = np.zeros((k,) * 6, dtype=complex)
        for key, val in doc["Finv"].items():
            a, b, c, e, g, kk = key.split(",")
            finv[ix[a], ix[b], ix[c], ix[e], ix[g], ix[kk]] = complex(val[0], val[1])
    else:
        finv = _invert_blocks(labels, n, f)
    alpha = {a: 1.0 + 0j for a in labels}
    for key, val in doc.get("alpha", {}).items():
        alpha[key] = complex(val[0], val[1])
    vacuum = doc.get("vacuum") or _find_vacuum(labels, n)
    data = FusionCatData(labels=labels, vacuum=vacuum, N=n, F=f, Finv=finv, alpha=alpha)
    data.validate()
    return data


def fusion_data_to_json(data: FusionCatData) -> dict:
    k = len(data.labels)
    doc = {"labels": data.labels, "vacuum": data.vacuum, "N": {}, "F": {},
           "alpha": {a: [data.alpha[a].real, data.alpha[a].imag] for a in data.labels}}
    for a, b, c in itertools.product(range(k), repeat=3):
        if data.N[a, b, c]:
            doc["N"][f"{data.labels[a]},{data.labels[b]},{data.labels[c]}"] = int(data.N[a, b, c])
    for pos, val in np.ndenumerate(data.F):
        if abs(val) > 0:
            key = ",".join(data.labels[i] for i in pos)
            doc["F"][key] = [val.real, val.imag]
    return doc


def _find_vacuum(labels, n) -> str:
    for i, a in enumerate(labels):
        if all(n[i, j, j] and n[j, i, j] for j in range(len(labels))):
            return a
    raise ValueError("no vacuum label found in the fusion rules")


def _invert_blocks(labels, n, f) -> np.ndarray:
    k = len(labels)
    finv = np.zeros_like(f)
    for a, b, c, e in itertools.product(range(k), repeat=4):
        sups = [x for x in range(k) if n[a, b, x] and n[x, c, e]]
        subs = [x for x in range(k) if n[b, c, x] and n[a, x, e]]
        if not sups:
            continue
        m = np.array([[f[a, b, c, e, kk, g] for kk in subs] for g in sups])
        mi = np.linalg.inv(m)
        for i, g in enumerate(sups):
            for j, kk in enumerate(subs):
                finv[a, b, c, e, g, kk] = mi[j, i]
    return finv


# ---------------------------------------------------------------------------
# string-net tensors and the weak Hopf algebra they generate


def _virtual_triples(data: FusionCatData, block: str) -> list[tuple[str, str]]:
    """Admissible (f, e) pairs of the virtual block, lexicographic in labels."""
    return [(fl, el) for fl in data.labels for el in data.labels
            if data.nval(fl, block, el)]


def _physical_triples(data: FusionCatData) -> list[tuple[str, str, str]]:
    """Admissible physical triples (x, m, y) with N_{m y}^{x} = 1."""
    return [(x, m, y) for m in data.labels for x in data.labels for y in data.labels
            if data.nval(m, y, x)]


def stringnet_mpo(data: FusionCatData) -> dict:
    """Per-block rank-4 MPO tensors on the full triple spaces, plus the block
    projectors P_b of the virtual space.

    The tensor entry with physical (out, in) triples (f,a,b), (e,a,k) and
    virtual (left, right) triples (f,l,e), (b,l,k) is [F_{abl}^e]_k^f; all
    other entries are structural zeros.  Output tensors are indexed
    [out, in, left, right] over the full label-triple spaces (dimension
    len(labels)**3), so the delta-constraint sparsity is explicit.
    """
    labels = data.labels
    k = len(labels)
    triples = list(itertools.product(labels, repeat=3))
    tix = {t: i for i, t in enumerate(triples)}
    dim = k ** 3
    blocks = {}
    for l in labels:
        t = np.zeros((dim, dim, dim, dim), dtype=complex)
        for (f, a, b), (e, a2, kk) in itertools.product(
            _physical_triples(data), _physical_triples(data)
        ):
            if a2 != a:
                continue
            val = data.fval(a, b, l, e, kk, f)
            if val == 0:
                continue
            t[tix[(f, a, b)], tix[(e, a, kk)], tix[(f, l, e)], tix[(b, l, kk)]] = val
        blocks[l] = t
    projectors = {}
    for b in labels:
        diag = np.zeros(dim)
        for (x, m, y) in triples:
            if m == b and data.nval(x, b, y):
                diag[tix[(x, m, y)]] = 1.0
        projectors[b] = np.diag(diag).astype(complex)
    return {"blocks": blocks, "projectors": projectors, "triples": triples}


@dataclass
class StringNetWHA:
    """The weak Hopf algebra generated by a string-net MPO tensor.

    Basis elements of the algebra are matrix units of the virtual blocks;
    ``operators[i]`` is the faithful action of basis element i on the space
    of admissible physical triples.
    """

    data: FusionCatData
    pb: PreBialgebraData
    basis: list[tuple[str, int, int]]          # (block, row, col) matrix units
    block_triples: dict[str, list[tuple[str, str]]]
    phys_triples: list[tuple[str, str, str]]
    operators: np.ndarray                      # (dim_alg, D_phys, D_phys)
    phi: Representation
    dec: IrrepDecomposition

    def block_of_element(self, coeffs, block: str) -> np.ndarray:
        """The matrix of an algebra element in one virtual block."""
        d = len(self.block_triples[block])
        out = np.zeros((d, d), dtype=complex)
        for i, (bl, r, c) in enumerate(self.basis):
            if bl == block:
                out[r, c] += coeffs[i]
        return out


def build_wha_from_category(data: FusionCatData, tol: Tolerance = DEFAULT_TOL) -> StringNetWHA:
    """Structure constants, physical representation and dual irreps of the
    string-net weak Hopf algebra of the category."""
    labels = data.labels
    block_triples = {l: _virtual_triples(data, l) for l in labels}
    basis = [(l, r, c)
             for l in labels
             for r in range(len(block_triples[l]))
             for c in range(len(block_triples[l]))]
    dim_alg = len(basis)
    phys = _physical_triples(data)
    pix = {t: i for i, t in enumerate(phys)}
    dp = len(phys)

    # single-site closure of each matrix unit: contract X along the virtual loop
    ops = np.zeros((dim_alg, dp, dp), dtype=complex)
    for n_idx, (l, r, c) in enumerate(basis):
        fl, el = block_triples[l][r]     # left virtual triple (fl, l, el)
        br, kr = block_triples[l][c]     # right virtual triple (br, l, kr)
        for a in labels:
            up, down = (fl, a, br), (el, a, kr)
            if up in pix and down in pix:
                val = data.fval(a, br, l, el, kr, fl)
                if val != 0:
                    ops[n_idx, pix[up], pix[down]] += val
    flat = ops.reshape(dim_alg, -1)
    if np.linalg.matrix_rank(flat, tol=1e-9) != dim_alg:
        raise ValueError("string-net operators are not linearly independent")

    # unit boundary: vacuum-block caps weighted by the alpha normalizations
    unit_vec = _solve_unit(ops, flat)

    # multiplication constants from operator products
    mult = np.zeros((dim_alg, dim_alg, dim_alg), dtype=complex)
    for i in range(dim_alg):
        prods = np.einsum("ab,jbc->jac", ops[i], ops).reshape(dim_alg, -1)
        mult[i] = (np.linalg.lstsq(flat.T, prods.T, rcond=None)[0]).T
    resid = max_abs(np.einsum("ijk,kab->ijab", mult, ops) -
                    np.einsum("iab,jbc->ijac", ops, ops))
    if resid > 1e-8:
        raise ValueError(f"operator products leave the algebra span ({resid:.2e})")

    # comultiplication constants from the two-site closure
    comult = _solve_comult(data, basis, block_triples, pix, ops, flat)

    # counit: the unique functional with (eps x id) Delta = id
    counit = _solve_counit(mult, unit_vec, comult)

    pb = PreBialgebraData(mult=mult, unit=unit_vec, comult=comult, counit=counit)

    phi = Representation(ops)
    # dual irreps read off the block structure: psi_l(delta_{(l,r,c)}) = E_{r,c}
    irreps = {}
    for l in labels:
        d = len(block_triples[l])
        mats = np.zeros((dim_alg, d, d), dtype=complex)
        for n_idx, (bl, r, c) in enumerate(basis):
            if bl == l:
                mats[n_idx, r, c] = 1.0
        irreps[l] = mats
    dual_pb = dual(pb)
    for l in labels:
        resid = Representation(irreps[l]).check_homomorphism(dual_pb.mult, dual_pb.unit)
        if resid > 1e-8:
            raise ValueError(f"block {l} does not carry a dual irrep (residual {resid:.2e})")

    # canonical star pulled back through the faithful physical action,
    # x* defined by op(x*) = op(x)^dagger; attached only when it closes and
    # satisfies the *-pre-bialgebra laws (true in the unitary F gauge)
    star = np.zeros((dim_alg, dim_alg), dtype=complex)
    star_ok = True
    for i in range(dim_alg):
        target = ops[i].conj().T.reshape(-1)
        s, *_ = np.linalg.lstsq(flat.T, target, rcond=None)
        if max_abs(flat.T @ s - target) > 1e-8:
            star_ok = False
            break
        star[:, i] = s
    if star_ok:
        pb_starred = PreBialgebraData(mult=mult, unit=unit_vec, comult=comult,
                                      counit=counit, star=star)
        if check_star(pb_starred, Tolerance(abs=1e-8)).passed:
            pb = pb_starred
    dec = IrrepDecomposition(
        labels=list(labels),
        irreps=irreps,
        multiplicities={l: 1 for l in labels},
        basis_change=np.eye(sum(len(block_triples[l]) ** 2 for l in labels)),
        source=None,
    )
    return StringNetWHA(data=data, pb=pb, basis=basis, block_triples=block_triples,
                        phys_triples=phys, operators=ops, phi=phi, dec=dec)


def _solve_unit(ops, flat) -> np.ndarray:
    """Coefficients of the two-sided unit of the operator algebra."""
    dim_alg = ops.shape[0]
    # solve sum_i u_i (ops[i] @ ops[j]) = ops[j] and the right-sided version
    rows, rhs = [], []
    for j in range(dim_alg):
        left = np.einsum("iab,bc->iac", ops, ops[j]).reshape(dim_alg, -1)
        right = np.einsum("ab,ibc->iac", ops[j], ops).reshape(dim_alg, -1)
        rows.append(left.T)
        rhs.append(ops[j].reshape(-1))
        rows.append(right.T)
        rhs.append(ops[j].reshape(-1))
    big = np.concatenate(rows, axis=0)
    target = np.concatenate(rhs)
    u, res, _, _ = np.linalg.lstsq(big, target, rcond=None)
    resid = max_abs(big @ u - target)
    if resid > 1e-8:
        raise ValueError(f"string-net algebra has no unit (residual {resid:.2e})")
    return u


def _solve_comult(data, basis, block_triples, pix, ops, flat) -> np.ndarray:
    """Coproduct structure constants from growing the MPO to two sites."""
    labels = data.labels
    dim_alg = len(basis)
    dp = len(pix)
    two = np.zeros((dim_alg, dp, dp, dp, dp), dtype=complex)  # [i, up1, up2, dn1, dn2]
    for n_idx, (l, r, c) in enumerate(basis):
        fl, el = block_triples[l][r]
        br, kr = block_triples[l][c]
        for mid_idx, (fm, em) in enumerate(block_triples[l]):
            for a1 in labels:
                up1, dn1 = (fl, a1, fm), (el, a1, em)
                if up1 not in pix or dn1 not in pix:
                    continue
                v1 = data.fval(a1, fm, l, el, em, fl)
                if v1 == 0:
                    continue
                for a2 in labels:
                    up2, dn2 = (fm, a2, br), (em, a2, kr)
                    if up2 not in pix or dn2 not in pix:
                        continue
                    v2 = data.fval(a2, br, l, em, kr, fm)
                    if v2 == 0:
                        continue
                    two[n_idx, pix[up1], pix[up2], pix[dn1], pix[dn2]] += v1 * v2
    # expand in the product basis ops[j] (x) ops[k]; both sides flattened
    # in the order (up1, dn1, up2, dn2)
    prod_basis = np.einsum("jab,kcd->jkabcd", ops, ops).reshape(dim_alg * dim_alg, -1)
    targets = two.transpose(0, 1, 3, 2, 4).reshape(dim_alg, -1)
    sol, res, _, _ = np.linalg.lstsq(prod_basis.T, targets.T, rcond=None)
    resid = max_abs(prod_basis.T @ sol - targets.T)
    if resid > 1e-8:
        raise ValueError(f"two-site closure leaves the product span ({resid:.2e})")
    comult = sol.T.reshape(dim_alg, dim_alg, dim_alg)
    return comult


def _solve_counit(mult, unit_vec, comult) -> np.ndarray:
    n = mult.shape[0]
    # (eps x id) Delta(e_i) = e_i and (id x eps) Delta(e_i) = e_i
    a1 = np.transpose(comult, (0, 2, 1)).reshape(n * n, n)   # rows (i,k), cols j
    a2 = comult.reshape(n * n, n)                            # rows (i,j), cols k
    big = np.concatenate([a1, a2], axis=0)
    target = np.concatenate([np.eye(n).reshape(-1), np.eye(n).reshape(-1)])
    eps, res, _, _ = np.linalg.lstsq(big, target, rcond=None)
    resid = max_abs(big @ eps - target)
    if resid > 1e-8:
        raise ValueError(f"no counit exists for the constructed coproduct ({resid:.2e})")
    return eps

"""The boundary calculus of MPO representations.

A pre-bialgebra A with a physical representation phi and a complete,
multiplicity-one set of irreps psi_a of the dual algebra yields one rank-4
sector tensor per dual irrep,

    T_a[i, j, v, w] = sum_x phi(x)[i, j] psi_a(delta_x)[v, w],

and every element x of A closes a length-n ring of these tensors through
its boundary blocks b_a(x), reproducing phi^(x)n of the (n-1)-fold
coproduct of x.  The boundary map x <-> (b_a(x))_a is a linear bijection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mpohopf.algebra import (
    PreBialgebraData,
    VerificationReport,
    comultiply_n,
    dual,
    multiply,
    random_element,
)
from mpohopf.reptheory import (
    IrrepDecomposition,
    Representation,
    decompose,
    regular_rep,
    FusionData,
)
from mpohopf.tensors import DEFAULT_TOL, Tolerance, as_tensor, max_abs

__all__ = [
    "MPOFamily",
    "Boundary",
    "ResourceLimitError",
    "InjectivityError",
    "minimal_faithful_rep",
    "build_family",
    "boundary_of",
    "element_of",
    "character",
    "close",
    "verify_multiplicativity",
    "detect_normality",
    "vacuum_set",
    "grothendieck_check",
]


class ResourceLimitError(RuntimeError):
    """A requested contraction exceeds the configured memory budget."""


class InjectivityError(ValueError):
    """The virtual representation misses an irrep class of the dual algebra."""


@dataclass
class Boundary:
    """Per-sector boundary blocks b_a(x)."""

    blocks: dict[str, np.ndarray]


@dataclass
class MPOFamily:
    pb: PreBialgebraData
    phi: Representation
    dec: IrrepDecomposition
    sector_tensors: dict[str, np.ndarray] = field(default_factory=dict)
    closure_cap: int = 4
    _gram: np.ndarray | None = None
    _gram_inv: np.ndarray | None = None

    @property
    def labels(self) -> list[str]:
        return self.dec.labels

    def dims(self) -> dict[str, int]:
        return self.dec.dims()

    def gram(self) -> np.ndarray:
        """Matrix of x_y = sum_a Tr(b_a psi_a(delta_y)) over stacked blocks."""
        if self._gram is None:
            n = self.pb.dim
            cols = []
            for a in self.labels:
                psi = self.dec.irreps[a]  # (n, D_a, D_a)
                cols.append(np.transpose(psi, (0, 2, 1)).reshape(n, -1))
            self._gram = np.concatenate(cols, axis=1)
            if self._gram.shape != (n, n):
                raise InjectivityError(
                    f"boundary map is not square ({self._gram.shape}); "
                    "the sector set is incomplete or has multiplicities"
                )
            self._gram_inv = np.linalg.inv(self._gram)
        return self._gram

    def gram_inv(self) -> np.ndarray:
        self.gram()
        return self._gram_inv


def minimal_faithful_rep(pb: PreBialgebraData, seed: int = 0,
                         tol: Tolerance = DEFAULT_TOL) -> Representation:
    """Direct sum of one copy of each irrep of the (semisimple) algebra."""
    dec = decompose(regular_rep(pb), seed=seed, tol=tol)
    total = sum(dec.irreps[a].shape[1] for a in dec.labels)
    mats = np.zeros((pb.dim, total, total), dtype=complex)
    pos = 0
    for a in dec.labels:
        d = dec.irreps[a].shape[1]
        mats[:, pos : pos + d, pos : pos + d] = dec.irreps[a]
        pos += d
    flat = mats.reshape(pb.dim, -1)
    if np.linalg.matrix_rank(flat, tol=1e-9) != pb.dim:
        raise InjectivityError("direct sum of irreps is not faithful")
    return Representation(mats)


def build_family(pb: PreBialgebraData, phi: Representation,
                 dec: IrrepDecomposition, seed: int = 0,
                 tol: Tolerance = DEFAULT_TOL, closure_cap: int = 4) -> MPOFamily:
    """Assemble sector tensors and self-test the boundary calculus."""
    fam = MPOFamily(pb=pb, phi=phi, dec=dec, closure_cap=closure_cap)
    fam.gram()  # raises InjectivityError when the sector set is incomplete
    for a in dec.labels:
        fam.sector_tensors[a] = np.einsum(
            "xij,xvw->ijvw", phi.mats, dec.irreps[a], optimize=True
        )
    # self-test: evaluating random functionals against boundaries of random
    # elements reproduces the functional values
    rng = np.random.default_rng(seed)
    for _ in range(20):
        x = random_element(pb, rng)
        f = rng.standard_normal(pb.dim) + 1j * rng.standard_normal(pb.dim)
        bnd = boundary_of(fam, x)
        val = sum(
            np.trace(bnd.blocks[a] @ np.tensordot(f, dec.irreps[a], axes=(0, 0)))
            for a in dec.labels
        )
        if abs(val - np.dot(f, x)) > 1e-10 * max(1.0, max_abs(x) * max_abs(f)) * pb.dim:
            raise InjectivityError("boundary self-test failed")
    return fam


def _split_blocks(fam: MPOFamily, flat: np.ndarray) -> dict[str, np.ndarray]:
    out, pos = {}, 0
    for a in fam.labels:
        d = fam.dims()[a]
        out[a] = flat[pos : pos + d * d].reshape(d, d)
        pos += d * d
    return out


def boundary_of(fam: MPOFamily, x) -> Boundary:
    """Block-form boundary uniquely determined by Tr(b(x) psi(f)) = f(x)."""
    x = as_tensor(x)
    flat = fam.gram_inv() @ x
    return Boundary(blocks=_split_blocks(fam, flat))


def element_of(fam: MPOFamily, bnd: Boundary) -> np.ndarray:
    """Inverse of ``boundary_of``."""
    flat = np.concatenate([bnd.blocks[a].reshape(-1) for a in fam.labels])
    return fam.gram() @ flat


def character(fam: MPOFamily, a: str) -> np.ndarray:
    """The cocentral element tau_a with b_b(tau_a) = delta_ab Id."""
    blocks = {
        b: (np.eye(fam.dims()[b]) if b == a else np.zeros((fam.dims()[b],) * 2))
        for b in fam.labels
    }
    return element_of(fam, Boundary(blocks=blocks))


def close(fam: MPOFamily, bnd: Boundary, n: int) -> np.ndarray:
    """Ring closure: sum_a Tr(b_a T_a ... T_a) as a D_phys^n matrix."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > fam.closure_cap:
        dp = fam.phi.dim
        raise ResourceLimitError(
            f"closure at n={n} would materialize a {dp ** n} x {dp ** n} matrix; "
            f"cap is n <= {fam.closure_cap}"
        )
    dp = fam.phi.dim
    total = np.zeros((dp ** n, dp ** n), dtype=complex)
    for a in fam.labels:
        t = fam.sector_tensors[a]
        da = fam.dims()[a]
        # chain[v, w, (i...), (j...)] grown site by site, then traced
        chain = bnd.blocks[a][:, :, None, None] * np.ones((1, 1, 1, 1))
        chain = chain.reshape(da, da, 1, 1)
        for _ in range(n):
            chain = np.einsum("vwab,ijwx->vxaibj", chain, t, optimize=True)
            chain = chain.reshape(da, da, chain.shape[2] * dp, chain.shape[4] * dp)
        total += np.einsum("vvab->ab", chain)
    return total


def closure_consistency(fam: MPOFamily, seed: int = 0, n_max: int = 3,
                        samples: int = 10) -> float:
    """Max residual of close(b(x), n) against the coproduct pushed through phi."""
    rng = np.random.default_rng(seed)
    resid = 0.0
    for _ in range(samples):
        x = random_element(fam.pb, rng)
        bnd = boundary_of(fam, x)
        for n in range(1, n_max + 1):
            direct = _phi_power_coproduct(fam, x, n)
            resid = max(resid, max_abs(close(fam, bnd, n) - direct) / max(1.0, max_abs(direct)))
    return resid


def _phi_power_coproduct(fam: MPOFamily, x, n: int) -> np.ndarray:
    """phi^(x)n applied to the (n-1)-fold coproduct of x, as a matrix."""
    coeffs = comultiply_n(fam.pb, x, n)
    mats = fam.phi.mats
    out = np.tensordot(coeffs, mats, axes=([0], [0]))  # remaining coeff axes first
    # out axes: (c_2..c_n, i1, j1); contract the rest one by one
    for _ in range(n - 1):
        out = np.tensordot(out, mats, axes=([0], [0]))
    # axes now: i1, j1, i2, j2, ..., in, jn -> regroup
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    dp = fam.phi.dim
    return np.transpose(out, order).reshape(dp ** n, dp ** n)


def verify_multiplicativity(fam: MPOFamily, fusion: FusionData, n: int = 2,
                            samples: int = 5, seed: int = 0,
                            tol: Tolerance = DEFAULT_TOL) -> VerificationReport:
    """Stacked closures equal the closure of the product, and the product
    boundary is the fusion-tensor sandwich of the factor boundaries."""
    rng = np.random.default_rng(seed)
    rep = VerificationReport(tol=max(tol.abs, 1e-9))
    r_close, r_bnd = 0.0, 0.0
    for _ in range(samples):
        x = random_element(fam.pb, rng)
        y = random_element(fam.pb, rng)
        xy = multiply(fam.pb, x, y)
        bx, by, bxy = boundary_of(fam, x), boundary_of(fam, y), boundary_of(fam, xy)
        ox, oy, oxy = close(fam, bx, n), close(fam, by, n), close(fam, bxy, n)
        scale = max(1.0, max_abs(oxy))
        r_close = max(r_close, max_abs(ox @ oy - oxy) / scale)
        for c in fam.labels:
            acc = np.zeros((fam.dims()[c],) * 2, dtype=complex)
            for a in fam.labels:
                for b in fam.labels:
                    for mu in range(fusion.N.get((a, b, c), 0)):
                        acc += (
                            fusion.W[(a, b, c, mu)]
                            @ np.kron(bx.blocks[a], by.blocks[b])
                            @ fusion.V[(a, b, c, mu)]
                        )
            r_bnd = max(r_bnd, max_abs(acc - bxy.blocks[c]) / max(1.0, max_abs(bxy.blocks[c])))
    rep.residuals["closure_product"] = r_close
    rep.residuals["product_boundary"] = r_bnd
    return rep


def detect_normality(fam: MPOFamily, a: str, n_max: int = 6) -> dict:
    """Smallest n at which products of n physical slices span the full
    matrix algebra on the sector's virtual space."""
    t = fam.sector_tensors[a]
    da = fam.dims()[a]
    dp = fam.phi.dim
    slices = t.reshape(dp * dp, da, da)
    span = slices
    for n in range(1, n_max + 1):
        flat = span.reshape(len(span), da * da)
        rank = np.linalg.matrix_rank(flat, tol=1e-9)
        if rank == da * da:
            return {"injective": n == 1, "normal_at": n}
        nxt = np.einsum("pab,qbc->pqac", span, slices).reshape(-1, da, da)
        # prune to a basis to keep the span small
        u, s, vh = np.linalg.svd(nxt.reshape(len(nxt), -1), full_matrices=False)
        keep = int(np.sum(s > 1e-9 * s[0])) if len(s) else 0
        span = (vh[:keep]).reshape(keep, da, da)
    return {"injective": False, "normal_at": None}


def vacuum_set(fam: MPOFamily, n_table: dict, tol: Tolerance = DEFAULT_TOL) -> dict:
    """Vacuum sectors, their rank-one unit vectors, and the l/r label maps."""
    b1 = boundary_of(fam, fam.pb.unit)
    vac, left_vecs, right_vecs = [], {}, {}
    for e in fam.labels:
        blk = b1.blocks[e]
        if max_abs(blk) <= tol.abs:
            continue
        u, s, vh = np.linalg.svd(blk)
        if s.size > 1 and s[1] > 1e-7 * s[0]:
            raise ValueError(
                f"b_{e}(1) has rank >= 2 (weak unit axiom violated); "
                f"singular values {s[:2]}"
            )
        vac.append(e)
        left_vecs[e] = u[:, 0] * s[0]       # ket factor of b_e(1)
        right_vecs[e] = vh[0, :]            # bra factor
    lmap, rmap = {}, {}
    for a in fam.labels:
        ls = [e for e in vac if n_table.get((e, a, a), 0) == 1]
        rs = [e for e in vac if n_table.get((a, e, a), 0) == 1]
        if len(ls) != 1 or len(rs) != 1:
            raise ValueError(f"vacuum labels for sector {a} not unique: {ls}, {rs}")
        lmap[a], rmap[a] = ls[0], rs[0]
        # the rest of the characteristic pattern
        for e in vac:
            for b in fam.labels:
                expect = (1 if (e == lmap[a] and b == a) else 0)
                if n_table.get((e, a, b), 0) != expect:
                    raise ValueError(f"N[{e},{a},{b}] violates the vacuum pattern")
                expect = (1 if (e == rmap[a] and b == a) else 0)
                if n_table.get((a, e, b), 0) != expect:
                    raise ValueError(f"N[{a},{e},{b}] violates the vacuum pattern")
    for e in vac:
        if lmap[e] != e or rmap[e] != e:
            raise ValueError(f"vacuum sector {e} is not its own left/right vacuum")
    return {"E": vac, "left_vecs": left_vecs, "right_vecs": right_vecs,
            "l": lmap, "r": rmap}


def grothendieck_check(fam: MPOFamily, n_table: dict, vacuum: dict,
                       tol: Tolerance = DEFAULT_TOL) -> VerificationReport:
    """Characters close under multiplication with the fusion coefficients,
    with the summed vacuum character as the ring unit."""
    rep = VerificationReport(tol=max(tol.abs, 1e-9))
    taus = {a: character(fam, a) for a in fam.labels}
    resid = 0.0
    for a in fam.labels:
        for b in fam.labels:
            prod = multiply(fam.pb, taus[a], taus[b])
            expect = sum(n_table.get((a, b, c), 0) * taus[c] for c in fam.labels)
            resid = max(resid, max_abs(prod - expect))
    rep.residuals["character_ring"] = resid
    tau_e = sum(taus[e] for e in vacuum["E"])
    resid = 0.0
    for a in fam.labels:
        resid = max(resid, max_abs(multiply(fam.pb, tau_e, taus[a]) - taus[a]))
        resid = max(resid, max_abs(multiply(fam.pb, taus[a], tau_e) - taus[a]))
    rep.residuals["ring_unit"] = resid
    return rep

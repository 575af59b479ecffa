"""Structure-constant pre-bialgebras over C and their axiom checks.

Conventions for an n-dimensional pre-bialgebra with basis e_0..e_{n-1}:

- ``mult[i, j, k]``   is the coefficient of e_k in e_i * e_j,
- ``unit``            is the coefficient vector of 1,
- ``comult[i, j, k]`` is the coefficient of e_j (x) e_k in Delta(e_i),
- ``counit[i]``       is the value of the counit on e_i.

Elements are plain complex coefficient vectors.  Axiom residuals are
measured in max-entry norm of the fully contracted difference tensors, so
reports are basis-explicit and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mpohopf.tensors import Tolerance, DEFAULT_TOL, as_tensor, max_abs

__all__ = [
    "PreBialgebraData",
    "VerificationReport",
    "multiply",
    "left_mult_matrix",
    "right_mult_matrix",
    "comultiply",
    "comultiply_n",
    "apply_functional",
    "dual",
    "check_prebialgebra",
    "check_weak_axioms",
    "element_predicates",
    "is_invertible",
    "invert",
    "group_algebra",
    "random_element",
]


@dataclass
class PreBialgebraData:
    """An algebra + coalgebra given by structure constants.

    ``star`` (optional) is the matrix of the antilinear involution acting on
    conjugated coefficients: coeffs(x*) = star @ conj(coeffs(x)).
    ``antipode`` (optional) is the matrix of a linear antipode candidate.
    """

    mult: np.ndarray
    unit: np.ndarray
    comult: np.ndarray
    counit: np.ndarray
    star: np.ndarray | None = None
    antipode: np.ndarray | None = None

    def __post_init__(self):
        self.mult = as_tensor(self.mult)
        self.unit = as_tensor(self.unit)
        self.comult = as_tensor(self.comult)
        self.counit = as_tensor(self.counit)
        n = self.dim
        if self.mult.shape != (n, n, n) or self.comult.shape != (n, n, n):
            raise ValueError("mult/comult must have shape (dim, dim, dim)")
        if self.counit.shape != (n,):
            raise ValueError("counit must have shape (dim,)")
        if self.star is not None:
            self.star = as_tensor(self.star)
        if self.antipode is not None:
            self.antipode = as_tensor(self.antipode)

    @property
    def dim(self) -> int:
        return self.unit.shape[0]

    def apply_star(self, x) -> np.ndarray:
        if self.star is None:
            raise ValueError("no star structure attached")
        return self.star @ np.conj(as_tensor(x))


@dataclass
class VerificationReport:
    """Per-check maximal residuals; passes iff all are within tolerance."""

    residuals: dict[str, float] = field(default_factory=dict)
    tol: float = DEFAULT_TOL.abs

    @property
    def passed(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def worst(self) -> str | None:
        if not self.residuals:
            return None
        return max(self.residuals, key=self.residuals.get)

    def merge(self, other: "VerificationReport", prefix: str = "") -> None:
        for k, v in other.residuals.items():
            self.residuals[prefix + k] = v


def multiply(pb: PreBialgebraData, x, y) -> np.ndarray:
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != (pb.dim,) or y.shape != (pb.dim,):
        raise ValueError("element dimension mismatch")
    return np.einsum("i,j,ijk->k", x, y, pb.mult)


def left_mult_matrix(pb: PreBialgebraData, x) -> np.ndarray:
    """Matrix of y -> x*y."""
    return np.einsum("i,ijk->kj", as_tensor(x), pb.mult)


def right_mult_matrix(pb: PreBialgebraData, x) -> np.ndarray:
    """Matrix of y -> y*x."""
    return np.einsum("j,ijk->ki", as_tensor(x), pb.mult)


def comultiply(pb: PreBialgebraData, x) -> np.ndarray:
    """Coefficient matrix of Delta(x)."""
    return np.einsum("i,ijk->jk", as_tensor(x), pb.comult)


def comultiply_n(pb: PreBialgebraData, x, n: int) -> np.ndarray:
    """Coefficient tensor of Delta^{n-1}(x) as a rank-n tensor (n >= 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = as_tensor(x)
    for _ in range(n - 1):
        t = np.tensordot(t, pb.comult, axes=([t.ndim - 1], [0]))
    return t


def apply_functional(f, t, axis: int) -> np.ndarray:
    """Evaluate the linear functional with value vector f on one tensor slot."""
    return np.tensordot(as_tensor(t), as_tensor(f), axes=([axis], [0]))


def dual(pb: PreBialgebraData) -> PreBialgebraData:
    """The dual pre-bialgebra: product/coproduct are transposed coproduct/product."""
    return PreBialgebraData(
        mult=np.ascontiguousarray(np.transpose(pb.comult, (1, 2, 0))),
        unit=pb.counit.copy(),
        comult=np.ascontiguousarray(np.transpose(pb.mult, (2, 0, 1))),
        counit=pb.unit.copy(),
    )


def slotwise_product(pb: PreBialgebraData, s, t) -> np.ndarray:
    """Componentwise product in A^(x)k of two rank-k coefficient tensors."""
    s, t = as_tensor(s), as_tensor(t)
    if s.shape != t.shape:
        raise ValueError("tensor shapes differ")
    k = s.ndim
    i_sub = "".join(chr(ord("a") + q) for q in range(k))
    j_sub = "".join(chr(ord("a") + k + q) for q in range(k))
    o_sub = "".join(chr(ord("A") + q) for q in range(k))
    terms = [i_sub, j_sub] + [i_sub[q] + j_sub[q] + o_sub[q] for q in range(k)]
    return np.einsum(
        ",".join(terms) + "->" + o_sub, s, t, *([pb.mult] * k), optimize=True
    )


def check_prebialgebra(pb: PreBialgebraData, tol: Tolerance = DEFAULT_TOL) -> VerificationReport:
    """Residuals of associativity, unit, coassociativity, counit and
    multiplicativity of the coproduct."""
    m, u, d, eps = pb.mult, pb.unit, pb.comult, pb.counit
    rep = VerificationReport(tol=tol.abs)

    assoc = np.einsum("ijp,pkl->ijkl", m, m) - np.einsum("jkp,ipl->ijkl", m, m)
    rep.residuals["associativity"] = max_abs(assoc)

    left_u = np.einsum("i,ijk->jk", u, m) - np.eye(pb.dim)
    right_u = np.einsum("j,ijk->ik", u, m) - np.eye(pb.dim)
    rep.residuals["unit"] = max(max_abs(left_u), max_abs(right_u))

    coassoc = np.einsum("ipq,pjk->ijkq", d, d) - np.einsum("ijp,pkq->ijkq", d, d)
    rep.residuals["coassociativity"] = max_abs(coassoc)

    left_e = np.einsum("ijk,j->ik", d, eps) - np.eye(pb.dim)
    right_e = np.einsum("ijk,k->ij", d, eps) - np.eye(pb.dim)
    rep.residuals["counit"] = max(max_abs(left_e), max_abs(right_e))

    # Delta(e_i e_j) vs Delta(e_i) Delta(e_j) on all basis pairs
    lhs = np.einsum("ijp,pkl->ijkl", m, d)
    rhs = np.einsum("iac,jbd,abk,cdl->ijkl", d, d, m, m, optimize=True)
    rep.residuals["compatibility"] = max_abs(lhs - rhs)
    return rep


def check_weak_axioms(pb: PreBialgebraData, tol: Tolerance = DEFAULT_TOL) -> VerificationReport:
    """Residuals of the weakened unit/counit compatibility axioms.

    Unit axiom:  Delta^2(1) = (1 x Delta(1)) (Delta(1) x 1)
                            = (Delta(1) x 1) (1 x Delta(1)).
    Counit axiom (evaluated on all basis triples):
        eps(xyz) = sum eps(x y_(1)) eps(y_(2) z) = sum eps(x y_(2)) eps(y_(1) z).
    """
    m, u, d, eps = pb.mult, pb.unit, pb.comult, pb.counit
    rep = VerificationReport(tol=tol.abs)

    d2_unit = comultiply_n(pb, u, 3)
    c1 = comultiply(pb, u)
    t_a = np.einsum("a,bc->abc", u, c1)   # 1 (x) Delta(1)
    t_b = np.einsum("ab,c->abc", c1, u)   # Delta(1) (x) 1
    rhs1 = slotwise_product(pb, t_a, t_b)
    rhs2 = slotwise_product(pb, t_b, t_a)
    rep.residuals["unit_axiom"] = max(max_abs(d2_unit - rhs1), max_abs(d2_unit - rhs2))

    lhs = np.einsum("xyw,wzv,v->xyz", m, m, eps, optimize=True)
    r1 = np.einsum("ypq,xpu,u,qzv,v->xyz", d, m, eps, m, eps, optimize=True)
    r2 = np.einsum("ypq,xqu,u,pzv,v->xyz", d, m, eps, m, eps, optimize=True)
    rep.residuals["counit_axiom"] = max(max_abs(lhs - r1), max_abs(lhs - r2))
    return rep


def is_invertible(pb: PreBialgebraData, x, tol: Tolerance = DEFAULT_TOL) -> bool:
    lm = left_mult_matrix(pb, x)
    s = np.linalg.svd(lm, compute_uv=False)
    return bool(s[-1] > tol.abs + tol.rel * s[0])


def invert(pb: PreBialgebraData, x) -> np.ndarray:
    """Two-sided inverse of x; raises if x is singular."""
    lm = left_mult_matrix(pb, x)
    inv = np.linalg.solve(lm, pb.unit)
    if max_abs(multiply(pb, inv, x) - pb.unit) > 1e-7 * max(1.0, max_abs(x)):
        raise np.linalg.LinAlgError("element has no two-sided inverse")
    return inv


def element_predicates(pb: PreBialgebraData, x, tol: Tolerance = DEFAULT_TOL) -> dict:
    """Cocentral / non-degenerate / group-like flags for an element."""
    x = as_tensor(x)
    dx = comultiply(pb, x)
    cocentral = max_abs(dx - dx.T) <= tol.abs

    s = np.linalg.svd(dx, compute_uv=False)
    nondeg = bool(s[-1] > tol.abs + tol.rel * s[0]) if s.size else False

    grouplike = False
    if is_invertible(pb, x, tol):
        xx = np.outer(x, x)
        c1 = comultiply(pb, pb.unit)
        lhs1 = slotwise_product(pb, xx, c1)
        lhs2 = slotwise_product(pb, c1, xx)
        scale = max(1.0, max_abs(dx))
        grouplike = (
            max_abs(dx - lhs1) <= tol.abs * 10 * scale
            and max_abs(dx - lhs2) <= tol.abs * 10 * scale
        )
    return {"cocentral": cocentral, "nondegenerate": nondeg, "grouplike": grouplike}


def group_algebra(cayley, inverse=None) -> PreBialgebraData:
    """Group algebra C[G] from a multiplication table.

    ``cayley[i][j]`` is the index of g_i g_j.  Basis elements are group-like,
    the counit is 1 everywhere, the antipode and star send g to its inverse.
    Rejects non-associative tables with the violating triple.
    """
    table = np.asarray(cayley, dtype=int)
    n = table.shape[0]
    if table.shape != (n, n):
        raise ValueError("cayley table must be square")
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if table[table[i, j], k] != table[i, table[j, k]]:
                    raise ValueError(f"table not associative at triple {(i, j, k)}")
    ident = None
    for e in range(n):
        if all(table[e, j] == j and table[j, e] == j for j in range(n)):
            ident = e
            break
    if ident is None:
        raise ValueError("table has no identity element")
    if inverse is None:
        inverse = np.full(n, -1, dtype=int)
        for i in range(n):
            js = [j for j in range(n) if table[i, j] == ident and table[j, i] == ident]
            if len(js) != 1:
                raise ValueError(f"element {i} has no unique inverse")
            inverse[i] = js[0]
    inverse = np.asarray(inverse, dtype=int)

    mult = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            mult[i, j, table[i, j]] = 1.0
    unit = np.zeros(n, dtype=complex)
    unit[ident] = 1.0
    comult = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        comult[i, i, i] = 1.0
    counit = np.ones(n, dtype=complex)
    inv_mat = np.zeros((n, n), dtype=complex)
    for i in range(n):
        inv_mat[inverse[i], i] = 1.0
    return PreBialgebraData(
        mult=mult, unit=unit, comult=comult, counit=counit,
        star=inv_mat.copy(), antipode=inv_mat.copy(),
    )


def check_star(pb: PreBialgebraData, tol: Tolerance = DEFAULT_TOL) -> VerificationReport:
    """Residuals of the involution, anti-homomorphism and cohomomorphism
    laws of the attached star structure."""
    if pb.star is None:
        raise ValueError("no star structure attached")
    st = pb.star
    rep = VerificationReport(tol=tol.abs)
    rep.residuals["involution"] = max_abs(st @ np.conj(st) - np.eye(pb.dim))
    # (e_i e_j)* = e_j* e_i* on all basis pairs (star antilinear: conjugate coeffs)
    lhs = np.einsum("ijk,lk->ijl", np.conj(pb.mult), st)
    rhs = np.einsum("bj,ai,bac->ijc", st, st, pb.mult, optimize=True)
    rep.residuals["anti_homomorphism"] = max_abs(lhs - rhs)
    lhs = np.einsum("ki,kpq->ipq", st, pb.comult)
    rhs = np.einsum("ipq,ap,bq->iab", np.conj(pb.comult), st, st, optimize=True)
    rep.residuals["cohomomorphism"] = max_abs(lhs - rhs)
    return rep


def random_element(pb: PreBialgebraData, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal complex coefficient vector from the given generator."""
    return rng.standard_normal(pb.dim) + 1j * rng.standard_normal(pb.dim)

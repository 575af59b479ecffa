# Dev scratch: calibrate antipode/Z/w/g conventions on C[Z3].
import numpy as np
from mpohopf.algebra import *
from mpohopf.reptheory import *
import mpohopf.mpo as M
from mpohopf.tensors import max_abs, nullspace

np.set_printoptions(precision=4, suppress=True, linewidth=140)


def solve_antipode(pb, tol=1e-9):
    n = pb.dim
    m, d, u, eps = pb.mult, pb.comult, pb.unit, pb.counit
    C = comultiply(pb, u)  # Delta(1)
    # axiom 1: sum S(x1) x2 = sum 1_(1) eps(x 1_(2))
    # unknown S[i,p] (S(e_p) = sum_i S[i,p] e_i)
    # LHS[k,x] = sum_{p,q,i} d[x,p,q] S[i,p] m[i,q,k]
    A1 = np.einsum('xpq,iqk->kxip', d, m, optimize=True).reshape(n * n, n * n)
    R1 = np.einsum('pq,xqw,w->px', C, m, eps, optimize=True).reshape(-1)  # RHS[p,x]
    # order: RHS index [k,x]
    R1 = np.einsum('kq,xqw,w->kx', C, m, eps, optimize=True).reshape(n * n)
    # axiom 2: sum x1 S(x2) = sum eps(1_(1) x) 1_(2)
    A2 = np.einsum('xpq,pik->kxiq', d, m, optimize=True).reshape(n * n, n * n)
    R2 = np.einsum('pk,pxw,w->kx', C, m, eps, optimize=True).reshape(n * n)
    A = np.vstack([A1, A2])
    R = np.concatenate([R1, R2])
    S, res, rank, sv = np.linalg.lstsq(A, R, rcond=None)
    S = S.reshape(n, n)
    null = nullspace(A)
    resid = max_abs(A @ S.reshape(-1) - R)
    return S, resid, len(null)


def check_S(pb, S):
    n = pb.dim
    m, d = pb.mult, pb.comult
    # axiom 3: S(x1) x2 S(x3) = S(x)
    d2 = np.einsum('xab,bpq->xapq', d, d)
    lhs = np.einsum('xapq,ia,jq,imk,kjl->lx', d2, S, S, m, m, optimize=True)
    r3 = max_abs(lhs - S)
    # anti-homomorphism
    ah = np.einsum('ijk,lk->ijl', m, S) - np.einsum('bi,aj,bac->ijc', S, S, m, optimize=True)
    # anti-cohomomorphism: Delta(S(x)) = (S x S) Delta_op(x)
    ac = np.einsum('kx,kpq->xpq', S, d) - np.einsum('xqp,ap,bq->xab', d, S, S, optimize=True)
    return r3, max_abs(ah), max_abs(ac)


def dual_S_mats(dec, S):
    # psi_a(S(delta_y)) = sum_j S[y,j]... (delta_y o S)(e_j) = S[y,j]
    return {a: np.einsum('yj,jvw->yvw', S, dec.irreps[a]) for a in dec.labels}


def test_algebra(pb, name, phi=None):
    print(f'=== {name} ===')
    S, resid, nullity = solve_antipode(pb)
    print('antipode solve residual:', resid, 'nullity:', nullity)
    print('axiom3/antihom/anticohom:', check_S(pb, S))
    B = dual(pb)
    dec = decompose(regular_rep(B), seed=0)
    if phi is None:
        phi = M.minimal_faithful_rep(pb, seed=0)
    fam = M.build_family(pb, phi, dec)
    nt = fusion_multiplicities(dec, B)
    fd = fusion_tensors(dec, B, nt)
    vac = M.vacuum_set(fam, nt)
    E = vac['E']
    print('E:', E, 'dims:', fam.dims())
    # bar involution
    bar = {}
    for a in fam.labels:
        cands = [b for b in fam.labels if any(nt.get((a, b, e), 0) for e in E)]
        assert len(cands) == 1, (a, cands)
        bar[a] = cands[0]
    print('bar:', bar)
    # Z from intertwiner: psi_a(S(f))^T = Z_a psi_abar(f) Z_a^-1
    smats = dual_S_mats(dec, S)
    Z = {}
    for a in fam.labels:
        ab = bar[a]
        matsT = np.transpose(smats[a], (0, 2, 1))
        xs = intertwiners(dec.irreps[ab], matsT)
        assert len(xs) == 1, (a, len(xs))
        Z[a] = xs[0]
    # gauge: relation-1 with (a, b, d) = (c, r_c, c):
    # C * W_{cbar c}^{r_c}[beta,(x,delta)] = sum_alpha Z_c[alpha,x] V_{c r_c}^{c}[(alpha,beta),delta]
    for c in fam.labels:
        cb, rc = bar[c], vac['r'][c]
        Dc, Dcb, Dr = fam.dims()[c], fam.dims()[cb], fam.dims()[rc]
        W = fd.W[(cb, c, rc, 0)].reshape(Dr, Dcb, Dc)          # [beta, x, delta]
        V = fd.V[(c, rc, c, 0)].reshape(Dc, Dr, Dc)            # [(alpha,beta), delta]
        rhs = np.einsum('ax,abd->bxd', Z[c], V)                # [beta, x, delta]
        num = np.vdot(W, rhs)
        den = np.vdot(W, W)
        Cval = num / den
        resid = max_abs(rhs - Cval * W) / max(1.0, max_abs(rhs))
        print(f'  Z-gauge c={c}: C={Cval:.4f} resid={resid:.2e}')
        Z[c] = Z[c] / Cval   # rescale so that C = 1
    Zinv = {a: np.linalg.inv(Z[a]) for a in fam.labels}
    # w_c from: Z_c (as form on cbar x c) = lam * capW, Z_cbar^-1 (as vector) = mu * capV, w = lam*mu
    w = {}
    for c in fam.labels:
        cb, rc = bar[c], vac['r'][c]
        Dc, Dcb, Dr = fam.dims()[c], fam.dims()[cb], fam.dims()[rc]
        Wt = fd.W[(cb, c, rc, 0)].reshape(Dr, Dcb, Dc)
        Vt = fd.V[(cb, c, rc, 0)].reshape(Dcb, Dc, Dr)
        # try both unit vector placements
        for wkey, vkey in [('right', 'left'), ('left', 'right')]:
            bra = vac['right_vecs'][rc] if wkey == 'right' else vac['left_vecs'][rc]
            ket = vac['left_vecs'][rc] if vkey == 'left' else vac['right_vecs'][rc]
            capW = np.einsum('b,bxd->xd', bra, Wt)             # form on cbar x c
            capV = np.einsum('xdb,b->xd', Vt, ket)             # vector in cbar x c
            B1 = Z[c].T                                        # [x in cbar, v in c]
            B2 = Zinv[bar[c]].T                                # guess: [x, v]
            lam = np.vdot(capW, B1) / np.vdot(capW, capW)
            r1 = max_abs(B1 - lam * capW) / max(1.0, max_abs(B1))
            mu = np.vdot(capV, B2) / np.vdot(capV, capV)
            r2 = max_abs(B2 - mu * capV) / max(1.0, max_abs(B2))
            print(f'  w[{c}] try ({wkey},{vkey}): lam={lam:.4f} r1={r1:.2e} mu={mu:.4f} r2={r2:.2e} -> w={lam*mu:.4f}')
            if r1 < 1e-8 and r2 < 1e-8:
                w[c] = lam * mu
                break
    d_q = {}
    for a in fam.labels:
        val = w[a] * w[bar[a]]
        d_q[a] = np.sqrt(val)
        print(f'  w[{a}]={w[a]:.4f}, w[{a}]w[{bar[a]}]={val:.4f}, d={d_q[a]:.4f}')
    # g blocks: psi_a(g) = (d_a/w_abar) * (Z_abar Z_a^-1 variants); calibrate vs S^2 conj + traces
    eps_blocks = {a: np.einsum('y,yvw->vw', pb.counit, dec.irreps[a]) for a in fam.labels}
    s2mats = {a: np.einsum('yj,jvw->yvw', S @ S, dec.irreps[a]) for a in fam.labels}
    for variant in range(4):
        ok = True
        gb = {}
        for a in fam.labels:
            ab = bar[a]
            pref = d_q[a] / w[ab]
            if variant == 0:
                cand = pref * Z[ab] @ Zinv[a]
            elif variant == 1:
                cand = pref * (Zinv[a] @ Z[ab]).T
            elif variant == 2:
                cand = pref * Z[ab].T @ Zinv[a].T
            elif variant == 3:
                cand = pref * (Z[ab] @ Zinv[a]).T
            if cand.shape != (fam.dims()[a],) * 2:
                ok = False
                break
            gb[a] = cand
        if not ok:
            print(f'  g variant {variant}: shape mismatch')
            continue
        # check S^2 conjugation: psi_a(S^2 f) = g_a psi_a(f) g_a^-1
        r = 0.0
        for a in fam.labels:
            gi = np.linalg.inv(gb[a])
            r = max(r, max_abs(s2mats[a] - np.einsum('vw,ywx,xu->yvu', gb[a], dec.irreps[a], gi, optimize=True)))
        # trace identities: Tr psi_a(g) = d_a * eps_{r_abar}(1), Tr psi_a(g^-1) = d_a * eps_{r_a}(1)
        rt = 0.0
        for a in fam.labels:
            e1 = np.trace(eps_blocks[vac['r'][bar[a]]] @ M.boundary_of(fam, pb.unit).blocks[vac['r'][bar[a]]])
            # eps_{r}(1): the irrep projector functional on sector r applied to 1:
            # equals Tr(b_r(1) psi_r(eps_r)) ... simpler: eps_r(1) = value of counit-projected
        print(f'  g variant {variant}: S2-conj residual {r:.2e}')
        if r < 1e-8:
            for a in fam.labels:
                print(f'    psi_{a}(g) =\n{gb[a]}')
    return


z3 = group_algebra([[0, 1, 2], [1, 2, 0], [2, 0, 1]])
test_algebra(z3, 'C[Z3]')

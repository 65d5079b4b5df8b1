#!/usr/bin/env python3
"""Generate FCIDUMP integral files for H2 in small Gaussian basis sets.

Self-contained restricted Hartree-Fock over contracted s/p Gaussians
(McMurchie-Davidson integrals), followed by an MO transformation and an
FCIDUMP dump in chemist notation. A determinant-basis FCI is run at the
end as a consistency check on the emitted file.

Usage: python3 scripts/h2_integrals.py <sto-3g|cc-pvdz> <out.fcidump> [R_angstrom]
"""

import itertools
import sys

import numpy as np
from scipy.special import hyp1f1

ANGSTROM_TO_BOHR = 1.8897259886

# exponents, contraction coefficients, angular momentum (0=s, 1=p)
BASES = {
    "sto-3g": [
        (0, [3.42525091, 0.62391373, 0.16885540],
            [0.15432897, 0.53532814, 0.44463454]),
    ],
    "cc-pvdz": [
        (0, [13.0100000, 1.9620000, 0.4446000, 0.1220000],
            [0.0196850, 0.1379770, 0.4781480, 0.5012400]),
        (0, [0.1220000], [1.0000000]),
        (1, [0.7270000], [1.0000000]),
    ],
}


def boys(n, x):
    return hyp1f1(n + 0.5, n + 1.5, -x) / (2.0 * n + 1.0)


def hermite_coefs(la, lb, ab_dist, a, b):
    """E_t^{ij} for one cartesian direction, all i<=la, j<=lb, t<=i+j."""
    p = a + b
    q = a * b / p
    e = np.zeros((la + 1, lb + 1, la + lb + 2))
    e[0, 0, 0] = np.exp(-q * ab_dist * ab_dist)
    for i in range(la + 1):
        for j in range(lb + 1):
            if i == 0 and j == 0:
                continue
            for t in range(i + j + 1):
                if j == 0:
                    prev = e[i - 1, j]
                    center = -(b / p) * ab_dist
                else:
                    prev = e[i, j - 1]
                    center = (a / p) * ab_dist
                val = center * prev[t] + (t + 1) * prev[t + 1]
                if t > 0:
                    val += prev[t - 1] / (2.0 * p)
                e[i, j, t] = val
    return e


def hermite_coulomb(tmax, umax, vmax, p, pc):
    """R_{tuv} table via downward recursion on the Boys order."""
    nmax = tmax + umax + vmax
    x2 = p * np.dot(pc, pc)
    f = np.array([boys(n, x2) for n in range(nmax + 1)])
    r = np.zeros((nmax + 1, tmax + 1, umax + 1, vmax + 1))
    for n in range(nmax + 1):
        r[n, 0, 0, 0] = (-2.0 * p) ** n * f[n]
    for n in range(nmax - 1, -1, -1):
        for t in range(tmax + 1):
            for u in range(umax + 1):
                for v in range(vmax + 1):
                    if t + u + v == 0 or t + u + v > nmax - n:
                        continue
                    if t > 0:
                        val = pc[0] * r[n + 1, t - 1, u, v]
                        if t > 1:
                            val += (t - 1) * r[n + 1, t - 2, u, v]
                    elif u > 0:
                        val = pc[1] * r[n + 1, t, u - 1, v]
                        if u > 1:
                            val += (u - 1) * r[n + 1, t, u - 2, v]
                    else:
                        val = pc[2] * r[n + 1, t, u, v - 1]
                        if v > 1:
                            val += (v - 1) * r[n + 1, t, u, v - 2]
                    r[n, t, u, v] = val
    return r[0]


class Primitive:
    def __init__(self, alpha, lmn, center):
        self.alpha = alpha
        self.lmn = lmn
        self.center = np.asarray(center, dtype=float)
        i, j, k = lmn
        self.norm = ((2.0 * alpha / np.pi) ** 0.75 *
                     np.sqrt((4.0 * alpha) ** (i + j + k) /
                             (dfact(2 * i - 1) * dfact(2 * j - 1) *
                              dfact(2 * k - 1))))


def dfact(n):
    return 1.0 if n <= 0 else n * dfact(n - 2)


def overlap_prim(pa, pb):
    p = pa.alpha + pb.alpha
    s = (np.pi / p) ** 1.5
    for d in range(3):
        e = hermite_coefs(pa.lmn[d], pb.lmn[d],
                          pa.center[d] - pb.center[d], pa.alpha, pb.alpha)
        s *= e[pa.lmn[d], pb.lmn[d], 0]
    return s


def _shift(prim, lmn):
    return Primitive(prim.alpha, tuple(lmn), prim.center)


def kinetic_prim(pa, pb):
    b = pb.alpha
    lb = pb.lmn
    val = b * (2 * sum(lb) + 3) * overlap_prim(pa, pb)
    for d in range(3):
        up = list(lb)
        up[d] += 2
        val -= 2.0 * b * b * overlap_prim(pa, _shift(pb, up))
        if lb[d] >= 2:
            dn = list(lb)
            dn[d] -= 2
            val -= 0.5 * lb[d] * (lb[d] - 1) * overlap_prim(pa, _shift(pb, dn))
    return val


def nuclear_prim(pa, pb, centers, charges):
    p = pa.alpha + pb.alpha
    pt = (pa.alpha * pa.center + pb.alpha * pb.center) / p
    es = [hermite_coefs(pa.lmn[d], pb.lmn[d],
                        pa.center[d] - pb.center[d], pa.alpha, pb.alpha)
          for d in range(3)]
    lt = [pa.lmn[d] + pb.lmn[d] for d in range(3)]
    val = 0.0
    for c, z in zip(centers, charges):
        r = hermite_coulomb(lt[0], lt[1], lt[2], p, pt - np.asarray(c))
        acc = 0.0
        for t in range(lt[0] + 1):
            for u in range(lt[1] + 1):
                for v in range(lt[2] + 1):
                    acc += (es[0][pa.lmn[0], pb.lmn[0], t] *
                            es[1][pa.lmn[1], pb.lmn[1], u] *
                            es[2][pa.lmn[2], pb.lmn[2], v] * r[t, u, v])
        val += -z * 2.0 * np.pi / p * acc
    return val


def eri_prim(pa, pb, pc, pd):
    p = pa.alpha + pb.alpha
    q = pc.alpha + pd.alpha
    alpha = p * q / (p + q)
    pp = (pa.alpha * pa.center + pb.alpha * pb.center) / p
    qq = (pc.alpha * pc.center + pd.alpha * pd.center) / q
    e1 = [hermite_coefs(pa.lmn[d], pb.lmn[d],
                        pa.center[d] - pb.center[d], pa.alpha, pb.alpha)
          for d in range(3)]
    e2 = [hermite_coefs(pc.lmn[d], pd.lmn[d],
                        pc.center[d] - pd.center[d], pc.alpha, pd.alpha)
          for d in range(3)]
    l1 = [pa.lmn[d] + pb.lmn[d] for d in range(3)]
    l2 = [pc.lmn[d] + pd.lmn[d] for d in range(3)]
    r = hermite_coulomb(l1[0] + l2[0], l1[1] + l2[1], l1[2] + l2[2],
                        alpha, pp - qq)
    val = 0.0
    for t in range(l1[0] + 1):
        for u in range(l1[1] + 1):
            for v in range(l1[2] + 1):
                w1 = (e1[0][pa.lmn[0], pb.lmn[0], t] *
                      e1[1][pa.lmn[1], pb.lmn[1], u] *
                      e1[2][pa.lmn[2], pb.lmn[2], v])
                if w1 == 0.0:
                    continue
                for tt in range(l2[0] + 1):
                    for uu in range(l2[1] + 1):
                        for vv in range(l2[2] + 1):
                            w2 = (e2[0][pc.lmn[0], pd.lmn[0], tt] *
                                  e2[1][pc.lmn[1], pd.lmn[1], uu] *
                                  e2[2][pc.lmn[2], pd.lmn[2], vv])
                            if w2 == 0.0:
                                continue
                            sign = (-1.0) ** (tt + uu + vv)
                            val += w1 * w2 * sign * r[t + tt, u + uu, v + vv]
    return val * 2.0 * np.pi ** 2.5 / (p * q * np.sqrt(p + q))


class Contracted:
    def __init__(self, alphas, coefs, lmn, center):
        self.prims = [Primitive(a, lmn, center) for a in alphas]
        self.coefs = list(coefs)
        # normalize the contracted function
        s = 0.0
        for ca, a in zip(self.coefs, self.prims):
            for cb, b in zip(self.coefs, self.prims):
                s += ca * cb * a.norm * b.norm * overlap_prim(a, b)
        self.coefs = [c / np.sqrt(s) for c in self.coefs]


def contract2(f, ca, cb):
    val = 0.0
    for wa, a in zip(ca.coefs, ca.prims):
        for wb, b in zip(cb.coefs, cb.prims):
            val += wa * wb * a.norm * b.norm * f(a, b)
    return val


def contract4(ca, cb, cc, cd):
    val = 0.0
    for wa, a in zip(ca.coefs, ca.prims):
        for wb, b in zip(cb.coefs, cb.prims):
            for wc, c in zip(cc.coefs, cc.prims):
                for wd, d in zip(cd.coefs, cd.prims):
                    val += (wa * wb * wc * wd * a.norm * b.norm *
                            c.norm * d.norm * eri_prim(a, b, c, d))
    return val


def build_basis(name, centers):
    shells = BASES[name]
    fns = []
    for center in centers:
        for l, alphas, coefs in shells:
            if l == 0:
                fns.append(Contracted(alphas, coefs, (0, 0, 0), center))
            else:
                for lmn in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
                    fns.append(Contracted(alphas, coefs, lmn, center))
    return fns


def rhf(hcore, s, eri, n_occ, e_nuc):
    n = hcore.shape[0]
    sval, svec = np.linalg.eigh(s)
    x = svec @ np.diag(sval ** -0.5) @ svec.T
    f = hcore.copy()
    e_old = 0.0
    d = np.zeros_like(hcore)
    for it in range(200):
        fp = x.T @ f @ x
        _, cp = np.linalg.eigh(fp)
        c = x @ cp
        cocc = c[:, :n_occ]
        d = 2.0 * cocc @ cocc.T
        j = np.einsum("pqrs,rs->pq", eri, d)
        k = np.einsum("prqs,rs->pq", eri, d)
        f = hcore + j - 0.5 * k
        e = 0.5 * np.sum(d * (hcore + f)) + e_nuc
        if abs(e - e_old) < 1e-12:
            break
        e_old = e
    return e, c


def determinant_fci(h_mo, g_mo, e_core, n_elec):
    """Minimum eigenvalue over all determinants (all Sz sectors).

    Spin orbitals interleaved: 2p = alpha, 2p+1 = beta.
    """
    n_so = 2 * h_mo.shape[0]
    dets = [frozenset(c) for c in itertools.combinations(range(n_so), n_elec)]
    index = {d: i for i, d in enumerate(dets)}
    dim = len(dets)
    mat = np.zeros((dim, dim))

    def annihilate(occ, p):
        if p not in occ:
            return None, 0
        sign = (-1) ** sum(1 for q in occ if q < p)
        return occ - {p}, sign

    def create(occ, p):
        if p in occ:
            return None, 0
        sign = (-1) ** sum(1 for q in occ if q < p)
        return occ | {p}, sign

    hs = np.zeros((n_so, n_so))
    for p in range(n_so):
        for q in range(n_so):
            if p % 2 == q % 2:
                hs[p, q] = h_mo[p // 2, q // 2]

    for di, occ in enumerate(dets):
        for p in range(n_so):
            for q in range(n_so):
                if hs[p, q] == 0.0:
                    continue
                o1, s1 = annihilate(occ, q)
                if o1 is None:
                    continue
                o2, s2 = create(o1, p)
                if o2 is None:
                    continue
                mat[index[o2], di] += s1 * s2 * hs[p, q]
        for p in range(h_mo.shape[0]):
            for q in range(h_mo.shape[0]):
                for r in range(h_mo.shape[0]):
                    for s in range(h_mo.shape[0]):
                        g = g_mo[p, q, r, s]
                        if abs(g) < 1e-14:
                            continue
                        for sa in (0, 1):
                            for sb in (0, 1):
                                pp, qq = 2 * p + sa, 2 * q + sa
                                rr, ss = 2 * r + sb, 2 * s + sb
                                o1, s1 = annihilate(occ, qq)
                                if o1 is None:
                                    continue
                                o2, s2 = annihilate(o1, ss)
                                if o2 is None:
                                    continue
                                o3, s3 = create(o2, rr)
                                if o3 is None:
                                    continue
                                o4, s4 = create(o3, pp)
                                if o4 is None:
                                    continue
                                mat[index[o4], di] += \
                                    0.5 * g * s1 * s2 * s3 * s4
    return np.linalg.eigvalsh(mat)[0] + e_core


def main():
    basis = sys.argv[1]
    out = sys.argv[2]
    r_ang = float(sys.argv[3]) if len(sys.argv) > 3 else 0.75
    r = r_ang * ANGSTROM_TO_BOHR
    centers = [np.array([0.0, 0.0, 0.0]), np.array([0.0, 0.0, r])]
    charges = [1.0, 1.0]
    fns = build_basis(basis, centers)
    n = len(fns)
    print(f"{basis}: {n} basis functions, R = {r_ang} A ({r:.8f} bohr)")

    s = np.array([[contract2(overlap_prim, a, b) for b in fns] for a in fns])
    t = np.array([[contract2(kinetic_prim, a, b) for b in fns] for a in fns])
    v = np.array([[contract2(
        lambda x, y: nuclear_prim(x, y, centers, charges), a, b)
        for b in fns] for a in fns])
    eri = np.zeros((n, n, n, n))
    for p in range(n):
        for q in range(p + 1):
            for rr in range(n):
                for ss in range(rr + 1):
                    if (p * (p + 1) // 2 + q) < (rr * (rr + 1) // 2 + ss):
                        continue
                    val = contract4(fns[p], fns[q], fns[rr], fns[ss])
                    for (a, b), (c, d) in itertools.product(
                            {(p, q), (q, p)}, {(rr, ss), (ss, rr)}):
                        eri[a, b, c, d] = val
                        eri[c, d, a, b] = val

    e_nuc = charges[0] * charges[1] / r
    hcore = t + v
    e_hf, c = rhf(hcore, s, eri, 1, e_nuc)
    print(f"RHF energy: {e_hf:.8f} Ha")

    h_mo = c.T @ hcore @ c
    g_mo = np.einsum("pi,qj,rk,sl,pqrs->ijkl", c, c, c, c, eri, optimize=True)

    with open(out, "w") as fh:
        fh.write(f"&FCI NORB={n},NELEC=2,MS2=0,\n&END\n")
        for p in range(n):
            for q in range(p + 1):
                for rr in range(p + 1):
                    smax = rr if rr < p else q
                    for ss in range(smax + 1):
                        val = g_mo[p, q, rr, ss]
                        if abs(val) > 1e-16:
                            fh.write(f"{val:.16e} {p+1} {q+1} {rr+1} {ss+1}\n")
        for p in range(n):
            for q in range(p + 1):
                if abs(h_mo[p, q]) > 1e-16:
                    fh.write(f"{h_mo[p, q]:.16e} {p+1} {q+1} 0 0\n")
        fh.write(f"{e_nuc:.16e} 0 0 0 0\n")
    print(f"wrote {out}")

    e_fci = determinant_fci(h_mo, g_mo, e_nuc, 2)
    print(f"FCI energy: {e_fci:.8f} Ha")


if __name__ == "__main__":
    main()

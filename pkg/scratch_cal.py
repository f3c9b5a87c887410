"""Scratch: calibrate every number tests/test_operators.py will freeze."""
import time

import numpy as np

import bemdf.operators as ops
from bemdf.kernels import scalar_with_derivatives
from bemdf.mesh import (
    CURL,
    DIV,
    TraceVector,
    form_space,
    icosphere,
    incidence_d,
    pairing_matrix,
)
from bemdf.operators import (
    AssemblyOptions,
    assemble_D,
    assemble_K_pair,
    assemble_V,
    assemble_Vtilde,
    assemble_W,
    calderon,
    symmetric_calderon,
)
from bemdf.potentials import EXTERIOR, INTERIOR

T0 = time.time()


def stamp(label):
    print(f"--- {label}   [{time.time() - T0:.1f}s]")


mesh1 = icosphere(1)
mesh0 = icosphere(0)
kc = 1.0 + 1.0j

# A. ellipticity rotations at k = 1+i -------------------------------------
stamp("A ellipticity")
for p in (0, 1):
    MD = assemble_D(mesh1, p, kc).matrix
    HD = -(np.conj(kc) * MD).imag
    w = np.linalg.eigvalsh(HD)
    print(f"H_D p={p}: min {w.min():.6e} max {w.max():.6e}")
MV0 = assemble_V(mesh1, 0, kc).matrix
HV0 = (np.conj(kc) * kc * kc * MV0).imag
w = np.linalg.eigvalsh(HV0)
print(f"H_V p=0: min {w.min():.6e} max {w.max():.6e}")
MVt1 = assemble_Vtilde(mesh1, 1, kc).matrix
HVt1 = (np.conj(kc) * kc * kc * MVt1).imag
w = np.linalg.eigvalsh(HVt1)
print(f"H_Vt p=1: min {w.min():.6e} max {w.max():.6e}")

# static definiteness
D1z = assemble_D(mesh1, 1, 0.0).matrix
w = np.linalg.eigvalsh(D1z.real)
print(f"D1(0): imag {np.max(np.abs(D1z.imag)):.2e} eig min {w.min():.3e} max {w.max():.3e}")

# B. static anchors ---------------------------------------------------------
stamp("B static anchors")
one1 = np.ones(mesh1.num_vertices)
V0z = assemble_V(mesh1, 0, 0.0).matrix
q1 = one1 @ V0z.real @ one1
mesh2 = icosphere(2)
one2 = np.ones(mesh2.num_vertices)
V0z2 = assemble_V(mesh2, 0, 0.0).matrix
q2 = one2 @ V0z2.real @ one2
fp = 4 * np.pi
print(f"b(1,V1): L1 {q1:.8f} rel {abs(q1-fp)/fp:.4f} | L2 {q2:.8f} rel {abs(q2-fp)/fp:.4f}")
mass1 = pairing_matrix(form_space(mesh1, 0), form_space(mesh1, 0)).matrix.real
K0z = assemble_K_pair(mesh1, 0, 0.0)[0].matrix
r = np.linalg.norm(K0z.real @ one1 + 0.5 * mass1 @ one1) / np.linalg.norm(mass1 @ one1)
print(f"K0(0) 1 + 1/2 P 1 rel: {r:.3e}")

# C. k=0 solenoidal invariance ---------------------------------------------
stamp("C solenoidal invariance")
heavy = AssemblyOptions(8, 8, 8, 8, 10)
rng = np.random.default_rng(3)
for label, m, opt in (("L0 heavy", mesh0, heavy), ("L1 default", mesh1, None)):
    kw = {"options": opt} if opt else {}
    Kd1 = assemble_K_pair(m, 1, 0.0, **kw)[1].matrix
    d0 = incidence_d(m, 0).toarray().astype(float)
    d1 = incidence_d(m, 1).toarray().astype(float)
    g = rng.standard_normal(m.num_edges)
    gs = g - d1.T @ np.linalg.lstsq(d1.T, g, rcond=None)[0]
    print(f"  check D1 gs: {np.linalg.norm(d1 @ gs):.2e}")
    w = Kd1 @ gs
    print(f"{label}: |d0^T K' g_sol| / |K' g_sol| = {np.linalg.norm(d0.T @ w) / np.linalg.norm(w):.3e}")

# D. commutators (heavy orders, L0, k=1.3) ---------------------------------
stamp("D commutators")
km = 1.3
tab0 = ops._whitney_tables(form_space(mesh0, 0))
tabf = ops._face_density_tables(mesh0)
tabi = ops._face_indicator_tables(mesh0)
tabn = ops._scalar_normal_tables(mesh0)
tdiv = ops._whitney_tables(form_space(mesh0, 1, DIV))
d0 = incidence_d(mesh0, 0).toarray().astype(float)
d1 = incidence_d(mesh0, 1).toarray().astype(float)
areas0 = mesh0.areas

MK1, MKd1 = (b.matrix for b in assemble_K_pair(mesh0, 1, km, options=heavy))
MW = assemble_W(mesh0, 1, km, options=heavy).matrix
jkd0f = ops._new_job("nx", tab0, tabf)
jk0f = ops._new_job("ny", tabi, tab0)
jwt = ops._new_job("g", tdiv, tabn)
ops._sweep(mesh0, km, [jkd0f, jk0f, jwt], heavy)
lhs3 = d0.T @ MKd1 - jkd0f.out @ d1
rhs3 = -(km * km) * MW
print(f"bioprop3 rel: {np.max(np.abs(lhs3 - rhs3)) / np.max(np.abs(rhs3)):.3e}")
lhs4 = d1.T @ (jk0f.out / areas0[:, None]) - MK1 @ d0
rhs4 = (km * km) * jwt.out
print(f"bioprop4 rel: {np.max(np.abs(lhs4 - rhs4)) / np.max(np.abs(rhs4)):.3e}")

# O. bioprop5a degree-0 recomposition --------------------------------------
stamp("O maue recomposition")
kq = 2.0 + 1.0j
MD0 = assemble_D(mesh1, 0, kq).matrix
V1 = assemble_V(mesh1, 1, kq).matrix
jn = ops._new_job("g", ops._scalar_normal_tables(mesh1), ops._scalar_normal_tables(mesh1))
ops._sweep(mesh1, kq, [jn], ops._DEFAULT_OPTIONS)
d0m1 = incidence_d(mesh1, 0).toarray().astype(float)
recomp = d0m1.T @ V1 @ d0m1 - kq * kq * jn.out
print(f"bioprop5a p=0 recomposition rel: {np.max(np.abs(MD0 - recomp)) / np.max(np.abs(MD0)):.3e}")

# E. standard projector residuals ------------------------------------------
stamp("E projector residuals")
k2 = 2.0


def smooth_pair(m, seed):
    rng = np.random.default_rng(seed)
    s0 = form_space(m, 0)
    mass = pairing_matrix(s0, s0).matrix.real
    x = rng.standard_normal(s0.dof_count) + 1j * rng.standard_normal(s0.dof_count)
    y = rng.standard_normal(s0.dof_count) + 1j * rng.standard_normal(s0.dof_count)
    return mass @ x, mass @ y


for lv, m in ((1, mesh1), (2, mesh2)):
    P = calderon(m, k2, 0)
    Pe = calderon(m, k2, 0, EXTERIOR)
    s0 = form_space(m, 0)
    b, g = smooth_pair(m, 11)
    tb, tg = TraceVector(s0, b), TraceVector(s0, g)
    pb, pg = P.apply(tb, tg)
    ppb, ppg = P.apply(pb, pg)
    num = np.linalg.norm(np.concatenate([ppb.coeffs - pb.coeffs, ppg.coeffs - pg.coeffs]))
    den = np.linalg.norm(np.concatenate([b, g]))
    print(f"L{lv} p=0 k=2 |P^2x - Px|/|x| = {num / den:.4e}")
    eb, eg = Pe.apply(tb, tg)
    ib = np.linalg.norm(np.concatenate([pb.coeffs + eb.coeffs - b, pg.coeffs + eg.coeffs - g])) / den
    print(f"L{lv} int+ext identity: {ib:.3e}")

# F. point-source fixed points ----------------------------------------------
stamp("F fixed points")
Z_OUT = np.array([2.5, 0.4, 0.0])
Z_IN = np.array([0.2, 0.1, 0.3])


def source_data(m, z, k):
    diff = m.vertices - z
    r = np.linalg.norm(diff, axis=1)
    g, g1, _ = scalar_with_derivatives(3, complex(k), r)
    nu = m.vertices / np.linalg.norm(m.vertices, axis=1, keepdims=True)
    beta = g
    gamma = g1 * np.sum(diff / r[:, None] * nu, axis=1)
    return beta.astype(complex), gamma.astype(complex)


def source_flux(m, z, k):
    diff = m.centroids - z
    r = np.linalg.norm(diff, axis=1)
    _, g1, _ = scalar_with_derivatives(3, complex(k), r)
    return (m.areas * g1 * np.sum(diff / r[:, None] * m.normals, axis=1)).astype(complex)


def fp_err(op, vecs):
    outs = op.apply(*vecs)
    num = np.linalg.norm(np.concatenate([o.coeffs - v.coeffs for o, v in zip(outs, vecs)]))
    den = np.linalg.norm(np.concatenate([v.coeffs for v in vecs]))
    return num / den


for lv, m in ((1, mesh1), (2, mesh2)):
    s0 = form_space(m, 0)
    b, g = source_data(m, Z_OUT, k2)
    e = fp_err(calderon(m, k2, 0), (TraceVector(s0, b), TraceVector(s0, g)))
    print(f"L{lv} standard interior: {e:.4f}")
    if lv == 1:
        b, g = source_data(m, Z_IN, k2)
        e = fp_err(calderon(m, k2, 0, EXTERIOR), (TraceVector(s0, b), TraceVector(s0, g)))
        print(f"L{lv} standard exterior: {e:.4f}")
        # adapted k=2
        sc = symmetric_calderon(m, k2, 0)
        b, _ = source_data(m, Z_OUT, k2)
        t = source_flux(m, Z_OUT, k2)
        s2 = form_space(m, 2)
        e = fp_err(sc, (TraceVector(s0, 1j * k2 * b), TraceVector(s2, t)))
        print(f"L{lv} adapted k=2: {e:.4f}")
        # adapted k=0
        sc0 = symmetric_calderon(m, 0.0, 0)
        b, _ = source_data(m, Z_OUT, 0.0)
        t = source_flux(m, Z_OUT, 0.0)
        curl1 = form_space(m, 1, CURL)
        d0m = incidence_d(m, 0).toarray()
        e = fp_err(sc0, (TraceVector(curl1, d0m @ b), TraceVector(s2, t)))
        print(f"L{lv} adapted k=0: {e:.4f}")

# G. calderon2 block structure ----------------------------------------------
stamp("G calderon2 structure")
sc = symmetric_calderon(mesh1, k2, 1)
b = sc.blocks
dd = np.max(np.abs(b[0][0].matrix - b[1][1].matrix))
oo = np.max(np.abs(b[0][1].matrix + b[1][0].matrix))
vt = assemble_Vtilde(mesh1, 1, k2).matrix
cv = np.max(np.abs(b[1][0].matrix - 1j * k2 * vt)) / np.max(np.abs(vt))
print(f"diag equal {dd:.2e}, offdiag antisym {oo:.2e}, c vs ik*Vtilde {cv:.2e}")
print(f"gram conds: {sc.gram_conditioning()}")

# H. static translation (calderon3 pattern) ---------------------------------
stamp("H static translation")
sc1 = symmetric_calderon(mesh1, 0.0, 1)
sc0 = symmetric_calderon(mesh1, 0.0, 0)
pairs = [
    (sc1.blocks[0][0].matrix, sc0.blocks[1][1].matrix),
    (sc1.blocks[0][1].matrix, sc0.blocks[1][0].matrix),
    (sc1.blocks[1][0].matrix, sc0.blocks[0][1].matrix),
    (sc1.blocks[1][1].matrix, sc0.blocks[0][0].matrix),
]
for i, (a, bb) in enumerate(pairs):
    print(f"  pair {i}: max diff {np.max(np.abs(a - bb)):.3e}")
print(f"sc0 gram conds: {sc0.gram_conditioning()}")

# I. circulation self-convergence --------------------------------------------
stamp("I circulations")
c_def = ops._edge_circulations(mesh1, 0.0)
c_hi = ops._edge_circulations(mesh1, 0.0, line_order=10, panel_order=8, onpanel_order=14)
print(f"circ default vs refined rel: {np.max(np.abs(c_def - c_hi)) / np.max(np.abs(c_hi)):.3e}")

# J. variational forms --------------------------------------------------------
stamp("J variational forms")
kq = 2.0 + 1.0j
MD = assemble_D(mesh1, 1, kq).matrix
MVt = assemble_Vtilde(mesh1, 1, kq).matrix
MK, MKd = (x.matrix for x in assemble_K_pair(mesh1, 1, kq))
rng = np.random.default_rng(7)
E = mesh1.num_edges


def aform(bp, gp, b, g):
    return (bp @ (MD @ b + MKd @ g) - gp @ (-MK @ b + MVt @ g)) / kq


b1, g1v, b2, g2v = (rng.standard_normal(E) + 1j * rng.standard_normal(E) for _ in range(4))
s_ab = aform(b2, g2v, b1, g1v)
s_ba = aform(b1, g1v, b2, g2v)
print(f"A symmetry: {abs(s_ab - s_ba) / abs(s_ab):.3e}")
MD1z = assemble_D(mesh1, 1, 0.0).matrix
MV1z = assemble_V(mesh1, 1, 0.0).matrix
vals = []
for _ in range(3):
    br = rng.standard_normal(E)
    gr = rng.standard_normal(E)
    vals.append((br @ MD1z @ br + gr @ MV1z @ gr).real)
print(f"A0 diagonal values (>=0): {vals}")

print(f"TOTAL {time.time() - T0:.1f}s")

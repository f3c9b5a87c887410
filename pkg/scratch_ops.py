import time

import numpy as np

from bemdf.mesh import CURL, DIV, form_space, icosphere, incidence_d, pairing_matrix
from bemdf.operators import (
    assemble_D,
    assemble_K_pair,
    assemble_V,
    assemble_Vtilde,
    assemble_W,
)

t0 = time.time()
mesh = icosphere(1)
k = 2.0 + 1.0j

V0 = assemble_V(mesh, 0, 0.0)
print("V0 real:", np.max(np.abs(V0.matrix.imag)))
print("V0 sym :", np.max(np.abs(V0.matrix - V0.matrix.T)) / np.max(np.abs(V0.matrix)))
w = np.linalg.eigvalsh(V0.matrix.real)
print("V0 eig range:", w.min(), w.max())

one = np.ones(mesh.num_vertices)
quad = one @ V0.matrix.real @ one
print("b(1, V0 1) =", quad, " (4pi =", 4 * np.pi, ", rel err", abs(quad - 4 * np.pi) / (4 * np.pi), ")")

K0, K0d = assemble_K_pair(mesh, 0, k)
print("K0dag - K0^T:", np.max(np.abs(K0d.matrix - K0.matrix.T)) / np.max(np.abs(K0.matrix)))

mass = pairing_matrix(form_space(mesh, 0), form_space(mesh, 0)).matrix.real
lhs = K0.matrix.real @ one if False else None
K0r, _ = assemble_K_pair(mesh, 0, 0.0)
resid = np.linalg.norm(K0r.matrix.real @ one + 0.5 * mass @ one) / np.linalg.norm(mass @ one)
print("K0(k=0) . 1 + 1/2 P 1 rel:", resid)

V1 = assemble_V(mesh, 1, k)
print("V1 sym :", np.max(np.abs(V1.matrix - V1.matrix.T)) / np.max(np.abs(V1.matrix)))

K1, K1d = assemble_K_pair(mesh, 1, k)
print("K1dag - K1^T:", np.max(np.abs(K1d.matrix - K1.matrix.T)) / np.max(np.abs(K1.matrix)))

Vt = assemble_Vtilde(mesh, 1, k)
D1op = assemble_D(mesh, 1, k)
print("D + k^2 Vt:", np.max(np.abs(D1op.matrix + k * k * Vt.matrix)) / np.max(np.abs(D1op.matrix)))
print("D sym:", np.max(np.abs(D1op.matrix - D1op.matrix.T)) / np.max(np.abs(D1op.matrix)))

D0op = assemble_D(mesh, 0, k)
print("D0 sym:", np.max(np.abs(D0op.matrix - D0op.matrix.T)) / np.max(np.abs(D0op.matrix)))
print("D0(k) @ 1 ... not zero for k!=0; check k=0:")
D0z = assemble_D(mesh, 0, 0.0)
print("D0(0) @ 1:", np.max(np.abs(D0z.matrix @ one)))
wD = np.linalg.eigvalsh(D0z.matrix.real)
print("D0(0) eig min/max:", wD.min(), wD.max())

W1 = assemble_W(mesh, 1, k)
print("W shape:", W1.matrix.shape)

print("elapsed:", time.time() - t0)

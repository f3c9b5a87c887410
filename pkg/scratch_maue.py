"""Scratch: calibrate the hypersingular probe cross-check at k=0."""
import time

import numpy as np

from bemdf.mesh import CURL, TraceVector, form_space, icosphere, incidence_d
from bemdf.operators import assemble_D
from bemdf.potentials import eval_double_layer, trace_probe


def setup(level):
    mesh = icosphere(level)
    s0 = form_space(mesh, 0)
    v = mesh.vertices
    b = np.sin(0.7 * v[:, 1]) + 0.3 * v[:, 0]
    beta = TraceVector(s0, b.astype(complex))
    d0 = incidence_d(mesh, 0)
    curl1 = form_space(mesh, 1, CURL)
    dhat = TraceVector(curl1, (d0 @ beta.coeffs).astype(complex))
    return mesh, b, beta, dhat


def galerkin_q(level):
    mesh, b, beta, dhat = setup(level)
    MD = assemble_D(mesh, 0, 0.0).matrix
    return (b @ MD @ b).real


def probe_q(level, steps):
    mesh, b, beta, dhat = setup(level)
    total = 0.0
    for f in range(len(mesh.triangles)):
        est = trace_probe(
            lambda pts: eval_double_layer(0, beta, 0.0, pts),
            mesh.centroids[f],
            mesh.normals[f],
            mesh.diameters[f] * steps,
            trace="neumann",
            d_evaluator=lambda pts: eval_double_layer(1, dhat, 0.0, pts),
            mesh=mesh,
        )
        mean = est.mean.coeffs[0].real
        bc = b[mesh.triangles[f]].mean()
        total += mesh.areas[f] * (-mean) * bc
    return total


for lv in (1, 2, 3):
    t0 = time.time()
    q = galerkin_q(lv)
    print(f"galerkin L{lv}: {q:.8f}   ({time.time()-t0:.1f}s)")

for steps in (
    np.array([0.404, 0.202, 0.101]),
    np.array([0.36, 0.24, 0.16, 0.12]),
    np.array([0.3, 0.2, 0.15, 0.12]),
):
    t0 = time.time()
    q = probe_q(1, steps)
    print(f"probe L1 steps={steps}: {q:.8f}   ({time.time()-t0:.1f}s)")

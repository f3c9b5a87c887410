"""Galerkin boundary operators and Calderon projectors on surface meshes.

The six operator families of the trace calculus — single layer V, the
double-layer pair (K, K-dagger), the normal single layer W, the
divergence-corrected single layer Vtilde, and the hypersingular D — are
assembled as dense matrices over the lowest-order form spaces of
:mod:`bemdf.mesh`.  Every matrix entry is a plain bilinear double integral

    M[i, j] = int int test_i(x) . kernel(x, y) . trial_j(y) dS dS

with the outgoing scalar kernel and real basis proxies, evaluated by the
panel-pair rules of :mod:`bemdf.quadrature`: regularizing transforms on the
coincident / shared-edge / shared-vertex classes and tensor Gauss rules
elsewhere, with a one-notch order bump for close disjoint pairs.  Both
members of an unordered panel pair are assembled from the same node set
with the roles of the two slots exchanged, so transpose relations between
operators hold to rounding rather than to quadrature accuracy.

The hypersingular matrix is never touched directly: integration by parts
reduces it to single-layer blocks conjugated by the integer incidence
matrices (the surface-derivative weak form), so D inherits the weak
singularity of V.  The same reduction supplies Vtilde.

On top of the matrices sit the Calderon projectors ``1/2 I +- A`` in the
mixed duality pairing, their symmetric variants in adapted traces (both the
wave-number form and the static form, the latter tying the degree-1 and
degree-2 blocks together through edge circulations of single-layer fields),
and the duality transform that exchanges complementary-degree solutions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kernels import scalar_with_derivatives
from .mesh import (
    CURL,
    DIV,
    FormSpace,
    GalerkinBlock,
    SurfaceMesh,
    TraceVector,
    _whitney_coeff_tables,
    form_space,
    incidence_d,
    pairing_matrix,
)
from .potentials import EXTERIOR, INTERIOR
from .quadrature import (
    DISJOINT,
    IDENTICAL,
    SHARED_EDGE,
    SHARED_VERTEX,
    near_eval_rule,
    onpanel_rule,
    panel_pair_rule,
    triangle_rule,
)

__all__ = [
    "AdaptedTraces",
    "AssemblyOptions",
    "CalderonOperator",
    "DualPair",
    "GalerkinBlock",
    "OperatorError",
    "adapted_traces",
    "assemble_D",
    "assemble_K_pair",
    "assemble_V",
    "assemble_Vtilde",
    "assemble_W",
    "calderon",
    "dual_pair",
    "dual_transform",
    "export_block",
    "load_block",
    "mesh_hash",
    "symmetric_calderon",
]


class OperatorError(Exception):
    """Raised for inconsistent trace data and violated subspace constraints."""


@dataclass(frozen=True)
class AssemblyOptions:
    """Quadrature orders per panel-pair adjacency class.

    ``identical``/``shared_edge``/``shared_vertex`` are Gauss orders per
    relative coordinate of the regularizing transforms; ``disjoint`` and
    ``near`` are triangle-rule degrees for the tensor rules, the latter
    applied to disjoint pairs closer than twice their diameter.
    """

    identical: int = 4
    shared_edge: int = 4
    shared_vertex: int = 4
    disjoint: int = 4
    near: int = 6

    def __post_init__(self) -> None:
        for name in ("identical", "shared_edge", "shared_vertex", "disjoint", "near"):
            v = getattr(self, name)
            if not 1 <= v <= 10:
                raise ValueError(f"{name} order must be in 1..10, got {v}")


_DEFAULT_OPTIONS = AssemblyOptions()

# pairs per tile: singular rules carry O(order^4) nodes, tensor rules O(order^2)
_SINGULAR_TILE = 64
_TENSOR_TILE = 4096


# ---------------------------------------------------------------------------
# per-face affine basis tables
# ---------------------------------------------------------------------------
#
# Every test/trial family is a per-face affine map  value(f, lam) =
# t0[f, a] + lam @ t1[f, a]  into R^3; scalar families live in slot 0 and
# are only ever dotted against other slot-0 families.


@dataclass(frozen=True)
class _Tables:
    t0: np.ndarray  # (F, nloc, 3)
    t1: np.ndarray  # (F, nloc, 3, 3)
    dofs: np.ndarray  # (F, nloc)
    count: int  # global dof count


def _whitney_tables(space: FormSpace) -> _Tables:
    mesh = space.mesh
    c0, c1 = _whitney_coeff_tables(space)
    if space.p == 0:
        dofs = mesh.triangles
    elif space.p == 1:
        dofs = mesh.tri_edges
    else:
        dofs = np.arange(mesh.num_triangles, dtype=np.int64)[:, None]
    return _Tables(np.asarray(c0, float), np.asarray(c1, float), dofs, space.dof_count)


def _scalar_normal_tables(mesh: SurfaceMesh) -> _Tables:
    """Vertex hats times the face normal: value = lam_a nu_f."""
    F = mesh.num_triangles
    t0 = np.zeros((F, 3, 3))
    t1 = np.zeros((F, 3, 3, 3))
    for a in range(3):
        t1[:, a, a, :] = mesh.normals
    return _Tables(t0, t1, mesh.triangles, mesh.num_vertices)


def _face_density_tables(mesh: SurfaceMesh) -> _Tables:
    """Unit-integral face densities 1/A_f in slot 0."""
    F = mesh.num_triangles
    t0 = np.zeros((F, 1, 3))
    t0[:, 0, 0] = 1.0 / mesh.areas
    t1 = np.zeros((F, 1, 3, 3))
    return _Tables(t0, t1, np.arange(F, dtype=np.int64)[:, None], F)


def _face_indicator_tables(mesh: SurfaceMesh) -> _Tables:
    """Face indicators (value one) in slot 0."""
    F = mesh.num_triangles
    t0 = np.zeros((F, 1, 3))
    t0[:, 0, 0] = 1.0
    t1 = np.zeros((F, 1, 3, 3))
    return _Tables(t0, t1, np.arange(F, dtype=np.int64)[:, None], F)


def _face_density_normal_tables(mesh: SurfaceMesh) -> _Tables:
    """Face densities times the face normal: value = nu_f / A_f."""
    F = mesh.num_triangles
    t0 = mesh.normals[:, None, :] / mesh.areas[:, None, None]
    t1 = np.zeros((F, 1, 3, 3))
    return _Tables(np.ascontiguousarray(t0), t1, np.arange(F, dtype=np.int64)[:, None], F)


# ---------------------------------------------------------------------------
# assembly jobs and the panel-pair sweep
# ---------------------------------------------------------------------------
#
# kernel modes (g = scalar kernel, g1 = its radial derivative, rhat the
# unit vector from y to x, nu_x / nu_y the face normals):
#
#   "g"    g  (tx . ty)                      weakly singular families
#   "ny"  -g1 (rhat . nu_y) (tx . ty)        double layer, degree 0
#   "nx"  +g1 (rhat . nu_x) (tx . ty)        its conjugate, and the
#                                            face-density double layer
#   "dl"   g1  tx . (rhat x (nu_y x ty))     double layer, degree 1
#   "adj" -g1  tx . (nu_x x (rhat x ty))     its conjugate
#
# The g1 modes vanish pointwise on coincident flat panels (rhat is then
# tangential), so the same sweep serves every mode without special cases.

_MODES = ("g", "nx", "ny", "dl", "adj")


@dataclass
class _Job:
    mode: str
    test: _Tables
    trial: _Tables
    out: np.ndarray  # (test.count, trial.count) complex
    sign: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"unknown kernel mode {self.mode!r}")


def _new_job(mode: str, test: _Tables, trial: _Tables, sign: float = 1.0) -> _Job:
    out = np.zeros((test.count, trial.count), dtype=complex)
    return _Job(mode, test, trial, out, sign)


def _eval_tables(tab: _Tables, faces: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Values (n, Q, nloc, 3) of a table family on faces at barycentric lam."""
    t1 = tab.t1[faces]  # (n, nloc, 3, 3)
    n, nloc = t1.shape[:2]
    flat = np.ascontiguousarray(t1.transpose(0, 2, 1, 3)).reshape(n, 3, nloc * 3)
    vals = (lam @ flat).reshape(n, lam.shape[1], nloc, 3)
    vals += tab.t0[faces][:, None, :, :]
    return vals


def _contract(wk: np.ndarray, tx: np.ndarray, ty: np.ndarray) -> np.ndarray:
    """Blocks ``out[n,a,b] = sum_{q,c} wk[n,q] tx[n,q,a,c] ty[n,q,b,c]``.

    Tables are real, so the complex weight is split into two real GEMMs.
    """
    n, q, a, c = tx.shape
    b = ty.shape[2]
    right = np.ascontiguousarray(ty.transpose(0, 1, 3, 2)).reshape(n, q * c, b)

    def half(w: np.ndarray) -> np.ndarray:
        left = np.ascontiguousarray(
            (tx * w[:, :, None, None]).transpose(0, 2, 1, 3)
        ).reshape(n, a, q * c)
        return left @ right

    if np.iscomplexobj(wk):
        return half(np.ascontiguousarray(wk.real)) + 1j * half(
            np.ascontiguousarray(wk.imag)
        )
    return half(wk).astype(complex)


def _job_local(
    job: _Job,
    wq: np.ndarray,
    g: np.ndarray,
    g1: np.ndarray,
    rhat: np.ndarray,
    nx: np.ndarray,
    ny: np.ndarray,
    tx: np.ndarray,
    ty: np.ndarray,
) -> np.ndarray:
    """Local blocks (n, nloc_x, nloc_y) for one orientation of a pair chunk."""
    if job.mode == "g":
        return _contract(wq[None, :] * g, tx, ty)
    if job.mode == "nx":
        wk = wq[None, :] * g1 * np.einsum("nqs,ns->nq", rhat, nx)
        return _contract(wk, tx, ty)
    if job.mode == "ny":
        wk = -wq[None, :] * g1 * np.einsum("nqs,ns->nq", rhat, ny)
        return _contract(wk, tx, ty)
    if job.mode == "dl":
        rotated = np.cross(rhat[:, :, None, :], np.cross(ny[:, None, None, :], ty))
        return _contract(wq[None, :] * g1, tx, rotated)
    # "adj"
    rotated = -np.cross(nx[:, None, None, :], np.cross(rhat[:, :, None, :], ty))
    return _contract(wq[None, :] * g1, tx, rotated)


def _scatter(out: np.ndarray, rdofs: np.ndarray, cdofs: np.ndarray, local: np.ndarray) -> None:
    np.add.at(out, (rdofs[:, :, None], cdofs[:, None, :]), local)


def _edge_face_map(mesh: SurfaceMesh) -> np.ndarray:
    """The two faces flanking each edge; operators need a closed surface."""
    edge_faces = np.full((mesh.num_edges, 2), -1, dtype=np.int64)
    for f in range(mesh.num_triangles):
        for e in mesh.tri_edges[f]:
            edge_faces[e, 0 if edge_faces[e, 0] < 0 else 1] = f
    if np.any(edge_faces < 0):
        raise OperatorError("boundary operators require a closed surface mesh")
    return edge_faces


class _PairChunks:
    """Classify the unordered panel pairs of a mesh into adjacency chunks."""

    def __init__(self, mesh: SurfaceMesh, options: AssemblyOptions) -> None:
        self.mesh = mesh
        self.options = options
        tris = mesh.triangles
        F = mesh.num_triangles

        edge_faces = _edge_face_map(mesh)
        self.edge_faces = edge_faces

        vert_sets = [frozenset(t) for t in tris]
        stars: list[list[int]] = [[] for _ in range(mesh.num_vertices)]
        for f, t in enumerate(tris):
            for v in t:
                stars[v].append(f)
        edge_pairs = {tuple(sorted(p)) for p in edge_faces}
        vertex_pairs = []
        seen = set(edge_pairs)
        for v, star in enumerate(stars):
            for i in range(len(star)):
                for j in range(i + 1, len(star)):
                    key = (min(star[i], star[j]), max(star[i], star[j]))
                    if key in seen:
                        continue
                    seen.add(key)
                    shared = vert_sets[key[0]] & vert_sets[key[1]]
                    if len(shared) != 1:
                        raise OperatorError(
                            "degenerate mesh: panels share vertices without "
                            "sharing an edge consistently"
                        )
                    vertex_pairs.append((key[0], key[1], next(iter(shared))))
        for fa, fb in edge_pairs:
            if len(vert_sets[fa] & vert_sets[fb]) != 2:
                raise OperatorError("degenerate mesh: edge neighbors share a face")
        self.vertex_pairs = np.array(vertex_pairs, dtype=np.int64).reshape(-1, 3)
        self.adjacent = seen  # all pairs sharing at least one vertex

    @staticmethod
    def _positions(tris: np.ndarray, verts: np.ndarray) -> np.ndarray:
        """Local index of each requested global vertex, per row."""
        return np.argmax(tris == verts[:, None], axis=1)

    def _edge_perms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edge-adjacent pairs with canonical (shared lo, shared hi, apex)."""
        mesh = self.mesh
        fa, fb = self.edge_faces[:, 0], self.edge_faces[:, 1]
        lo, hi = mesh.edges[:, 0], mesh.edges[:, 1]

        def perm_for(faces: np.ndarray) -> np.ndarray:
            tris = mesh.triangles[faces]
            p0 = self._positions(tris, lo)
            p1 = self._positions(tris, hi)
            p2 = 3 - p0 - p1
            return np.stack([p0, p1, p2], axis=1)

        return np.stack([fa, fb], axis=1), perm_for(fa), perm_for(fb)

    def _vertex_perms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mesh = self.mesh
        pairs = self.vertex_pairs
        if len(pairs) == 0:
            empty = np.zeros((0, 3), dtype=np.int64)
            return np.zeros((0, 2), dtype=np.int64), empty, empty

        def perm_for(faces: np.ndarray, shared: np.ndarray) -> np.ndarray:
            tris = mesh.triangles[faces]
            p0 = self._positions(tris, shared)
            rest = np.array([[x for x in range(3) if x != p] for p in p0])
            return np.column_stack([p0, rest])

        return (
            pairs[:, :2],
            perm_for(pairs[:, 0], pairs[:, 2]),
            perm_for(pairs[:, 1], pairs[:, 2]),
        )

    def chunks(self):
        """Yield (faces_x, faces_y, lam_x, lam_y, weights, self_pair) tiles."""
        mesh, opt = self.mesh, self.options
        F = mesh.num_triangles

        rule = panel_pair_rule(IDENTICAL, opt.identical)
        faces = np.arange(F, dtype=np.int64)
        for start in range(0, F, _SINGULAR_TILE):
            f = faces[start : start + _SINGULAR_TILE]
            n = len(f)
            lamx = np.broadcast_to(rule.bary_x, (n, *rule.bary_x.shape))
            lamy = np.broadcast_to(rule.bary_y, (n, *rule.bary_y.shape))
            yield f, f, lamx, lamy, rule.weights, True

        rule = panel_pair_rule(SHARED_EDGE, opt.shared_edge)
        pairs, perma, permb = self._edge_perms()
        yield from self._permuted(rule, pairs, perma, permb)

        rule = panel_pair_rule(SHARED_VERTEX, opt.shared_vertex)
        pairs, perma, permb = self._vertex_perms()
        yield from self._permuted(rule, pairs, perma, permb)

        # disjoint pairs, streamed in row blocks to bound memory
        near_rule = panel_pair_rule(DISJOINT, opt.near)
        far_rule = panel_pair_rule(DISJOINT, opt.disjoint)
        cent, diam = mesh.centroids, mesh.diameters
        adjacent = self.adjacent
        row_block = max(1, (2 * _TENSOR_TILE) // max(F, 1))
        for r0 in range(0, F, row_block):
            r1 = min(r0 + row_block, F)
            ii, jj = np.meshgrid(
                np.arange(r0, r1, dtype=np.int64),
                np.arange(F, dtype=np.int64),
                indexing="ij",
            )
            keep = ii < jj
            ii, jj = ii[keep], jj[keep]
            if len(ii) == 0:
                continue
            adj = np.fromiter(
                ((int(a), int(b)) in adjacent for a, b in zip(ii, jj)),
                dtype=bool,
                count=len(ii),
            )
            ii, jj = ii[~adj], jj[~adj]
            dist = np.linalg.norm(cent[ii] - cent[jj], axis=1)
            # vectorized near_disjoint predicate
            isnear = dist < 2.0 * np.maximum(diam[ii], diam[jj])
            for rule, sel in ((near_rule, isnear), (far_rule, ~isnear)):
                fi, fj = ii[sel], jj[sel]
                for start in range(0, len(fi), _TENSOR_TILE):
                    f, g = fi[start : start + _TENSOR_TILE], fj[start : start + _TENSOR_TILE]
                    n = len(f)
                    if n == 0:
                        continue
                    lamx = np.broadcast_to(rule.bary_x, (n, *rule.bary_x.shape))
                    lamy = np.broadcast_to(rule.bary_y, (n, *rule.bary_y.shape))
                    yield f, g, lamx, lamy, rule.weights, False

    def _permuted(self, rule, pairs, perma, permb):
        for start in range(0, len(pairs), _SINGULAR_TILE):
            pa = pairs[start : start + _SINGULAR_TILE]
            if len(pa) == 0:
                continue
            inva = np.argsort(perma[start : start + _SINGULAR_TILE], axis=1)
            invb = np.argsort(permb[start : start + _SINGULAR_TILE], axis=1)
            lamx = np.moveaxis(rule.bary_x[:, inva], 1, 0)
            lamy = np.moveaxis(rule.bary_y[:, invb], 1, 0)
            yield pa[:, 0], pa[:, 1], lamx, lamy, rule.weights, False


def _sweep(mesh: SurfaceMesh, k: complex, jobs: list[_Job], options: AssemblyOptions) -> None:
    """Accumulate all jobs over every panel pair of the mesh."""
    corners = mesh.vertices[mesh.triangles]
    normals, areas = mesh.normals, mesh.areas

    for fx, fy, lamx, lamy, wq, self_pair in _PairChunks(mesh, options).chunks():
        diff = lamx @ corners[fx] - lamy @ corners[fy]
        r = np.linalg.norm(diff, axis=2)
        g, g1, _ = scalar_with_derivatives(3, k, r)
        rhat = diff / r[:, :, None]
        scale = (4.0 * areas[fx] * areas[fy])[:, None, None]

        halves = [(fx, fy, lamx, lamy, rhat)]
        if not self_pair:
            halves.append((fy, fx, lamy, lamx, -rhat))
        for hfx, hfy, hlx, hly, hrhat in halves:
            nx, ny = normals[hfx], normals[hfy]
            cache: dict[tuple[int, int], np.ndarray] = {}
            for job in jobs:
                kx = (id(job.test), 0)
                if kx not in cache:
                    cache[kx] = _eval_tables(job.test, hfx, hlx)
                ky = (id(job.trial), 1)
                if ky not in cache:
                    cache[ky] = _eval_tables(job.trial, hfy, hly)
                local = _job_local(job, wq, g, g1, hrhat, nx, ny, cache[kx], cache[ky])
                local *= job.sign * scale
                _scatter(job.out, job.test.dofs[hfx], job.trial.dofs[hfy], local)


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.ascontiguousarray(matrix)
    matrix.setflags(write=False)
    return matrix


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------


def _check_degree(p: int) -> None:
    if p not in (0, 1):
        raise ValueError(f"boundary operators are assembled for degrees 0 and 1, got {p}")


def assemble_V(mesh: SurfaceMesh, p: int, k, *, options: AssemblyOptions | None = None) -> GalerkinBlock:
    """Single layer: the trace-paired Galerkin matrix of the Newton kernel.

    Degree 0 pairs vertex hats, degree 1 pairs div-conforming Whitney
    proxies; in both cases the kernel is plain ``g`` and the matrix is
    complex symmetric.  Rows are the test (div-side) space.
    """
    _check_degree(p)
    k = complex(k)
    options = options or _DEFAULT_OPTIONS
    space = form_space(mesh, 0) if p == 0 else form_space(mesh, 1, DIV)
    tab = _whitney_tables(space)
    job = _new_job("g", tab, tab)
    _sweep(mesh, k, [job], options)
    return GalerkinBlock(_frozen(job.out), space, space, k, p)


def assemble_K_pair(
    mesh: SurfaceMesh, p: int, k, *, options: AssemblyOptions | None = None
) -> tuple[GalerkinBlock, GalerkinBlock]:
    """Double layer and its conjugate, assembled from distinct kernel forms.

    Degree 0 uses the normal-derivative kernels in the y and x slots;
    degree 1 rotates the trial (respectively test) proxy by the
    corresponding normal.  Coincident flat panels contribute nothing, so
    the matrices represent the mean (principal-value) traces; the jump
    terms live in the ``1/2 I`` of the projectors, not here.
    """
    _check_degree(p)
    k = complex(k)
    options = options or _DEFAULT_OPTIONS
    if p == 0:
        space = form_space(mesh, 0)
        tab = _whitney_tables(space)
        jac = _new_job("ny", tab, tab)
        jadj = _new_job("nx", tab, tab)
        _sweep(mesh, k, [jac, jadj], options)
        kb = GalerkinBlock(_frozen(jac.out), space, space, k, p)
        kd = GalerkinBlock(_frozen(jadj.out), space, space, k, p)
        return kb, kd
    div1 = form_space(mesh, 1, DIV)
    curl1 = form_space(mesh, 1, CURL)
    tdiv, tcurl = _whitney_tables(div1), _whitney_tables(curl1)
    jac = _new_job("dl", tdiv, tcurl)
    jadj = _new_job("adj", tcurl, tdiv)
    _sweep(mesh, k, [jac, jadj], options)
    kb = GalerkinBlock(_frozen(jac.out), div1, curl1, k, p)
    kd = GalerkinBlock(_frozen(jadj.out), curl1, div1, k, p)
    return kb, kd


def assemble_W(mesh: SurfaceMesh, p: int, k, *, options: AssemblyOptions | None = None) -> GalerkinBlock:
    """Normal trace of the single layer, one degree down.

    Only degree 1 has a lower-degree partner on a surface: the matrix
    pairs vertex hats against ``nu_x . (single layer of a div proxy)``,
    a continuous field, so the kernel stays weakly singular.
    """
    if p != 1:
        raise ValueError("the normal single layer maps degree 1 to degree 0; use p=1")
    k = complex(k)
    options = options or _DEFAULT_OPTIONS
    space0 = form_space(mesh, 0)
    div1 = form_space(mesh, 1, DIV)
    job = _new_job("g", _scalar_normal_tables(mesh), _whitney_tables(div1))
    _sweep(mesh, k, [job], options)
    return GalerkinBlock(_frozen(job.out), space0, div1, k, p)


def _face_single_layer(mesh: SurfaceMesh, k: complex, options: AssemblyOptions) -> np.ndarray:
    """Single layer in the unit-integral face-density basis (F x F)."""
    tab = _face_density_tables(mesh)
    job = _new_job("g", tab, tab)
    _sweep(mesh, k, [job], options)
    return job.out


def _divdiv_term(mesh: SurfaceMesh, vface: np.ndarray) -> np.ndarray:
    """Surface-derivative weak form: D1^T Vface D1 on edge coefficients."""
    d1 = incidence_d(mesh, 1).toarray()
    return d1.T @ vface @ d1


def assemble_Vtilde(
    mesh: SurfaceMesh, p: int, k, *, options: AssemblyOptions | None = None
) -> GalerkinBlock:
    """Divergence-corrected single layer ``V - k^-2 (div-weak term)``.

    Needs ``k != 0``.  At degree 0 the correction vanishes identically and
    the matrix equals the single layer; at degree 1 the correction is the
    face single layer conjugated by the edge-to-face incidence matrix.
    """
    _check_degree(p)
    k = complex(k)
    if k == 0:
        raise ValueError("the divergence-corrected single layer needs k != 0")
    options = options or _DEFAULT_OPTIONS
    if p == 0:
        base = assemble_V(mesh, 0, k, options=options)
        return GalerkinBlock(base.matrix, base.row_space, base.col_space, k, p)
    div1 = form_space(mesh, 1, DIV)
    tab = _whitney_tables(div1)
    jobv = _new_job("g", tab, tab)
    tabf = _face_density_tables(mesh)
    jobf = _new_job("g", tabf, tabf)
    _sweep(mesh, k, [jobv, jobf], options)
    matrix = jobv.out - _divdiv_term(mesh, jobf.out) / (k * k)
    return GalerkinBlock(_frozen(matrix), div1, div1, k, p)


def assemble_D(mesh: SurfaceMesh, p: int, k, *, options: AssemblyOptions | None = None) -> GalerkinBlock:
    """Hypersingular operator through its integration-by-parts weak form.

    Degree 1:  (div-weak term) - k^2 V_1;  degree 0:  the rotated-gradient
    single layer minus k^2 times the normal-weighted single layer.  Both
    compose weakly singular blocks with integer incidence matrices, so no
    strongly singular quadrature is involved.  At k = 0 the matrix is
    positive semidefinite with the expected kernel (constants at degree 0,
    gradients at degree 1).
    """
    _check_degree(p)
    k = complex(k)
    options = options or _DEFAULT_OPTIONS
    if p == 1:
        curl1 = form_space(mesh, 1, CURL)
        div1 = form_space(mesh, 1, DIV)
        tab = _whitney_tables(div1)
        jobv = _new_job("g", tab, tab)
        tabf = _face_density_tables(mesh)
        jobf = _new_job("g", tabf, tabf)
        _sweep(mesh, k, [jobv, jobf], options)
        matrix = _divdiv_term(mesh, jobf.out) - (k * k) * jobv.out
        return GalerkinBlock(_frozen(matrix), curl1, curl1, k, p)
    space0 = form_space(mesh, 0)
    div1 = form_space(mesh, 1, DIV)
    tabd = _whitney_tables(div1)
    jobv = _new_job("g", tabd, tabd)
    tabn = _scalar_normal_tables(mesh)
    jobn = _new_job("g", tabn, tabn)
    _sweep(mesh, k, [jobv, jobn], options)
    d0 = incidence_d(mesh, 0).toarray()
    matrix = d0.T @ jobv.out @ d0 - (k * k) * jobn.out
    return GalerkinBlock(_frozen(matrix), space0, space0, k, p)


# ---------------------------------------------------------------------------
# Calderon projectors
# ---------------------------------------------------------------------------


def _lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(a, b, rcond=None)[0]


def _project_quotient(d0: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Representative orthogonal to the exact (gradient) coefficients."""
    return x - d0 @ _lstsq(d0, x)


def _project_solenoidal(d1: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Component in the kernel of the edge-to-face incidence matrix."""
    return x - d1.T @ _lstsq(d1.T, x)


def _project_range(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    return m @ _lstsq(m, x)


class CalderonOperator:
    """Block boundary operator with the projector action ``1/2 I +- A``.

    ``blocks`` is the 2 x 2 matrix of :class:`GalerkinBlock` weak forms of
    A in the mixed duality pairing; ``apply`` maps a coefficient pair to
    the projector image, solving the pairing Gram on each row.  ``side``
    selects the interior (+) or exterior (-) projector.  For ``k = 0`` the
    inputs must satisfy the static subspace constraints (quotient
    representative in the first slot, solenoidal second slot at degree 1);
    violations beyond ``tol`` raise :class:`OperatorError` and the output
    is projected back onto the same subspaces.
    """

    def __init__(self, mesh, blocks, side, k, p, adapted, grams, constraints, tol=1e-8):
        if side not in (INTERIOR, EXTERIOR):
            raise ValueError(f"side must be {INTERIOR!r} or {EXTERIOR!r}")
        self.mesh = mesh
        self.blocks = blocks
        self.side = side
        self.k = complex(k)
        self.p = p
        self.adapted = adapted
        self._grams = grams  # per-row (matrix, transposed?) or ("diag", vector)
        self._constraints = constraints  # per-slot callable or None
        self.tol = tol

    def _solve_row(self, row: int, weak: np.ndarray) -> np.ndarray:
        gram, transposed = self._grams[row]
        if gram.ndim == 1:
            return weak / gram
        # minimum-norm solve: the mixed degree-1 pairing is rank deficient
        # for lowest-order spaces, so a direct solve would amplify noise
        return _lstsq(gram.T if transposed else gram, weak)

    def gram_conditioning(self) -> tuple[float, ...]:
        """Spectral condition number of each row's pairing Gram."""
        conds = []
        for gram, _ in self._grams:
            if gram.ndim == 1:
                s = np.abs(gram)
                conds.append(float(s.max() / s.min()))
            else:
                s = np.linalg.svd(gram, compute_uv=False)
                floor = s[0] * np.finfo(float).eps
                conds.append(float(s[0] / max(s[-1], floor)))
        return tuple(conds)

    def _enforce(self, slot: int, x: np.ndarray, what: str) -> np.ndarray:
        project = self._constraints[slot]
        if project is None:
            return x
        proj = project(x)
        defect = np.linalg.norm(x - proj)
        scale = np.linalg.norm(x)
        if scale > 0 and defect > self.tol * scale:
            raise OperatorError(
                f"{what} violates the static subspace constraint "
                f"(relative defect {defect / scale:.2e})"
            )
        return proj

    def apply(self, beta: TraceVector, gamma: TraceVector) -> tuple[TraceVector, TraceVector]:
        b11 = self.blocks[0][0]
        b21 = self.blocks[1][0]
        if beta.space != b11.col_space:
            raise ValueError("first trace lives in the wrong space for this operator")
        if gamma.space != self.blocks[0][1].col_space:
            raise ValueError("second trace lives in the wrong space for this operator")
        x = self._enforce(0, np.asarray(beta.coeffs), "first trace")
        y = self._enforce(1, np.asarray(gamma.coeffs), "second trace")
        weak1 = self.blocks[0][0].matrix @ x + self.blocks[0][1].matrix @ y
        weak2 = b21.matrix @ x + self.blocks[1][1].matrix @ y
        a1 = self._solve_row(0, weak1)
        a2 = self._solve_row(1, weak2)
        sgn = 1.0 if self.side == INTERIOR else -1.0
        out1 = 0.5 * x + sgn * a1
        out2 = 0.5 * y + sgn * a2
        if self._constraints[0] is not None:
            out1 = self._constraints[0](out1)
        if self._constraints[1] is not None:
            out2 = self._constraints[1](out2)
        row1_space = self.blocks[0][0].col_space
        row2_space = self.blocks[0][1].col_space
        return TraceVector(row1_space, out1), TraceVector(row2_space, out2)


def calderon(
    mesh: SurfaceMesh,
    k,
    p: int,
    side: str = INTERIOR,
    *,
    options: AssemblyOptions | None = None,
    tol: float = 1e-8,
) -> CalderonOperator:
    """Calderon projector ``1/2 I +- A`` on (tangential, normal-derivative)
    trace pairs of degree ``p``.

    The off-diagonal single layer is the divergence-corrected one for
    ``k != 0`` and the plain one for ``k = 0``; the diagonal carries the
    double-layer pair, the second row the hypersingular block.  All five
    matrices come out of one quadrature sweep, so the inter-operator
    identities they satisfy hold to rounding.
    """
    _check_degree(p)
    k = complex(k)
    options = options or _DEFAULT_OPTIONS

    if p == 0:
        space0 = form_space(mesh, 0)
        tab = _whitney_tables(space0)
        tabn = _scalar_normal_tables(mesh)
        div1 = form_space(mesh, 1, DIV)
        tabd = _whitney_tables(div1)
        jk = _new_job("ny", tab, tab)
        jkd = _new_job("nx", tab, tab)
        jv = _new_job("g", tab, tab)
        jv1 = _new_job("g", tabd, tabd)
        jvn = _new_job("g", tabn, tabn)
        _sweep(mesh, k, [jk, jkd, jv, jv1, jvn], options)
        d0 = incidence_d(mesh, 0).toarray()
        dmat = d0.T @ jv1.out @ d0 - (k * k) * jvn.out
        vmat = jv.out  # the correction vanishes at degree 0
        blocks = (
            (
                GalerkinBlock(_frozen(-jk.out), space0, space0, k, p),
                GalerkinBlock(_frozen(vmat), space0, space0, k, p),
            ),
            (
                GalerkinBlock(_frozen(dmat), space0, space0, k, p),
                GalerkinBlock(_frozen(jkd.out), space0, space0, k, p),
            ),
        )
        mass = pairing_matrix(space0, space0).matrix
        grams = ((mass, False), (mass, True))
        constraints = (None, None)
        return CalderonOperator(mesh, blocks, side, k, p, False, grams, constraints, tol)

    div1 = form_space(mesh, 1, DIV)
    curl1 = form_space(mesh, 1, CURL)
    tdiv, tcurl = _whitney_tables(div1), _whitney_tables(curl1)
    jk = _new_job("dl", tdiv, tcurl)
    jkd = _new_job("adj", tcurl, tdiv)
    jv = _new_job("g", tdiv, tdiv)
    tabf = _face_density_tables(mesh)
    jf = _new_job("g", tabf, tabf)
    _sweep(mesh, k, [jk, jkd, jv, jf], options)
    tmat = _divdiv_term(mesh, jf.out)
    dmat = tmat - (k * k) * jv.out
    if k != 0:
        offdiag = jv.out - tmat / (k * k)
    else:
        offdiag = jv.out
    blocks = (
        (
            GalerkinBlock(_frozen(-jk.out), div1, curl1, k, p),
            GalerkinBlock(_frozen(offdiag), div1, div1, k, p),
        ),
        (
            GalerkinBlock(_frozen(dmat), curl1, curl1, k, p),
            GalerkinBlock(_frozen(jkd.out), curl1, div1, k, p),
        ),
    )
    pair = pairing_matrix(div1, curl1).matrix
    grams = ((pair, False), (pair, True))
    if k == 0:
        d0 = incidence_d(mesh, 0).toarray().astype(float)
        d1 = incidence_d(mesh, 1).toarray().astype(float)
        constraints = (
            lambda x: _project_quotient(d0, x),
            lambda x: _project_solenoidal(d1, x),
        )
    else:
        constraints = (None, None)
    return CalderonOperator(mesh, blocks, side, k, p, False, grams, constraints, tol)


# ---------------------------------------------------------------------------
# edge circulations of single-layer fields
# ---------------------------------------------------------------------------


def _edge_circulations(
    mesh: SurfaceMesh,
    k: complex,
    *,
    line_order: int = 6,
    panel_order: int = 6,
    onpanel_order: int = 10,
) -> np.ndarray:
    """Circulations ``int_e SL(w_j) . t dl`` of the div-basis single-layer
    fields along every mesh edge (low-to-high tangent).

    The outer rule is Gauss on each edge; the inner panel integrals switch
    between the plain rule, the subdivided near rule, and the on-panel
    fan rule for the two faces that contain the line node.
    """
    div1 = form_space(mesh, 1, DIV)
    tab = _whitney_tables(div1)
    F, E = mesh.num_triangles, mesh.num_edges
    corners = mesh.vertices[mesh.triangles]

    base = triangle_rule(panel_order)
    ybase = np.einsum("ql,fls->fqs", base.points, corners)  # (F, Q, 3)
    tybase = _eval_tables(tab, np.arange(F), np.broadcast_to(base.points, (F, *base.points.shape)))

    edge_faces = _edge_face_map(mesh)

    gl, glw = leggauss(line_order)
    gl = 0.5 * (gl + 1.0)
    glw = 0.5 * glw

    circ = np.zeros((E, E), dtype=complex)
    cent, diam, areas = mesh.centroids, mesh.diameters, mesh.areas
    for e in range(E):
        va, vb = mesh.vertices[mesh.edges[e]]
        length = np.linalg.norm(vb - va)
        tang = (vb - va) / length
        own = edge_faces[e]
        tyt = np.einsum("fqac,c->fqa", tybase, tang)
        for gnode, gw in zip(gl, glw):
            x = va + gnode * (vb - va)
            dist = np.linalg.norm(cent - x, axis=1)
            far = dist > 2.0 * diam
            far[own] = False
            gk = scalar_with_derivatives(3, k, np.linalg.norm(ybase[far] - x, axis=2))[0]
            vals = np.einsum("fq,q,fqa->fa", gk, base.weights, tyt[far]) * areas[far, None]
            np.add.at(circ[e], tab.dofs[far].ravel(), (gw * length) * vals.ravel())
            for f in np.nonzero(~far)[0]:
                if f in own:
                    tri = mesh.triangles[f]
                    lam = np.zeros(3)
                    lam[np.argmax(tri == mesh.edges[e, 0])] = 1.0 - gnode
                    lam[np.argmax(tri == mesh.edges[e, 1])] = gnode
                    rule = onpanel_rule(lam, onpanel_order)
                else:
                    rule = near_eval_rule(corners[f], x, base_order=panel_order)
                y = rule.points @ corners[f]
                gk = scalar_with_derivatives(3, k, np.linalg.norm(y - x, axis=1))[0]
                ty = tab.t0[f][None, :, :] + np.einsum("ql,alc->qac", rule.points, tab.t1[f])
                vals = areas[f] * np.einsum("q,q,qa->a", gk, rule.weights, ty @ tang)
                np.add.at(circ[e], tab.dofs[f], (gw * length) * vals)
    return circ


# ---------------------------------------------------------------------------
# symmetric (adapted-trace) Calderon operators
# ---------------------------------------------------------------------------


def symmetric_calderon(
    mesh: SurfaceMesh,
    k,
    p: int,
    *,
    options: AssemblyOptions | None = None,
    tol: float = 1e-8,
) -> CalderonOperator:
    """Calderon operator in adapted traces, where it becomes persymmetric.

    For ``k != 0`` the adapted pair is (ik . tangential trace, Hodge of the
    normal-derivative trace); at degree 1 both live in the same space and
    the operator takes the form ``[[-K, -C], [C, -K]]`` with
    ``C = ik Vtilde Hodge``.  For ``k = 0`` the adapted pair is (surface
    derivative of the tangential trace, Hodge of the normal-derivative
    trace) and the off-diagonal blocks couple the degree-1 and degree-2
    spaces: one is the face-tested surface derivative of a single-layer
    field, realized through edge circulations, the other reuses the face
    single layer under the incidence transpose.  The interior relation is
    returned (side ``interior``; the exterior projector flips the sign of
    A as usual).
    """
    _check_degree(p)
    k = complex(k)
    options = options or _DEFAULT_OPTIONS
    space0 = form_space(mesh, 0)
    div1 = form_space(mesh, 1, DIV)
    curl1 = form_space(mesh, 1, CURL)
    space2 = form_space(mesh, 2)
    areas = mesh.areas

    if p == 1 and k != 0:
        tdiv, tcurl = _whitney_tables(div1), _whitney_tables(curl1)
        tabf = _face_density_tables(mesh)
        jk = _new_job("dl", tdiv, tcurl)
        jv = _new_job("g", tdiv, tdiv)
        jf = _new_job("g", tabf, tabf)
        _sweep(mesh, k, [jk, jv, jf], options)
        vtilde = jv.out - _divdiv_term(mesh, jf.out) / (k * k)
        c = 1j * k * vtilde
        blocks = (
            (
                GalerkinBlock(_frozen(-jk.out), div1, curl1, k, p),
                GalerkinBlock(_frozen(-c), div1, curl1, k, p),
            ),
            (
                GalerkinBlock(_frozen(c.copy()), div1, curl1, k, p),
                GalerkinBlock(_frozen(-jk.out.copy()), div1, curl1, k, p),
            ),
        )
        pair = pairing_matrix(div1, curl1).matrix
        grams = ((pair, False), (pair, False))
        return CalderonOperator(
            mesh, blocks, INTERIOR, k, p, True, grams, (None, None), tol
        )

    if p == 1:  # k == 0, slots (face derivative of beta, Hodge of gamma)
        tdiv, tcurl = _whitney_tables(div1), _whitney_tables(curl1)
        tabf = _face_density_tables(mesh)
        jk = _new_job("dl", tdiv, tcurl)
        jk2 = _new_job("nx", tabf, tabf)
        jf = _new_job("g", tabf, tabf)
        _sweep(mesh, k, [jk, jk2, jf], options)
        circ = _edge_circulations(mesh, k)
        d1 = incidence_d(mesh, 1).toarray()
        b12 = -(d1 @ circ) / areas[:, None]
        b21 = d1.T @ jf.out
        blocks = (
            (
                GalerkinBlock(_frozen(jk2.out), space2, space2, k, p),
                GalerkinBlock(_frozen(b12), space2, curl1, k, p),
            ),
            (
                GalerkinBlock(_frozen(b21), div1, space2, k, p),
                GalerkinBlock(_frozen(-jk.out), div1, curl1, k, p),
            ),
        )
        pair = pairing_matrix(div1, curl1).matrix
        grams = ((1.0 / areas, False), (pair, False))
        d1f = d1.astype(float)
        constraints = (
            lambda t: _project_range(d1f, t),
            lambda a: _project_solenoidal(d1f, a),
        )
        return CalderonOperator(
            mesh, blocks, INTERIOR, k, p, True, grams, constraints, tol
        )

    if k != 0:  # p == 0, slots (ik beta on hats, Hodge of gamma on faces)
        tab0 = _whitney_tables(space0)
        tabn = _scalar_normal_tables(mesh)
        tabf = _face_density_tables(mesh)
        tabfn = _face_density_normal_tables(mesh)
        jk = _new_job("ny", tab0, tab0)
        jk2 = _new_job("nx", tabf, tabf)
        jrect = _new_job("g", tab0, tabf)
        jnun = _new_job("g", tabfn, tabn)
        _sweep(mesh, k, [jk, jk2, jrect, jnun], options)
        circ = _edge_circulations(mesh, k)
        d0 = incidence_d(mesh, 0).toarray()
        d1 = incidence_d(mesh, 1).toarray()
        c21 = 1j * k * jnun.out + (1j / k) * (d1 @ circ @ d0) / areas[:, None]
        blocks = (
            (
                GalerkinBlock(_frozen(-jk.out), space0, space0, k, p),
                GalerkinBlock(_frozen(1j * k * jrect.out), space0, space2, k, p),
            ),
            (
                GalerkinBlock(_frozen(c21), space2, space0, k, p),
                GalerkinBlock(_frozen(jk2.out), space2, space2, k, p),
            ),
        )
        mass = pairing_matrix(space0, space0).matrix
        grams = ((mass, False), (1.0 / areas, False))
        return CalderonOperator(
            mesh, blocks, INTERIOR, k, p, True, grams, (None, None), tol
        )

    # p == 0, k == 0: slots (surface derivative of beta, Hodge of gamma)
    tdiv, tcurl = _whitney_tables(div1), _whitney_tables(curl1)
    tabf = _face_density_tables(mesh)
    jk = _new_job("dl", tdiv, tcurl)
    jk2 = _new_job("nx", tabf, tabf)
    jf = _new_job("g", tabf, tabf)
    _sweep(mesh, k, [jk, jk2, jf], options)
    circ = _edge_circulations(mesh, k)
    d0 = incidence_d(mesh, 0).toarray()
    d1 = incidence_d(mesh, 1).toarray()
    b12 = d1.T @ jf.out
    b21 = -(d1 @ circ) / areas[:, None]
    blocks = (
        (
            GalerkinBlock(_frozen(-jk.out), div1, curl1, k, p),
            GalerkinBlock(_frozen(b12), div1, space2, k, p),
        ),
        (
            GalerkinBlock(_frozen(b21), space2, curl1, k, p),
            GalerkinBlock(_frozen(jk2.out), space2, space2, k, p),
        ),
    )
    pair = pairing_matrix(div1, curl1).matrix
    grams = ((pair, False), (1.0 / areas, False))
    d0f = d0.astype(float)
    constraints = (lambda a: _project_range(d0f, a), None)
    return CalderonOperator(mesh, blocks, INTERIOR, k, p, True, grams, constraints, tol)


# ---------------------------------------------------------------------------
# duality transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdaptedTraces:
    """Adapted trace pair for ``k != 0``: ``ik`` times the tangential trace
    and the surface Hodge of the normal-derivative trace, both curl-side."""

    p: int
    dirichlet: TraceVector
    neumann: TraceVector

    def __post_init__(self) -> None:
        if self.p not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1, or 2, got {self.p}")
        if self.dirichlet.space.p != self.p:
            raise ValueError("first trace degree does not match p")
        if self.neumann.space.p != 2 - self.p:
            raise ValueError("second trace must have the complementary degree 2 - p")


@dataclass(frozen=True)
class DualPair:
    """Static boundary pair for the ``k = 0`` duality transform.

    ``beta`` is curl-side of degree ``p``; ``gamma`` is the div-side
    partner, carried at degree 1 in the div space and at degree 0 through
    its Hodge image in the face space (integral dofs), which keeps the
    transform exact on the discrete complex.
    """

    p: int
    beta: TraceVector
    gamma: TraceVector

    def __post_init__(self) -> None:
        if self.p not in (0, 1):
            raise ValueError(f"degree must be 0 or 1, got {self.p}")
        if self.beta.space.p != self.p:
            raise ValueError("beta degree does not match p")
        if self.p == 1:
            if self.beta.space.flavor != CURL or self.gamma.space != form_space(
                self.beta.space.mesh, 1, DIV
            ):
                raise ValueError("degree-1 pairs need (curl beta, div gamma)")
        elif self.gamma.space.p != 2:
            raise ValueError(
                "degree-0 pairs carry gamma as its Hodge image in the face space"
            )


def adapted_traces(data, k) -> AdaptedTraces:
    """Build the adapted pair (ik beta, Hodge gamma) from standard data."""
    from .mesh import surface_hodge_apply

    k = complex(k)
    if k == 0:
        raise ValueError("adapted traces are defined for k != 0")
    beta, gamma = data.beta, data.gamma
    dirichlet = TraceVector(beta.space, 1j * k * np.asarray(beta.coeffs))
    neumann = surface_hodge_apply(gamma)
    return AdaptedTraces(beta.space.p, dirichlet, neumann)


def dual_pair(data) -> DualPair:
    """Build a static pair from standard boundary data (degree 0 moves the
    div-side trace into the face space through the Hodge projection)."""
    from .mesh import surface_hodge_apply

    p = data.beta.space.p
    if p == 1:
        return DualPair(1, data.beta, data.gamma)
    return DualPair(0, data.beta, surface_hodge_apply(data.gamma))


def dual_transform(data, k, p: int, *, tol: float = 1e-8):
    """Swap a solution's boundary data for the dual solution's data.

    ``k != 0`` (expects :class:`AdaptedTraces`): the adapted pair swaps
    slots, with the sign ``(-1)^(p (2 - p))`` on the new second slot; the
    dual field has degree ``2 - p``.  Applying the transform twice
    reproduces the input up to that sign.

    ``k = 0`` (expects :class:`DualPair`): solves the discrete potential
    equation  (surface derivative of new beta) = (Hodge of gamma)  by
    least squares — exact when gamma satisfies its constraint, otherwise
    an :class:`OperatorError` reports the relative residual — and sets the
    new gamma to ``(-1)^(p+1)`` times the Hodge of the surface derivative
    of beta.  The output degree is ``1 - p`` and the double application is
    the identity on quotient representatives.
    """
    k = complex(k)
    if k != 0:
        if not isinstance(data, AdaptedTraces):
            raise TypeError("dual_transform with k != 0 expects AdaptedTraces")
        if data.p != p:
            raise ValueError(f"data has degree {data.p}, expected {p}")
        sign = -1.0 if (p * (2 - p)) % 2 else 1.0
        new_neumann = TraceVector(
            data.dirichlet.space, sign * np.asarray(data.dirichlet.coeffs)
        )
        return AdaptedTraces(2 - p, data.neumann, new_neumann)

    if not isinstance(data, DualPair):
        raise TypeError("dual_transform with k = 0 expects DualPair")
    if data.p != p:
        raise ValueError(f"data has degree {data.p}, expected {p}")
    mesh = data.beta.space.mesh
    d0 = incidence_d(mesh, 0).toarray().astype(float)
    d1 = incidence_d(mesh, 1).toarray().astype(float)

    if p == 1:
        gamma = np.asarray(data.gamma.coeffs)
        # Hodge of the div-side gamma has negated coefficients on the curl side
        rhs = -gamma
        sol, residual = _solve_consistent(d0, rhs, tol, "gamma is not solenoidal")
        new_beta = TraceVector(form_space(mesh, 0), sol)
        new_gamma = TraceVector(
            form_space(mesh, 2), d1 @ np.asarray(data.beta.coeffs)
        )
        return DualPair(0, new_beta, new_gamma)

    t = np.asarray(data.gamma.coeffs)  # face realization carries the dofs
    sol, residual = _solve_consistent(d1, t, tol, "gamma has a nonzero mean")
    new_beta = TraceVector(form_space(mesh, 1, CURL), sol)
    new_gamma = TraceVector(
        form_space(mesh, 1, DIV), -(d0 @ np.asarray(data.beta.coeffs))
    )
    return DualPair(1, new_beta, new_gamma)


def _solve_consistent(a: np.ndarray, b: np.ndarray, tol: float, what: str) -> tuple[np.ndarray, float]:
    sol = _lstsq(a, b)
    resid = np.linalg.norm(a @ sol - b)
    scale = np.linalg.norm(b)
    if scale > 0 and resid > tol * scale:
        raise OperatorError(f"{what}: relative potential residual {resid / scale:.2e}")
    return sol, resid


# ---------------------------------------------------------------------------
# matrix export
# ---------------------------------------------------------------------------


def mesh_hash(mesh: SurfaceMesh) -> str:
    """Hex digest identifying the mesh geometry and connectivity."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(mesh.triangles, dtype="<i8").tobytes())
    return h.hexdigest()


def _space_tag(space: FormSpace) -> dict:
    return {"degree": space.p, "flavor": space.flavor, "dofs": space.dof_count}


def export_block(block: GalerkinBlock, base_path) -> tuple[Path, Path]:
    """Write a block as flat binary (row-major complex128, little endian)
    next to a JSON sidecar with the space tags, wave number, and mesh hash."""
    base = Path(base_path)
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    matrix = np.ascontiguousarray(block.matrix, dtype="<c16")
    bin_path.write_bytes(matrix.tobytes())
    meta = {
        "schema": 1,
        "shape": list(matrix.shape),
        "dtype": "complex128-le",
        "k": [block.k.real, block.k.imag],
        "degree": block.p,
        "row_space": _space_tag(block.row_space),
        "col_space": _space_tag(block.col_space),
        "mesh_hash": mesh_hash(block.row_space.mesh),
    }
    json_path.write_text(json.dumps(meta, indent=1) + "\n")
    return bin_path, json_path


def load_block(base_path, mesh: SurfaceMesh) -> GalerkinBlock:
    """Read back an exported block, checking the sidecar against the mesh."""
    base = Path(base_path)
    meta = json.loads(base.with_suffix(".json").read_text())
    if meta.get("schema") != 1:
        raise ValueError(f"unsupported export schema {meta.get('schema')!r}")
    if meta["mesh_hash"] != mesh_hash(mesh):
        raise ValueError("exported block belongs to a different mesh")
    shape = tuple(meta["shape"])
    matrix = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<c16").reshape(shape)
    spaces = []
    for tag in (meta["row_space"], meta["col_space"]):
        spaces.append(form_space(mesh, tag["degree"], tag["flavor"]))
        if spaces[-1].dof_count != tag["dofs"]:
            raise ValueError("space tag does not match the mesh")
    k = complex(meta["k"][0], meta["k"][1])
    return GalerkinBlock(_frozen(matrix.copy()), spaces[0], spaces[1], k, meta["degree"])

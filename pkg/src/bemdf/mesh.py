"""Oriented triangulated surfaces and discrete surface form spaces.

A :class:`SurfaceMesh` is a closed, consistently oriented triangle mesh in
R^3 that is topologically a sphere (every edge shared by exactly two
triangles that traverse it in opposite directions, one connected component,
V - E + F = 2).  On top of it live the lowest-order form spaces

* degree 0 - continuous hats, one dof per vertex,
* degree 1 - Whitney edge elements, one dof per edge, in two flavors
  (curl-conforming, and its in-plane 90-degree rotation, div-conforming),
* degree 2 - per-face constant densities, one dof per triangle,

together with the integer incidence matrices realizing the discrete exterior
derivative, the duality pairing matrices, and the discrete surface Hodge
map.

Degree-1 dof convention: the edge dof is the line integral along the edge
traversed from its lower-numbered to its higher-numbered vertex.  Whitney
functions returned by :func:`whitney_eval` carry that global orientation, so
assembly never needs per-element sign flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exterior import PCov, PVec, hodge, riesz

__all__ = [
    "CURL",
    "DIV",
    "FormSpace",
    "GalerkinBlock",
    "MeshError",
    "SurfaceMesh",
    "TraceVector",
    "form_space",
    "icosphere",
    "incidence_d",
    "load_off",
    "pairing_matrix",
    "save_off",
    "surface_hodge_apply",
    "whitney_eval",
]

CURL = "curl-conforming"
DIV = "div-conforming"

MAX_ICOSPHERE_LEVEL = 5


class MeshError(Exception):
    """Raised for invalid mesh topology, orientation, or file contents."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class SurfaceMesh:
    """Closed oriented triangle mesh with precomputed topology and geometry.

    Attributes
    ----------
    vertices : (V, 3) float array
    triangles : (F, 3) int array, ordered so the right-hand rule gives the
        surface normal
    edges : (E, 2) int array of canonical (low, high) vertex pairs, sorted
        lexicographically
    tri_edges : (F, 3) int array; local edge a of face f joins local
        vertices a and a+1 (mod 3) and ``tri_edges[f, a]`` is its global id
    tri_edge_signs : (F, 3) int array; +1 when the face traverses the edge
        low-to-high, -1 otherwise
    tri_edge_endpoints : (F, 3, 2) int array of local vertex indices per
        local edge, ordered so the first has the smaller global index
    areas, normals, centroids, diameters : per-face geometry
    bary_grads : (F, 3, 3) array; ``bary_grads[f, a]`` is the (tangential)
        gradient of the barycentric coordinate of local vertex a
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray) -> None:
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (V, 3) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (F, 3) array")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError("triangle vertex index out of range")
        if len(triangles) == 0:
            raise MeshError("mesh has no triangles")

        self.vertices = _frozen(vertices)
        self.triangles = _frozen(triangles)
        self._build_topology()
        self._build_geometry()

    # -- construction ------------------------------------------------------

    def _build_topology(self) -> None:
        tris = self.triangles
        # local edge a joins local vertices a and a+1
        heads = tris[:, [0, 1, 2]]
        tails = tris[:, [1, 2, 0]]
        lo = np.minimum(heads, tails)
        hi = np.maximum(heads, tails)
        flat = np.column_stack([lo.ravel(), hi.ravel()])
        edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        counts = np.bincount(inverse, minlength=len(edges))
        if counts.max() > 2:
            raise MeshError("non-manifold edge (shared by more than two triangles)")
        if counts.min() < 2:
            raise MeshError("open boundary (edge with a single incident triangle)")
        signs = np.where(heads < tails, 1, -1)
        # consistent orientation: the two traversals of each edge must be
        # opposite, so the per-edge sign sum vanishes
        sign_sum = np.zeros(len(edges), dtype=np.int64)
        np.add.at(sign_sum, inverse, signs.ravel())
        if np.any(sign_sum != 0):
            raise MeshError("inconsistent orientation (edge traversed twice the same way)")

        self.edges = _frozen(edges)
        self.tri_edges = _frozen(inverse.reshape(len(tris), 3))
        self.tri_edge_signs = _frozen(signs.astype(np.int64))

        if len(self.vertices) - len(edges) + len(tris) != 2:
            raise MeshError("mesh is not sphere-like (V - E + F != 2)")
        self._check_connected()

        # local endpoints of edge a in global low-to-high order
        local_pairs = np.empty((len(tris), 3, 2), dtype=np.int64)
        a_idx = np.array([0, 1, 2])
        b_idx = np.array([1, 2, 0])
        fwd = self.tri_edge_signs > 0
        local_pairs[:, :, 0] = np.where(fwd, a_idx, b_idx)
        local_pairs[:, :, 1] = np.where(fwd, b_idx, a_idx)
        self.tri_edge_endpoints = _frozen(local_pairs)

    def _check_connected(self) -> None:
        # union-find over faces glued along shared edges
        parent = np.arange(len(self.triangles))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        edge_face: dict[int, int] = {}
        for f, row in enumerate(self.tri_edges):
            for e in row:
                if e in edge_face:
                    ra, rb = find(edge_face[e]), find(f)
                    parent[ra] = rb
                else:
                    edge_face[e] = f
        roots = {find(f) for f in range(len(self.triangles))}
        if len(roots) != 1:
            raise MeshError("mesh has multiple connected components")

    def _build_geometry(self) -> None:
        v = self.vertices[self.triangles]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        cross = np.cross(e1, e2)
        doubled = np.linalg.norm(cross, axis=1)
        if np.any(doubled <= 0):
            raise MeshError("degenerate (zero-area) triangle")
        self.areas = _frozen(0.5 * doubled)
        self.normals = _frozen(cross / doubled[:, None])
        self.centroids = _frozen(v.mean(axis=1))
        self.diameters = _frozen(
            np.max(
                [
                    np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
                    np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
                    np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
                ],
                axis=0,
            )
        )
        # gradient of hat a: rotate the opposite edge into the triangle
        grads = np.empty((len(self.triangles), 3, 3))
        for a in range(3):
            opposite = v[:, (a + 2) % 3] - v[:, (a + 1) % 3]
            grads[:, a, :] = np.cross(self.normals, opposite) / doubled[:, None]
        self.bary_grads = _frozen(grads)

    # -- conveniences ------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive iff normals point outward."""
        flux = np.einsum("ij,ij,i->", self.centroids, self.normals, self.areas)
        return float(flux / 3.0)

    def triangle_coords(self, f: int) -> np.ndarray:
        return self.vertices[self.triangles[f]]

    def save_off(self, path) -> None:
        save_off(self, path)

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        return (
            f"SurfaceMesh(V={self.num_vertices}, E={self.num_edges}, "
            f"F={self.num_triangles})"
        )


# ---------------------------------------------------------------------------
# Construction and I/O
# ---------------------------------------------------------------------------

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array(
    [
        [-1, _GOLDEN, 0], [1, _GOLDEN, 0], [-1, -_GOLDEN, 0], [1, -_GOLDEN, 0],
        [0, -1, _GOLDEN], [0, 1, _GOLDEN], [0, -1, -_GOLDEN], [0, 1, -_GOLDEN],
        [_GOLDEN, 0, -1], [_GOLDEN, 0, 1], [-_GOLDEN, 0, -1], [-_GOLDEN, 0, 1],
    ],
    dtype=float,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def icosphere(level: int, radius: float = 1.0) -> SurfaceMesh:
    """Icosahedron subdivided ``level`` times, vertices on the radius sphere."""
    if not 0 <= level <= MAX_ICOSPHERE_LEVEL:
        raise MeshError(f"icosphere level must be 0..{MAX_ICOSPHERE_LEVEL}, got {level}")
    if not radius > 0:
        raise MeshError("icosphere radius must be positive")

    verts = [row for row in _ICO_VERTS]
    faces = _ICO_FACES
    for _ in range(level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                midpoint[key] = len(verts)
                verts.append(0.5 * (verts[a] + verts[b]))
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = np.array(new_faces, dtype=np.int64)

    coords = np.array(verts)
    coords *= radius / np.linalg.norm(coords, axis=1)[:, None]
    mesh = SurfaceMesh(coords, faces)
    if mesh.signed_volume() < 0:  # pragma: no cover - face table is outward
        mesh = SurfaceMesh(coords, faces[:, [0, 2, 1]])
    return mesh


def load_off(path) -> SurfaceMesh:
    """Read the ASCII OFF subset: "OFF", "V F 0", coordinates, "3 i j k"."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [
            stripped
            for raw in handle
            if (stripped := raw.split("#", 1)[0].strip())
        ]
    if not lines or lines[0] != "OFF":
        raise MeshError("not an OFF file (missing OFF header)")
    try:
        nv, nf, _ = (int(tok) for tok in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise MeshError("malformed OFF counts line") from exc
    if len(lines) != 2 + nv + nf:
        raise MeshError(
            f"OFF line count mismatch: expected {2 + nv + nf}, found {len(lines)}"
        )
    try:
        verts = np.array(
            [[float(tok) for tok in line.split()] for line in lines[2 : 2 + nv]]
        )
        faces = []
        for line in lines[2 + nv :]:
            toks = [int(tok) for tok in line.split()]
            if toks[0] != 3 or len(toks) != 4:
                raise MeshError("only triangle faces are supported")
            faces.append(toks[1:])
    except ValueError as exc:
        raise MeshError("malformed OFF body") from exc
    return SurfaceMesh(verts, np.array(faces, dtype=np.int64))


def save_off(mesh: SurfaceMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("OFF\n")
        handle.write(f"{mesh.num_vertices} {mesh.num_triangles} 0\n")
        for x, y, z in mesh.vertices:
            handle.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for i, j, k in mesh.triangles:
            handle.write(f"3 {i} {j} {k}\n")


# ---------------------------------------------------------------------------
# Form spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormSpace:
    """Discrete space of surface p-forms on a fixed mesh."""

    mesh: SurfaceMesh = field(repr=False)
    p: int
    flavor: str
    dof_count: int

    def local_dofs(self, f: int) -> np.ndarray:
        """Global dof indices of face ``f`` in local order."""
        if self.p == 0:
            return self.mesh.triangles[f]
        if self.p == 1:
            return self.mesh.tri_edges[f]
        return np.array([f])

    @property
    def local_size(self) -> int:
        return 1 if self.p == 2 else 3


def form_space(mesh: SurfaceMesh, p: int, flavor: str | None = None) -> FormSpace:
    """Build a form space; degree 1 requires an explicit flavor choice."""
    if p not in (0, 1, 2):
        raise ValueError(f"form degree must be 0, 1, or 2, got {p}")
    if p == 1:
        if flavor not in (CURL, DIV):
            raise ValueError("degree-1 spaces need flavor CURL or DIV")
    else:
        default = CURL if p == 0 else DIV
        if flavor is None:
            flavor = default
        elif flavor != default:
            raise ValueError(
                f"degree-{p} spaces carry the fixed flavor {default!r}"
            )
    counts = {0: mesh.num_vertices, 1: mesh.num_edges, 2: mesh.num_triangles}
    return FormSpace(mesh, p, flavor, counts[p])


@dataclass(frozen=True)
class TraceVector:
    """Coefficient vector over a form space."""

    space: FormSpace
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.space.dof_count,):
            raise ValueError(
                f"coefficient length {coeffs.shape} does not match "
                f"dof count {self.space.dof_count}"
            )
        object.__setattr__(self, "coeffs", _frozen(coeffs))


@dataclass(frozen=True)
class GalerkinBlock:
    """Dense Galerkin matrix tagged with its row/column spaces."""

    matrix: np.ndarray
    row_space: FormSpace
    col_space: FormSpace
    k: complex
    p: int

    def __post_init__(self) -> None:
        expected = (self.row_space.dof_count, self.col_space.dof_count)
        if self.matrix.shape != expected:
            raise ValueError(f"matrix shape {self.matrix.shape} != {expected}")


# ---------------------------------------------------------------------------
# Incidence / exterior derivative
# ---------------------------------------------------------------------------

def incidence_d(mesh: SurfaceMesh, p: int) -> sp.csr_matrix:
    """Integer matrix of the discrete exterior derivative on degree ``p``.

    Degree 0 maps vertex values to edge circulations (rows are edges, -1 at
    the low vertex, +1 at the high vertex); degree 1 maps edge values to
    face circulations (rows are faces, traversal signs).  Their product
    vanishes identically.
    """
    if p == 0:
        rows = np.repeat(np.arange(mesh.num_edges), 2)
        cols = mesh.edges.ravel()
        vals = np.tile(np.array([-1, 1], dtype=np.int64), mesh.num_edges)
        shape = (mesh.num_edges, mesh.num_vertices)
    elif p == 1:
        rows = np.repeat(np.arange(mesh.num_triangles), 3)
        cols = mesh.tri_edges.ravel()
        vals = mesh.tri_edge_signs.ravel()
        shape = (mesh.num_triangles, mesh.num_edges)
    else:
        raise ValueError(f"incidence degree must be 0 or 1, got {p}")
    return sp.csr_matrix((vals, (rows, cols)), shape=shape, dtype=np.int64)


# ---------------------------------------------------------------------------
# Whitney forms
# ---------------------------------------------------------------------------

def whitney_eval(
    space: FormSpace, tri: int, barycentric
) -> tuple[PCov, ...]:
    """Values of the local basis of ``space`` on face ``tri``.

    Returns one ambient covector per local dof, tangent to the face, with
    the global dof orientation already applied (see module docstring).
    """
    lam = np.asarray(barycentric, dtype=float)
    if lam.shape != (3,):
        raise ValueError("barycentric coordinates must be a triple")
    if lam.min() < -1e-12 or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError(f"point {lam} lies outside the element")

    mesh = space.mesh
    if space.p == 0:
        return tuple(PCov(3, 0, np.array([lam[a]], dtype=complex)) for a in range(3))

    if space.p == 1:
        grads = mesh.bary_grads[tri]
        out = []
        for a in range(3):
            i, j = mesh.tri_edge_endpoints[tri, a]
            vec = lam[i] * grads[j] - lam[j] * grads[i]
            if space.flavor == DIV:
                vec = np.cross(mesh.normals[tri], vec)
            out.append(riesz(PVec(3, 1, vec.astype(complex))))
        return tuple(out)

    # degree 2: the unit-integral density (1/A) dS, dS = hodge of the normal
    dS = hodge(riesz(PVec(3, 1, mesh.normals[tri].astype(complex))))
    return (PCov(3, 2, dS.coeffs / mesh.areas[tri]),)


# ---------------------------------------------------------------------------
# Duality pairings
# ---------------------------------------------------------------------------

def _whitney_coeff_tables(space: FormSpace):
    """Per-face arrays (c0, c1) with basis_a(lam) = c0[f,a] + lam @ c1[f,a].

    Each basis value is an ambient 3-vector proxy (constant for degree 2,
    affine in the barycentric coordinates for degrees 0 and 1, where the
    degree-0 "vector" is the scalar hat value in slot 0).
    """
    mesh = space.mesh
    F = mesh.num_triangles
    if space.p == 0:
        c0 = np.zeros((F, 3, 3))
        c1 = np.zeros((F, 3, 3, 3))
        for a in range(3):
            c1[:, a, a, 0] = 1.0  # value = lam_a in slot 0
        return c0, c1
    if space.p == 1:
        grads = mesh.bary_grads
        c0 = np.zeros((F, 3, 3))
        c1 = np.zeros((F, 3, 3, 3))
        ii = mesh.tri_edge_endpoints[:, :, 0]
        jj = mesh.tri_edge_endpoints[:, :, 1]
        rows = np.arange(F)[:, None]
        gi = grads[rows, ii]  # (F, 3, 3)
        gj = grads[rows, jj]
        for a in range(3):
            for lam_idx in range(3):
                sel_i = ii[:, a] == lam_idx
                sel_j = jj[:, a] == lam_idx
                c1[sel_i, a, lam_idx, :] += gj[sel_i, a]
                c1[sel_j, a, lam_idx, :] -= gi[sel_j, a]
        if space.flavor == DIV:
            c1 = np.cross(mesh.normals[:, None, None, :], c1)
        return c0, c1
    c0 = (1.0 / mesh.areas)[:, None, None] * np.ones((F, 1, 1)) * np.array([1.0, 0, 0])
    c1 = np.zeros((F, 1, 3, 3))
    return c0, c1


def pairing_matrix(rows: FormSpace, cols: FormSpace) -> GalerkinBlock:
    """Duality pairing ``b(u_i, v_j) = int_G u_i ^ hodge(conj v_j)``.

    For equal flavors this is the (real symmetric) mass matrix; for the
    div-by-curl pairing of degree-1 spaces it is the antisymmetric
    edge-pairing matrix that converts between the flavors.
    """
    if rows.p != cols.p:
        raise ValueError(f"pairing needs equal degrees, got {rows.p} and {cols.p}")
    if rows.mesh is not cols.mesh:
        raise ValueError("pairing requires spaces over the same mesh")
    mesh = rows.mesh
    F = mesh.num_triangles

    # u ^ hodge(conj v) = <proxy u, proxy v> dS for every degree:
    # degree 0 pairs scalars, degree 1 pairs tangent vectors, degree 2
    # pairs densities (the 1/A proxies contract through <mu, mu> = 1).
    r0, r1 = _whitney_coeff_tables(rows)
    s0, s1 = _whitney_coeff_tables(cols)

    # quadratic in lam: exact with the degree-2 rule
    from .quadrature import triangle_rule

    rule = triangle_rule(2)
    lam_nodes = rule.points  # (Q, 3)
    w = rule.weights

    nr, nc = rows.local_size, cols.local_size
    local = np.zeros((F, nr, nc))
    for q in range(len(w)):
        lam = lam_nodes[q]
        ru = r0 + np.einsum("l,falv->fav", lam, r1)  # (F, nr, 3)
        sv = s0 + np.einsum("l,falv->fav", lam, s1)
        local += w[q] * np.einsum("fav,fbv->fab", ru, sv)
    local *= mesh.areas[:, None, None]

    matrix = np.zeros((rows.dof_count, cols.dof_count), dtype=complex)
    rdofs = np.array([rows.local_dofs(f) for f in range(F)])
    cdofs = np.array([cols.local_dofs(f) for f in range(F)])
    np.add.at(
        matrix,
        (rdofs[:, :, None], cdofs[:, None, :]),
        local.astype(complex),
    )
    return GalerkinBlock(matrix, rows, cols, 0.0 + 0.0j, rows.p)


# ---------------------------------------------------------------------------
# Discrete surface Hodge
# ---------------------------------------------------------------------------

def surface_hodge_apply(x: TraceVector) -> TraceVector:
    """Apply the discrete surface Hodge map to a trace vector.

    Degree 1 swaps the flavor: the div basis is defined as the Hodge image
    of the curl basis, so curl -> div keeps the coefficients and div ->
    curl negates them (the double application is -identity, matching the
    degree signs on a surface).  Degrees 0 and 2 transfer through the mass
    matrices by Galerkin projection.
    """
    space = x.space
    mesh = space.mesh
    if space.p == 1:
        target = form_space(mesh, 1, DIV if space.flavor == CURL else CURL)
        coeffs = x.coeffs if space.flavor == CURL else -x.coeffs
        return TraceVector(target, coeffs)
    if space.p == 0:
        # hodge of sum a_i lam_i is the density with the same pointwise
        # values; project onto per-face constants
        target = form_space(mesh, 2)
        vert_avg = x.coeffs[mesh.triangles].mean(axis=1)
        return TraceVector(target, mesh.areas * vert_avg)
    if space.p == 2:
        # density back to vertex hats: mass-matrix projection
        target = form_space(mesh, 0)
        p0 = form_space(mesh, 0)
        mass = pairing_matrix(p0, p0).matrix
        rhs = np.zeros(mesh.num_vertices, dtype=complex)
        np.add.at(
            rhs,
            mesh.triangles.ravel(),
            np.repeat(x.coeffs / 3.0, 3),
        )
        return TraceVector(target, np.linalg.solve(mass, rhs))
    raise ValueError(f"unsupported degree {space.p}")

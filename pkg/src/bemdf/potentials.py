"""Off-surface evaluation of layer potentials and trace probing.

Evaluators take a surface density (a :class:`~bemdf.mesh.TraceVector`), a
wavenumber, and observation points away from the surface, and return ambient
covector field samples.  The guiding rule: every exterior derivative of a
potential is applied to the *kernel* analytically (through the radial
derivatives of the fundamental solution), never by differencing sampled
fields.  Finite differences appear only in the test suite.

Conventions baked in here:

* the single layer of a density with ambient proxy components ``s(y)`` is
  the componentwise scalar potential ``int s(y) g(|x - y|) dS(y)`` (the
  kernel conjugation of the underlying duality pairing cancels against the
  conjugated fundamental solution, leaving the plain kernel);
* the double layer is the literal composition ``-hodge d SL(hodge_inv
  density)`` with the inverse surface Hodge applied pointwise to the
  density field, not Galerkin-projected;
* jumps are exterior minus interior;
* points closer to the surface than 0.1 of the nearest panel's diameter are
  refused — that close in, one-sided limits belong to :func:`trace_probe`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .exterior import PCov, PVec, basis_masks, hodge, interior, merge_sign
from .kernels import fundamental_scalar, scalar_with_derivatives
from .mesh import (
    CURL,
    DIV,
    SurfaceMesh,
    TraceVector,
    form_space,
    incidence_d,
)
from .quadrature import near_eval_rule, triangle_rule

__all__ = [
    "EXTERIOR",
    "INTERIOR",
    "BoundaryData",
    "FieldSample",
    "PotentialError",
    "TraceEstimate",
    "eval_double_layer",
    "eval_exact_potential",
    "eval_maxwell_single_layer",
    "eval_representation",
    "eval_single_layer",
    "export_samples_csv",
    "point_side",
    "surface_divergence",
    "trace_probe",
]

INTERIOR = "interior"
EXTERIOR = "exterior"

GUARD_RATIO = 0.1
_DEFAULT_ORDER = 6


class PotentialError(Exception):
    """Raised for guard violations and inconsistent boundary data."""


@dataclass(frozen=True)
class BoundaryData:
    """Cauchy data of a degree-p field: Dirichlet, Neumann, normal traces.

    ``beta`` is the Dirichlet (tangential) trace in the curl-conforming
    degree-p space, ``gamma`` the Neumann trace in the div-conforming
    degree-p space, and ``phi`` the normal trace in the div-conforming
    degree-(p-1) space (absent for p = 0).  Flavors are only distinctive at
    degree 1; at the extreme degrees the mesh carries a single space each.
    """

    p: int
    beta: TraceVector
    gamma: TraceVector
    phi: TraceVector | None = None

    def __post_init__(self) -> None:
        if self.p not in (0, 1, 2):
            raise PotentialError(f"solution degree must be 0, 1, or 2, got {self.p}")
        if self.beta.space.p != self.p or self.gamma.space.p != self.p:
            raise PotentialError("beta and gamma must have the solution degree")
        if self.beta.space.mesh is not self.gamma.space.mesh:
            raise PotentialError("boundary data must live on one mesh")
        if self.p == 1:
            if self.beta.space.flavor != CURL:
                raise PotentialError("beta must be curl-conforming")
            if self.gamma.space.flavor != DIV:
                raise PotentialError("gamma must be div-conforming")
        if self.p == 0:
            if self.phi is not None:
                raise PotentialError("degree-0 data has no normal trace")
        else:
            if self.phi is None:
                raise PotentialError(f"degree-{self.p} data needs a normal trace phi")
            if self.phi.space.p != self.p - 1:
                raise PotentialError("phi must have degree p - 1")
            if self.phi.space.mesh is not self.beta.space.mesh:
                raise PotentialError("boundary data must live on one mesh")


@dataclass(frozen=True)
class FieldSample:
    """An ambient covector value at one observation point."""

    point: np.ndarray
    value: PCov
    side: str


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def _panel_distances(mesh: SurfaceMesh, x: np.ndarray) -> np.ndarray:
    """Exact distances from ``x`` to every panel (vectorized over panels)."""
    v = mesh.vertices[mesh.triangles]  # (F, 3, 3)
    w = x[None, :] - v[:, 0]
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    a = np.einsum("ij,ij->i", e1, e1)
    b = np.einsum("ij,ij->i", e1, e2)
    c = np.einsum("ij,ij->i", e2, e2)
    d = np.einsum("ij,ij->i", e1, w)
    e = np.einsum("ij,ij->i", e2, w)
    det = a * c - b * b
    s = (c * d - b * e) / det
    t = (a * e - b * d) / det
    inside = (s >= 0) & (t >= 0) & (s + t <= 1)
    h = np.abs(np.einsum("ij,ij->i", w, mesh.normals))

    def seg_dist(p0, p1):
        dvec = p1 - p0
        denom = np.einsum("ij,ij->i", dvec, dvec)
        tt = np.clip(np.einsum("ij,ij->i", x[None, :] - p0, dvec) / denom, 0.0, 1.0)
        return np.linalg.norm(x[None, :] - (p0 + tt[:, None] * dvec), axis=1)

    edge_min = np.min(
        [seg_dist(v[:, 0], v[:, 1]), seg_dist(v[:, 1], v[:, 2]), seg_dist(v[:, 2], v[:, 0])],
        axis=0,
    )
    return np.where(inside, h, edge_min)


def point_side(mesh: SurfaceMesh, point) -> str:
    """Interior/exterior classification by total signed solid angle."""
    x = np.asarray(point, dtype=float)
    v = mesh.vertices[mesh.triangles]
    a = v[:, 0] - x
    b = v[:, 1] - x
    c = v[:, 2] - x
    la = np.linalg.norm(a, axis=1)
    lb = np.linalg.norm(b, axis=1)
    lc = np.linalg.norm(c, axis=1)
    numer = np.einsum("ij,ij->i", a, np.cross(b, c))
    denom = (
        la * lb * lc
        + np.einsum("ij,ij->i", a, b) * lc
        + np.einsum("ij,ij->i", a, c) * lb
        + np.einsum("ij,ij->i", b, c) * la
    )
    total = 2.0 * np.arctan2(numer, denom).sum()
    return INTERIOR if abs(total) > 2.0 * math.pi else EXTERIOR


# ---------------------------------------------------------------------------
# density proxy tables
# ---------------------------------------------------------------------------

def _hodge_of_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Components of hodge(normal flat) per face, lexicographic 2-form basis."""
    nx, ny, nz = mesh.normals.T
    return np.column_stack([nz, -ny, nx])


def _contracted_whitney(x: TraceVector) -> np.ndarray:
    """Curl-flavored Whitney field contracted with the coefficient vector.

    Returns ``c1`` such that the tangent proxy at barycentric ``lam`` on
    face ``f`` is ``lam @ c1[f]``.
    """
    mesh = x.space.mesh
    F = mesh.num_triangles
    c1 = np.zeros((F, 3, 3), dtype=complex)
    coeffs = x.coeffs[mesh.tri_edges]  # (F, 3) local coefficients
    grads = mesh.bary_grads
    rows = np.arange(F)[:, None]
    ii = mesh.tri_edge_endpoints[:, :, 0]
    jj = mesh.tri_edge_endpoints[:, :, 1]
    gi = grads[rows, ii]
    gj = grads[rows, jj]
    for a in range(3):
        for lam in range(3):
            sel = ii[:, a] == lam
            c1[sel, lam, :] += coeffs[sel, a, None] * gj[sel, a]
            sel = jj[:, a] == lam
            c1[sel, lam, :] -= coeffs[sel, a, None] * gi[sel, a]
    return c1


def _density_tables(x: TraceVector):
    """Per-face affine tables: proxy(f, lam) = c0[f] + lam @ c1[f].

    The proxy components are the coefficients of the density's ambient
    covector image in the lexicographic basis of its degree; the third
    element of the result is that degree.
    """
    mesh = x.space.mesh
    F = mesh.num_triangles
    deg = x.space.p
    if deg == 0:
        c0 = np.zeros((F, 1), dtype=complex)
        c1 = np.zeros((F, 3, 1), dtype=complex)
        c1[:, :, 0] = x.coeffs[mesh.triangles]
        return c0, c1, deg
    if deg == 1:
        c1 = _contracted_whitney(x)
        if x.space.flavor == DIV:
            c1 = np.cross(mesh.normals[:, None, :], c1)
        return np.zeros((F, 3), dtype=complex), c1, deg
    c0 = (x.coeffs / mesh.areas)[:, None] * _hodge_of_normals(mesh)
    return c0.astype(complex), np.zeros((F, 3, 3), dtype=complex), deg


def _rotated_density_tables(x: TraceVector):
    """Tables of the pointwise inverse surface Hodge of ``x``.

    Degree 1 maps to the div-flavored rotation with negated coefficients
    (the inverse is minus the Hodge on surface 1-forms); degrees 0 and 2
    swap with the face density.  Everything is evaluated exactly pointwise,
    never projected back onto a discrete space.
    """
    mesh = x.space.mesh
    F = mesh.num_triangles
    deg = x.space.p
    if deg == 0:
        # 0-form value (lam @ beta) times the area 2-covector of the face
        base = _hodge_of_normals(mesh)
        c1 = x.coeffs[mesh.triangles][:, :, None] * base[:, None, :]
        return np.zeros((F, 3), dtype=complex), c1.astype(complex), 2
    if deg == 1:
        if x.space.flavor != CURL:
            raise PotentialError("rotation expects a curl-conforming density")
        c1 = -np.cross(mesh.normals[:, None, :], _contracted_whitney(x))
        return np.zeros((F, 3), dtype=complex), c1, 1
    c0 = (x.coeffs / mesh.areas)[:, None].astype(complex)
    return c0, np.zeros((F, 3, 1), dtype=complex), 0


# ---------------------------------------------------------------------------
# quadrature-driven accumulation
# ---------------------------------------------------------------------------

def _guard_check(mesh: SurfaceMesh, x: np.ndarray) -> np.ndarray:
    dists = _panel_distances(mesh, x)
    ratios = dists / mesh.diameters
    worst = int(np.argmin(ratios))
    if ratios[worst] < GUARD_RATIO:
        raise PotentialError(
            f"point {x} is {dists[worst]:.3g} from panel {worst} "
            f"(diameter {mesh.diameters[worst]:.3g}); closer than "
            f"{GUARD_RATIO} diameters — use trace_probe for surface limits"
        )
    return ratios


def _accumulate(mesh, tables, k, x, order, want_grad=False, want_hess=False):
    """Quadrature sums of the kernel (and derivatives) against the density.

    Returns ``(S, G, H)`` with ``S[c] = sum w g s_c``, ``G[a, c] =
    sum w (d_a g) s_c`` and ``H[a, b, c] = sum w (Hess g)_{ab} s_c``,
    derivatives taken at the observation point ``x``; ``s`` are the density
    proxy components from the tables.  Panels nearer than one diameter get
    the subdivision rule; the guard radius raises.
    """
    c0, c1, _deg = tables
    ratios = _guard_check(mesh, x)
    near = np.flatnonzero(ratios < 1.0)
    far = np.flatnonzero(ratios >= 1.0)
    ncomp = c0.shape[1]
    S = np.zeros(ncomp, dtype=complex)
    G = np.zeros((3, ncomp), dtype=complex) if (want_grad or want_hess) else None
    H = np.zeros((3, 3, ncomp), dtype=complex) if want_hess else None

    def add(faces, bary, weights, nodes):
        nonlocal S, G, H
        vals = c0[faces][:, None, :] + np.einsum("ql,flc->fqc", bary, c1[faces])
        diff = x[None, None, :] - nodes
        r = np.linalg.norm(diff, axis=2)
        wA = weights[None, :] * mesh.areas[faces][:, None]
        if want_grad or want_hess:
            g, g1, g2 = scalar_with_derivatives(3, k, r)
        else:
            g = fundamental_scalar(3, k, r)
        S += np.einsum("fq,fq,fqc->c", wA, g, vals)
        if want_grad or want_hess:
            rhat = diff / r[:, :, None]
            G += np.einsum("fq,fq,fqa,fqc->ac", wA, g1, rhat, vals)
        if want_hess:
            iso = g1 / r
            aniso = g2 - iso
            H += np.einsum("fq,fq,fqa,fqb,fqc->abc", wA, aniso, rhat, rhat, vals)
            eye_term = np.einsum("fq,fq,fqc->c", wA, iso, vals)
            for axis in range(3):
                H[axis, axis, :] += eye_term

    if len(far):
        rule = triangle_rule(order)
        bary = rule.points
        nodes = np.einsum("ql,flj->fqj", bary, mesh.vertices[mesh.triangles[far]])
        add(far, bary, rule.weights, nodes)
    for f in near:
        panel = mesh.vertices[mesh.triangles[f]]
        rule = near_eval_rule(panel, x, base_order=order)
        nodes = rule.points @ panel
        add(np.array([f]), rule.points, rule.weights, nodes[None])
    return S, G, H


def _wedge_table(src_deg: int):
    """Nonzero structure of ``dx^a ^ dx^J`` over multi-indices J of a degree."""
    out = []
    masks = basis_masks(3, src_deg)
    out_masks = list(basis_masks(3, src_deg + 1))
    for a in range(3):
        for jpos, mask in enumerate(masks):
            if mask & (1 << a):
                continue
            sign = merge_sign(1 << a, mask)
            out.append((a, jpos, out_masks.index(mask | (1 << a)), sign))
    return out


def _hodge_map(p: int):
    """Arrays (signs, positions) with hodge(e_i) = signs[i] e_{positions[i]}."""
    size = comb(3, p)
    signs = np.zeros(size)
    pos = np.zeros(size, dtype=int)
    eye = np.eye(size, dtype=complex)
    for i in range(size):
        image = hodge(PCov(3, p, eye[i]))
        j = int(np.flatnonzero(image.coeffs)[0])
        pos[i] = j
        signs[i] = image.coeffs[j].real
    return signs, pos


def _d_of_single_layer(mesh, tables, k, x, order) -> np.ndarray:
    """Components of ``d SL(density)`` at ``x`` in degree src + 1."""
    _, G, _ = _accumulate(mesh, tables, k, x, order, want_grad=True)
    src_deg = tables[2]
    out = np.zeros(comb(3, src_deg + 1), dtype=complex)
    for a, jpos, kpos, sign in _wedge_table(src_deg):
        out[kpos] += sign * G[a, jpos]
    return out


# ---------------------------------------------------------------------------
# public evaluators
# ---------------------------------------------------------------------------

def _as_points(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be an (N, 3) array")
    return pts


def _samples(mesh, pts, values) -> list[FieldSample]:
    return [
        FieldSample(np.array(x), val, point_side(mesh, x))
        for x, val in zip(pts, values)
    ]


def eval_single_layer(
    p: int, density: TraceVector, k, points, order: int = _DEFAULT_ORDER
) -> list[FieldSample]:
    """Single-layer potential of a div-conforming degree-p density."""
    if density.space.p != p:
        raise PotentialError(f"density degree {density.space.p} != {p}")
    if p == 1 and density.space.flavor != DIV:
        raise PotentialError("single layer expects a div-conforming density")
    mesh = density.space.mesh
    tables = _density_tables(density)
    k = complex(k)
    pts = _as_points(points)
    values = []
    for x in pts:
        S, _, _ = _accumulate(mesh, tables, k, x, order)
        values.append(PCov(3, p, S))
    return _samples(mesh, pts, values)


def eval_double_layer(
    p: int, density: TraceVector, k, points, order: int = _DEFAULT_ORDER
) -> list[FieldSample]:
    """Double-layer potential: literal ``-hodge d SL(hodge_inv density)``."""
    if density.space.p != p:
        raise PotentialError(f"density degree {density.space.p} != {p}")
    if p == 1 and density.space.flavor != CURL:
        raise PotentialError("double layer expects a curl-conforming density")
    mesh = density.space.mesh
    tables = _rotated_density_tables(density)
    signs, pos = _hodge_map(3 - p)
    k = complex(k)
    pts = _as_points(points)
    values = []
    for x in pts:
        comps = _d_of_single_layer(mesh, tables, k, x, order)
        rotated = np.zeros(comb(3, p), dtype=complex)
        rotated[pos] = signs * comps
        values.append(PCov(3, p, -rotated))
    return _samples(mesh, pts, values)


def eval_exact_potential(
    phi: TraceVector, k, points, order: int = _DEFAULT_ORDER
) -> list[FieldSample]:
    """``d SL(phi)`` for the normal-trace density of degree p - 1."""
    mesh = phi.space.mesh
    if phi.space.p == 1 and phi.space.flavor != DIV:
        raise PotentialError("exact potential expects a div-conforming density")
    tables = _density_tables(phi)
    k = complex(k)
    pts = _as_points(points)
    values = []
    for x in pts:
        comps = _d_of_single_layer(mesh, tables, k, x, order)
        values.append(PCov(3, phi.space.p + 1, comps))
    return _samples(mesh, pts, values)


def surface_divergence(gamma: TraceVector) -> TraceVector:
    """Exact face-constant surface coderivative of a div-conforming 1-form.

    Each rotated Whitney basis function has constant surface divergence on
    its faces — the traversal sign over the face area — so the coderivative
    of the whole field is piecewise constant and computed exactly from the
    edge-to-face incidence.  The result is wrapped in the degree-2 space,
    whose integral dofs represent face constants exactly: the pointwise
    value on a face is the returned coefficient over the face area.
    """
    if gamma.space.p != 1 or gamma.space.flavor != DIV:
        raise PotentialError("surface divergence expects a div-conforming 1-form")
    mesh = gamma.space.mesh
    d1 = incidence_d(mesh, 1)
    return TraceVector(form_space(mesh, 2), d1 @ gamma.coeffs)


def eval_maxwell_single_layer(
    gamma: TraceVector,
    k,
    points,
    order: int = _DEFAULT_ORDER,
    method: str = "subtract",
) -> list[FieldSample]:
    """Divergence-corrected single layer ``SL(g) - k^-2 d SL(div g)``.

    ``method="subtract"`` evaluates that literal form with the exact
    face-constant surface divergence; ``method="second-order"`` evaluates
    the equivalent form ``SL(g) + k^-2 int Hess(kernel) proxy(g)`` through
    analytic kernel Hessians, with no surface differentiation at all.  The
    two routes agree to quadrature accuracy and the tests hold them against
    each other.
    """
    k = complex(k)
    if k == 0:
        raise PotentialError("the divergence-corrected single layer needs k != 0")
    if gamma.space.p != 1 or gamma.space.flavor != DIV:
        raise PotentialError("expected a div-conforming degree-1 density")
    if method not in ("subtract", "second-order"):
        raise ValueError(f"unknown method {method!r}")
    mesh = gamma.space.mesh
    pts = _as_points(points)
    tables = _density_tables(gamma)
    inv_k2 = 1.0 / (k * k)
    values = []
    if method == "subtract":
        div_gamma = surface_divergence(gamma)
        sc0 = (div_gamma.coeffs / mesh.areas)[:, None]
        scalar_tables = (sc0, np.zeros((mesh.num_triangles, 3, 1), dtype=complex), 0)
        for x in pts:
            S, _, _ = _accumulate(mesh, tables, k, x, order)
            corr = _d_of_single_layer(mesh, scalar_tables, k, x, order)
            values.append(PCov(3, 1, S - inv_k2 * corr))
    else:
        for x in pts:
            S, _, H = _accumulate(mesh, tables, k, x, order, want_hess=True)
            values.append(PCov(3, 1, S + inv_k2 * np.einsum("abb->a", H)))
    return _samples(mesh, pts, values)


def eval_representation(
    data: BoundaryData, k, points, side: str = INTERIOR, order: int = _DEFAULT_ORDER
) -> list[FieldSample]:
    """Field reconstruction ``-SL(gamma) + DL(beta) - d SL(phi)``.

    The literal formula takes the *jump* data of the field extended by zero
    across the surface.  ``data`` holds one-sided traces measured from
    ``side``; with jump = exterior - interior, interior traces enter
    negated and exterior traces enter as they are.  The reconstruction
    reproduces the field on the data's side and ≈0 on the other.
    """
    if side not in (INTERIOR, EXTERIOR):
        raise ValueError(f"side must be {INTERIOR!r} or {EXTERIOR!r}")
    sign = -1.0 if side == INTERIOR else 1.0
    k = complex(k)
    pts = _as_points(points)
    sl = eval_single_layer(data.p, data.gamma, k, pts, order)
    dl = eval_double_layer(data.p, data.beta, k, pts, order)
    mesh = data.beta.space.mesh
    if data.phi is not None:
        ex = eval_exact_potential(data.phi, k, pts, order)
        values = [
            PCov(3, data.p, sign * (-s.value.coeffs + d.value.coeffs - e.value.coeffs))
            for s, d, e in zip(sl, dl, ex)
        ]
    else:
        values = [
            PCov(3, data.p, sign * (-s.value.coeffs + d.value.coeffs))
            for s, d in zip(sl, dl)
        ]
    return _samples(mesh, pts, values)


# ---------------------------------------------------------------------------
# trace probing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEstimate:
    """One-sided trace limits at a surface point (jump = exterior - interior)."""

    jump: PCov
    mean: PCov
    exterior: PCov
    interior: PCov


def _tangential(value: PCov, nu: np.ndarray) -> PCov:
    """Tangential pullback of an ambient covector at a surface point."""
    if value.p == 0:
        return value
    if value.p == 1:
        u = value.coeffs
        return PCov(3, 1, u - nu * (u @ nu))
    if value.p == 2:
        # keep the area-element part: project the axial proxy onto the normal
        axial = np.array([value.coeffs[2], -value.coeffs[1], value.coeffs[0]])
        base = np.array([nu[2], -nu[1], nu[0]], dtype=complex)
        return PCov(3, 2, (axial @ nu) * base)
    return value


def _normal_trace(value: PCov, nu: np.ndarray) -> PCov:
    contracted = interior(PVec(3, 1, nu.astype(complex)), value)
    return _tangential(contracted, nu)


def _extrapolate(values: list[np.ndarray], hs: np.ndarray) -> np.ndarray:
    """Least-squares linear-in-h extrapolation to h = 0."""
    design = np.column_stack([np.ones_like(hs), hs])
    coef, *_ = np.linalg.lstsq(design, np.array(values), rcond=None)
    return coef[0]


def trace_probe(
    evaluator,
    surface_point,
    normal,
    h_sequence,
    *,
    trace: str = "dirichlet",
    d_evaluator=None,
    mesh: SurfaceMesh | None = None,
) -> TraceEstimate:
    """Richardson-extrapolated one-sided trace limits at a surface point.

    ``evaluator(points)`` must return field samples (or covector values) at
    off-surface points; ``trace`` selects the Dirichlet (tangential),
    Neumann (normal trace of the exterior derivative, which requires the
    analytic ``d_evaluator``), or normal trace.  ``h_sequence`` is a
    decreasing run of offsets used on both sides of the surface; the
    smallest one must respect the evaluator's own near-surface guard.  When
    ``mesh`` is supplied the probe point is validated to sit inside a panel,
    away from edges and vertices.
    """
    x0 = np.asarray(surface_point, dtype=float)
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    hs = np.asarray(h_sequence, dtype=float)
    if len(hs) < 2 or np.any(np.diff(hs) >= 0):
        raise ValueError("h sequence must be decreasing with at least two entries")
    if trace not in ("dirichlet", "neumann", "normal"):
        raise ValueError(f"unknown trace {trace!r}")
    if trace == "neumann" and d_evaluator is None:
        raise ValueError("the neumann trace needs the analytic d evaluator")
    if mesh is not None:
        dists = _panel_distances(mesh, x0)
        f = int(np.argmin(dists))
        if dists[f] > 1e-9 * mesh.diameters[f]:
            raise PotentialError("probe point does not lie on the surface")
        tri = mesh.vertices[mesh.triangles[f]]
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        gram = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
        rhs = np.array([(x0 - tri[0]) @ e1, (x0 - tri[0]) @ e2])
        s, t = np.linalg.solve(gram, rhs)
        lam_min = min(1.0 - s - t, s, t)
        if lam_min < 0.02:
            raise PotentialError(
                "probe point must lie in the interior of a panel, away from "
                "its edges and vertices"
            )

    def side_limit(direction: float) -> PCov:
        pts = x0 + direction * np.outer(hs, nu)
        fn = d_evaluator if trace == "neumann" else evaluator
        raw = fn(pts)
        covs = [s.value if isinstance(s, FieldSample) else s for s in raw]
        if trace == "dirichlet":
            traced = [_tangential(c, nu) for c in covs]
        else:
            traced = [_normal_trace(c, nu) for c in covs]
        limit = _extrapolate([t.coeffs for t in traced], hs)
        return PCov(3, traced[0].p, limit)

    ext = side_limit(+1.0)
    inn = side_limit(-1.0)
    jump = PCov(3, ext.p, ext.coeffs - inn.coeffs)
    mean = PCov(3, ext.p, 0.5 * (ext.coeffs + inn.coeffs))
    return TraceEstimate(jump, mean, ext, inn)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_samples_csv(samples: list[FieldSample], path) -> None:
    """Write samples as CSV rows: point, side, then Re/Im per component."""
    if not samples:
        raise ValueError("no samples to export")
    ncomp = samples[0].value.coeffs.size
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = ["x", "y", "z", "side"]
        for i in range(ncomp):
            header += [f"re_c{i}", f"im_c{i}"]
        writer.writerow(header)
        for s in samples:
            row = [repr(float(v)) for v in s.point] + [s.side]
            for c in s.value.coeffs:
                row += [repr(float(c.real)), repr(float(c.imag))]
            writer.writerow(row)

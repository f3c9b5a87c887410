"""Quadrature: triangle Gauss rules, singular panel-pair rules, near-field rules.

Triangle rules are area-normalized: points are barycentric triples and the
weights are positive and sum to one, so ``area * sum(w_q f(x_q))``
approximates the integral.  Symmetric curated rules cover degrees 1-6; higher
degrees use a symmetrized conical-product construction.

Panel-pair rules integrate Galerkin double integrals.  Nodes are pairs of
barycentric triples with weights in a 4-D relative-coordinate
parametrization, normalized so that

    int_{T1} int_{T2} F(x, y) dS dS  ~=  4 A1 A2 sum_q w_q F(x_q, y_q)

with ``sum_q w_q = 1/4`` once the per-coordinate order resolves the weight
polynomial of the transform (degree at most 5, so order >= 3 is exact for
every class; the coincident and shared-vertex transforms are exact already
at order 2).  For the three singular adjacency classes
the parametrization is a regularizing transform: the radial coordinate of
the singularity is factored out analytically, so kernels with ``1/r`` and
``1/r^2`` growth become bounded integrands.  Vertex ordering conventions the
caller must respect:

* ``identical``: both factors use the same vertex order;
* ``shared-edge``: both triangles ordered (shared0, shared1, apex), the
  shared edge traversed in the same direction;
* ``shared-vertex``: both ordered (shared, other, other).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

__all__ = [
    "ADJACENCIES",
    "DISJOINT",
    "IDENTICAL",
    "PanelPairRule",
    "SHARED_EDGE",
    "SHARED_VERTEX",
    "TriangleRule",
    "near_disjoint",
    "near_eval_rule",
    "onpanel_rule",
    "panel_pair_rule",
    "point_triangle_distance",
    "triangle_rule",
]

IDENTICAL = "identical"
SHARED_EDGE = "shared-edge"
SHARED_VERTEX = "shared-vertex"
DISJOINT = "disjoint"
ADJACENCIES = (IDENTICAL, SHARED_EDGE, SHARED_VERTEX, DISJOINT)

MAX_ORDER = 10

_NEAR_DEPTH_CAP = 8


@dataclass(frozen=True)
class TriangleRule:
    """Area-normalized rule on the reference triangle."""

    order: int
    points: np.ndarray  # (Q, 3) barycentric
    weights: np.ndarray  # (Q,), positive, sum 1

    def cartesian(self, triangle: np.ndarray) -> np.ndarray:
        """Map the nodes onto a triangle given as a (3, d) vertex array."""
        return self.points @ np.asarray(triangle, dtype=float)

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class PanelPairRule:
    """Tensor rule for a Galerkin panel pair; see module docstring."""

    adjacency: str
    order: int
    bary_x: np.ndarray  # (Q, 3)
    bary_y: np.ndarray  # (Q, 3)
    weights: np.ndarray  # (Q,), sum 1/4

    def __len__(self) -> int:
        return len(self.weights)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Triangle rules
# ---------------------------------------------------------------------------

def _orbit1() -> tuple[np.ndarray, int]:
    return np.array([[1 / 3, 1 / 3, 1 / 3]]), 1


def _orbit3(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def _orbit6(a: float, b: float, c: float) -> np.ndarray:
    return np.array(
        [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
    )


def _curated_rules() -> dict[int, tuple[np.ndarray, np.ndarray]]:
    rules: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    rules[1] = (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]))

    pts = _orbit3(1.0 / 6.0)
    rules[2] = (pts, np.full(3, 1.0 / 3.0))

    pts = _orbit6(0.659027622374092, 0.231933368553031, 0.109039009072877)
    rules[3] = (pts, np.full(6, 1.0 / 6.0))

    pts = np.vstack([_orbit3(0.445948490915965), _orbit3(0.091576213509771)])
    w = np.concatenate(
        [np.full(3, 0.223381589678011), np.full(3, 0.109951743655322)]
    )
    rules[4] = (pts, w)

    pts = np.vstack(
        [
            np.array([[1 / 3, 1 / 3, 1 / 3]]),
            _orbit3(0.470142064105115),
            _orbit3(0.101286507323456),
        ]
    )
    w = np.concatenate(
        [[9.0 / 40.0], np.full(3, 0.132394152788506), np.full(3, 0.125939180544827)]
    )
    rules[5] = (pts, w)

    pts = np.vstack(
        [
            _orbit3(0.063089014491502),
            _orbit3(0.249286745170910),
            _orbit6(0.310352451033785, 0.053145049844816, 0.636502499121399),
        ]
    )
    w = np.concatenate(
        [
            np.full(3, 0.050844906370207),
            np.full(3, 0.116786275726379),
            np.full(6, 0.082851075618374),
        ]
    )
    rules[6] = (pts, w)
    return rules


_CURATED = _curated_rules()


def _conical_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrized conical-product rule exact for the given total degree."""
    m = (order + 2) // 2  # 2m-1 >= order
    xj, wj = roots_jacobi(m, 1.0, 0.0)  # weight (1-u) on [-1, 1]
    xl, wl = leggauss(m)
    u = 0.5 * (xj + 1.0)
    wu = wj / 4.0  # (1-x)dx on [-1,1] -> 4 (1-u)du on [0,1]
    # build v so that each mirror pair {v, 1-v} is closed in floating point
    # (1 - m is exact for m in [1/2, 1]); the symmetrization below then
    # produces bit-identical duplicates
    v = np.where(xl >= 0, 0.5 + 0.5 * xl, 1.0 - (0.5 + 0.5 * np.abs(xl)))
    wv = wl / 2.0
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv).ravel() * 2.0  # reference area normalization 1/A = 2
    # cone from the edge {lam1 = 0}: area element carries the (1-u) factor
    # that the Jacobi weight absorbs
    lam1 = uu.ravel()
    lam2 = ((1.0 - uu) * vv).ravel()
    lam3 = ((1.0 - uu) * (1.0 - vv)).ravel()
    pts = np.column_stack([lam1, lam2, lam3])
    # 6-fold symmetrization keeps the permutation invariance of the family;
    # the Legendre nodes are mirror-symmetric, so every image appears twice
    # as a bit-identical duplicate and the exact merge halves the count
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    pts_sym = np.vstack([pts[:, p] for p in perms])
    w_sym = np.tile(ww / 6.0, 6)
    uniq, inverse = np.unique(pts_sym, axis=0, return_inverse=True)
    w_merged = np.zeros(len(uniq))
    np.add.at(w_merged, inverse, w_sym)
    return uniq, w_merged


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> TriangleRule:
    """Symmetric positive rule exact for polynomials of total degree ``order``."""
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"triangle rule order must be 1..{MAX_ORDER}, got {order}")
    if order in _CURATED:
        pts, w = _CURATED[order]
    else:
        pts, w = _conical_rule(order)
    return TriangleRule(order, _freeze(pts.astype(float)), _freeze(w.astype(float)))


# ---------------------------------------------------------------------------
# Panel-pair rules
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _grid4(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    g, w = _gauss01(m)
    a, b, c, d = np.meshgrid(g, g, g, g, indexing="ij")
    wa, wb, wc, wd = np.meshgrid(w, w, w, w, indexing="ij")
    weight = (wa * wb * wc * wd).ravel()
    return a.ravel(), b.ravel(), c.ravel(), d.ravel(), weight


def _rule_identical(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xi, eta, s, t = _grid4(m)[:4]
    w4 = _grid4(m)[4]
    base1 = (1.0 - xi) * s
    base2 = (1.0 - xi) * s * t
    w = w4 * xi * (1.0 - xi) ** 2 * s

    regions = []
    # offsets d = yhat - xhat per region, in the collapsed triangle coords
    x1, x2 = base1, base2
    regions.append(((x1, x2), (x1 + xi, x2 + xi * eta)))
    regions.append(((x1 + xi, x2 + xi * eta), (x1, x2)))
    x1, x2 = (1.0 - xi) * s + xi * (1.0 - eta), base2
    y1, y2 = (1.0 - xi) * s + xi, base2 + xi
    regions.append((((x1, x2)), ((y1, y2))))
    regions.append((((y1, y2)), ((x1, x2))))
    x1, x2 = 1.0 - (1.0 - xi) * s * (1.0 - t), (1.0 - xi) * s * t
    y1, y2 = x1 - xi * eta, x2 + xi * (1.0 - eta)
    regions.append((((x1, x2)), ((y1, y2))))
    regions.append((((y1, y2)), ((x1, x2))))

    bx, by, ws = [], [], []
    for (u1, u2), (v1, v2) in regions:
        bx.append(np.column_stack([1.0 - u1, u1 - u2, u2]))
        by.append(np.column_stack([1.0 - v1, v1 - v2, v2]))
        ws.append(w)
    return np.vstack(bx), np.vstack(by), np.concatenate(ws)


def _rule_shared_edge(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xi, e1, e2, tau = _grid4(m)[:4]
    w4 = _grid4(m)[4]

    bx, by, ws = [], [], []
    branches = (
        (xi, xi * e1, xi * e2),
        (xi * e1, xi, xi * e2),
        (xi * e1, xi * e2, xi),
    )
    for delta, h1, h2 in branches:
        for lead_x in (True, False):
            if lead_x:
                mu2 = (1.0 - delta) * tau
                mu1 = mu2 + delta
            else:
                mu1 = (1.0 - delta) * tau
                mu2 = mu1 + delta
            w = w4 * xi**2 * (1.0 - delta) * (1.0 - h1) * (1.0 - h2)
            bx.append(
                np.column_stack([(1.0 - h1) * (1.0 - mu1), (1.0 - h1) * mu1, h1])
            )
            by.append(
                np.column_stack([(1.0 - h2) * (1.0 - mu2), (1.0 - h2) * mu2, h2])
            )
            ws.append(w)
    return np.vstack(bx), np.vstack(by), np.concatenate(ws)


def _rule_shared_vertex(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xi, eta, s, t = _grid4(m)[:4]
    w4 = _grid4(m)[4]

    def chart(rho, frac):
        return np.column_stack([1.0 - rho, rho * (1.0 - frac), rho * frac])

    w = w4 * xi**3 * eta
    bx = np.vstack([chart(xi, s), chart(xi * eta, s)])
    by = np.vstack([chart(xi * eta, t), chart(xi, t)])
    ws = np.concatenate([w, w])
    return bx, by, ws


@lru_cache(maxsize=None)
def panel_pair_rule(adjacency: str, order: int = 4) -> PanelPairRule:
    """Regularized rule for a panel pair of the given adjacency class.

    ``order`` is the Gauss point count per relative coordinate for the
    singular classes and the triangle-rule degree for disjoint pairs.
    """
    if adjacency not in ADJACENCIES:
        raise ValueError(f"unknown adjacency {adjacency!r}; expected one of {ADJACENCIES}")
    if adjacency == DISJOINT:
        tri = triangle_rule(order)
        qx = len(tri)
        ix, iy = np.divmod(np.arange(qx * qx), qx)
        bx = tri.points[ix]
        by = tri.points[iy]
        w = (tri.weights[ix] * tri.weights[iy]) / 4.0
    elif adjacency == IDENTICAL:
        bx, by, w = _rule_identical(order)
    elif adjacency == SHARED_EDGE:
        bx, by, w = _rule_shared_edge(order)
    else:
        bx, by, w = _rule_shared_vertex(order)
    return PanelPairRule(adjacency, order, _freeze(bx), _freeze(by), _freeze(w))


def near_disjoint(centroid_distance: float, diam1: float, diam2: float) -> bool:
    """Whether a disjoint pair sits close enough to deserve one extra order."""
    return centroid_distance < 2.0 * max(diam1, diam2)


# ---------------------------------------------------------------------------
# Near-singular evaluation rules
# ---------------------------------------------------------------------------

def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    denom = float(d @ d)
    t = float((p - a) @ d) / denom if denom > 0 else 0.0
    t = min(max(t, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def point_triangle_distance(point: np.ndarray, triangle: np.ndarray) -> float:
    """Euclidean distance from a point to a (possibly degenerate) 3-D triangle."""
    p = np.asarray(point, dtype=float)
    tri = np.asarray(triangle, dtype=float)
    v0, v1, v2 = tri
    e01, e02 = v1 - v0, v2 - v0
    normal = np.cross(e01, e02)
    norm2 = float(normal @ normal)
    if norm2 > 0:
        # barycentric coordinates of the in-plane projection
        w = p - v0
        a = float(e01 @ e01)
        b = float(e01 @ e02)
        c = float(e02 @ e02)
        d = float(e01 @ w)
        e = float(e02 @ w)
        det = a * c - b * b
        s = (c * d - b * e) / det
        t = (a * e - b * d) / det
        if s >= 0 and t >= 0 and s + t <= 1:
            h = float(w @ normal) / math.sqrt(norm2)
            return abs(h)
    return min(
        _segment_distance(p, v0, v1),
        _segment_distance(p, v1, v2),
        _segment_distance(p, v2, v0),
    )


def _triangle_diameter(triangle: np.ndarray) -> float:
    t = np.asarray(triangle, dtype=float)
    return float(
        max(
            np.linalg.norm(t[0] - t[1]),
            np.linalg.norm(t[1] - t[2]),
            np.linalg.norm(t[2] - t[0]),
        )
    )


def _children(bary: np.ndarray) -> list[np.ndarray]:
    m01 = 0.5 * (bary[0] + bary[1])
    m02 = 0.5 * (bary[0] + bary[2])
    m12 = 0.5 * (bary[1] + bary[2])
    return [
        np.array([bary[0], m01, m02]),
        np.array([m01, bary[1], m12]),
        np.array([m02, m12, bary[2]]),
        np.array([m01, m12, m02]),
    ]


def near_eval_rule(panel: np.ndarray, point: np.ndarray, distance_ratio: float | None = None, base_order: int = 6) -> TriangleRule:
    """Subdivided rule for evaluating a layer kernel near (not on) a panel.

    Children whose local distance/diameter ratio is below one are split
    recursively, so the subdivision depth grows like ``-log2(ratio)`` up to a
    cap; at ``distance_ratio >= 1`` the base rule is returned unchanged.
    """
    tri = np.asarray(panel, dtype=float)
    pt = np.asarray(point, dtype=float)
    diam = _triangle_diameter(tri)
    dist = point_triangle_distance(pt, tri)
    if distance_ratio is None:
        distance_ratio = dist / diam if diam > 0 else np.inf
    if dist == 0.0:
        raise ValueError("point lies on the panel; use a trace probe instead")
    base = triangle_rule(base_order)
    if distance_ratio >= 1.0:
        return base

    pts_out, w_out = [], []

    def recurse(bary_corners: np.ndarray, depth: int) -> None:
        corners = bary_corners @ tri
        local = point_triangle_distance(pt, corners) / max(
            _triangle_diameter(corners), 1e-300
        )
        if local >= 1.0 or depth >= _NEAR_DEPTH_CAP:
            pts_out.append(base.points @ bary_corners)
            w_out.append(base.weights * 0.25**depth)
            return
        for child in _children(bary_corners):
            recurse(child, depth + 1)

    recurse(np.eye(3), 0)
    return TriangleRule(
        base_order, _freeze(np.vstack(pts_out)), _freeze(np.concatenate(w_out))
    )


def onpanel_rule(bary_point: np.ndarray, order: int = 6) -> TriangleRule:
    """Rule for a kernel singular *at* a barycentric point of the panel.

    The triangle is split into up to three sub-triangles fanning out from
    the singular point, and each is mapped with a Duffy transform whose
    Jacobian supplies one power of the distance to the point, so ``1/r``
    integrands become bounded.  Works for interior, edge, and vertex
    locations alike (zero-area fans are dropped).  Weights sum to one, so
    the rule plugs into the usual ``area * sum(w_q f(x_q))`` convention.
    """
    lam0 = np.asarray(bary_point, dtype=float)
    if lam0.shape != (3,) or np.any(lam0 < -1e-12) or abs(lam0.sum() - 1.0) > 1e-9:
        raise ValueError("bary_point must be a barycentric triple of the panel")
    g, w = _gauss01(order)
    u = np.repeat(g, order)
    v = np.tile(g, order)
    wuv = np.repeat(w, order) * np.tile(w, order)
    corners = np.eye(3)
    pts_out, w_out = [], []
    for i in range(3):
        # fan (point, corner i, corner i+1); its area fraction is lam0 of
        # the opposite corner
        frac = lam0[(i + 2) % 3]
        if frac <= 1e-14:
            continue
        far = (1.0 - v)[:, None] * corners[i] + v[:, None] * corners[(i + 1) % 3]
        pts_out.append((1.0 - u)[:, None] * lam0 + u[:, None] * far)
        w_out.append(2.0 * frac * u * wuv)
    return TriangleRule(
        order, _freeze(np.vstack(pts_out)), _freeze(np.concatenate(w_out))
    )

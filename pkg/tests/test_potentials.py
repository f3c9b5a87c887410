"""Layer potentials: sphere oracles, field PDEs by finite differences, jumps.

The closed-form anchors: a uniform density on the unit sphere has Newton
potential 1 inside and a²/|x| outside, and its scalar double layer is
exactly -1 inside and 0 outside (Gauss) — the latter holds for *any* closed
polyhedron, so those checks are quadrature-tight while the former carry the
O(h²) geometry deficit of an inscribed icosphere.  Derivative properties of
the fields (Helmholtz equation, coclosedness, commutation with the surface
coderivative) are checked by central finite differences against analytic
kernel-derivative evaluations.
"""

import csv
import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bemdf.exterior import hodge
from bemdf.kernels import scalar_with_derivatives
from bemdf.mesh import (
    CURL,
    DIV,
    TraceVector,
    form_space,
    icosphere,
    incidence_d,
    surface_hodge_apply,
    whitney_eval,
)
from bemdf.potentials import (
    EXTERIOR,
    INTERIOR,
    BoundaryData,
    PotentialError,
    eval_double_layer,
    eval_exact_potential,
    eval_maxwell_single_layer,
    eval_representation,
    eval_single_layer,
    export_samples_csv,
    point_side,
    surface_divergence,
    trace_probe,
)
from bemdf.quadrature import triangle_rule


@functools.lru_cache(maxsize=None)
def sphere(level: int):
    return icosphere(level)


def unit_scalar(mesh) -> TraceVector:
    space = form_space(mesh, 0)
    return TraceVector(space, np.ones(space.dof_count, dtype=complex))


def random_trace(mesh, p, flavor=None, seed=0) -> TraceVector:
    space = form_space(mesh, p, flavor)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(space.dof_count) + 1j * rng.standard_normal(space.dof_count)
    return TraceVector(space, c)


def field_value(x: TraceVector, f: int, lam) -> np.ndarray:
    """Pointwise ambient components of a discrete density on face ``f``."""
    basis = whitney_eval(x.space, f, lam)
    local = x.space.local_dofs(f)
    return sum(x.coeffs[d] * b.coeffs for d, b in zip(local, basis))


def smooth_edge_field(mesh, rotated: bool) -> TraceVector:
    """Interpolate a fixed smooth ambient field onto the edge dofs.

    ``rotated=True`` builds the div-conforming interpolant of the field
    itself (by feeding the curl dofs its normal-rotation), ``False`` the
    curl-conforming interpolant.
    """
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    a = np.column_stack(
        [np.sin(0.7 * mid[:, 1]) + 1.2, np.cos(0.5 * mid[:, 2]) - 0.8, 0.6 * mid[:, 0]]
    )
    if rotated:
        nu = mid / np.linalg.norm(mid, axis=1)[:, None]
        a = -np.cross(nu, a)
    chords = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    coeffs = np.einsum("ij,ij->i", a, chords)
    flavor = DIV if rotated else CURL
    return TraceVector(form_space(mesh, 1, flavor), coeffs.astype(complex))


def values_at(samples) -> np.ndarray:
    return np.array([s.value.coeffs for s in samples])


def fd_partial(field_fn, x: np.ndarray, axis: int, h: float) -> np.ndarray:
    e = np.zeros(3)
    e[axis] = h
    plus, minus = field_fn(np.array([x + e, x - e]))
    return (plus - minus) / (2.0 * h)


PROBE_X = np.array([0.3, 1.9, 0.4])  # about one radius away from the unit sphere


# ---------------------------------------------------------------------------
# boundary data validation
# ---------------------------------------------------------------------------

def test_boundary_data_p1_accepts_proper_flavors():
    mesh = sphere(0)
    data = BoundaryData(
        1,
        random_trace(mesh, 1, CURL, seed=1),
        random_trace(mesh, 1, DIV, seed=2),
        random_trace(mesh, 0, seed=3),
    )
    assert data.phi is not None


def test_boundary_data_rejects_swapped_flavors():
    mesh = sphere(0)
    with pytest.raises(PotentialError, match="curl-conforming"):
        BoundaryData(
            1,
            random_trace(mesh, 1, DIV),
            random_trace(mesh, 1, DIV),
            random_trace(mesh, 0),
        )
    with pytest.raises(PotentialError, match="div-conforming"):
        BoundaryData(
            1,
            random_trace(mesh, 1, CURL),
            random_trace(mesh, 1, CURL),
            random_trace(mesh, 0),
        )


def test_boundary_data_normal_trace_bookkeeping():
    mesh = sphere(0)
    with pytest.raises(PotentialError, match="normal trace"):
        BoundaryData(1, random_trace(mesh, 1, CURL), random_trace(mesh, 1, DIV))
    with pytest.raises(PotentialError, match="no normal trace"):
        BoundaryData(
            0, random_trace(mesh, 0), random_trace(mesh, 0), random_trace(mesh, 0)
        )
    with pytest.raises(PotentialError, match="degree p - 1"):
        BoundaryData(
            2,
            random_trace(mesh, 2),
            random_trace(mesh, 2),
            random_trace(mesh, 0),
        )


def test_boundary_data_rejects_mixed_meshes():
    with pytest.raises(PotentialError, match="one mesh"):
        BoundaryData(0, random_trace(sphere(0), 0), random_trace(sphere(1), 0))


# ---------------------------------------------------------------------------
# single layer: Newton-potential oracle
# ---------------------------------------------------------------------------

def test_newton_potential_interior_and_exterior_values():
    mesh = sphere(3)
    samples = eval_single_layer(0, unit_scalar(mesh), 0.0, [[0, 0, 0], [0, 0, 2.0]])
    inside, outside = samples
    assert inside.side == INTERIOR
    assert outside.side == EXTERIOR
    assert abs(inside.value.coeffs[0] - 1.0) < 0.01
    assert abs(outside.value.coeffs[0] - 0.5) < 0.01 * 0.5


def test_newton_potential_second_order_convergence():
    errs = []
    for level in (1, 2, 3):
        mesh = sphere(level)
        s = eval_single_layer(0, unit_scalar(mesh), 0.0, [[0, 0, 0]])
        errs.append(abs(s[0].value.coeffs[0] - 1.0))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(rates) > 1.8


def test_single_layer_rejects_wrong_degree_and_flavor():
    mesh = sphere(0)
    with pytest.raises(PotentialError, match="degree"):
        eval_single_layer(1, unit_scalar(mesh), 0.0, [[0, 0, 2]])
    with pytest.raises(PotentialError, match="div-conforming"):
        eval_single_layer(1, random_trace(mesh, 1, CURL), 0.0, [[0, 0, 2]])


def test_single_layer_validates_point_shape():
    mesh = sphere(0)
    with pytest.raises(ValueError, match="points"):
        eval_single_layer(0, unit_scalar(mesh), 0.0, [[0.0, 2.0]])


def test_near_surface_guard_refuses():
    mesh = sphere(1)
    bad = mesh.centroids[3] + 0.04 * mesh.diameters[3] * mesh.normals[3]
    with pytest.raises(PotentialError, match="trace_probe"):
        eval_single_layer(0, unit_scalar(mesh), 0.0, [bad])


@settings(max_examples=25, deadline=None)
@given(
    alpha=st.complex_numbers(
        max_magnitude=50.0, allow_nan=False, allow_infinity=False
    )
)
def test_single_layer_superposition(alpha):
    mesh = sphere(0)
    u = random_trace(mesh, 1, DIV, seed=5)
    v = random_trace(mesh, 1, DIV, seed=6)
    combo = TraceVector(u.space, alpha * u.coeffs + v.coeffs)
    pts = np.array([[0.0, 0.1, 2.2], [1.8, -1.2, 0.4]])
    lhs = values_at(eval_single_layer(1, combo, 2.0, pts))
    rhs = alpha * values_at(eval_single_layer(1, u, 2.0, pts)) + values_at(
        eval_single_layer(1, v, 2.0, pts)
    )
    scale = np.abs(rhs).max() + 1.0
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * scale)


# ---------------------------------------------------------------------------
# double layer: Gauss-exact sphere values and the normal-kernel form
# ---------------------------------------------------------------------------

def test_scalar_double_layer_is_minus_one_inside_zero_outside():
    mesh = sphere(2)
    samples = eval_double_layer(
        0, unit_scalar(mesh), 0.0, [[0, 0, 0], [0.3, 0.2, -0.1], [0, 0, 1.7], [2, 1, 0]]
    )
    for s in samples[:2]:
        assert s.side == INTERIOR
        assert abs(s.value.coeffs[0] + 1.0) < 1e-6
    for s in samples[2:]:
        assert s.side == EXTERIOR
        assert abs(s.value.coeffs[0]) < 1e-6


def test_scalar_double_layer_alternative_normal_kernel_form():
    # the same field written as the observer-side coderivative of a
    # single layer with the normal-weighted kernel; shared quadrature rule
    mesh = sphere(1)
    density = random_trace(mesh, 0, seed=9)
    x = np.array([0.2, -2.3, 0.4])
    literal = eval_double_layer(0, density, 0.0, [x])[0].value.coeffs[0]

    rule = triangle_rule(6)
    nodes = np.einsum("ql,flj->fqj", rule.points, mesh.vertices[mesh.triangles])
    dens_nodes = rule.points @ density.coeffs[mesh.triangles].T  # (Q, F)
    diff = x[None, None, :] - nodes
    r = np.linalg.norm(diff, axis=2)
    _, g1, _ = scalar_with_derivatives(3, 0.0, r)
    rhat = diff / r[:, :, None]
    alt = -np.einsum(
        "q,f,fq,fqa,fa,qf->",
        rule.weights, mesh.areas, g1, rhat, mesh.normals, dens_nodes,
    )
    assert abs(literal - alt) < 1e-10 * abs(literal)


def test_double_layer_rejects_div_flavor():
    mesh = sphere(0)
    with pytest.raises(PotentialError, match="curl-conforming"):
        eval_double_layer(1, random_trace(mesh, 1, DIV), 2.0, [[0, 0, 2]])


def test_hodge_relation_between_double_layer_and_exact_potential():
    # hodge(DL beta) == (-1)^(p+1) d SL(surface-hodge beta) for p = 1
    mesh = sphere(1)
    beta = random_trace(mesh, 1, CURL, seed=12)
    pts = np.array([[0, 0.1, 2.2], [1.8, -1.2, 0.4], [-2.5, 0.3, 0.2]])
    lhs = eval_double_layer(1, beta, 2.0, pts)
    rhs = eval_exact_potential(surface_hodge_apply(beta), 2.0, pts)
    for left, right in zip(lhs, rhs):
        starred = hodge(left.value)
        num = np.linalg.norm(starred.coeffs - right.value.coeffs)
        assert num < 1e-8 * np.linalg.norm(right.value.coeffs)


# ---------------------------------------------------------------------------
# exact potential
# ---------------------------------------------------------------------------

def test_exact_potential_image_is_closed():
    mesh = sphere(2)
    phi = random_trace(mesh, 0, seed=4)

    def field(pts):
        return values_at(eval_exact_potential(phi, 2.0, pts))

    h = 1e-4
    partials = [fd_partial(field, PROBE_X, a, h) for a in range(3)]
    curl = np.array(
        [
            partials[1][2] - partials[2][1],
            partials[2][0] - partials[0][2],
            partials[0][1] - partials[1][0],
        ]
    )
    scale = np.linalg.norm(field(np.array([PROBE_X]))[0])
    assert np.linalg.norm(curl) < 1e-6 * scale


def test_exact_potential_coclosed_at_zero_wavenumber():
    mesh = sphere(2)
    phi = random_trace(mesh, 0, seed=4)

    def field(pts):
        return values_at(eval_exact_potential(phi, 0.0, pts))

    h = 1e-4
    div = sum(fd_partial(field, PROBE_X, a, h)[a] for a in range(3))
    scale = np.linalg.norm(field(np.array([PROBE_X]))[0])
    assert abs(div) < 1e-5 * scale


def test_exact_potential_zero_density():
    mesh = sphere(0)
    space = form_space(mesh, 0)
    zero = TraceVector(space, np.zeros(space.dof_count, dtype=complex))
    samples = eval_exact_potential(zero, 2.0, [[0, 0, 2], [1.5, 0, 0]])
    assert all(np.all(s.value.coeffs == 0) for s in samples)


def test_exact_potential_rejects_curl_flavor():
    mesh = sphere(0)
    with pytest.raises(PotentialError, match="div-conforming"):
        eval_exact_potential(random_trace(mesh, 1, CURL), 2.0, [[0, 0, 2]])


# ---------------------------------------------------------------------------
# Maxwell single layer
# ---------------------------------------------------------------------------

def test_maxwell_single_layer_needs_nonzero_k():
    mesh = sphere(0)
    with pytest.raises(PotentialError, match="k != 0"):
        eval_maxwell_single_layer(random_trace(mesh, 1, DIV), 0.0, [[0, 0, 2]])


def test_maxwell_single_layer_solenoidal_reduces_to_single_layer():
    # gradients of vertex fields are exactly solenoidal in the discrete
    # sense; dyadic vertex values keep the cancellation exact in floats
    mesh = sphere(1)
    rng = np.random.default_rng(2)
    pot = np.round(rng.standard_normal(mesh.num_vertices) * 1024) / 1024
    grad_coeffs = incidence_d(mesh, 0) @ pot
    gamma = TraceVector(form_space(mesh, 1, DIV), grad_coeffs.astype(complex))
    assert np.linalg.norm(surface_divergence(gamma).coeffs) == 0
    pts = np.array([[0, 0.1, 2.2], [1.8, -1.2, 0.4]])
    a = values_at(eval_maxwell_single_layer(gamma, 2.0, pts))
    b = values_at(eval_single_layer(1, gamma, 2.0, pts))
    assert np.allclose(a, b, rtol=0, atol=1e-13)


def test_maxwell_single_layer_dual_routes_agree():
    # divergence-subtraction against analytic kernel Hessians
    mesh = sphere(1)
    gamma = random_trace(mesh, 1, DIV, seed=21)
    pts = np.array([[0, 0.1, 2.2], [1.8, -1.2, 0.4], [-2.5, 0.3, 0.2]])
    a = values_at(eval_maxwell_single_layer(gamma, 2.0, pts, order=10, method="subtract"))
    b = values_at(
        eval_maxwell_single_layer(gamma, 2.0, pts, order=10, method="second-order")
    )
    assert np.linalg.norm(a - b) < 1e-8 * np.linalg.norm(a)


def test_maxwell_single_layer_coclosed():
    mesh = sphere(2)
    gamma = random_trace(mesh, 1, DIV, seed=3)

    def field(pts):
        return values_at(eval_maxwell_single_layer(gamma, 2.0, pts))

    h = 1e-4
    div = sum(fd_partial(field, PROBE_X, a, h)[a] for a in range(3))
    scale = np.linalg.norm(field(np.array([PROBE_X]))[0])
    assert abs(div) < 1e-5 * (2.0 * scale)


def test_maxwell_single_layer_rejects_bad_method():
    mesh = sphere(0)
    with pytest.raises(ValueError, match="method"):
        eval_maxwell_single_layer(
            random_trace(mesh, 1, DIV), 2.0, [[0, 0, 2]], method="auto"
        )


# ---------------------------------------------------------------------------
# field equations by finite differences
# ---------------------------------------------------------------------------

def test_single_layer_satisfies_helmholtz():
    mesh = sphere(2)
    density = random_trace(mesh, 0, seed=8)
    k = 2.0

    def field(pts):
        return values_at(eval_single_layer(0, density, k, pts))

    h = 1e-3
    x = PROBE_X
    center = field(np.array([x]))[0]
    lap = np.zeros_like(center)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        plus, minus = field(np.array([x + e, x - e]))
        lap += plus + minus
    lap = (lap - 6.0 * center) / h**2
    residual = -lap - k**2 * center
    assert np.abs(residual).max() < 1e-3 * np.abs(k**2 * center).max()


def test_double_layer_satisfies_maxwell_equation():
    # componentwise Helmholtz plus vanishing coderivative pin (delta d - k^2)
    mesh = sphere(2)
    beta = random_trace(mesh, 1, CURL, seed=7)
    k = 2.0

    def field(pts):
        return values_at(eval_double_layer(1, beta, k, pts))

    x = PROBE_X
    center = field(np.array([x]))[0]
    h = 1e-3
    lap = np.zeros_like(center)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        plus, minus = field(np.array([x + e, x - e]))
        lap += plus + minus
    lap = (lap - 6.0 * center) / h**2
    assert np.abs(-lap - k**2 * center).max() < 1e-3 * np.abs(k**2 * center).max()

    div = sum(fd_partial(field, x, a, 1e-4)[a] for a in range(3))
    assert abs(div) < 1e-5 * (k * np.linalg.norm(center))


def test_commutation_with_surface_coderivative():
    # FD coderivative of SL(gamma) against an independent quadrature of the
    # scalar single layer of the exact face-constant surface divergence
    mesh = sphere(2)
    gamma = random_trace(mesh, 1, DIV, seed=13)
    k = 2.0

    def field(pts):
        return values_at(eval_single_layer(1, gamma, k, pts))

    x = PROBE_X
    h = 1e-4
    fd_delta = -sum(fd_partial(field, x, a, h)[a] for a in range(3))

    rule = triangle_rule(6)
    nodes = np.einsum("ql,flj->fqj", rule.points, mesh.vertices[mesh.triangles])
    r = np.linalg.norm(x[None, None, :] - nodes, axis=2)
    g, _, _ = scalar_with_derivatives(3, k, r)
    dens = surface_divergence(gamma).coeffs / mesh.areas
    direct = np.einsum("q,f,fq,f->", rule.weights, mesh.areas, g, dens)
    assert abs(fd_delta - direct) < 1e-3 * abs(direct)


def test_de_rham_at_zero_wavenumber():
    # d DL_0(beta) == DL_1(dhat beta) when k = 0
    mesh = sphere(2)
    beta = random_trace(mesh, 0, seed=8)
    dhat_beta = TraceVector(
        form_space(mesh, 1, CURL), incidence_d(mesh, 0) @ beta.coeffs
    )

    def field(pts):
        return values_at(eval_double_layer(0, beta, 0.0, pts))

    x = PROBE_X
    grad = np.array([fd_partial(field, x, a, 1e-4)[0] for a in range(3)])
    rhs = eval_double_layer(1, dhat_beta, 0.0, [x])[0].value.coeffs
    assert np.linalg.norm(grad - rhs) < 1e-4 * np.linalg.norm(rhs)


# ---------------------------------------------------------------------------
# representation formula
# ---------------------------------------------------------------------------

def point_source_data(mesh, x0: np.ndarray, k: float) -> BoundaryData:
    """Interpolated Cauchy data of the point-source field on the mesh."""
    space = form_space(mesh, 0)
    rvec = mesh.vertices - x0
    r = np.linalg.norm(rvec, axis=1)
    g, g1, _ = scalar_with_derivatives(3, k, r)
    normal_deriv = g1 * np.einsum("ij,ij->i", rvec / r[:, None], mesh.vertices)
    return BoundaryData(0, TraceVector(space, g), TraceVector(space, normal_deriv))


def test_point_source_reconstruction_interior_data():
    mesh = sphere(2)
    x0 = np.array([0.0, 0.0, 3.0])
    k = 2.0
    data = point_source_data(mesh, x0, k)
    inner = np.array([[0, 0, 0], [0.3, -0.2, 0.1], [0, 0, 0.6]])
    outer = np.array([[0, 0, -2.0], [2.2, 0.3, 0.1]])
    got = values_at(eval_representation(data, k, inner, side=INTERIOR))[:, 0]
    r = np.linalg.norm(inner - x0, axis=1)
    exact = np.exp(1j * k * r) / (4 * np.pi * r)
    assert np.abs(got - exact).max() < 0.05 * np.abs(exact).min()
    leak = np.abs(values_at(eval_representation(data, k, outer, side=INTERIOR))).max()
    assert leak < 0.03 * np.abs(exact).max()


def test_point_source_reconstruction_exterior_data():
    # source inside the sphere radiates; exterior traces reconstruct outside
    mesh = sphere(2)
    x0 = np.array([0.2, -0.1, 0.3])
    k = 2.0
    data = point_source_data(mesh, x0, k)
    outer = np.array([[0, 0, 2.0], [1.8, -0.4, 0.4]])
    inner = np.array([[0, 0, 0.2], [0.4, 0.1, -0.2]])
    got = values_at(eval_representation(data, k, outer, side=EXTERIOR))[:, 0]
    r = np.linalg.norm(outer - x0, axis=1)
    exact = np.exp(1j * k * r) / (4 * np.pi * r)
    assert np.abs(got - exact).max() < 0.05 * np.abs(exact).min()
    leak = np.abs(values_at(eval_representation(data, k, inner, side=EXTERIOR))).max()
    assert leak < 0.03 * np.abs(exact).max()


def test_constant_field_reconstruction_is_quadrature_exact():
    # u == 1 at k = 0: only the double layer contributes, and its sphere
    # values are exact for any closed polyhedron
    mesh = sphere(1)
    space = form_space(mesh, 0)
    data = BoundaryData(
        0,
        TraceVector(space, np.ones(space.dof_count, dtype=complex)),
        TraceVector(space, np.zeros(space.dof_count, dtype=complex)),
    )
    inner = values_at(eval_representation(data, 0.0, [[0, 0, 0], [0.3, 0.2, -0.1]]))
    outer = values_at(
        eval_representation(data, 0.0, [[0, 0, 1.7], [2, 1, 0]], side=INTERIOR)
    )
    assert np.abs(inner - 1.0).max() < 1e-5
    assert np.abs(outer).max() < 1e-5


def test_representation_zero_data_zero_field():
    mesh = sphere(0)
    space = form_space(mesh, 0)
    zero = TraceVector(space, np.zeros(space.dof_count, dtype=complex))
    data = BoundaryData(0, zero, zero)
    samples = eval_representation(data, 2.0, [[0, 0, 0], [0, 0, 2.0]])
    assert all(np.all(s.value.coeffs == 0) for s in samples)


def test_representation_validates_side():
    mesh = sphere(0)
    space = form_space(mesh, 0)
    zero = TraceVector(space, np.zeros(space.dof_count, dtype=complex))
    with pytest.raises(ValueError, match="side"):
        eval_representation(BoundaryData(0, zero, zero), 2.0, [[0, 0, 2]], side="both")


# ---------------------------------------------------------------------------
# radiation and decay
# ---------------------------------------------------------------------------

RADII = np.array([4.0, 8.0, 16.0, 32.0])
DIRECTIONS = np.array([[1, 0.2, -0.1], [0.1, 1, 0.3], [-0.4, 0.2, 1]])
DIRECTIONS /= np.linalg.norm(DIRECTIONS, axis=1)[:, None]


def decay_exponent(magnitudes) -> float:
    return float(np.polyfit(np.log(RADII), np.log(magnitudes), 1)[0])


def test_radiation_condition_residual_decay():
    mesh = sphere(1)
    density = unit_scalar(mesh)
    k = 1.0
    residuals = []
    for radius in RADII:
        pts = radius * DIRECTIONS
        f = values_at(eval_single_layer(0, density, k, pts))[:, 0]
        df = values_at(eval_exact_potential(density, k, pts))
        radial = np.einsum("ia,ia->i", DIRECTIONS, df)
        residuals.append(np.abs(radial - 1j * k * f).max())
    assert decay_exponent(residuals) <= -1.5


def test_static_single_layer_decay_rate():
    mesh = sphere(1)
    mags = [
        np.abs(values_at(eval_single_layer(0, unit_scalar(mesh), 0.0, r * DIRECTIONS))).max()
        for r in RADII
    ]
    assert abs(decay_exponent(mags) + 1.0) < 0.2


def test_static_solenoidal_single_layer_gains_an_order():
    mesh = sphere(1)
    rng = np.random.default_rng(5)
    gamma = TraceVector(
        form_space(mesh, 1, DIV),
        (incidence_d(mesh, 0) @ rng.standard_normal(mesh.num_vertices)).astype(complex),
    )
    mags = [
        np.abs(values_at(eval_single_layer(1, gamma, 0.0, r * DIRECTIONS))).max()
        for r in RADII
    ]
    assert decay_exponent(mags) <= -1.8


# ---------------------------------------------------------------------------
# trace probes and jump relations
# ---------------------------------------------------------------------------

PROBE_FACES = (3, 17, 101)
PROBE_STEPS = np.array([0.404, 0.202, 0.101])


def probe_setup(mesh, f):
    return mesh.centroids[f], mesh.normals[f], mesh.diameters[f] * PROBE_STEPS


def test_neumann_jump_of_single_layer_is_minus_density():
    mesh = sphere(2)
    gamma = smooth_edge_field(mesh, rotated=True)
    lam = np.array([1 / 3, 1 / 3, 1 / 3])
    for f in PROBE_FACES:
        cent, nu, hseq = probe_setup(mesh, f)
        est = trace_probe(
            lambda pts: eval_single_layer(1, gamma, 2.0, pts),
            cent,
            nu,
            hseq,
            trace="neumann",
            d_evaluator=lambda pts: eval_exact_potential(gamma, 2.0, pts),
            mesh=mesh,
        )
        target = -field_value(gamma, f, lam)
        err = np.linalg.norm(est.jump.coeffs - target) / np.linalg.norm(target)
        assert err < 0.05


def test_dirichlet_jump_of_double_layer_is_plus_density():
    mesh = sphere(2)
    beta = smooth_edge_field(mesh, rotated=False)
    lam = np.array([1 / 3, 1 / 3, 1 / 3])
    for f in PROBE_FACES:
        cent, nu, hseq = probe_setup(mesh, f)
        est = trace_probe(
            lambda pts: eval_double_layer(1, beta, 2.0, pts),
            cent,
            nu,
            hseq,
            trace="dirichlet",
            mesh=mesh,
        )
        target = field_value(beta, f, lam)
        err = np.linalg.norm(est.jump.coeffs - target) / np.linalg.norm(target)
        assert err < 0.05


def test_normal_jump_of_exact_potential_is_minus_density():
    mesh = sphere(2)
    verts = mesh.vertices
    phi = TraceVector(
        form_space(mesh, 0),
        (np.sin(verts[:, 0]) + 0.5 * np.cos(verts[:, 1] + verts[:, 2]) + 0.9).astype(
            complex
        ),
    )
    for f in PROBE_FACES:
        cent, nu, hseq = probe_setup(mesh, f)
        est = trace_probe(
            lambda pts: eval_exact_potential(phi, 2.0, pts),
            cent,
            nu,
            hseq,
            trace="normal",
            mesh=mesh,
        )
        target = -phi.coeffs[mesh.triangles[f]].mean()
        assert abs(est.jump.coeffs[0] - target) < 0.05 * abs(target)


def test_scalar_double_layer_probe_mean_and_jump():
    # unit density: one-sided limits are exactly -1 and 0, so the mean is
    # -1/2 and the Dirichlet jump +1, up to near-evaluation quadrature
    mesh = sphere(2)
    density = unit_scalar(mesh)
    cent, nu, hseq = probe_setup(mesh, 17)
    est = trace_probe(
        lambda pts: eval_double_layer(0, density, 0.0, pts),
        cent,
        nu,
        hseq,
        trace="dirichlet",
        mesh=mesh,
    )
    assert abs(est.mean.coeffs[0] + 0.5) < 1e-4
    assert abs(est.jump.coeffs[0] - 1.0) < 1e-4
    assert abs(est.interior.coeffs[0] + 1.0) < 1e-4
    assert abs(est.exterior.coeffs[0]) < 1e-4


def test_trace_probe_validation():
    mesh = sphere(1)
    density = unit_scalar(mesh)

    def ev(pts):
        return eval_double_layer(0, density, 0.0, pts)

    cent, nu, hseq = probe_setup(mesh, 2)
    edge_point = 0.5 * (mesh.vertices[mesh.edges[0, 0]] + mesh.vertices[mesh.edges[0, 1]])
    with pytest.raises(PotentialError, match="interior of a panel"):
        trace_probe(ev, edge_point, nu, hseq, mesh=mesh)
    with pytest.raises(PotentialError, match="on the surface"):
        trace_probe(ev, [0.2, 0.2, 0.2], nu, hseq, mesh=mesh)
    with pytest.raises(ValueError, match="decreasing"):
        trace_probe(ev, cent, nu, hseq[::-1], mesh=mesh)
    with pytest.raises(ValueError, match="d evaluator"):
        trace_probe(ev, cent, nu, hseq, trace="neumann", mesh=mesh)
    with pytest.raises(ValueError, match="trace"):
        trace_probe(ev, cent, nu, hseq, trace="average", mesh=mesh)


def test_trace_probe_respects_evaluator_guard():
    mesh = sphere(1)
    density = unit_scalar(mesh)
    cent, nu, _ = probe_setup(mesh, 2)
    too_close = mesh.diameters[2] * np.array([0.2, 0.1, 0.05])
    with pytest.raises(PotentialError, match="trace_probe"):
        trace_probe(
            lambda pts: eval_double_layer(0, density, 0.0, pts),
            cent,
            nu,
            too_close,
            mesh=mesh,
        )


# ---------------------------------------------------------------------------
# side classification and CSV export
# ---------------------------------------------------------------------------

def test_point_side_classification():
    mesh = sphere(1)
    assert point_side(mesh, [0, 0, 0]) == INTERIOR
    assert point_side(mesh, [0.3, 0.3, 0.3]) == INTERIOR
    assert point_side(mesh, [1.2, 0, 0]) == EXTERIOR
    assert point_side(mesh, [0, -3, 0]) == EXTERIOR


def test_csv_export_round_trip(tmp_path):
    mesh = sphere(1)
    gamma = random_trace(mesh, 1, DIV, seed=30)
    samples = eval_single_layer(1, gamma, 2.0, [[0, 0, 2.0], [0, 0, 0]])
    path = tmp_path / "samples.csv"
    export_samples_csv(samples, path)
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["x", "y", "z", "side", "re_c0", "im_c0", "re_c1", "im_c1", "re_c2", "im_c2"]
    assert len(rows) == 3
    assert rows[1][3] == EXTERIOR and rows[2][3] == INTERIOR
    parsed = complex(float(rows[1][4]), float(rows[1][5]))
    assert parsed == samples[0].value.coeffs[0]


def test_csv_export_rejects_empty():
    with pytest.raises(ValueError, match="samples"):
        export_samples_csv([], "/tmp/unused.csv")

"""Kernel-layer checks: Hankel evaluation, scalar branches, form kernels.

The Hankel reference table was computed ahead of time with mpmath at 30
digits and frozen here; nothing in this file calls scipy or mpmath, so a
regression in the self-contained evaluator cannot hide behind the oracle.
"""

import math

import numpy as np
import pytest

from bemdf.exterior import PCov, basis_axes, hodge
from bemdf.kernels import (
    KernelError,
    as_wavenumber,
    fundamental_gradient,
    fundamental_scalar,
    green_kernel,
    hankel_h1,
    maxwell_green_kernel,
    scalar_with_derivatives,
    sphere_area,
)

# mpmath, 30 significant digits, frozen before the evaluator existed.
HANKEL_TABLE = {
    (0, 0.001): 0.9999997500000156249996 - 4.47141661137592326898j,
    (0, 0.5): 0.9384698072408129042284 - 0.4445187335067065571484j,
    (0, 1.0): 0.7651976865579665514497 + 0.08825696421567695798293j,
    (0, 2.0): 0.2238907791412356680518 + 0.5103756726497451195966j,
    (0, 7.9): 0.1943618448412783175629 + 0.2065209481443757040257j,
    (0, 8.1): 0.1475174540443775823307 + 0.2380913287022348559332j,
    (0, 12.0): 0.04768931079683353662381 - 0.2252373126343614336877j,
    (0, 20.0): 0.1670246643405831547273 + 0.06264059680938383116173j,
    (0, 50.0): 0.05581232766925181500475 - 0.09806499547007707902921j,
    (1, 0.001): 0.0004999999375000026041666 - 636.6221672311394280744j,
    (1, 0.5): 0.242268457674873886384 - 1.471472392670243069189j,
    (1, 1.0): 0.4400505857449335159597 - 0.7812128213002887165471j,
    (1, 2.0): 0.5767248077568733872024 - 0.1070324315409375468884j,
    (1, 7.9): 0.2191793999217511440789 - 0.1817210772805732091969j,
    (1, 8.1): 0.2476077669815929181828 - 0.1331487959524958357211j,
    (1, 12.0): -0.2234471044906276123677 - 0.05709921826089652105042j,
    (1, 20.0): 0.06683312417585004557899 - 0.165511614362521295864j,
    (1, 50.0): -0.09751182812517513766146 - 0.05679566856201476794182j,
    (2, 0.5): 0.03060402345868264130741 - 5.441370837174265719606j,
    (2, 2.0): 0.3528340286156377191506 - 0.617408104190682666485j,
    (2, 12.0): -0.08493049487860480535176 + 0.2157207762575453468459j,
    (2, 50.0): -0.05971280079425882051121 + 0.09579316872759648831154j,
    (3, 0.5): 0.002563729994587244075354 - 42.05949430472388268766j,
    (3, 2.0): 0.1289432494744020510988 - 1.127783776840427786082j,
    (3, 12.0): 0.1951369395310926772504 + 0.1290061436800783033324j,
    (3, 20.0): -0.09890139456044967561288 + 0.1496732627133941037144j,
    (0.5, 0.8): 0.639926150821458990719 - 0.6215056210158585520999j,
    (0.5, 3.0): 0.065008182877375778114 + 0.4560488207946331788468j,
    (0.5, 15.0): 0.1339676888224393461781 + 0.1565055159073085707235j,
    (1.5, 0.8): 0.1784020675109651862989 - 1.416808177091282180844j,
    (1.5, 3.0): 0.4777182150870917715515 + 0.08700809072083528150161j,
    (1.5, 15.0): 0.1654366951621378604687 - 0.1235339877619521081299j,
    (2.5, 0.8): 0.02908160234466045790179 - 4.691525043076449626065j,
    (2.5, 3.0): 0.4127100322097159934375 - 0.3690407300737978973452j,
    (2.5, 15.0): -0.1008803497900117740844 - 0.1812123134596989923495j,
}

HANKEL_TABLE_COMPLEX = {
    (0, 1 + 1j): 0.2274498948022947554202 - 0.05105545867308961813451j,
    (0, 3 + 4j): -0.001066652874679127572049 + 0.006321791757978725467026j,
    (0, -2 + 1j): -0.1122151777960679243773 + 0.1542816852560132627852j,
    (0, 10 + 3j): -0.01143101237538265555141 + 0.00439462700395647207297j,
    (1, 1 + 1j): -0.01564066906998077206238 - 0.2926665067642574483504j,
    (1, 3 + 4j): 0.006757842292905920501873 + 0.001504189593694733738829j,
    (1, -2 + 1j): 0.1912165507865747423225 + 0.09624813198824855750814j,
    (1, 10 + 3j): 0.00394241877878068480329 + 0.01179683036074016895553j,
}


@pytest.mark.parametrize("order,z", sorted(HANKEL_TABLE, key=str))
def test_hankel_against_frozen_table(order, z):
    expect = HANKEL_TABLE[(order, z)]
    got = hankel_h1(order, z)
    assert abs(got - expect) <= 2e-10 * max(1.0, abs(expect))


@pytest.mark.parametrize("order,z", sorted(HANKEL_TABLE_COMPLEX, key=str))
def test_hankel_complex_arguments(order, z):
    expect = HANKEL_TABLE_COMPLEX[(order, z)]
    got = hankel_h1(order, z)
    assert abs(got - expect) <= 2e-10 * max(1.0, abs(expect))


def test_hankel_half_order_closed_form():
    z = 2.0
    expect = math.sqrt(2.0 / (math.pi * z)) * (-1j) * np.exp(1j * z)
    assert abs(hankel_h1(0.5, z) - expect) < 1e-14


def test_bessel_wronskian():
    # J0 Y0' - J0' Y0 = 2/(pi z) with J = Re H, Y = Im H on the real axis
    z = 3.0
    h0, h1 = hankel_h1(0, z), hankel_h1(1, z)
    j0, y0 = h0.real, h0.imag
    j1, y1 = h1.real, h1.imag
    wronskian = j1 * y0 - j0 * y1
    assert abs(wronskian - 2.0 / (math.pi * z)) < 1e-10


def test_hankel_rejects_bad_input():
    with pytest.raises(KernelError):
        hankel_h1(0, 0.0)
    with pytest.raises(KernelError):
        hankel_h1(0, 1 - 0.5j)
    with pytest.raises(KernelError):
        hankel_h1(-1, 1.0)
    with pytest.raises(KernelError):
        hankel_h1(0.25, 1.0)


def test_wavenumber_validation():
    assert as_wavenumber(0) == 0
    for ok in (1.0, 2 + 1j, 1j, -2 + 1j):
        as_wavenumber(ok)
    for bad in (-1.0, -1j, 3 - 0.001j):
        with pytest.raises(KernelError):
            as_wavenumber(bad)


def test_scalar_newton_3d():
    assert abs(fundamental_scalar(3, 0, 1.0) - 1.0 / (4 * math.pi)) < 1e-15


def test_scalar_log_gauge():
    assert fundamental_scalar(2, 0, 0.7, r0=0.7) == 0.0
    with pytest.raises(KernelError):
        fundamental_scalar(2, 0, 1.0)  # r0 required
    with pytest.raises(KernelError):
        fundamental_scalar(2, 0, 1.0, r0=-1.0)


def test_scalar_rejects_bad_radius():
    with pytest.raises(KernelError):
        fundamental_scalar(3, 1.0, 0.0)
    with pytest.raises(KernelError):
        fundamental_scalar(3, 1.0, -0.5)


@pytest.mark.parametrize("k", [1.0, 2 + 0.5j])
def test_hankel_branch_matches_closed_form_3d(k):
    # (i/4)(k/2πr)^{1/2} H_{1/2}(kr) must equal exp(ikr)/(4πr)
    for r in np.geomspace(0.1, 10.0, 25):
        branch = 0.25j * (k / (2 * math.pi * r)) ** 0.5 * hankel_h1(0.5, k * r)
        closed = np.exp(1j * k * r) / (4 * math.pi * r)
        assert abs(branch - closed) < 1e-12 * abs(closed)


def test_scalar_generic_dimension_positive_k():
    # n = 4 goes through the integer-order Hankel branch; sanity via series at
    # small kr where g ~ k=0 kernel: r^(2-n)/((n-2) S_n)
    g = fundamental_scalar(4, 1e-4, 0.5)
    newton = 0.5 ** (-2) / (2 * sphere_area(4))
    assert abs(g.real - newton) < 1e-4 * newton


def _fd_laplacian(func, x, h=1e-3):
    n = len(x)
    val = func(x)
    total = -2 * n * val
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        total += func(x + e) + func(x - e)
    return total / h**2


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("k", [0, 1.0, 2 + 1j])
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_helmholtz_pde_residual(n, k, r):
    # positive Hodge Laplacian on functions is -div grad, so the equation
    # away from the source reads  -lap(g) - k^2 g = 0
    x0 = np.zeros(n)
    x0[0] = r
    r0 = 1.5 if (n == 2 and k == 0) else None

    def g_at(pt):
        return fundamental_scalar(n, k, float(np.linalg.norm(pt)), r0=r0)

    residual = -_fd_laplacian(g_at, x0) - complex(k) ** 2 * g_at(x0)
    assert abs(residual) < 1e-4 * max(abs(g_at(x0)), 1.0)


@pytest.mark.parametrize("n,k", [(3, 0), (3, 2 + 0.5j), (2, 1.5), (5, 1.0)])
def test_radial_derivatives_by_finite_differences(n, k):
    r0 = None if not (n == 2 and k == 0) else 1.0
    for r in (0.4, 1.3):
        h = 1e-5 * r
        g, g1, g2 = scalar_with_derivatives(n, k, r, r0=r0)
        gp = fundamental_scalar(n, k, r + h, r0=r0)
        gm = fundamental_scalar(n, k, r - h, r0=r0)
        fd1 = (gp - gm) / (2 * h)
        fd2 = (gp - 2 * g + gm) / h**2
        assert abs(fd1 - g1) < 1e-7 * max(1.0, abs(g1))
        assert abs(fd2 - g2) < 1e-4 * max(1.0, abs(g2))


def test_gradient_example_and_transport_flip():
    x = np.array([1.0, 0.0, 0.0])
    xp = np.zeros(3)
    d = fundamental_gradient(3, 0, x, xp)
    np.testing.assert_allclose(d.coeffs, [-1 / (4 * math.pi), 0, 0], atol=1e-15)
    dt = fundamental_gradient(3, 0, x, xp, at_observation=True)
    np.testing.assert_allclose(dt.coeffs, -d.coeffs, atol=0)


@pytest.mark.parametrize("n,k", [(3, 0), (3, 1 + 0.5j), (2, 2.0)])
def test_gradient_by_finite_differences(n, k):
    rng = np.random.default_rng(5)
    x = rng.normal(size=n)
    xp = rng.normal(size=n)
    r0 = None
    grad = fundamental_gradient(n, k, x, xp).coeffs
    h = 1e-4
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        fd = (
            fundamental_scalar(n, k, np.linalg.norm(x + e - xp), r0=r0)
            - fundamental_scalar(n, k, np.linalg.norm(x - e - xp), r0=r0)
        ) / (2 * h)
        assert abs(fd - grad[a]) < 1e-6 * max(1.0, abs(grad[a]))


def test_green_kernel_is_conjugated_scalar():
    k = 2 + 1j
    x, xp = np.array([0.3, -0.2, 0.9]), np.array([1.0, 0.4, 0.0])
    r = np.linalg.norm(x - xp)
    kv = green_kernel(0, 3, k, x, xp)
    expect = np.conj(fundamental_scalar(3, k, r))
    assert kv.matrix.shape == (1, 1)
    assert abs(kv.matrix[0, 0] - expect) < 1e-15
    kv1 = green_kernel(1, 3, 0, np.array([1.0, 0, 0]), np.zeros(3))
    np.testing.assert_allclose(kv1.matrix, np.eye(3) / (4 * math.pi), atol=1e-15)


def test_green_kernel_symmetry_in_points():
    x, xp = np.array([0.3, -0.2, 0.9]), np.array([1.0, 0.4, 0.0])
    a = green_kernel(2, 3, 1 + 1j, x, xp).matrix
    b = green_kernel(2, 3, 1 + 1j, xp, x).matrix
    np.testing.assert_array_equal(a, b)


def _hodge_matrix(n, p, inverse=False):
    cols = []
    for axes in basis_axes(n, p):
        cols.append(hodge(PCov.unit(n, axes), inverse=inverse).coeffs)
    return np.array(cols).T


@pytest.mark.parametrize("n", [2, 3, 4])
def test_green_kernel_hodge_identity(n):
    # * acting on the source leg of G_p equals the transported inverse star
    # acting on the observation leg of G_q; scalar factors cancel, leaving a
    # signed-permutation matrix identity checked exactly.
    for p in range(n + 1):
        q = n - p
        lhs = _hodge_matrix(n, p).T  # source-side star, components as columns
        rhs = _hodge_matrix(n, q, inverse=True)
        np.testing.assert_array_equal(lhs, rhs)


def test_coincident_points_raise():
    x = np.array([0.5, 0.5, 0.5])
    with pytest.raises(KernelError):
        green_kernel(0, 3, 1.0, x, x)
    with pytest.raises(KernelError):
        fundamental_gradient(3, 1.0, x, x + 1e-16)
    with pytest.raises(KernelError):
        maxwell_green_kernel(1, 3, 1.0, x, x)


def test_maxwell_kernel_degree_zero_is_plain():
    x, xp = np.array([0.3, -0.2, 0.9]), np.array([1.0, 0.4, 0.0])
    a = maxwell_green_kernel(0, 3, 2.0, x, xp).matrix
    b = green_kernel(0, 3, 2.0, x, xp).matrix
    np.testing.assert_array_equal(a, b)
    with pytest.raises(KernelError):
        maxwell_green_kernel(1, 3, 0, x, xp)


def test_maxwell_kernel_matches_dyadic_finite_differences():
    k = 1.3 + 0.4j
    x, xp = np.array([0.2, 0.7, -0.4]), np.array([-0.5, 0.1, 0.6])
    kv = maxwell_green_kernel(1, 3, k, x, xp).matrix

    def g_at(pt):
        return fundamental_scalar(3, k, float(np.linalg.norm(pt - xp)))

    h = 1e-4
    hess = np.zeros((3, 3), dtype=complex)
    for a in range(3):
        for b in range(3):
            ea, eb = np.zeros(3), np.zeros(3)
            ea[a], eb[b] = h, h
            hess[a, b] = (
                g_at(x + ea + eb) - g_at(x + ea - eb) - g_at(x - ea + eb) + g_at(x - ea - eb)
            ) / (4 * h * h)
    dyadic = np.conj(np.eye(3) * g_at(x) + hess / k**2)
    np.testing.assert_allclose(kv, dyadic, rtol=2e-5, atol=2e-5)


def test_maxwell_kernel_trace_identity():
    # trace of the d-delta correction equals the (positive) Laplacian of the
    # conjugated scalar, i.e. conj(k)^2 conj(g): analytic on both sides.
    k = 0.8 + 1.1j
    x, xp = np.array([1.0, 0.2, 0.1]), np.array([0.1, -0.3, 0.8])
    r = np.linalg.norm(x - xp)
    g = fundamental_scalar(3, k, r)
    kv = maxwell_green_kernel(1, 3, k, x, xp).matrix
    correction_trace = np.trace(kv - np.conj(g) * np.eye(3))
    assert abs(correction_trace - (-np.conj(g))) < 1e-13 * abs(g)


def test_kernel_calculus_transport_identities():
    # The source exterior derivative of f I_p matches the observation-side
    # codifferential of f I_(p+1) (and vice versa): in Cartesian frames both
    # reduce to the sign flip of the gradient under moving the derivative to
    # the other leg.  Checked in paired form with finite differences.
    from bemdf.exterior import PVec, duality, interior, riesz, wedge

    k = 1 + 0.7j
    rng = np.random.default_rng(17)
    x, xp = rng.normal(size=3), rng.normal(size=3) + np.array([2.0, 0, 0])

    h = 1e-4
    grad_obs = np.zeros(3, dtype=complex)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        grad_obs[a] = (
            fundamental_scalar(3, k, np.linalg.norm(x - xp - e))
            - fundamental_scalar(3, k, np.linalg.norm(x - xp + e))
        ) / (2 * h)

    df_src = fundamental_gradient(3, k, x, xp)
    df_obs = PCov(3, 1, grad_obs)

    for p in (1, 2):
        v = PVec(3, p, rng.normal(size=len(df_src.coeffs) if p == 1 else 3))
        w = PVec(3, p + 1, rng.normal(size=1 if p == 2 else 3))
        u = PVec(3, p - 1, rng.normal(size=1 if p == 1 else 3))
        vb = riesz(v)
        # d(f I_p) = delta'(f I_{p+1})
        lhs = duality(wedge(df_src, vb), w)
        rhs = -duality(interior(riesz(df_obs, inverse=True), riesz(w)), v)
        assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(lhs))
        # delta(f I_p) = d'(f I_{p-1})
        lhs2 = -duality(interior(riesz(df_src, inverse=True), vb), u)
        rhs2 = duality(wedge(df_obs, riesz(u)), v)
        assert abs(lhs2 - rhs2) < 1e-6 * max(1.0, abs(lhs2))

    # Laplacian transport: FD Laplacians in x and xp agree
    def g_src(pt):
        return fundamental_scalar(3, k, float(np.linalg.norm(pt - xp)))

    def g_obs(pt):
        return fundamental_scalar(3, k, float(np.linalg.norm(x - pt)))

    lap_x = _fd_laplacian(g_src, x)
    lap_xp = _fd_laplacian(g_obs, xp)
    assert abs(lap_x - lap_xp) < 1e-5 * max(1.0, abs(lap_x))

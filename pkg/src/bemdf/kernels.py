"""Fundamental solutions of Helmholtz operators and their form-valued kernels.

The scalar kernel ``g_n(r)`` is the outgoing radial fundamental solution in
dimension ``n``: a first-kind Hankel branch for wavenumber ``k != 0``, the
log kernel (with a free gauge length ``r0``) for ``n = 2, k = 0``, and the
power-law Newton kernel for ``n >= 3, k = 0``.  For ``n = 3`` everything
collapses to the closed form ``exp(ikr)/(4 pi r)`` which this module uses
for all wavenumbers.

Form-valued kernels are matrices on the lexicographic component basis with
rows indexed by observation components and columns by source components.
The degree-p kernel carries the *conjugated* scalar, ``conj(g_n) I_p``: the
conjugation is part of the kernel itself, not of any pairing, so single
layer potentials written as pairings against these kernels come out with the
plain ``g_n``.  This is invisible for real ``k`` and easy to get wrong when
``k`` is complex, hence the loud note.

Admissible wavenumbers are ``k = 0`` or ``0 <= arg(k) < pi`` (outgoing /
damped branch).  All functions are stateless and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exterior import PCov, basis_masks, merge_sign

__all__ = [
    "EULER_GAMMA",
    "KernelError",
    "KernelValue",
    "as_wavenumber",
    "fundamental_gradient",
    "fundamental_scalar",
    "green_kernel",
    "hankel_h1",
    "maxwell_green_kernel",
    "scalar_with_derivatives",
    "sphere_area",
]

EULER_GAMMA = 0.5772156649015328606065120900824024

# Power series below this |z|, big-argument expansion above.  The expansion's
# optimal-truncation error is ~exp(-2|z|), so the seam at 12 keeps both sides
# near 1e-10; a smaller seam would poison the crossover region.
_SERIES_LIMIT = 12.0

_SERIES_TERMS = 60

# Coincidence guard relative to the magnitude of the points themselves.
_SEPARATION_FACTOR = 1e-14


class KernelError(ValueError):
    """Invalid kernel evaluation: bad wavenumber, order, or coincident points."""


def as_wavenumber(k) -> complex:
    """Validate and normalize a wavenumber: ``0`` or ``0 <= arg(k) < pi``."""
    kc = complex(k)
    if kc == 0:
        return 0j
    if kc.imag < 0 or (kc.imag == 0 and kc.real < 0):
        raise KernelError(f"wavenumber must satisfy 0 <= arg(k) < pi or k = 0, got {kc}")
    return kc


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n: ``2 pi^(n/2) / Gamma(n/2)``."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


# ---------------------------------------------------------------------------
# Hankel functions of the first kind
# ---------------------------------------------------------------------------

def _harmonic(m: int) -> float:
    return sum(1.0 / j for j in range(1, m + 1))


def _j_y_series(z: complex) -> tuple[complex, complex, complex, complex]:
    """(J0, Y0, J1, Y1) by power series; good for |z| <= _SERIES_LIMIT."""
    q = -0.25 * z * z  # the series run over (-z^2/4)^m
    log_term = np.log(0.5 * z) + EULER_GAMMA

    j0 = 0j
    y0_sum = 0j
    term = 1.0 + 0j  # (-z^2/4)^m / (m!)^2
    for m in range(_SERIES_TERMS):
        j0 += term
        if m >= 1:
            y0_sum += -term * _harmonic(m)  # picks up the (-1)^{m+1} H_m sign
        term *= q / ((m + 1) * (m + 1))
    y0 = (2.0 / math.pi) * (log_term * j0 + y0_sum)

    j1_sum = 0j
    y1_sum = 0j
    term = 1.0 + 0j  # (-z^2/4)^m / (m! (m+1)!)
    for m in range(_SERIES_TERMS):
        j1_sum += term
        y1_sum += term * (_harmonic(m) + _harmonic(m + 1))
        term *= q / ((m + 1) * (m + 2))
    j1 = 0.5 * z * j1_sum
    y1 = (2.0 / math.pi) * (log_term * j1 - 1.0 / z - 0.25 * z * y1_sum)
    return j0, y0, j1, y1


def _hankel_asymptotic(nu: float, z: complex) -> complex:
    """Big-argument expansion with optimal truncation (stop at smallest term)."""
    phase = np.exp(1j * (z - 0.5 * nu * math.pi - 0.25 * math.pi))
    amp = np.sqrt(2.0 / (math.pi * z))
    total = 1.0 + 0j
    term = 1.0 + 0j
    four_nu2 = 4.0 * nu * nu
    prev = abs(term)
    for m in range(1, 60):
        term *= 1j * (four_nu2 - (2 * m - 1) ** 2) / (8.0 * m * z)
        size = abs(term)
        if size >= prev:  # divergent tail reached: truncate optimally
            break
        total += term
        prev = size
        if size < 1e-18 * abs(total):
            break
    return amp * phase * total


def _h0_h1(z: complex) -> tuple[complex, complex]:
    if abs(z) <= _SERIES_LIMIT:
        j0, y0, j1, y1 = _j_y_series(z)
        return j0 + 1j * y0, j1 + 1j * y1
    return _hankel_asymptotic(0.0, z), _hankel_asymptotic(1.0, z)


def hankel_h1(order: float, z: complex) -> complex:
    """First-kind Hankel function ``H^(1)_order(z)`` for ``Im z >= 0``.

    Orders are nonnegative integers or half-integers.  Half-integer orders
    use the elementary closed forms (the expansion terminates), integer
    orders 0 and 1 a series / big-argument split, and larger integers the
    upward three-term recurrence, which is stable for the Y-dominated H^(1).
    """
    two_nu = round(2 * float(order))
    if abs(2 * float(order) - two_nu) > 0 or two_nu < 0:
        raise KernelError(f"order must be a nonnegative (half-)integer, got {order}")
    zc = complex(z)
    if zc == 0:
        raise KernelError("Hankel function evaluated at z = 0")
    if zc.imag < 0:
        raise KernelError(f"Hankel branch requires Im z >= 0, got {zc}")

    if two_nu % 2:  # half-integer: exact elementary seed + recurrence
        root = np.sqrt(2.0 / (math.pi * zc)) * np.exp(1j * zc)
        h_prev = root          # H_{-1/2}
        h_cur = -1j * root     # H_{+1/2}
        nu = 0.5
        while nu < float(order):
            h_prev, h_cur = h_cur, (2.0 * nu / zc) * h_cur - h_prev
            nu += 1.0
        return complex(h_cur)

    h0, h1 = _h0_h1(zc)
    n = two_nu // 2
    if n == 0:
        return complex(h0)
    h_prev, h_cur = h0, h1
    for m in range(1, n):
        h_prev, h_cur = h_cur, (2.0 * m / zc) * h_cur - h_prev
    return complex(h_cur)


# ---------------------------------------------------------------------------
# Scalar fundamental solutions
# ---------------------------------------------------------------------------

def _require_r0(n: int, k: complex, r0) -> float:
    if n == 2 and k == 0:
        if r0 is None:
            raise KernelError("n = 2, k = 0 log kernel needs the gauge length r0")
        r0f = float(r0)
        if r0f <= 0:
            raise KernelError(f"gauge length r0 must be positive, got {r0}")
        return r0f
    return 1.0


def fundamental_scalar(n: int, k, r, r0=None):
    """Radial fundamental solution ``g_n(r)``.

    ``(i/4)(k/(2 pi r))^(n/2-1) H1_(n/2-1)(kr)`` for ``k != 0``;
    ``(1/(2 pi)) ln(r0/r)`` for ``n = 2, k = 0``;
    ``r^(2-n) / ((n-2) S_n)`` for ``n >= 3, k = 0``.
    For ``n = 3`` the closed form ``exp(ikr)/(4 pi r)`` serves all ``k``.
    Accepts array ``r`` when ``n = 3``; other dimensions are scalar-only.
    """
    g, _, _ = scalar_with_derivatives(n, k, r, r0)
    return g


def scalar_with_derivatives(n: int, k, r, r0=None):
    """``(g, dg/dr, d2g/dr2)`` of the scalar kernel, analytic in each branch."""
    if n < 2:
        raise KernelError(f"dimension must be >= 2, got {n}")
    kc = as_wavenumber(k)
    rarr = np.asarray(r, dtype=float)
    if np.any(rarr <= 0):
        raise KernelError("kernel radius must be positive")
    r0f = _require_r0(n, kc, r0)

    if n == 3:
        phase = np.exp(1j * kc * rarr) / (4.0 * math.pi)
        g = phase / rarr
        g1 = phase * (1j * kc * rarr - 1.0) / rarr**2
        g2 = phase * (-(kc * rarr) ** 2 - 2j * kc * rarr + 2.0) / rarr**3
        if np.isscalar(r) or np.ndim(r) == 0:
            return complex(g), complex(g1), complex(g2)
        return g, g1, g2

    rs = float(rarr)
    if kc == 0:
        if n == 2:
            g = math.log(r0f / rs) / (2.0 * math.pi)
            return g, -1.0 / (2.0 * math.pi * rs), 1.0 / (2.0 * math.pi * rs**2)
        area = sphere_area(n)
        g = rs ** (2 - n) / ((n - 2) * area)
        return g, -(rs ** (1 - n)) / area, (n - 1) * rs ** (-n) / area

    nu = 0.5 * n - 1.0
    pref = 0.25j * (kc / (2.0 * math.pi * rs)) ** nu
    h_nu = hankel_h1(nu, kc * rs)
    h_nu1 = hankel_h1(nu + 1, kc * rs)
    h_nu2 = hankel_h1(nu + 2, kc * rs)
    g = pref * h_nu
    g1 = -pref * kc * h_nu1
    g2 = -pref * kc * (h_nu1 / rs - kc * h_nu2)
    return complex(g), complex(g1), complex(g2)


# ---------------------------------------------------------------------------
# Point-pair kernels
# ---------------------------------------------------------------------------

def _separation(x, xp) -> tuple[np.ndarray, float]:
    xa = np.asarray(x, dtype=float)
    xpa = np.asarray(xp, dtype=float)
    if xa.shape != xpa.shape or xa.ndim != 1:
        raise KernelError("points must be 1-d arrays of equal dimension")
    diff = xa - xpa
    r = float(np.linalg.norm(diff))
    scale = max(1.0, float(np.linalg.norm(xa)), float(np.linalg.norm(xpa)))
    if r < _SEPARATION_FACTOR * scale:
        raise KernelError(
            f"points separated by {r:.3e} are numerically coincident "
            "(singular integration belongs to the quadrature layer)"
        )
    return diff, r


def fundamental_gradient(n: int, k, x, xp, at_observation: bool = False) -> PCov:
    """Exterior derivative of ``g_n(|x - xp|)`` as a 1-covector.

    By default the derivative is taken at the source point ``x``:
    ``g'(r) * (x - xp)/r`` flattened.  With ``at_observation`` the covector
    is transported to the observation point ``xp``, which in Cartesian
    frames is exactly a sign flip.
    """
    diff, r = _separation(x, xp)
    if len(diff) != n:
        raise KernelError(f"points of dimension {len(diff)} passed with n = {n}")
    _, g1, _ = scalar_with_derivatives(n, k, r)
    coeffs = g1 * diff / r
    if at_observation:
        coeffs = -coeffs
    return PCov(n, 1, coeffs)


@dataclass(frozen=True)
class KernelValue:
    """Form-valued kernel sample: ``matrix[obs component, source component]``."""

    n: int
    p: int
    k: complex
    matrix: np.ndarray


def green_kernel(p: int, n: int, k, x, xp) -> KernelValue:
    """Degree-p kernel ``conj(g_n) I_p`` at a point pair.

    The conjugation is deliberate and lives here (see module docstring);
    rows are observation components, columns source components, both on the
    lexicographic degree-p basis.
    """
    if not 0 <= p <= n:
        raise KernelError(f"degree p = {p} out of range for n = {n}")
    kc = as_wavenumber(k)
    _, r = _separation(x, xp)
    g = fundamental_scalar(n, kc, r, r0=1.0 if (n == 2 and kc == 0) else None)
    dim = len(basis_masks(n, p))
    return KernelValue(n, p, kc, np.conj(g) * np.eye(dim, dtype=complex))


def _hessian_of_radial(g1, g2, diff, r) -> np.ndarray:
    """Hessian of a radial function from its first two radial derivatives."""
    rhat = diff / r
    outer = np.outer(rhat, rhat)
    return g2 * outer + (g1 / r) * (np.eye(len(diff)) - outer)


def maxwell_green_kernel(p: int, n: int, k, x, xp) -> KernelValue:
    """Degree-p Maxwell kernel ``(1 - (1/conj(k)^2) d delta) conj(g_n) I_p``.

    The correction term is assembled from analytic second derivatives of
    ``g_n`` on the source side; for ``p = 1, n = 3`` this is the classical
    dyadic kernel ``conj((I + k^-2 grad grad) g)``.
    """
    if not 0 <= p <= n:
        raise KernelError(f"degree p = {p} out of range for n = {n}")
    kc = as_wavenumber(k)
    if kc == 0:
        raise KernelError("Maxwell kernel requires k != 0")
    diff, r = _separation(x, xp)
    g, g1, g2 = scalar_with_derivatives(n, kc, r)
    hess = _hessian_of_radial(np.conj(g1), np.conj(g2), diff, r)

    masks = basis_masks(n, p)
    pos = {m: i for i, m in enumerate(masks)}
    dim = len(masks)
    mat = np.conj(g) * np.eye(dim, dtype=complex)
    # d(delta(f dx^J)) = -sum_{a,b} f_{,ab} dx^b ^ i_{e_a} dx^J; the Maxwell
    # kernel subtracts (1/conj(k)^2) of it.
    inv_k2 = 1.0 / np.conj(kc) ** 2
    for col, mj in enumerate(masks):
        for a in range(n):
            bit_a = 1 << a
            if not mj & bit_a:
                continue
            rest = mj ^ bit_a
            s_a = merge_sign(bit_a, rest)
            for b in range(n):
                bit_b = 1 << b
                if rest & bit_b:
                    continue
                s_b = merge_sign(bit_b, rest)
                mat[pos[bit_b | rest], col] += inv_k2 * hess[a, b] * s_a * s_b
    return KernelValue(n, p, kc, mat)

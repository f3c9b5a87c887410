"""Exact exterior algebra over R^n in orthonormal Cartesian frames.

Degree-p covectors and p-vectors are stored as complex coefficient arrays on
the lexicographic multi-index basis (``dx^J`` for axis sets ``J`` listed in
ascending order).  Multi-indices are encoded as bitmasks over axes
``0..n-1``, and every sign is the exact parity of a merge permutation, so the
algebraic identities (anticommutativity, ``** = (-1)^{p(n-p)}``, the interior
product antiderivation rule, ...) hold in integer arithmetic with no floating
point slack.

The metric is Euclidean and the frame orthonormal throughout: the Riesz maps
are coefficient-wise identities, and the Hodge star is a signed permutation
of coefficients.  The volume form is ``dx^0 ∧ ... ∧ dx^{n-1}``; together with
the right-handed axis order this fixes every orientation-dependent sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

__all__ = [
    "MAX_DIM",
    "PCov",
    "PVec",
    "VectorProxy",
    "basis_axes",
    "basis_masks",
    "duality",
    "hodge",
    "inner",
    "interior",
    "merge_sign",
    "riesz",
    "translate",
    "untranslate",
    "wedge",
]

MAX_DIM = 8


@lru_cache(maxsize=None)
def basis_axes(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    """Ascending axis tuples of all degree-``p`` multi-indices, in lex order."""
    _check_dim(n)
    if p < 0 or p > n:
        return ()
    return tuple(combinations(range(n), p))


@lru_cache(maxsize=None)
def basis_masks(n: int, p: int) -> tuple[int, ...]:
    """Bitmask encodings of :func:`basis_axes`, in the same (lex) order."""
    return tuple(sum(1 << a for a in axes) for axes in basis_axes(n, p))


@lru_cache(maxsize=None)
def _mask_position(n: int, p: int) -> dict[int, int]:
    return {mask: i for i, mask in enumerate(basis_masks(n, p))}


def merge_sign(a: int, b: int) -> int:
    """Sign of sorting the concatenation (a, b) of two bitmask multi-indices.

    Returns 0 when the index sets overlap, otherwise ``(-1)**inversions``
    where an inversion is a pair ``x in a, y in b`` with ``x > y``.  This is
    exactly the sign relating ``dx^a ∧ dx^b`` to the ascending basis element
    ``dx^(a|b)``.
    """
    if a & b:
        return 0
    inversions = 0
    rest = b
    while rest:
        low = rest & -rest
        # bits of `a` strictly above this bit of `b`
        inversions += (a >> low.bit_length()).bit_count()
        rest ^= low
    return -1 if inversions & 1 else 1


def _check_dim(n: int) -> None:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {n}")


class _Graded:
    """Shared container for graded coefficients on the lex basis."""

    __slots__ = ("n", "p", "coeffs")

    def __init__(self, n: int, p: int, coeffs=None):
        _check_dim(n)
        self.n = n
        self.p = p
        size = comb(n, p) if 0 <= p <= n else 0
        if coeffs is None:
            self.coeffs = np.zeros(size, dtype=complex)
        else:
            arr = np.asarray(coeffs, dtype=complex).reshape(-1)
            if arr.size != size:
                raise ValueError(
                    f"degree-{p} object over R^{n} needs {size} coefficients, "
                    f"got {arr.size}"
                )
            self.coeffs = arr.copy()

    def __add__(self, other):
        self._check_compatible(other)
        return type(self)(self.n, self.p, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return type(self)(self.n, self.p, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return type(self)(self.n, self.p, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.n, self.p, -self.coeffs)

    def _check_compatible(self, other) -> None:
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.n != self.n or other.p != self.p:
            raise ValueError("dimension/degree mismatch")

    def __repr__(self):
        name = type(self).__name__
        return f"{name}(n={self.n}, p={self.p}, coeffs={self.coeffs!r})"


class PCov(_Graded):
    """A p-covector over R^n: complex coefficients on the lex ``dx^J`` basis."""

    @classmethod
    def unit(cls, n: int, axes: tuple[int, ...]) -> "PCov":
        """The basis covector ``dx^axes`` (axes given in any order, with sign)."""
        return cls._unit_impl(n, axes)

    @classmethod
    def _unit_impl(cls, n, axes):
        p = len(axes)
        out = cls(n, p)
        sign = _permutation_sign(axes)
        if sign == 0:
            return out  # repeated axis: zero
        mask = sum(1 << a for a in axes)
        out.coeffs[_mask_position(n, p)[mask]] = sign
        return out


class PVec(_Graded):
    """A p-vector over R^n on the lex ``∂_J`` basis (same layout as PCov)."""

    @classmethod
    def unit(cls, n: int, axes: tuple[int, ...]) -> "PVec":
        p = len(axes)
        out = cls(n, p)
        sign = _permutation_sign(axes)
        if sign == 0:
            return out
        mask = sum(1 << a for a in axes)
        out.coeffs[_mask_position(n, p)[mask]] = sign
        return out


def _permutation_sign(axes: tuple[int, ...]) -> int:
    """Sign of the permutation sorting ``axes`` ascending; 0 on repeats."""
    if len(set(axes)) != len(axes):
        return 0
    sign = 1
    lst = list(axes)
    for i in range(len(lst)):
        for j in range(i + 1, len(lst)):
            if lst[i] > lst[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class VectorProxy:
    """Scalar/vector stand-in of a form over R^3.

    ``value`` is a complex scalar for degrees 0 and 3 and a length-3 complex
    array for degrees 1 and 2.
    """

    p: int
    value: object

    def as_array(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.value, dtype=complex))


def wedge(a, b):
    """Exterior product ``a ∧ b``; graded anticommutative, exact signs.

    Both arguments must be PCov or both PVec; the result has the same kind.
    """
    if type(a) is not type(b):
        raise TypeError("wedge needs two covectors or two vectors")
    if a.n != b.n:
        raise ValueError("dimension mismatch in wedge")
    n = a.n
    out = type(a)(n, a.p + b.p)
    if out.coeffs.size == 0:
        return out
    masks_a = basis_masks(n, a.p)
    masks_b = basis_masks(n, b.p)
    pos = _mask_position(n, a.p + b.p)
    for i, ma in enumerate(masks_a):
        ca = a.coeffs[i]
        if ca == 0:
            continue
        for j, mb in enumerate(masks_b):
            cb = b.coeffs[j]
            if cb == 0:
                continue
            s = merge_sign(ma, mb)
            if s:
                out.coeffs[pos[ma | mb]] += s * ca * cb
    return out


@lru_cache(maxsize=None)
def _hodge_table(n: int, p: int, inverse: bool) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(target positions, signs) for the (inverse) Hodge star on degree p."""
    full = (1 << n) - 1
    pos_q = _mask_position(n, n - p)
    targets, signs = [], []
    extra = 1
    if inverse and ((p * (n - p)) % 2):
        extra = -1
    for mask in basis_masks(n, p):
        comp = full ^ mask
        targets.append(pos_q[comp])
        signs.append(extra * merge_sign(mask, comp))
    return tuple(targets), tuple(signs)


def hodge(a: PCov, inverse: bool = False) -> PCov:
    """Hodge star ``*a`` (or ``*^{-1} a``) in the orthonormal frame.

    On basis elements ``*dx^J = sign(J, J^c) dx^{J^c}``; the inverse differs
    by the involution factor ``(-1)^{p(n-p)}``.
    """
    out = PCov(a.n, a.n - a.p)
    targets, signs = _hodge_table(a.n, a.p, inverse)
    for i, (t, s) in enumerate(zip(targets, signs)):
        out.coeffs[t] = s * a.coeffs[i]
    return out


def interior(v: PVec, omega: PCov) -> PCov:
    """Interior product ``i_v omega``: adjoint of left wedge-insertion.

    On basis elements ``i_{∂_K} dx^J = sign(K, J\\K) dx^{J\\K}`` when
    ``K ⊆ J`` and zero otherwise; degrees ``deg(omega) < deg(v)`` land in the
    empty space, same as wedge products above the top degree.
    """
    if v.n != omega.n:
        raise ValueError("dimension mismatch in interior product")
    n = v.n
    out_deg = omega.p - v.p
    out = PCov(n, out_deg)
    if out.coeffs.size == 0:
        return out
    pos = _mask_position(n, out_deg)
    masks_v = basis_masks(n, v.p)
    masks_o = basis_masks(n, omega.p)
    for i, mk in enumerate(masks_v):
        cv = v.coeffs[i]
        if cv == 0:
            continue
        for j, mj in enumerate(masks_o):
            co = omega.coeffs[j]
            if co == 0 or (mk & mj) != mk:
                continue
            rest = mj ^ mk
            out.coeffs[pos[rest]] += merge_sign(mk, rest) * cv * co
    return out


def riesz(x, inverse: bool = False):
    """Riesz isomorphism between p-vectors and p-covectors.

    Coefficient-wise identity in the orthonormal frame: ``riesz(PVec)`` is
    the covector ``g(v)`` and ``riesz(PCov, inverse=True)`` is ``g^{-1}``.
    """
    if inverse:
        if not isinstance(x, PCov):
            raise TypeError("riesz inverse maps PCov -> PVec")
        return PVec(x.n, x.p, x.coeffs)
    if not isinstance(x, PVec):
        raise TypeError("riesz maps PVec -> PCov (pass inverse=True for PCov -> PVec)")
    return PCov(x.n, x.p, x.coeffs)


def duality(omega: PCov, v: PVec) -> complex:
    """Bilinear duality product ``⟨omega, v⟩`` on matching degrees."""
    if omega.n != v.n or omega.p != v.p:
        raise ValueError("dimension/degree mismatch in duality product")
    return complex(np.dot(omega.coeffs, v.coeffs))


def inner(a: PCov, b: PCov) -> complex:
    """Bilinear coefficient pairing ``⟨a, b⟩`` (orthonormal frame).

    Conjugate one argument explicitly when a Hermitian product is wanted;
    keeping the raw form bilinear makes identities such as
    ``⟨a, b⟩ μ = a ∧ *b`` hold verbatim over complex coefficients.
    """
    if a.n != b.n or a.p != b.p:
        raise ValueError("dimension/degree mismatch in inner product")
    return complex(np.dot(a.coeffs, b.coeffs))


# Degree-2 proxy over R^3: lex basis is (dx01, dx02, dx12); the Poincaré map
# sends dx12 -> e0, -dx02 -> e1, dx01 -> e2.
_POINCARE = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])


def translate(omega: PCov) -> VectorProxy:
    """Scalar/vector proxy of a form over R^3.

    Degree 0: identity on the scalar.  Degree 1: the Riesz vector.  Degree 2:
    the Poincaré map pairing ``dx^1∧dx^2`` with the first axis (and cyclic).
    Degree 3: the coefficient of the unit volume form.
    """
    if omega.n != 3:
        raise ValueError("proxies are defined over R^3 only")
    if omega.p == 0:
        return VectorProxy(0, complex(omega.coeffs[0]))
    if omega.p == 1:
        return VectorProxy(1, omega.coeffs.copy())
    if omega.p == 2:
        return VectorProxy(2, _POINCARE.T @ omega.coeffs)
    if omega.p == 3:
        return VectorProxy(3, complex(omega.coeffs[0]))
    raise ValueError(f"no proxy for degree {omega.p}")


def untranslate(proxy: VectorProxy) -> PCov:
    """Inverse of :func:`translate`."""
    p = proxy.p
    if p == 0:
        return PCov(3, 0, [proxy.value])
    if p == 1:
        return PCov(3, 1, proxy.value)
    if p == 2:
        arr = np.asarray(proxy.value, dtype=complex)
        return PCov(3, 2, _POINCARE @ arr)
    if p == 3:
        return PCov(3, 3, [proxy.value])
    raise ValueError(f"no proxy for degree {p}")

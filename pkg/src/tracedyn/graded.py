"""Truncated exterior (Grassmann) algebra with complex coefficients.

An element is a sparse map ``bitmask -> complex`` over at most 12 real,
anticommuting generators theta_0 ... theta_{G-1}.  Bit ``i`` of a mask marks
the presence of theta_i, and a monomial is always stored with its generators
in ascending order.
"""

from __future__ import annotations

import enum
import functools
import numbers

import numpy as np

from .errors import ConfigurationError

MAX_GENERATORS = 12


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"
    MIXED = "mixed"

    def __xor__(self, other):
        if Parity.MIXED in (self, other):
            return Parity.MIXED
        return Parity.EVEN if self is other else Parity.ODD


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@functools.lru_cache(maxsize=1 << 16)
def merge_sign(a: int, b: int) -> int:
    """Sign of theta_a * theta_b rewritten in ascending order (0 if they overlap)."""
    if a & b:
        return 0
    swaps = 0
    rest = b
    while rest:
        low = rest & -rest
        # generators of a sitting above this generator of b must hop over it
        swaps += popcount(a & ~((low << 1) - 1))
        rest ^= low
    return -1 if swaps & 1 else 1


def reversal_sign(mask: int) -> int:
    """Sign picked up by reversing the generator order of a monomial."""
    k = popcount(mask)
    return -1 if (k * (k - 1) // 2) & 1 else 1


class GrassmannElement:
    """Immutable element of the Grassmann algebra on ``n_generators`` generators.

    ``n_generators == 0`` is the plain complex-number fast path.
    """

    __slots__ = ("_n", "_coeffs")

    def __init__(self, n_generators: int = 0, coeffs=None):
        if not 0 <= n_generators <= MAX_GENERATORS:
            raise ConfigurationError(
                f"generator count must lie in [0, {MAX_GENERATORS}], got {n_generators}")
        clean = {}
        limit = 1 << n_generators
        for mask, value in (coeffs or {}).items():
            mask = int(mask)
            if not 0 <= mask < limit:
                raise ConfigurationError(f"monomial mask {mask:#b} outside G={n_generators}")
            value = complex(value)
            if not np.isfinite(value.real) or not np.isfinite(value.imag):
                raise ConfigurationError(f"non-finite coefficient for mask {mask:#b}")
            if value != 0:
                clean[mask] = clean.get(mask, 0) + value
        self._n = n_generators
        self._coeffs = {m: v for m, v in clean.items() if v != 0}

    # --- constructors -------------------------------------------------
    @classmethod
    def scalar(cls, value, n_generators: int = 0) -> GrassmannElement:
        return cls(n_generators, {0: value})

    @classmethod
    def generator(cls, index: int, n_generators: int, coefficient=1.0) -> GrassmannElement:
        if not 0 <= index < n_generators:
            raise ConfigurationError(f"generator {index} outside G={n_generators}")
        return cls(n_generators, {1 << index: coefficient})

    @classmethod
    def monomial(cls, indices, n_generators: int, coefficient=1.0) -> GrassmannElement:
        """``coefficient * theta_{i0} theta_{i1} ...`` in the given (any) order."""
        out = cls.scalar(coefficient, n_generators)
        for i in indices:
            out = out * cls.generator(i, n_generators)
        return out

    # --- accessors ----------------------------------------------------
    @property
    def n_generators(self) -> int:
        return self._n

    @property
    def coeffs(self) -> dict:
        return dict(self._coeffs)

    def __getitem__(self, mask: int) -> complex:
        return self._coeffs.get(mask, 0j)

    def is_zero(self) -> bool:
        return not self._coeffs

    def body(self) -> complex:
        """Coefficient of the unit monomial."""
        return self._coeffs.get(0, 0j)

    def parity(self) -> Parity:
        return g_parity(self)

    def adjoint(self) -> GrassmannElement:
        return g_adjoint(self)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = self._coerce(other)
        diff = self - other
        return all(abs(v) <= atol for v in diff._coeffs.values())

    # --- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> GrassmannElement:
        if isinstance(other, GrassmannElement):
            if other._n != self._n:
                raise ConfigurationError(
                    f"generator count mismatch: {self._n} vs {other._n}")
            return other
        if isinstance(other, numbers.Number):
            return GrassmannElement.scalar(other, self._n)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._coeffs)
        for m, v in other._coeffs.items():
            out[m] = out.get(m, 0) + v
        return GrassmannElement(self._n, out)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self._n, {m: -v for m, v in self._coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return GrassmannElement(self._n, {m: v * other for m, v in self._coeffs.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return g_mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except ConfigurationError:
            return False
        if other is NotImplemented:
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self._n, frozenset(self._coeffs.items())))

    def __repr__(self):
        if not self._coeffs:
            return "0"
        parts = []
        for mask in sorted(self._coeffs, key=lambda m: (popcount(m), m)):
            gens = "".join(f"θ{i + 1}" for i in range(self._n) if mask >> i & 1)
            parts.append(f"({self._coeffs[mask]:g}){gens}")
        return " + ".join(parts)


def g_mul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Graded product with theta_i theta_j = -theta_j theta_i and theta_i**2 = 0."""
    if a.n_generators != b.n_generators:
        raise ConfigurationError(
            f"generator count mismatch: {a.n_generators} vs {b.n_generators}")
    out = {}
    for ma, va in a._coeffs.items():
        for mb, vb in b._coeffs.items():
            s = merge_sign(ma, mb)
            if s:
                m = ma | mb
                out[m] = out.get(m, 0) + s * va * vb
    return GrassmannElement(a.n_generators, out)


def g_adjoint(a: GrassmannElement) -> GrassmannElement:
    """Conjugate coefficients and reverse each monomial (generators are self-adjoint)."""
    return GrassmannElement(
        a.n_generators,
        {m: reversal_sign(m) * v.conjugate() for m, v in a._coeffs.items()})


def g_parity(a: GrassmannElement) -> Parity:
    degrees = {popcount(m) & 1 for m in a._coeffs}
    if not degrees or degrees == {0}:
        return Parity.EVEN
    if degrees == {1}:
        return Parity.ODD
    return Parity.MIXED


def random_element(n_generators: int, rng: np.random.Generator, parity: str | None = None,
                   density: float = 0.5) -> GrassmannElement:
    """Random element with Gaussian complex coefficients on a random subset of monomials.

    ``parity`` restricts the support to even or odd monomials.
    """
    coeffs = {}
    for mask in range(1 << n_generators):
        k = popcount(mask) & 1
        if parity == "even" and k:
            continue
        if parity == "odd" and not k:
            continue
        if rng.random() < density:
            coeffs[mask] = complex(rng.normal(), rng.normal())
    return GrassmannElement(n_generators, coeffs)

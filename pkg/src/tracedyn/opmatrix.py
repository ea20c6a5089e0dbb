"""N x N matrices with Grassmann-valued entries.

Storage is by Grassmann component: ``components[mask]`` is the dense complex
N x N matrix multiplying the monomial ``mask``.  A bosonic matrix with no
Grassmann content (G = 0) is a single component, so complex-only work never
touches the graded machinery beyond one dict lookup.
"""

from __future__ import annotations

import json
import numbers

import numpy as np

from .errors import ConfigurationError
from .graded import GrassmannElement, merge_sign, popcount, reversal_sign

GRADINGS = ("even", "odd")


def _compose_grading(a: str, b: str) -> str:
    return "even" if a == b else "odd"


class OperatorMatrix:
    """Immutable N x N matrix over the Grassmann algebra on ``n_generators`` generators.

    The grading is declared and checked at construction: every populated
    component of an even matrix is an even monomial, of an odd matrix an odd one.
    """

    __slots__ = ("_dim", "_n", "_grading", "_components", "label")

    def __init__(self, components, dim: int, n_generators: int = 0, grading: str = "even",
                 label: str | None = None, hermitian: bool = False):
        if grading not in GRADINGS:
            raise ConfigurationError(f"grading must be 'even' or 'odd', got {grading!r}")
        clean = {}
        for mask, block in components.items():
            mask = int(mask)
            if not 0 <= mask < (1 << n_generators):
                raise ConfigurationError(f"component mask {mask:#b} outside G={n_generators}")
            block = np.array(block, dtype=complex)
            if block.shape != (dim, dim):
                raise ConfigurationError(f"component shape {block.shape} != ({dim}, {dim})")
            if not np.all(np.isfinite(block)):
                raise ConfigurationError("non-finite matrix entries")
            if not np.any(block):
                continue
            if (popcount(mask) & 1) != (grading == "odd"):
                raise ConfigurationError(
                    f"{grading} matrix has a component on monomial {mask:#b} of the wrong parity")
            block.setflags(write=False)
            clean[mask] = block
        self._dim = dim
        self._n = n_generators
        self._grading = grading
        self._components = clean
        self.label = label
        if hermitian and not self.is_hermitian():
            raise ConfigurationError("matrix flagged hermitian but adjoint(M) != M")

    # --- constructors -------------------------------------------------
    @classmethod
    def from_array(cls, array, label=None, hermitian=False) -> OperatorMatrix:
        """Complex fast path: an even matrix with no Grassmann content."""
        array = np.asarray(array, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ConfigurationError(f"expected a square matrix, got shape {array.shape}")
        return cls({0: array}, array.shape[0], 0, "even", label, hermitian)

    @classmethod
    def from_entries(cls, entries, grading="even", label=None) -> OperatorMatrix:
        """Build from a nested list of :class:`GrassmannElement` (or numbers)."""
        dim = len(entries)
        gens = {e.n_generators for row in entries for e in row if isinstance(e, GrassmannElement)}
        if len(gens) > 1:
            raise ConfigurationError(f"entries mix generator counts {sorted(gens)}")
        n = gens.pop() if gens else 0
        comps = {}
        for i, row in enumerate(entries):
            if len(row) != dim:
                raise ConfigurationError("entries must form a square array")
            for j, e in enumerate(row):
                if not isinstance(e, GrassmannElement):
                    e = GrassmannElement.scalar(e, n)
                for mask, v in e.coeffs.items():
                    comps.setdefault(mask, np.zeros((dim, dim), complex))[i, j] = v
        return cls(comps, dim, n, grading, label)

    @classmethod
    def zeros(cls, dim, n_generators=0, grading="even") -> OperatorMatrix:
        return cls({}, dim, n_generators, grading)

    @classmethod
    def identity(cls, dim, n_generators=0) -> OperatorMatrix:
        return cls({0: np.eye(dim)}, dim, n_generators, "even")

    # --- accessors ----------------------------------------------------
    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n_generators(self) -> int:
        return self._n

    @property
    def grading(self) -> str:
        return self._grading

    @property
    def components(self) -> dict:
        return dict(self._components)

    @property
    def array(self) -> np.ndarray:
        """Dense complex matrix; only defined when there is no Grassmann content."""
        if any(m for m in self._components):
            raise ConfigurationError("matrix has Grassmann content; use .components")
        block = self._components.get(0)
        return np.array(block) if block is not None else np.zeros((self._dim, self._dim), complex)

    def entry(self, i: int, j: int) -> GrassmannElement:
        return GrassmannElement(self._n, {m: b[i, j] for m, b in self._components.items()})

    def entries(self):
        return [[self.entry(i, j) for j in range(self._dim)] for i in range(self._dim)]

    def _check_compatible(self, other: OperatorMatrix):
        if self._dim != other._dim:
            raise ConfigurationError(f"shape mismatch: {self._dim} vs {other._dim}")
        if self._n != other._n:
            raise ConfigurationError(
                f"generator count mismatch: {self._n} vs {other._n}")

    # --- algebra ------------------------------------------------------
    def __matmul__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return mat_mul(self, other)

    def _linear(self, other, sign):
        self._check_compatible(other)
        if self._grading != other._grading and other._components and self._components:
            raise ConfigurationError("cannot add matrices of different grading")
        grading = self._grading if self._components else other._grading
        out = {m: np.array(b) for m, b in self._components.items()}
        for m, b in other._components.items():
            out[m] = out[m] + sign * b if m in out else sign * b
        return OperatorMatrix(out, self._dim, self._n, grading)

    def __add__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return self._linear(other, 1)

    def __sub__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return self._linear(other, -1)

    def __neg__(self):
        return self * -1

    def __mul__(self, scalar):
        if not isinstance(scalar, numbers.Number):
            return NotImplemented
        return OperatorMatrix({m: b * scalar for m, b in self._components.items()},
                              self._dim, self._n, self._grading, self.label)

    __rmul__ = __mul__

    def adjoint(self) -> OperatorMatrix:
        return OperatorMatrix(
            {m: reversal_sign(m) * b.conj().T for m, b in self._components.items()},
            self._dim, self._n, self._grading)

    def trace(self) -> GrassmannElement:
        return trace(self)

    def frobenius(self) -> float:
        """Frobenius norm over all Grassmann components."""
        return float(np.sqrt(sum(np.sum(np.abs(b) ** 2) for b in self._components.values())))

    def allclose(self, other: OperatorMatrix, atol: float = 1e-12) -> bool:
        self._check_compatible(other)
        masks = set(self._components) | set(other._components)
        zero = np.zeros((self._dim, self._dim))
        return all(np.max(np.abs(self._components.get(m, zero) - other._components.get(m, zero)),
                          initial=0.0) <= atol for m in masks)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return self.allclose(self.adjoint(), atol)

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        return (f"OperatorMatrix{tag}(dim={self._dim}, G={self._n}, grading={self._grading}, "
                f"components={sorted(self._components)})")

    # --- serialization ------------------------------------------------
    def to_json(self) -> str:
        """Complex fast path: array-of-arrays of ``[re, im]`` pairs.

        Matrices with Grassmann content are written as an object holding one
        such grid per populated monomial mask.
        """
        def grid(block):
            return [[[float(z.real), float(z.imag)] for z in row] for row in block]

        if self._n == 0:
            return json.dumps(grid(self.array))
        return json.dumps({
            "dim": self._dim, "n_generators": self._n, "grading": self._grading,
            "components": {str(m): grid(b) for m, b in sorted(self._components.items())},
        })

    @classmethod
    def from_json(cls, text: str) -> OperatorMatrix:
        data = json.loads(text)

        def ungrid(g):
            a = np.asarray(g, dtype=float)
            if a.ndim != 3 or a.shape[2] != 2:
                raise ConfigurationError("matrix grid must be N x N x [re, im]")
            return a[..., 0] + 1j * a[..., 1]

        if isinstance(data, list):
            return cls.from_array(ungrid(data))
        return cls({int(m): ungrid(g) for m, g in data["components"].items()},
                   data["dim"], data["n_generators"], data["grading"])


def mat_mul(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    a._check_compatible(b)
    out = {}
    for ma, ba in a._components.items():
        for mb, bb in b._components.items():
            s = merge_sign(ma, mb)
            if s:
                m = ma | mb
                prod = s * (ba @ bb)
                out[m] = out[m] + prod if m in out else prod
    return OperatorMatrix(out, a.dim, a.n_generators, _compose_grading(a.grading, b.grading))


def trace(a: OperatorMatrix) -> GrassmannElement:
    return GrassmannElement(a.n_generators, {m: np.trace(b) for m, b in a._components.items()})


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return mat_mul(a, b) - mat_mul(b, a)


def anticommutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return mat_mul(a, b) + mat_mul(b, a)


def random_hermitian_array(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Hermitian matrix with E|M_ij|^2 = scale^2 for every entry.

    Diagonal entries are N(0, scale^2); off-diagonal real and imaginary parts
    are each N(0, scale^2 / 2), so E Tr(M^2) = dim^2 scale^2.
    """
    x = rng.normal(scale=scale / np.sqrt(2), size=(dim, dim))
    y = rng.normal(scale=scale / np.sqrt(2), size=(dim, dim))
    upper = np.triu(x + 1j * y, 1)
    diag = rng.normal(scale=scale, size=dim)
    return upper + upper.conj().T + np.diag(diag)


def random_hermitian(dim: int, seed, scale: float = 1.0, label=None) -> OperatorMatrix:
    if dim < 1:
        raise ConfigurationError("dim must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return OperatorMatrix.from_array(random_hermitian_array(dim, rng, scale), label=label)


def random_graded(dim: int, n_generators: int, grading: str, rng: np.random.Generator,
                  density: float = 0.5) -> OperatorMatrix:
    """Matrix of random Grassmann entries of a single parity (test fixture helper)."""
    comps = {}
    for mask in range(1 << n_generators):
        if (popcount(mask) & 1) != (grading == "odd"):
            continue
        if rng.random() < density:
            comps[mask] = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return OperatorMatrix(comps, dim, n_generators, grading)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with the phase fix on R's diagonal."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))

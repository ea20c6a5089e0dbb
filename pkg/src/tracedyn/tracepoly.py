"""Trace polynomials in noncommuting matrix symbols.

A :class:`TracePolynomial` is a complex-weighted sum of words ``Tr(a*b*c...)``.
Words are canonicalized to the lexicographically least graded cyclic
rotation, with the Koszul sign of rotating odd letters folded into the
coefficient.  Differentiation follows the rule "rotate the varied letter to
the right end, then drop it", which gives the matrix gradient ``D`` with
``delta Tr(W) = Tr(D delta_s)``.
"""

from __future__ import annotations

import dataclasses
import re
from collections.abc import Mapping

import numpy as np

from .errors import ConfigurationError, TraceSyntaxError
from .graded import GrassmannElement
from .opmatrix import OperatorMatrix, random_hermitian_array, random_unitary

KINDS = ("q", "p", "qdot", "constant")


@dataclasses.dataclass(frozen=True)
class Symbol:
    name: str
    kind: str
    dof: int | None = None
    grading: str = "even"

    @property
    def odd(self) -> bool:
        return self.grading == "odd"


class SymbolTable(Mapping):
    """Name -> :class:`Symbol`.

    Every ``q`` of degree of freedom ``r`` needs a partner of kind ``p`` (a
    Hamiltonian table) or ``qdot`` (a Lagrangian table) with the same ``r``
    and grading.
    """

    def __init__(self, symbols):
        table = {}
        for s in symbols:
            if s.kind not in KINDS:
                raise ConfigurationError(f"symbol {s.name!r}: unknown kind {s.kind!r}")
            if s.grading not in ("even", "odd"):
                raise ConfigurationError(f"symbol {s.name!r}: unknown grading {s.grading!r}")
            if s.name in table:
                raise ConfigurationError(f"duplicate symbol name {s.name!r}")
            if s.kind != "constant" and s.dof is None:
                raise ConfigurationError(f"symbol {s.name!r} needs a dof index")
            table[s.name] = s
        self._table = table
        self._order = {name: i for i, name in enumerate(sorted(table))}
        for s in table.values():
            if s.kind == "q":
                partners = [t for t in table.values()
                            if t.kind in ("p", "qdot") and t.dof == s.dof]
                if not partners:
                    raise ConfigurationError(f"coordinate {s.name!r} has no momentum/velocity partner")
                if any(t.grading != s.grading for t in partners):
                    raise ConfigurationError(f"dof {s.dof}: partner grading differs from {s.name!r}")

    @classmethod
    def standard(cls, n_bosonic: int, n_fermionic: int = 0, constants=(),
                 velocities: bool = False) -> SymbolTable:
        """``q1..qR`` with ``p1..pR`` (or ``qdot1..qdotR``), fermionic ``f1..`` with ``pf1..``."""
        partner = "qdot" if velocities else "p"
        syms = []
        for r in range(1, n_bosonic + 1):
            syms += [Symbol(f"q{r}", "q", r), Symbol(f"{partner}{r}", partner, r)]
        for k in range(1, n_fermionic + 1):
            r = n_bosonic + k
            syms += [Symbol(f"f{k}", "q", r, "odd"), Symbol(f"{partner}f{k}", partner, r, "odd")]
        syms += [Symbol(c, "constant") for c in constants]
        return cls(syms)

    @classmethod
    def from_dict(cls, spec: Mapping) -> SymbolTable:
        """``{"q1": {"kind": "q", "dof": 1, "grading": "even"}, ...}``"""
        return cls(Symbol(name, d["kind"], d.get("dof"), d.get("grading", "even"))
                   for name, d in spec.items())

    def __getitem__(self, name):
        return self._table[name]

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self._table == other._table

    __hash__ = None

    def sort_key(self, name: str) -> int:
        return self._order[name]

    def dofs(self) -> list[int]:
        return sorted({s.dof for s in self._table.values() if s.kind == "q"})

    def partner(self, dof: int, kind: str) -> Symbol:
        for s in self._table.values():
            if s.dof == dof and s.kind == kind:
                return s
        raise KeyError(f"no symbol of kind {kind!r} for dof {dof}")

    def of_kind(self, kind: str) -> list[Symbol]:
        return sorted((s for s in self._table.values() if s.kind == kind),
                      key=lambda s: (s.dof or 0, s.name))

    def is_bosonic(self) -> bool:
        return not any(s.odd for s in self._table.values())

    def to_dict(self) -> dict:
        return {s.name: {"kind": s.kind, "dof": s.dof, "grading": s.grading}
                for s in self._table.values()}


@dataclasses.dataclass(frozen=True)
class TraceWord:
    coefficient: complex
    letters: tuple


def _rotation_sign(symbols: SymbolTable, head: tuple, tail: tuple) -> int:
    """Sign of Tr(head tail) = sign * Tr(tail head)."""
    h = sum(symbols[x].odd for x in head)
    t = sum(symbols[x].odd for x in tail)
    return -1 if (h * t) & 1 else 1


def canonical_word(word: TraceWord, symbols: SymbolTable) -> TraceWord | None:
    """Least graded cyclic rotation; ``None`` if the word vanishes identically."""
    letters = tuple(word.letters)
    if not letters:
        return TraceWord(complex(word.coefficient), ())
    best, best_sign = None, None
    for k in range(len(letters)):
        rotated = letters[k:] + letters[:k]
        sign = _rotation_sign(symbols, letters[:k], letters[k:])
        key = tuple(symbols.sort_key(x) for x in rotated)
        if best is None or key < best[0]:
            best, best_sign = (key, rotated), sign
        elif key == best[0] and sign != best_sign:
            # graded cyclicity forces Tr(w) = -Tr(w)
            return None
    return TraceWord(complex(word.coefficient) * best_sign, best[1])


class TracePolynomial:
    """Sum of weighted trace words over a :class:`SymbolTable`.

    The constructor keeps words exactly as given; :func:`canonicalize` (and
    :func:`parse`, which calls it) merges them into canonical form.
    """

    def __init__(self, words, symbols: SymbolTable):
        self.symbols = symbols
        self.words = tuple(TraceWord(complex(w.coefficient), tuple(w.letters)) for w in words)
        for w in self.words:
            for x in w.letters:
                if x not in symbols:
                    raise ConfigurationError(f"word uses undeclared symbol {x!r}")

    @classmethod
    def zero(cls, symbols):
        return cls((), symbols)

    def canonicalize(self) -> TracePolynomial:
        return canonicalize(self)

    def is_canonical(self) -> bool:
        return self.words == canonicalize(self).words

    def is_zero(self) -> bool:
        return not canonicalize(self).words

    def letters_used(self) -> set:
        return {x for w in self.words for x in w.letters}

    def _check_same(self, other):
        if self.symbols != other.symbols:
            raise ConfigurationError("polynomials over different symbol tables")

    def __add__(self, other):
        self._check_same(other)
        return canonicalize(TracePolynomial(self.words + other.words, self.symbols))

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, scalar):
        return TracePolynomial((TraceWord(w.coefficient * scalar, w.letters) for w in self.words),
                               self.symbols)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __eq__(self, other):
        if not isinstance(other, TracePolynomial):
            return NotImplemented
        return (self.symbols == other.symbols
                and canonicalize(self).words == canonicalize(other).words)

    __hash__ = None

    def __repr__(self):
        if not self.words:
            return "0"
        return " + ".join(f"({w.coefficient:g})*Tr({'*'.join(w.letters)})" for w in self.words)

    def evaluate(self, binding):
        return evaluate(self, binding)

    def derivative(self, symbol: str) -> OperatorPolynomial:
        return cyclic_derivative(self, symbol)


def canonicalize(poly: TracePolynomial) -> TracePolynomial:
    merged = {}
    for w in poly.words:
        c = canonical_word(w, poly.symbols)
        if c is not None:
            merged[c.letters] = merged.get(c.letters, 0) + c.coefficient
    key = lambda letters: (len(letters), [poly.symbols.sort_key(x) for x in letters])
    words = [TraceWord(merged[k], k) for k in sorted(merged, key=key) if merged[k] != 0]
    return TracePolynomial(words, poly.symbols)


class OperatorPolynomial:
    """Untraced matrix-valued polynomial: sum of ``coefficient * a*b*c``."""

    def __init__(self, terms, symbols: SymbolTable):
        merged = {}
        for coef, letters in terms:
            letters = tuple(letters)
            merged[letters] = merged.get(letters, 0) + complex(coef)
        self.symbols = symbols
        self.terms = tuple((c, k) for k, c in merged.items() if c != 0)

    def __add__(self, other):
        return OperatorPolynomial(self.terms + other.terms, self.symbols)

    def __mul__(self, scalar):
        return OperatorPolynomial(((c * scalar, k) for c, k in self.terms), self.symbols)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return dict((k, c) for c, k in self.terms) == dict((k, c) for c, k in other.terms)

    __hash__ = None

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({c:g})*{'*'.join(k) or '1'}" for c, k in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def letters_used(self) -> set:
        return {x for _, k in self.terms for x in k}

    def evaluate(self, binding):
        kind, binding, ident = _prepare_binding(self.symbols, binding, self.letters_used())
        total = None
        for coef, letters in self.terms:
            value = coef * _product(letters, binding, ident)
            total = value if total is None else total + value
        if total is None:
            total = ident * 0
        return total

    def directional(self, binding, symbol: str, direction):
        """Derivative of the polynomial along ``symbol -> symbol + t * direction`` at t=0."""
        kind, binding, ident = _prepare_binding(self.symbols, binding, self.letters_used())
        total = ident * 0
        for coef, letters in self.terms:
            for i, x in enumerate(letters):
                if x != symbol:
                    continue
                left = _product(letters[:i], binding, ident)
                right = _product(letters[i + 1:], binding, ident)
                total = total + coef * (left @ direction @ right)
        return total


def _product(letters, binding, ident):
    out = None
    for x in letters:
        out = binding[x] if out is None else out @ binding[x]
    return ident if out is None else out


def _prepare_binding(symbols: SymbolTable, binding, needed):
    """Validate gradings and pick the arithmetic: numpy arrays or OperatorMatrix."""
    missing = [x for x in needed if x not in binding]
    if missing:
        raise ConfigurationError(f"unbound symbols: {sorted(missing)}")
    graded = [v for v in binding.values() if isinstance(v, OperatorMatrix)]
    if graded:
        dims = {v.dim for v in graded}
        gens = {v.n_generators for v in graded}
        if len(dims) > 1 or len(gens) > 1:
            raise ConfigurationError("bound matrices differ in dimension or generator count")
        dim, n = dims.pop(), gens.pop()
        out = {}
        for name, v in binding.items():
            if name not in symbols:
                continue
            if not isinstance(v, OperatorMatrix):
                arr = np.asarray(v, dtype=complex)
                v = OperatorMatrix({0: arr}, dim, n, "even")
            if v.components and v.grading != symbols[name].grading:
                raise ConfigurationError(
                    f"symbol {name!r} declared {symbols[name].grading} but bound to "
                    f"{v.grading} matrix")
            out[name] = v
        return "graded", out, OperatorMatrix.identity(dim, n)
    out = {}
    shape = None
    for name, v in binding.items():
        if name not in symbols:
            continue
        if symbols[name].odd:
            raise ConfigurationError(
                f"odd symbol {name!r} needs an OperatorMatrix binding with Grassmann content")
        arr = np.asarray(v)
        if shape is None:
            shape = arr.shape
        out[name] = arr
    if shape is None:
        raise ConfigurationError("empty binding")
    return "array", out, np.broadcast_to(np.eye(shape[-1]), shape)


def evaluate(poly: TracePolynomial, binding):
    """Numeric value of the trace polynomial.

    Numpy bindings (optionally with leading batch axes) give complex numbers
    or arrays; :class:`OperatorMatrix` bindings give a :class:`GrassmannElement`.
    """
    kind, binding, ident = _prepare_binding(poly.symbols, binding, poly.letters_used())
    if kind == "array":
        total = 0
        for w in poly.words:
            total = total + w.coefficient * np.trace(_product(w.letters, binding, ident),
                                                     axis1=-2, axis2=-1)
        return total
    total = GrassmannElement(ident.n_generators)
    for w in poly.words:
        total = total + _product(w.letters, binding, ident).trace() * w.coefficient
    return total


def cyclic_derivative(poly: TracePolynomial, symbol: str) -> OperatorPolynomial:
    if symbol not in poly.symbols:
        raise ConfigurationError(f"unknown symbol {symbol!r}")
    terms = []
    for w in poly.words:
        for i, x in enumerate(w.letters):
            if x != symbol:
                continue
            head, tail = w.letters[:i + 1], w.letters[i + 1:]
            sign = _rotation_sign(poly.symbols, head, tail)
            terms.append((sign * w.coefficient, tail + w.letters[:i]))
    return OperatorPolynomial(terms, poly.symbols)


def check_unitary_invariance(poly: TracePolynomial, trials: int = 5, dim: int = 3,
                             constants: Mapping | None = None, seed=0,
                             tol: float = 1e-10) -> bool:
    """True iff the value is unchanged when all non-constant bindings are conjugated
    by the same random unitary, over ``trials`` random bindings."""
    if not poly.symbols.is_bosonic():
        raise ConfigurationError("unitary-invariance check runs on the complex fast path only")
    rng = np.random.default_rng(seed)
    constants = dict(constants or {})
    for _ in range(trials):
        binding = {}
        for name, s in poly.symbols.items():
            if s.kind == "constant":
                binding[name] = (np.asarray(constants[name], complex) if name in constants
                                 else rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
            else:
                binding[name] = random_hermitian_array(dim, rng)
        u = random_unitary(dim, rng)
        rotated = {name: (v if poly.symbols[name].kind == "constant" else u @ v @ u.conj().T)
                   for name, v in binding.items()}
        a, b = evaluate(poly, binding), evaluate(poly, rotated)
        if abs(a - b) > tol * max(1.0, abs(a)):
            return False
    return True


# --- parser ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>[ij])?(?P<junk>[A-Za-z_0-9.]*)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*^()])
""", re.VERBOSE)


@dataclasses.dataclass
class _Tok:
    kind: str    # num, imag, ident, op, end
    value: object
    pos: int


def _tokenize(text: str):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise TraceSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        if m.group("num") is not None:
            if m.group("junk"):
                raise TraceSyntaxError(f"malformed literal {m.group(0)!r}", text, pos)
            value = float(m.group("num"))
            out.append(_Tok("imag" if m.group("imag") else "num", value, pos))
        elif m.group("ident") is not None:
            out.append(_Tok("ident", m.group("ident"), pos))
        elif m.group("op") is not None:
            out.append(_Tok("op", m.group("op"), pos))
        pos = m.end()
    out.append(_Tok("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text, symbols, params):
        self.text = text
        self.symbols = symbols
        self.params = dict(params or {})
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise TraceSyntaxError(msg, self.text, tok.pos)

    def expect_op(self, op):
        t = self.next()
        if t.kind != "op" or t.value != op:
            self.error(f"expected {op!r}", t)
        return t

    def is_op(self, op, offset=0):
        t = self.peek(offset)
        return t.kind == "op" and t.value == op

    def poly(self):
        words = []
        sign = 1
        if self.is_op("+") or self.is_op("-"):
            sign = -1 if self.next().value == "-" else 1
        if self.peek().kind == "end":
            self.error("empty expression")
        words.append(self.term(sign))
        while self.is_op("+") or self.is_op("-"):
            sign = -1 if self.next().value == "-" else 1
            words.append(self.term(sign))
        if self.peek().kind != "end":
            self.error("unexpected token")
        return words

    def term(self, sign):
        start = self.peek()
        coef = complex(sign)
        letters = None
        while True:
            t = self.peek()
            if t.kind == "ident" and t.value == "Tr":
                if letters is not None:
                    self.error("a term may contain only one trace", t)
                self.next()
                self.expect_op("(")
                if self.is_op(")"):
                    self.error("empty trace")
                letters = self.word()
                self.expect_op(")")
            else:
                coef *= self.coefficient()
            if not self.is_op("*"):
                break
            self.next()
        if letters is None:
            self.error("term has no trace", start)
        return TraceWord(coef, tuple(letters))

    def power(self):
        if not self.is_op("^"):
            return 1
        self.next()
        t = self.next()
        if t.kind != "num" or t.value != int(t.value) or t.value < 1:
            self.error("exponent must be a positive integer", t)
        return int(t.value)

    def coefficient(self):
        t = self.next()
        if t.kind == "num":
            value = complex(t.value)
            # "a+bi" / "a-bi" literal
            nxt = self.peek(1)
            if (self.is_op("+") or self.is_op("-")) and nxt.kind == "imag":
                s = 1 if self.next().value == "+" else -1
                value += s * 1j * self.next().value
        elif t.kind == "imag":
            value = 1j * t.value
        elif t.kind == "ident" and t.value in self.params:
            value = complex(self.params[t.value])
        elif t.kind == "ident" and t.value in ("i", "j") and t.value not in self.symbols:
            value = 1j
        elif t.kind == "op" and t.value == "(":
            value = self.literal_sum()
            self.expect_op(")")
        elif t.kind == "ident" and t.value in self.symbols:
            self.error(f"symbol {t.value!r} outside Tr(...)", t)
        elif t.kind == "ident":
            self.error(f"unknown symbol or parameter {t.value!r}", t)
        else:
            self.error("expected a coefficient or Tr(...)", t)
        return value ** self.power()

    def literal_sum(self):
        total = 0j
        first = True
        while True:
            s = 1
            if self.is_op("+") or self.is_op("-"):
                s = -1 if self.next().value == "-" else 1
            elif not first:
                break
            t = self.next()
            if t.kind == "num":
                total += s * t.value
            elif t.kind == "imag":
                total += s * 1j * t.value
            elif t.kind == "ident" and t.value in self.params:
                total += s * complex(self.params[t.value])
            else:
                self.error("malformed complex literal", t)
            first = False
            if not (self.is_op("+") or self.is_op("-")):
                break
        return total

    def word(self):
        letters = list(self.word_factor())
        while self.is_op("*"):
            self.next()
            letters += self.word_factor()
        return letters

    def word_factor(self):
        t = self.next()
        if t.kind == "op" and t.value == "(":
            inner = self.word()
            self.expect_op(")")
        elif t.kind == "ident":
            if t.value not in self.symbols:
                self.error(f"unknown symbol {t.value!r}", t)
            inner = [t.value]
        else:
            self.error("expected a symbol", t)
        return inner * self.power()


def parse(text: str, symbols: SymbolTable, params: Mapping | None = None,
          canonical: bool = True) -> TracePolynomial:
    """Parse ``c * Tr(a*b*...) + ...`` into a trace polynomial.

    Coefficients are real or imaginary literals (``2``, ``1.5i``), ``a+bi``
    literals, parenthesized literal sums, or names from ``params``; factors
    may be raised to positive integer powers with ``^``, e.g.
    ``0.5*w^2*Tr(q1^2)``.
    """
    words = _Parser(text, symbols, params).poly()
    poly = TracePolynomial(words, symbols)
    return canonicalize(poly) if canonical else poly

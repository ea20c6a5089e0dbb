import numpy as np
import pytest

from tracedyn import fixtures as fx
from tracedyn.errors import ConfigurationError, TraceSyntaxError
from tracedyn.graded import GrassmannElement
from tracedyn.opmatrix import OperatorMatrix, mat_mul, random_graded, random_hermitian_array
from tracedyn.tracepoly import (OperatorPolynomial, Symbol, SymbolTable, TracePolynomial,
                                TraceWord, check_unitary_invariance, cyclic_derivative,
                                evaluate, parse)

ONE = SymbolTable.standard(1)
THREE = SymbolTable.standard(3)
FERMI = SymbolTable.standard(0, 2)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])


def random_binding(symbols, dim, rng):
    return {name: random_hermitian_array(dim, rng) for name in symbols}


# --- parsing -----------------------------------------------------------------

def test_parse_harmonic_words():
    poly = parse("0.5*Tr(p1*p1) + 0.5*Tr(q1*q1)", ONE)
    assert len(poly.words) == 2
    assert all(w.coefficient == 0.5 for w in poly.words)


def test_cyclic_rotations_share_canonical_form():
    assert parse("Tr(q1*q2*q3)", THREE).words == parse("Tr(q2*q3*q1)", THREE).words


def test_odd_transposition_flips_sign():
    a = parse("Tr(f1*f2)", FERMI).words
    b = parse("Tr(f2*f1)", FERMI).words
    assert a[0].letters == b[0].letters
    assert a[0].coefficient == -b[0].coefficient


def test_odd_transposition_matches_graded_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        f1 = random_graded(2, 4, "odd", rng, density=1.0)
        f2 = random_graded(2, 4, "odd", rng, density=1.0)
        direct = mat_mul(f1, f2).trace()
        assert direct.allclose(-mat_mul(f2, f1).trace(), 1e-12)
        binding = {"f1": f1, "f2": f2}
        lib_a = parse("Tr(f1*f2)", FERMI).evaluate(binding)
        lib_b = parse("Tr(f2*f1)", FERMI).evaluate(binding)
        assert lib_a.allclose(direct, 1e-12)
        assert lib_b.allclose(-direct, 1e-12)


def test_odd_square_trace_vanishes():
    assert parse("Tr(f1*f1)", FERMI).is_zero()


@pytest.mark.parametrize("text, coefficient", [
    ("2i*Tr(q1)", 2j),
    ("(1+2i)*Tr(q1)", 1 + 2j),
    ("i*Tr(q1)", 1j),
    ("-1.5e-1*Tr(q1)", -0.15),
    ("w^2*Tr(q1)", 9.0),
])
def test_coefficient_literals(text, coefficient):
    poly = parse(text, ONE, {"w": 3.0})
    assert poly.words[0].coefficient == pytest.approx(coefficient)


def test_powers_expand():
    assert parse("Tr(q1^3*p1)", ONE) == parse("Tr(q1*q1*q1*p1)", ONE)
    assert parse("Tr((q1*p1)^2)", ONE) == parse("Tr(q1*p1*q1*p1)", ONE)


@pytest.mark.parametrize("text, column", [
    ("Tr(q1*x9)", 6),
    ("Tr()", 3),
    ("0.5*Tr(q1) + 2", 13),
    ("3x*Tr(q1)", 0),
])
def test_parse_errors_report_position(text, column):
    with pytest.raises(TraceSyntaxError) as err:
        parse(text, ONE)
    assert err.value.position == column
    assert "^" in str(err.value)


def test_symbol_table_requires_partner():
    with pytest.raises(ConfigurationError):
        SymbolTable([Symbol("q1", "q", 1)])
    with pytest.raises(ConfigurationError):
        SymbolTable([Symbol("q1", "q", 1), Symbol("p1", "p", 1, "odd")])


def test_symbol_table_dict_round_trip():
    table = SymbolTable.standard(1, 1, constants=["K"])
    assert SymbolTable.from_dict(table.to_dict()) == table


# --- evaluation --------------------------------------------------------------

def test_evaluate_diagonal_square():
    assert evaluate(parse("Tr(q1^2)", ONE), {"q1": np.diag([1.0, 2.0])}) == pytest.approx(5)


def test_evaluate_pauli_product():
    value = evaluate(parse("Tr(q1*p1)", ONE), {"q1": SX, "p1": SY})
    assert value == pytest.approx(np.trace(SX @ SY))
    assert value == pytest.approx(0)


def test_evaluate_operator_matrix_binding():
    out = evaluate(parse("Tr(q1^2)", ONE), {"q1": OperatorMatrix.from_array(np.diag([1, 2]))})
    assert isinstance(out, GrassmannElement)
    assert out.body() == 5


def test_batched_evaluation():
    rng = np.random.default_rng(1)
    qs = np.array([random_hermitian_array(3, rng) for _ in range(4)])
    ps = np.array([random_hermitian_array(3, rng) for _ in range(4)])
    poly = parse("Tr(q1*p1*q1) + 2*Tr(p1^2)", ONE)
    batched = evaluate(poly, {"q1": qs, "p1": ps})
    single = [evaluate(poly, {"q1": q, "p1": p}) for q, p in zip(qs, ps)]
    assert np.allclose(batched, single, atol=1e-12)


def test_unbound_and_misgraded_bindings_raise():
    with pytest.raises(ConfigurationError):
        evaluate(parse("Tr(q1*p1)", ONE), {"q1": SX})
    even = random_graded(2, 2, "even", np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        evaluate(parse("Tr(f1*f2)", FERMI), {"f1": even, "f2": even})


def test_canonicalization_is_sound():
    rng = np.random.default_rng(2)
    letters = ["q1", "q2", "q3", "p1", "p2"]
    for _ in range(100):
        words = [TraceWord(complex(rng.normal(), rng.normal()),
                           tuple(rng.choice(letters, rng.integers(1, 6))))
                 for _ in range(4)]
        raw = TracePolynomial(words, THREE)
        binding = random_binding(THREE, 3, rng)
        assert evaluate(raw.canonicalize(), binding) == pytest.approx(evaluate(raw, binding),
                                                                      abs=1e-10)


def test_graded_canonicalization_is_sound():
    rng = np.random.default_rng(3)
    table = SymbolTable.standard(1, 2)
    letters = ["q1", "p1", "f1", "f2", "pf1"]
    for _ in range(30):
        words = [TraceWord(complex(rng.normal()), tuple(rng.choice(letters, rng.integers(1, 5))))
                 for _ in range(3)]
        raw = TracePolynomial(words, table)
        binding = {n: random_graded(2, 4, "odd" if table[n].odd else "even", rng)
                   for n in table}
        assert evaluate(raw.canonicalize(), binding).allclose(evaluate(raw, binding), 1e-10)


def test_canonicalize_idempotent_and_linear():
    rng = np.random.default_rng(4)
    a = parse("Tr(q1*q2*q1*p1) + 2*Tr(p2*q1)", THREE, canonical=False)
    b = parse("Tr(q2*q2*q1) - Tr(q1*p2)", THREE, canonical=False)
    assert a.canonicalize().canonicalize().words == a.canonicalize().words
    binding = random_binding(THREE, 3, rng)
    assert evaluate(a + 3 * b, binding) == pytest.approx(
        evaluate(a, binding) + 3 * evaluate(b, binding), abs=1e-10)


# --- cyclic derivative -------------------------------------------------------

def test_derivative_of_square():
    assert cyclic_derivative(parse("Tr(q1^2)", ONE), "q1") == OperatorPolynomial(
        [(2, ("q1",))], ONE)


def test_derivative_of_qpqp():
    d = cyclic_derivative(parse("Tr(q1*p1*q1*p1)", ONE), "q1")
    assert d == OperatorPolynomial([(2, ("p1", "q1", "p1"))], ONE)
    assert fx.fd_derivative_error(parse("Tr(q1*p1*q1*p1)", ONE), "q1") <= 1e-6


def test_derivative_of_coupled_word():
    poly = parse("Tr(q1*q2*q1*q2)", fx.TWO_DOF)
    assert cyclic_derivative(poly, "q1") == OperatorPolynomial([(2, ("q2", "q1", "q2"))],
                                                               fx.TWO_DOF)
    assert fx.fd_derivative_error(poly, "q1") <= 1e-6


@pytest.mark.parametrize("name, text, table", fx.DERIVATIVE_FIXTURES)
def test_derivatives_match_finite_differences(name, text, table):
    poly = parse(text, table)
    for k, symbol in enumerate(sorted(poly.letters_used())):
        assert fx.fd_derivative_error(poly, symbol, dim=3, directions=50, seed=k) <= 1e-6


def test_derivative_is_linear():
    a = parse("Tr(q1^3*p1)", ONE)
    b = parse("Tr(q1*p1*p1)", ONE)
    rng = np.random.default_rng(5)
    binding = random_binding(ONE, 3, rng)
    lhs = (a + 2 * b).derivative("q1").evaluate(binding)
    rhs = a.derivative("q1").evaluate(binding) + 2 * b.derivative("q1").evaluate(binding)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_fermionic_derivative_rotation_sign():
    # Tr(f1 f2) = -Tr(f2 f1): bring f1 to the end with a minus sign, then drop it
    d = cyclic_derivative(parse("Tr(f1*f2)", FERMI, canonical=False), "f1")
    assert d == OperatorPolynomial([(-1, ("f2",))], FERMI)


def test_derivative_unknown_symbol():
    with pytest.raises(ConfigurationError):
        cyclic_derivative(parse("Tr(q1)", ONE), "q7")


# --- unitary invariance ------------------------------------------------------

def test_qp_trace_is_invariant():
    assert check_unitary_invariance(parse("Tr(q1*p1)", ONE), trials=5)


def test_constant_breaks_invariance():
    table = SymbolTable.standard(1, constants=["K"])
    K = np.diag([1.0, 2.0, -3.0])
    assert not check_unitary_invariance(parse("Tr(q1*K)", table), trials=1,
                                        constants={"K": K})


def test_harmonic_hamiltonian_is_invariant():
    assert check_unitary_invariance(parse(fx.HARMONIC, ONE, {"w": 1.3}), trials=5)

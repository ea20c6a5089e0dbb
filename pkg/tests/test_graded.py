import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracedyn.errors import ConfigurationError
from tracedyn.graded import (GrassmannElement, Parity, g_adjoint, g_mul, g_parity, merge_sign,
                             random_element)

from oracles import as_tuples, sort_sign, tuple_adjoint, tuple_close, tuple_product


def theta(i, G=3):
    return GrassmannElement.generator(i, G)


def test_nilpotent_generator():
    assert (theta(0) * theta(0)).is_zero()


def test_generators_anticommute():
    assert theta(0) * theta(1) == -(theta(1) * theta(0))


def test_square_of_one_plus_bivector():
    a = 1 + theta(0) * theta(1)
    assert a * a == 1 + 2 * theta(0) * theta(1)
    assert tuple_close(as_tuples(a * a), tuple_product(as_tuples(a), as_tuples(a)))


def test_adjoint_examples():
    assert g_adjoint(GrassmannElement.scalar(1j)) == GrassmannElement.scalar(-1j)
    t12 = theta(0) * theta(1)
    assert g_adjoint(t12) == theta(1) * theta(0)
    assert g_adjoint(t12) == -t12
    assert g_adjoint((2 + 3j) * theta(0)) == (2 - 3j) * theta(0)


@pytest.mark.parametrize("element, parity", [
    (1 + theta(0) * theta(1), Parity.EVEN),
    (theta(2), Parity.ODD),
    (1 + theta(0), Parity.MIXED),
    (GrassmannElement(3), Parity.EVEN),
])
def test_parity(element, parity):
    assert g_parity(element) is parity


def test_parity_xor():
    assert Parity.ODD ^ Parity.ODD is Parity.EVEN
    assert Parity.ODD ^ Parity.EVEN is Parity.ODD


def test_monomial_order_sign():
    assert GrassmannElement.monomial([2, 0, 1], 3) == GrassmannElement.monomial([0, 1, 2], 3)
    assert GrassmannElement.monomial([1, 0], 3) == -GrassmannElement.monomial([0, 1], 3)


def test_merge_sign_matches_inversion_count():
    for a, b in itertools.product(range(16), repeat=2):
        ta = [i for i in range(4) if a >> i & 1]
        tb = [i for i in range(4) if b >> i & 1]
        assert merge_sign(a, b) == sort_sign(ta + tb)


def test_generator_count_mismatch_raises():
    with pytest.raises(ConfigurationError):
        g_mul(GrassmannElement.scalar(1, 2), GrassmannElement.scalar(1, 3))


def test_bad_inputs_rejected():
    with pytest.raises(ConfigurationError):
        GrassmannElement(13)
    with pytest.raises(ConfigurationError):
        GrassmannElement(2, {4: 1.0})
    with pytest.raises(ConfigurationError):
        GrassmannElement(2, {1: float("nan")})
    with pytest.raises(ConfigurationError):
        GrassmannElement.generator(3, 3)


@pytest.mark.parametrize("G", range(0, 7))
def test_product_matches_bruteforce(G):
    rng = np.random.default_rng(G)
    for _ in range(30):
        a = random_element(G, rng)
        b = random_element(G, rng)
        assert tuple_close(as_tuples(a * b), tuple_product(as_tuples(a), as_tuples(b)))


@pytest.mark.parametrize("G", range(0, 7))
def test_adjoint_matches_bruteforce(G):
    rng = np.random.default_rng(100 + G)
    for _ in range(30):
        a = random_element(G, rng)
        assert tuple_close(as_tuples(g_adjoint(a)), tuple_adjoint(as_tuples(a)))


elements = st.integers(0, 6).flatmap(
    lambda G: st.tuples(st.just(G), st.integers(0, 2**32 - 1)))


@settings(max_examples=200, deadline=None)
@given(elements)
def test_associativity(spec):
    G, seed = spec
    rng = np.random.default_rng(seed)
    a, b, c = (random_element(G, rng) for _ in range(3))
    assert ((a * b) * c).allclose(a * (b * c), 1e-10)


@settings(max_examples=200, deadline=None)
@given(elements)
def test_adjoint_involution_and_antihomomorphism(spec):
    G, seed = spec
    rng = np.random.default_rng(seed)
    a, b = random_element(G, rng), random_element(G, rng)
    assert g_adjoint(g_adjoint(a)) == a
    assert g_adjoint(a * b).allclose(g_adjoint(b) * g_adjoint(a), 1e-12)


@settings(max_examples=200, deadline=None)
@given(elements, st.sampled_from(["even", "odd"]), st.sampled_from(["even", "odd"]))
def test_graded_commutation(spec, pa, pb):
    G, seed = spec
    rng = np.random.default_rng(seed)
    a, b = random_element(G, rng, pa), random_element(G, rng, pb)
    sign = -1 if pa == pb == "odd" else 1
    assert (a * b).allclose(sign * (b * a), 1e-12)


@pytest.mark.parametrize("G", range(1, 7))
def test_product_of_g_plus_one_odd_elements_vanishes(G):
    rng = np.random.default_rng(G)
    prod = GrassmannElement.scalar(1, G)
    for _ in range(G + 1):
        prod = prod * random_element(G, rng, "odd", density=1.0)
    assert prod.is_zero()


def test_odd_element_squares_to_zero_without_commutation():
    rng = np.random.default_rng(0)
    a = random_element(4, rng, "odd", density=1.0)
    assert (a * a).allclose(GrassmannElement(4), 1e-12)

"""Reference models and initial data shared by the check suites, tests and demos."""

from __future__ import annotations

import numpy as np

from .dynamics import ModelSpec, PhaseSpaceState
from .gravastar import EOSSpec
from .opmatrix import random_hermitian_array
from .tracepoly import SymbolTable, parse

ONE_DOF = SymbolTable.standard(1)
TWO_DOF = SymbolTable.standard(2)

HARMONIC = "0.5*Tr(p1^2) + 0.5*w^2*Tr(q1^2)"
QUARTIC = "0.5*Tr(p1^2) + g*Tr(q1^4)"
# confining quadratic terms keep the commutator-type quartic bounded
COUPLED_QUARTIC = ("0.5*Tr(p1^2) + 0.5*Tr(p2^2) + 0.5*Tr(q1^2) + 0.5*Tr(q2^2)"
                   " + g*Tr(q1*q2*q1*q2)")
NON_INVARIANT = "0.5*Tr(p1^2) + 0.5*Tr(q1^2) + Tr(q1*K*p1)"

# trace polynomials used for derivative checks: (name, text, table)
DERIVATIVE_FIXTURES = [
    ("harmonic", "0.5*Tr(p1*p1) + 0.5*Tr(q1*q1)", ONE_DOF),
    ("quartic", "0.5*Tr(p1^2) + 0.1*Tr(q1^4)", ONE_DOF),
    ("coupled", "Tr(q1*q2*q1*q2) + 0.3*Tr(q1^2*q2^2)", TWO_DOF),
    ("degree6", "Tr(q1*q2*q1*q1*p2*q2) - 0.25*Tr(q1^3*p1^3)", TWO_DOF),
    ("mixed_qp", "Tr(q1*p1*q1*p1) + (0.5+0.5i)*Tr(q1*q1*p1) + (0.5-0.5i)*Tr(q1*p1*p1)", ONE_DOF),
]

# horizonless fixture that keeps epsilon = 1e-2 p_jump
GRAVASTAR_EOS = EOSSpec(p_jump=1.0, epsilon=1e-2, p_surface=1e-8)
GRAVASTAR_P_CENTER = 1.05
# the literal (p_center, epsilon) pair whose core pressure cannot reach p_jump
REFERENCE_P_CENTER = 1e3


def harmonic_model(dim: int, omega: float = 1.0) -> ModelSpec:
    return ModelSpec(parse(HARMONIC, ONE_DOF, {"w": omega}), dim)


def quartic_model(dim: int, g: float = 0.1) -> ModelSpec:
    return ModelSpec(parse(QUARTIC, ONE_DOF, {"g": g}), dim)


def coupled_quartic_model(dim: int, g: float = 0.1) -> ModelSpec:
    return ModelSpec(parse(COUPLED_QUARTIC, TWO_DOF, {"g": g}), dim)


def anti_hermitian_constant(dim: int, seed=99) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 1j * random_hermitian_array(dim, rng)


def non_invariant_model(dim: int, seed=99) -> ModelSpec:
    table = SymbolTable.standard(1, constants=["K"])
    return ModelSpec(parse(NON_INVARIANT, table), dim,
                     constants={"K": anti_hermitian_constant(dim, seed)})


def unit_state(n_dof: int, dim: int, seed) -> PhaseSpaceState:
    """Random Hermitian q_r, p_r, each scaled to unit Frobenius norm."""
    rng = np.random.default_rng(seed)

    def one():
        a = random_hermitian_array(dim, rng)
        return a / np.linalg.norm(a)

    return PhaseSpaceState(np.array([one() for _ in range(n_dof)]),
                           np.array([one() for _ in range(n_dof)]))


def fd_derivative_error(poly, symbol, dim=3, directions=50, seed=0, h=1e-5) -> float:
    """Worst relative gap between Tr(D E) and a central difference of Tr W along E.

    D is the cyclic derivative; E ranges over random Hermitian directions and
    all symbols are bound to random Hermitian matrices.
    """
    rng = np.random.default_rng(seed)
    binding = {name: random_hermitian_array(dim, rng) for name in poly.symbols}
    grad = poly.derivative(symbol).evaluate(binding)
    worst = 0.0
    for _ in range(directions):
        e = random_hermitian_array(dim, rng)
        plus = dict(binding, **{symbol: binding[symbol] + h * e})
        minus = dict(binding, **{symbol: binding[symbol] - h * e})
        fd = (poly.evaluate(plus) - poly.evaluate(minus)) / (2 * h)
        exact = np.trace(grad @ e)
        worst = max(worst, abs(fd - exact) / max(1.0, abs(exact)))
    return worst

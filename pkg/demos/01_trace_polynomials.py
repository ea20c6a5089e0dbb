"""
Trace polynomials and their cyclic derivatives
==============================================

A trace polynomial is a weighted sum of traces of matrix words. Because the
trace is cyclic, Tr(q p q) and Tr(q q p) are the same function; the parser
stores each word in one canonical rotation.
"""

import numpy as np

from tracedyn import SymbolTable, cyclic_derivative, parse
from tracedyn.opmatrix import random_hermitian_array

symbols = SymbolTable.standard(2)
H = parse("0.5*Tr(p1^2) + 0.5*Tr(p2^2) + 0.1*Tr(q1*q2*q1*q2) + 0.1*Tr(q2*q1*q2*q1)", symbols)
# the two quartic words are rotations of each other and merge
print("canonical form:", H)

# The gradient with respect to q1 rotates each occurrence of q1 to the end
# of its word and deletes it.
dH = cyclic_derivative(H, "q1")
print("dH/dq1 =", dH)

# Check it against a finite difference along a random Hermitian direction.
rng = np.random.default_rng(0)
binding = {name: random_hermitian_array(3, rng) for name in symbols}
E = random_hermitian_array(3, rng)
h = 1e-6
shifted = dict(binding, q1=binding["q1"] + h * E)
numeric = (H.evaluate(shifted) - H.evaluate(binding)) / h
exact = np.trace(dH.evaluate(binding) @ E)
print(f"directional derivative: exact {exact.real:.8f}, forward difference {numeric.real:.8f}")

# Fermionic (Grassmann-odd) symbols pick up signs under rotation.
fermi = SymbolTable.standard(0, 2)
print("Tr(f2*f1) ->", parse("Tr(f2*f1)", fermi))
print("Tr(f1*f1) ->", parse("Tr(f1*f1)", fermi), "(vanishes identically)")

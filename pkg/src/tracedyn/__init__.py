"""Numerical workbench for trace dynamics of noncommuting matrix variables."""

from importlib import resources

from .dynamics import (ConservationReport, LagrangianFlow, ModelSpec, PhaseSpaceState,
                       compute_tildeC, evolve, hamilton_rhs, legendre_transform, step_leapfrog,
                       step_rk4)
from .ensemble import (EnsembleParams, default_lambda, extract_ieff, gaussian_moments,
                       metropolis_chain, volume_preservation_check)
from .errors import (ConfigurationError, HorizonError, InvariantViolation, NumericalError,
                     TraceSyntaxError)
from .graded import GrassmannElement, Parity, g_adjoint, g_mul, g_parity
from .gravastar import (EOSSpec, TOVSolution, integrate_star, sweep, tov_rhs,
                        weyl_invariance_check)
from .opmatrix import (OperatorMatrix, anticommutator, commutator, mat_mul, random_hermitian,
                       trace)
from .tracepoly import (OperatorPolynomial, SymbolTable, TracePolynomial,
                        check_unitary_invariance, cyclic_derivative, evaluate, parse)

__version__ = "0.1.0"


def scenario_path(name: str) -> str:
    """Filesystem path of a bundled scenario, e.g. ``scenario_path("harmonic_evolve")``."""
    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files("tracedyn") / "scenarios" / name)

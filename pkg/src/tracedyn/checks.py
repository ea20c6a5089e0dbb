"""Invariant suites runnable from the command line (``tracedyn check <suite>``)."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import fixtures as fx
from .dynamics import compute_tildeC, evolve
from .ensemble import (EnsembleParams, extract_ieff, gaussian_moments, metropolis_chain,
                       volume_preservation_check)
from .errors import ConfigurationError
from .graded import GrassmannElement, random_element
from .gravastar import (einstein_hilbert_control, integrate_star, weyl_invariance_check)
from .opmatrix import mat_mul, random_graded
from .tracepoly import parse


@dataclasses.dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.value:.3e} {self.relation} {self.tolerance:.1e}"


def _le(name, value, tol):
    return CheckResult(name, float(value), tol, bool(value <= tol), "<=")


def _ge(name, value, tol):
    return CheckResult(name, float(value), tol, bool(value >= tol), ">=")


def algebra(trials: int = 200, seed: int = 0):
    rng = np.random.default_rng(seed)
    cyc = adj = 0.0
    nil = 0.0
    for _ in range(trials):
        G = int(rng.integers(1, 7))
        N = int(rng.integers(1, 5))
        ga, gb = rng.choice(["even", "odd"], 2)
        a = random_graded(N, G, ga, rng)
        b = random_graded(N, G, gb, rng)
        sign = -1 if (ga == "odd" and gb == "odd") else 1
        d = mat_mul(a, b).trace() - mat_mul(b, a).trace() * sign
        cyc = max(cyc, max((abs(v) for v in d.coeffs.values()), default=0.0))
        lhs, rhs = mat_mul(a, b).adjoint(), mat_mul(b.adjoint(), a.adjoint())
        adj = max(adj, max((np.max(np.abs(x)) for x in (lhs - rhs).components.values()),
                           default=0.0))
        prod = GrassmannElement.scalar(1, G)
        for _ in range(G + 1):
            prod = prod * random_element(G, rng, "odd", density=0.7)
        nil = max(nil, max((abs(v) for v in prod.coeffs.values()), default=0.0))
    return [_le("graded cyclicity Tr(AB) - (-1)^{|A||B|} Tr(BA)", cyc, 1e-12),
            _le("adjoint anti-homomorphism (AB)^+ - B^+ A^+", adj, 1e-12),
            _le("product of G+1 odd elements", nil, 0.0)]


def derivative(dim: int = 3, directions: int = 50):
    out = []
    for name, text, table in fx.DERIVATIVE_FIXTURES:
        poly = parse(text, table)
        worst = max(fx.fd_derivative_error(poly, s, dim, directions, seed=k)
                    for k, s in enumerate(sorted(poly.letters_used())))
        out.append(_le(f"cyclic derivative vs finite differences [{name}]", worst, 1e-6))
    return out


def conservation(dim: int = 4, T: float = 10.0, dt: float = 1e-3):
    out = []
    _, rep = evolve(fx.unit_state(1, dim, 1), fx.harmonic_model(dim), T, dt, stride=1000)
    out.append(_le("harmonic relative Tr H drift", rep.max_energy_drift, 1e-8))
    _, rep = evolve(fx.unit_state(2, dim, 2), fx.coupled_quartic_model(dim), T, dt, stride=1000)
    out.append(_le("coupled quartic relative Tr H drift", rep.max_energy_drift, 1e-8))
    out.append(_le("coupled quartic ||C~(t) - C~(0)||_F", rep.max_tildeC_drift, 1e-6))
    out.append(_ge("coupled quartic max individual [q_r,p_r] drift",
                   max(rep.max_commutator_drift), 1e-2))
    _, rep = evolve(fx.unit_state(1, dim, 3), fx.non_invariant_model(dim), T, dt, stride=1000)
    out.append(_ge("non-invariant Tr(q K p) C~ drift", rep.max_tildeC_drift, 1e-3))
    return out


def liouville():
    m2 = fx.harmonic_model(2)
    lf = volume_preservation_check(m2, dt=1e-2, step="leapfrog")
    r1 = volume_preservation_check(m2, dt=0.1, step="rk4")
    r2 = volume_preservation_check(m2, dt=0.05, step="rk4")
    gen = parse("Tr(q1*p1)", m2.symbols)
    e1 = volume_preservation_check(m2, gen, dt=2e-3)
    e2 = volume_preservation_check(m2, gen, dt=1e-3)
    zero = volume_preservation_check(m2, parse("0*Tr(q1)", m2.symbols), dt=1e-2)
    return [_le("leapfrog |det J - 1| (N=2, 16 real dims)", lf.deviation, 1e-10),
            _ge("RK4 |det J - 1| shrink factor on halving dt", r1.deviation / r2.deviation, 16),
            CheckResult("Euler Tr(qp) generator shrink factor on halving dt",
                        e1.deviation / e2.deviation, 4.0,
                        bool(abs(e1.deviation / e2.deviation - 4) < 0.1), "~="),
            _le("zero generator |det J - 1|", zero.deviation, 0.0)]


def ensemble(seed: int = 11):
    out = []
    model = fx.harmonic_model(2)
    params = EnsembleParams(model, tau=1.0, chains=8, steps=30_000, burn_in=3_000, seed=seed)
    res = metropolis_chain(params)
    mean_h, avg_c = gaussian_moments(params)
    z_h = abs(res.mean_traceH - mean_h) / res.stderr_traceH
    z_c = max(_zmax(res.avgC, avg_c, res.stderrC))
    out.append(_le("<Tr H> vs Gaussian oracle (sigma)", z_h, 3.0))
    out.append(_le("<C~> vs Gaussian oracle, worst element (sigma)", z_c, 3.0))
    dec = extract_ieff(res.avgC, res.stderrC)
    eye = np.eye(2)
    out.append(_le("i_eff^2 + 1", np.max(np.abs(dec.i_eff @ dec.i_eff + eye)), 1e-6))
    out.append(_le("|Tr i_eff|", abs(np.trace(dec.i_eff)), 1e-6))
    plus, minus = dec.sign_multiplicities()
    out.append(CheckResult("i_eff eigenvalue multiplicity imbalance", abs(plus - minus), 0,
                           plus == minus == 1, "=="))
    return out


def _zmax(est, exact, stderr):
    for part in (np.real, np.imag):
        se = part(stderr)
        diff = np.abs(part(est) - part(exact))
        yield float(np.max(np.where(se > 0, diff / np.where(se > 0, se, 1),
                                    np.where(diff > 1e-12, np.inf, 0.0))))


def gravastar():
    sol = integrate_star(fx.GRAVASTAR_P_CENTER, fx.GRAVASTAR_EOS)
    finer = integrate_star(fx.GRAVASTAR_P_CENTER, fx.GRAVASTAR_EOS, rtol=5e-12)
    dp, drho = sol.jump_discontinuity()
    rng = np.random.default_rng(5)
    samples = sol.metric_samples(10_000, rng)
    lam = rng.uniform(0.5, 2.0, 10_000)
    return [
        _ge("min_r (1 - 2m/r) on the horizonless fixture", sol.min_compactness, 0.0),
        _ge("min g00", float(np.min(sol.g00())), 0.0),
        _le("exterior Schwarzschild relative deviation", sol.exterior_deviation(), 1e-6),
        _le("|delta p| at the EOS jump", dp, 1e-12),
        _ge("|delta rho| at the EOS jump", abs(drho), 1e-3),
        _le("M_total change under tolerance halving (relative)",
            abs(finer.M_total - sol.M_total) / abs(sol.M_total), 1e-8),
        _le("Weyl integrand deviation", weyl_invariance_check(samples, lam), 1e-12),
        _ge("Einstein-Hilbert-like control deviation", einstein_hilbert_control(samples, lam),
            1e-3),
    ]


SUITES = {"algebra": algebra, "derivative": derivative, "conservation": conservation,
          "liouville": liouville, "ensemble": ensemble, "gravastar": gravastar}


def run_suite(name: str):
    try:
        fn = SUITES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    return fn()

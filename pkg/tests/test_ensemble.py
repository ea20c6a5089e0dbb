import numpy as np
import pytest

from tracedyn import fixtures as fx
from tracedyn.dynamics import ModelSpec
from tracedyn.ensemble import (Coordinates, EnsembleParams, check_bounded_below, default_lambda,
                               extract_ieff, gaussian_moments, metropolis_chain,
                               volume_preservation_check)
from tracedyn.errors import ConfigurationError, InvariantViolation
from tracedyn.tracepoly import SymbolTable, parse

from oracles import gaussian_oracle


def z_scores(est, exact, stderr):
    """Elementwise |est - exact| / stderr over real and imaginary parts."""
    out = []
    for part in (np.real, np.imag):
        se, diff = part(stderr), np.abs(part(est) - part(exact))
        out.append(np.where(se > 0, diff / np.where(se > 0, se, 1), np.where(diff > 1e-12,
                                                                              np.inf, 0)))
    return np.concatenate([o.ravel() for o in out])


def quick(model, **kw):
    kw.setdefault("chains", 4)
    kw.setdefault("steps", 10_000)
    kw.setdefault("burn_in", 1_000)
    return EnsembleParams(model, **kw)


def test_default_lambda_shapes():
    assert np.allclose(default_lambda(2), 0.2j * np.diag([1, -1]))
    assert np.allclose(default_lambda(3), 0.2j * np.diag([1, 0, -1]))
    lam = default_lambda(4)
    assert np.allclose(lam, -lam.conj().T) and abs(np.trace(lam)) == 0


def test_coordinates_round_trip():
    c = Coordinates(2, 3)
    rng = np.random.default_rng(0)
    x = rng.normal(size=c.size)
    q, p = c.to_matrices(x)
    assert np.allclose(q, np.conj(np.swapaxes(q, -1, -2)))
    assert np.allclose(c.from_matrices(q, p), x)


@pytest.mark.parametrize("N", [2, 3])
def test_library_gaussian_oracle_matches_independent_oracle(N):
    for lam in (default_lambda(N), np.zeros((N, N))):
        params = EnsembleParams(fx.harmonic_model(N), tau=1.3, lambda_tilde=lam)
        mean_h, avg_c = gaussian_moments(params)
        ref_h, ref_c = gaussian_oracle(N, 1.3, lam)
        assert mean_h == pytest.approx(ref_h, rel=1e-8)
        assert np.allclose(avg_c, ref_c, atol=1e-8)


def test_free_gaussian_mean_energy():
    mean_h, avg_c = gaussian_oracle(2, 2.0, np.zeros((2, 2)))
    assert mean_h == pytest.approx(4 / 2.0)
    assert np.allclose(avg_c, 0)


def test_zero_lambda_control():
    params = quick(fx.harmonic_model(2), lambda_tilde=np.zeros((2, 2)), seed=3)
    res = metropolis_chain(params)
    assert np.all(z_scores(res.avgC, 0, res.stderrC) <= 3.5)
    assert abs(res.mean_traceH - 4.0) <= 3.5 * res.stderr_traceH


def test_sampler_against_oracle_default_lambda():
    params = quick(fx.harmonic_model(2), seed=4)
    res = metropolis_chain(params)
    ref_h, ref_c = gaussian_oracle(2, 1.0, default_lambda(2))
    assert abs(res.mean_traceH - ref_h) <= 3.5 * res.stderr_traceH
    assert np.all(z_scores(res.avgC, ref_c, res.stderrC) <= 3.5)
    assert res.anti_hermitian_violation() <= 5
    assert 0.1 <= res.acceptance_rate <= 0.9
    assert res.ess > 0


def test_chain_determinism_and_thread_independence():
    params = quick(fx.harmonic_model(2), chains=3, steps=3_000, burn_in=300, seed=9)
    a = metropolis_chain(params)
    b = metropolis_chain(params, threads=3)
    assert np.array_equal(a.traceH_samples, b.traceH_samples)
    assert np.array_equal(a.avgC, b.avgC)


def test_more_chains_shares_leading_chains():
    p3 = quick(fx.harmonic_model(2), chains=3, steps=2_000, burn_in=200, seed=5)
    p6 = quick(fx.harmonic_model(2), chains=6, steps=2_000, burn_in=200, seed=5)
    a, b = metropolis_chain(p3), metropolis_chain(p6)
    assert np.array_equal(a.traceH_samples, b.traceH_samples[:3])


def test_doubling_chains_comparable_to_doubling_steps():
    base = dict(burn_in=1_000, seed=6)
    wide = metropolis_chain(quick(fx.harmonic_model(2), chains=8, steps=6_000, **base))
    long = metropolis_chain(quick(fx.harmonic_model(2), chains=4, steps=11_000, **base))
    gap = abs(wide.mean_traceH - long.mean_traceH)
    assert gap <= 3.5 * np.hypot(wide.stderr_traceH, long.stderr_traceH)


def test_acceptance_warning():
    params = quick(fx.harmonic_model(2), chains=1, steps=2_000, burn_in=100,
                   proposal_scale=20.0)
    with pytest.warns(RuntimeWarning, match="acceptance"):
        metropolis_chain(params)


def test_fermionic_model_rejected():
    with pytest.raises(ConfigurationError):
        ModelSpec(parse("Tr(q1*p1) + Tr(f1*pf1)", SymbolTable.standard(1, 1)), 2)


@pytest.mark.parametrize("text", [
    "0.5*Tr(p1^2) - 0.5*Tr(q1^2)",
    "0.5*Tr(p1^2) - Tr(q1^4)",
    "-0.5*Tr(p1^2) + Tr(q1^4)",
])
def test_unbounded_exponent_refused(text):
    params = quick(ModelSpec(parse(text, fx.ONE_DOF), 2))
    with pytest.raises(ConfigurationError):
        check_bounded_below(params)
    with pytest.raises(ConfigurationError):
        metropolis_chain(params)


def test_quartic_is_accepted():
    check_bounded_below(quick(fx.quartic_model(2)))


def test_params_validation():
    m = fx.harmonic_model(2)
    with pytest.raises(ConfigurationError):
        EnsembleParams(m, tau=0)
    with pytest.raises(ConfigurationError):
        EnsembleParams(m, lambda_tilde=np.eye(2))
    with pytest.raises(ConfigurationError):
        EnsembleParams(m, steps=100, burn_in=100)


# --- i_eff extraction --------------------------------------------------------

def test_ieff_canonical_form():
    hbar = 0.7
    dec = extract_ieff(hbar * 1j * np.diag([1, -1]))
    assert np.allclose(dec.i_eff, 1j * np.diag([1, -1]), atol=1e-14)
    assert np.allclose(dec.D, hbar * np.eye(2), atol=1e-14)
    assert dec.defect == 0 and dec.is_scalar and dec.hbar == pytest.approx(hbar)


def test_ieff_offdiagonal_closed_form():
    c = 0.3 + 0.4j
    dec = extract_ieff(np.array([[0, c], [-np.conj(c), 0]]))
    assert np.allclose(dec.D, 0.5 * np.eye(2), atol=1e-14)
    assert np.allclose(dec.i_eff @ dec.i_eff, -np.eye(2), atol=1e-14)
    assert np.allclose(dec.i_eff @ dec.D, [[0, c], [-np.conj(c), 0]], atol=1e-14)


def test_ieff_structure_random():
    rng = np.random.default_rng(0)
    for N in (2, 3, 4, 6):
        h = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        a = (h - h.conj().T) / 2
        dec = extract_ieff(a)
        I = np.eye(N)
        assert np.allclose(dec.i_eff @ dec.i_eff, -I, atol=1e-10)
        assert np.allclose(dec.i_eff.conj().T, -dec.i_eff, atol=1e-12)
        assert np.allclose(dec.i_eff @ dec.D - dec.D @ dec.i_eff, 0, atol=1e-10)
        assert np.allclose(dec.i_eff @ dec.D, a, atol=1e-10)
        assert np.all(np.linalg.eigvalsh(dec.D) >= -1e-12)


def test_ieff_defect_reported():
    dec = extract_ieff(1j * np.diag([1.0, 0.0, -1.0]))
    assert dec.defect == 1
    assert dec.sign_multiplicities() == (1, 1)
    assert not dec.is_scalar


def test_ieff_non_scalar_D_diagnosed():
    dec = extract_ieff(1j * np.diag([1.0, -2.0]))
    assert not dec.is_scalar and dec.spread > 0.05


def test_ieff_rejects_hermitian_part():
    a = 1j * np.diag([1.0, -1.0]) + np.array([[0, 1], [1, 0]])
    with pytest.raises(InvariantViolation):
        extract_ieff(a, stderr=np.full((2, 2), 0.01 + 0.01j))


# --- phase-space volume ------------------------------------------------------

def test_leapfrog_preserves_volume():
    rep = volume_preservation_check(fx.harmonic_model(2), dt=1e-2, step="leapfrog")
    assert rep.dim == 16
    assert rep.deviation <= 1e-10


def test_leapfrog_quartic_preserves_volume():
    rep = volume_preservation_check(fx.quartic_model(2), dt=1e-2, step="leapfrog")
    assert rep.deviation <= 1e-9


def test_euler_generator_second_order_deviation():
    m = fx.harmonic_model(2)
    g = parse("Tr(q1*p1)", m.symbols)
    a = volume_preservation_check(m, g, dt=2e-3)
    b = volume_preservation_check(m, g, dt=1e-3)
    assert a.deviation / b.deviation == pytest.approx(4, rel=0.02)


def test_zero_generator_exact():
    m = fx.harmonic_model(2)
    rep = volume_preservation_check(m, parse("0*Tr(q1)", m.symbols), dt=1e-2)
    assert rep.det == 1.0


def test_volume_check_limits():
    with pytest.raises(ConfigurationError):
        volume_preservation_check(fx.harmonic_model(4), dt=1e-2, step="leapfrog")
    with pytest.raises(ConfigurationError):
        volume_preservation_check(fx.harmonic_model(2), dt=1e-2, step="euler")

import csv
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tracedyn import fixtures as fx
from tracedyn.errors import ConfigurationError, HorizonError
from tracedyn.gravastar import (EOSSpec, JumpUnreachable, MetricSample, cosmological_integrand,
                                einstein_hilbert_control, integrate_star,
                                log10_jump_radius_bound, sweep, tov_rhs,
                                weyl_invariance_check, write_sweep_csv)

EOS = fx.GRAVASTAR_EOS


@pytest.fixture(scope="module")
def star():
    return integrate_star(fx.GRAVASTAR_P_CENTER, EOS)


def test_vacuum_rhs_is_schwarzschild():
    dm, dnu, dp = tov_rhs(10.0, 1.5, 0.0, 0.0, EOS)
    assert dm == 0 and dp == 0
    assert dnu == pytest.approx(1.5 / (10.0 * (10.0 - 3.0)))


def test_interior_branch_near_cancellation():
    eos = EOSSpec(p_jump=1.0, epsilon=1e-3)
    p = 2.0
    assert eos.rho(p, True) + p == pytest.approx(1e-3)
    r, m = 0.5, -0.1
    dm, dnu, dp = tov_rhs(r, m, 0.0, p, eos)
    assert dm == pytest.approx(4 * math.pi * r * r * (1e-3 - p))
    assert dp == pytest.approx(-1e-3 * dnu)


def test_exterior_branch_density():
    assert EOS.rho(0.5, False) == 1.5
    dm, _, _ = tov_rhs(1.0, 0.0, 0.0, 0.5, EOS)
    assert dm == pytest.approx(4 * math.pi * 1.5)


def test_horizon_raises():
    with pytest.raises(HorizonError):
        tov_rhs(1.0, 0.5, 0.0, 0.1, EOS)


def test_eos_validation():
    with pytest.raises(ConfigurationError):
        EOSSpec(p_jump=1.0, epsilon=2.0)
    with pytest.raises(ConfigurationError):
        EOSSpec(p_jump=1.0, p_surface=2.0)


def test_below_jump_equals_jump_disabled():
    a = integrate_star(0.5, EOS)
    b = integrate_star(0.5, EOSSpec(EOS.p_jump, EOS.epsilon, EOS.p_surface, jump=False))
    assert a.jump_radius is None
    assert np.array_equal(a.r, b.r) and np.array_equal(a.m, b.m)
    assert a.M_total == b.M_total


def test_ordinary_star_against_independent_solver():
    def rhs(r, y):
        m, p = y
        rho = 3 * max(p, 0)
        return [4 * math.pi * r * r * rho,
                -(rho + p) * (m + 4 * math.pi * r ** 3 * p) / (r * (r - 2 * m))]

    def surface(r, y):
        return y[1] - EOS.p_surface
    surface.terminal = True
    r0 = 1e-8
    ref = solve_ivp(rhs, (r0, 1e6), [4 * math.pi * r0 ** 3 * 1.5, 0.5], method="RK45",
                    events=surface, rtol=1e-10, atol=1e-14)
    sol = integrate_star(0.5, EOS)
    assert sol.M_total == pytest.approx(ref.y[0, -1], rel=1e-6)
    assert sol.R_surface == pytest.approx(ref.t[-1], rel=1e-6)


def test_fixture_is_horizonless(star):
    assert star.jump_radius is not None
    assert star.min_compactness > 0
    assert np.all(star.g00() > 0)
    assert star.is_horizonless()


def test_fixture_exterior_schwarzschild(star):
    assert star.exterior_r[-1] == pytest.approx(10 * star.R_surface)
    assert star.exterior_deviation() <= 1e-6


def test_fixture_jump_structure(star):
    dp, drho = star.jump_discontinuity()
    assert dp == 0.0
    assert drho == pytest.approx(3 * EOS.p_jump - (EOS.epsilon - EOS.p_jump))
    i = star.jump_index
    assert star.r[i] == star.r[i + 1] == star.jump_radius


def test_fixture_pressure_decreasing(star):
    steps = np.diff(star.p)
    steps = np.delete(steps, star.jump_index)
    assert np.all(steps < 0)
    assert np.all(np.diff(star.r)[np.arange(len(star.r) - 1) != star.jump_index] > 0)


def test_fixture_tolerance_stability(star):
    finer = integrate_star(fx.GRAVASTAR_P_CENTER, EOS, rtol=5e-12)
    assert abs(finer.M_total - star.M_total) / star.M_total <= 1e-8


def test_core_mass_negative(star):
    core = star.r[: star.jump_index + 1]
    assert np.all(star.m[: star.jump_index + 1][core > 0] < 0)


def test_reference_point_is_refused():
    assert log10_jump_radius_bound(fx.REFERENCE_P_CENTER, EOS) > 190
    with pytest.raises(JumpUnreachable):
        integrate_star(fx.REFERENCE_P_CENTER, EOS)


def test_jump_bound_consistent_with_fixture(star):
    assert 10 ** log10_jump_radius_bound(fx.GRAVASTAR_P_CENTER, EOS) <= star.jump_radius


def test_profile_csv(star, tmp_path):
    path = tmp_path / "profile.csv"
    star.write_profile_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0][:3] == ["r", "m", "nu"]
    assert len(rows) > len(star.r)


def test_weyl_identity_scaling(star):
    samples = star.metric_samples(1000, np.random.default_rng(0))
    assert weyl_invariance_check(samples, np.ones(1000)) == 0.0


def test_weyl_random_scaling(star):
    rng = np.random.default_rng(1)
    samples = star.metric_samples(10_000, rng)
    lam = rng.uniform(0.5, 2.0, 10_000)
    assert weyl_invariance_check(samples, lam) <= 1e-12
    assert einstein_hilbert_control(samples, lam) > 1e-3


def test_weyl_rejects_bad_samples():
    m = MetricSample(np.array([-1.0]), np.array([1.0]), np.array([1.0]), np.array([1.0]))
    with pytest.raises(ConfigurationError):
        weyl_invariance_check(m, np.array([1.0]))


def test_integrand_formula():
    assert cosmological_integrand(2.0, 3.0) == pytest.approx(0.75)


def test_single_point_sweep_matches_run(star):
    (row,) = sweep([fx.GRAVASTAR_P_CENTER], [EOS])
    assert row["status"] == "ok"
    assert row["M_total"] == star.M_total
    assert row["min_compactness"] == star.min_compactness


def test_sweep_isolates_failures(tmp_path):
    rows = sweep([0.5, fx.REFERENCE_P_CENTER, 1.05], [EOS], threads=2)
    assert [r["status"] == "ok" for r in rows] == [True, False, True]
    assert rows[1]["status"].startswith("failed: JumpUnreachable")
    assert rows[2]["M_total"] == integrate_star(1.05, EOS).M_total
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    assert len(list(csv.reader(open(path)))) == 4


def test_sweep_records_compactness_trend():
    rows = sweep([1.02, 1.05, 1.1], [EOS])
    assert all(r["status"] == "ok" and r["min_compactness"] > 0 for r in rows)

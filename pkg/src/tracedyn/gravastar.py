"""TOV stars with an energy-density jump at high pressure, in units G = c = 1.

Exterior matter is relativistic (rho = 3p).  Above ``p_jump`` the equation of
state switches to rho = -p + epsilon, so rho + p is small in the core.  The
pressure stays continuous across the switch; only rho jumps.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, HorizonError, NumericalError


@dataclasses.dataclass(frozen=True)
class EOSSpec:
    p_jump: float = 1.0
    epsilon: float = 1e-2
    p_surface: float = 1e-8
    jump: bool = True
    Lambda: float = 0.0   # housed for the Weyl-invariant action; enters no solved equation

    def __post_init__(self):
        if not 0 < self.p_surface < self.p_jump:
            raise ConfigurationError("need 0 < p_surface < p_jump")
        if not 0 < self.epsilon < self.p_jump:
            raise ConfigurationError("need 0 < epsilon < p_jump")

    def rho(self, p: float, interior: bool) -> float:
        return -p + self.epsilon if interior else 3.0 * p

    def starts_interior(self, p_center: float) -> bool:
        return self.jump and p_center >= self.p_jump


def tov_rhs(r, m, nu, p, eos: EOSSpec, interior: bool | None = None):
    """(dm/dr, dnu/dr, dp/dr).  ``interior`` defaults to the branch test p >= p_jump."""
    if r <= 0:
        raise ConfigurationError("r must be positive")
    if 2 * m >= r:
        raise HorizonError(f"2m >= r at r={r:.6g} (m={m:.6g}): horizon formed")
    if interior is None:
        interior = eos.jump and p >= eos.p_jump
    rho = eos.rho(p, interior) if p > 0 else 0.0
    p = max(p, 0.0)
    f = (m + 4 * math.pi * r ** 3 * p) / (r * (r - 2 * m))
    return 4 * math.pi * r * r * rho, f, -(rho + p) * f


def log10_jump_radius_bound(p_center: float, eos: EOSSpec) -> float:
    """log10 of a lower bound on the radius where p first falls to p_jump.

    In the core rho <= epsilon - p_jump < 0, so m < 0, r - 2m >= r (1 + a r^2)
    with a = 8 pi (p_jump - epsilon) / 3, and -dlnp/dr <= 4 pi epsilon r / (1 + a r^2).
    Integrating gives ln(p_c / p_jump) <= 3 epsilon / (4 (p_jump - epsilon)) ln(1 + a r^2).
    """
    if not eos.starts_interior(p_center):
        return -math.inf
    a = 8 * math.pi * (eos.p_jump - eos.epsilon) / 3
    expo = math.log(p_center / eos.p_jump) * 4 * (eos.p_jump - eos.epsilon) / (3 * eos.epsilon)
    # r^2 >= (e^expo - 1) / a
    if expo > 50:
        log_r2 = expo - math.log(a)
    else:
        log_r2 = math.log(math.expm1(expo) / a) if expo > 0 else -math.inf
    return 0.5 * log_r2 / math.log(10)


class JumpUnreachable(NumericalError):
    """The core pressure cannot fall to p_jump within the radial budget."""


@dataclasses.dataclass
class MetricSample:
    g00: np.ndarray
    sqrt_g4: np.ndarray
    r: np.ndarray
    theta: np.ndarray


@dataclasses.dataclass
class TOVSolution:
    r: np.ndarray
    m: np.ndarray
    nu: np.ndarray
    p: np.ndarray
    rho: np.ndarray
    R_surface: float
    M_total: float
    min_compactness: float
    jump_radius: float | None
    jump_index: int | None      # r[jump_index] == r[jump_index + 1] == jump_radius
    exterior_r: np.ndarray
    exterior_nu: np.ndarray
    p_center: float
    eos: EOSSpec

    def g00(self) -> np.ndarray:
        return np.exp(2 * self.nu)

    def compactness_profile(self) -> np.ndarray:
        return 1 - 2 * self.m / self.r

    def is_horizonless(self) -> bool:
        return self.min_compactness > 0 and bool(np.all(self.g00() > 0)) \
            and bool(np.all(np.exp(2 * self.exterior_nu) > 0))

    def exterior_deviation(self) -> float:
        """Max relative gap between e^{2 nu} and 1 - 2M/r on [R, 10 R]."""
        schw = 1 - 2 * self.M_total / self.exterior_r
        return float(np.max(np.abs(np.exp(2 * self.exterior_nu) - schw) / np.abs(schw)))

    def jump_discontinuity(self):
        """(|delta p|, delta rho) across the EOS switch, outer minus inner."""
        if self.jump_index is None:
            return None
        i = self.jump_index
        return abs(self.p[i + 1] - self.p[i]), self.rho[i + 1] - self.rho[i]

    def metric_samples(self, n: int, rng: np.random.Generator) -> MetricSample:
        """Random points in the matter region with g00 and sqrt(-g) of the static metric."""
        order = np.argsort(self.r, kind="stable")
        r_s = rng.uniform(self.r[0], self.R_surface, n)
        nu = np.interp(r_s, self.r[order], self.nu[order])
        m = np.interp(r_s, self.r[order], self.m[order])
        theta = rng.uniform(0.05, np.pi - 0.05, n)
        g00 = np.exp(2 * nu)
        sqrt_g4 = np.exp(nu) / np.sqrt(1 - 2 * m / r_s) * r_s ** 2 * np.sin(theta)
        return MetricSample(g00, sqrt_g4, r_s, theta)

    def summary(self) -> dict:
        return {"p_center": self.p_center, "p_jump": self.eos.p_jump,
                "epsilon": self.eos.epsilon, "M_total": self.M_total,
                "R_surface": self.R_surface, "min_compactness": self.min_compactness,
                "jump_radius": self.jump_radius}

    def write_profile_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "m", "nu", "p", "rho", "one_minus_2m_over_r"])
            for row in zip(self.r, self.m, self.nu, self.p, self.rho, self.compactness_profile()):
                w.writerow([repr(float(x)) for x in row])
            for r, nu in zip(self.exterior_r[1:], self.exterior_nu[1:]):
                w.writerow([repr(float(x)) for x in
                            (r, self.M_total, nu, 0.0, 0.0, 1 - 2 * self.M_total / r)])


def _segment(y0, r0, r_max, eos, interior, stop_p, rtol):
    def rhs(r, y):
        m, nu, p = y
        rho = eos.rho(p, interior)
        denom = r * (r - 2 * m)
        f = (m + 4 * math.pi * r ** 3 * p) / denom if denom > 0 else 0.0
        return [4 * math.pi * r * r * rho, f, -(rho + p) * f]

    def hit_pressure(r, y):
        return y[2] - stop_p
    hit_pressure.terminal = True
    hit_pressure.direction = -1

    def horizon(r, y):
        return r - 2 * y[0]
    horizon.terminal = True
    horizon.direction = -1

    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=rtol,
                    atol=[1e-300, rtol * 1e-8, 1e-300], events=[hit_pressure, horizon])
    if sol.status < 0:
        raise NumericalError(f"TOV integration failed: {sol.message}")
    if sol.t_events[1].size:
        r_h = sol.t_events[1][0]
        raise HorizonError(f"2m >= r reached at r={r_h:.6g}: horizon formed")
    if not sol.t_events[0].size:
        raise NumericalError(
            f"pressure did not fall to {stop_p:.3g} before r_max={r_max:.3g} "
            f"(p={sol.y[2, -1]:.6g} at r={sol.t[-1]:.6g})")
    r_hit = sol.t_events[0][0]
    y_hit = sol.y_events[0][0].copy()
    y_hit[2] = stop_p
    r = np.append(sol.t[:-1], r_hit) if sol.t[-1] != r_hit else sol.t
    ys = np.column_stack([sol.y[:, :-1], y_hit]) if sol.t[-1] != r_hit else sol.y
    ys[:, -1] = y_hit
    return r, ys


def integrate_star(p_center: float, eos: EOSSpec, dr_initial: float | None = None,
                   rtol: float = 1e-11, r_max: float | None = None,
                   exterior_points: int = 400) -> TOVSolution:
    """Integrate outward from a series start to p = p_surface, then match to vacuum.

    The EOS branch switches at most once, at the first crossing p = p_jump.
    ``nu`` is shifted so that e^{2 nu(R)} = 1 - 2M/R.
    """
    if p_center <= eos.p_surface:
        raise ConfigurationError("p_center must exceed p_surface")
    scale = 1 / math.sqrt(eos.p_jump)
    r_max = 1e12 * scale if r_max is None else r_max
    bound = log10_jump_radius_bound(p_center, eos)
    if bound > math.log10(r_max):
        raise JumpUnreachable(
            f"core pressure cannot fall from {p_center:.6g} to p_jump={eos.p_jump:.6g} "
            f"before r ~ 10^{bound:.1f}; r_max is {r_max:.3g}. With rho = -p + epsilon the "
            "core mass is negative and the pressure decays only logarithmically in r")

    interior = eos.starts_interior(p_center)
    rho_c = eos.rho(p_center, interior)
    if dr_initial is None:
        dr_initial = 1e-6 / math.sqrt(4 * math.pi * (abs(rho_c) + 3 * p_center))
    r0 = dr_initial
    # second-order series about r = 0
    m0 = 4 * math.pi / 3 * rho_c * r0 ** 3
    nu0 = 2 * math.pi / 3 * (rho_c + 3 * p_center) * r0 ** 2
    p0 = p_center - 2 * math.pi / 3 * (rho_c + p_center) * (rho_c + 3 * p_center) * r0 ** 2
    y0 = [m0, nu0, p0]

    rs, ys, rhos = [], [], []
    jump_radius = jump_index = None
    if interior:
        r1, y1 = _segment(y0, r0, r_max, eos, True, eos.p_jump, rtol)
        rs.append(r1)
        ys.append(y1)
        rhos.append(np.array([eos.rho(p, True) for p in y1[2]]))
        jump_radius = float(r1[-1])
        jump_index = len(r1) - 1
        y0, r0 = y1[:, -1].copy(), r1[-1]
    r2, y2 = _segment(y0, r0, r_max, eos, False, eos.p_surface, rtol)
    rs.append(r2)
    ys.append(y2)
    rhos.append(np.array([eos.rho(p, False) for p in y2[2]]))

    r = np.concatenate(rs)
    m, nu, p = np.concatenate(ys, axis=1)
    rho = np.concatenate(rhos)
    R, M = float(r[-1]), float(m[-1])
    if 2 * M >= R:
        raise HorizonError(f"surface at R={R:.6g} lies inside 2M={2 * M:.6g}")

    # vacuum exterior out to 10 R, integrated rather than written in closed form
    def vac(rr, y):
        return [M / (rr * (rr - 2 * M))]
    r_ext = R * np.geomspace(1, 10, exterior_points)
    ext = solve_ivp(vac, (R, 10 * R), [nu[-1]], method="DOP853", t_eval=r_ext,
                    rtol=rtol, atol=1e-300)
    shift = 0.5 * math.log(1 - 2 * M / R) - nu[-1]
    nu = nu + shift
    ext_nu = ext.y[0] + shift
    comp = 1 - 2 * m / r
    return TOVSolution(r, m, nu, p, rho, R, M, float(comp.min()), jump_radius, jump_index,
                       r_ext, ext_nu, p_center, eos)


# --- Weyl scaling ----------------------------------------------------------------

def cosmological_integrand(g00, sqrt_g4):
    """(-g)^{1/2} (g00)^{-2}, the non-derivative Weyl-invariant action density."""
    return sqrt_g4 * g00 ** -2


def weyl_invariance_check(metric: MetricSample, lam) -> float:
    """Max relative change of the integrand under g -> lambda^2 g, pointwise."""
    lam = np.asarray(lam, float)
    if np.any(metric.g00 <= 0):
        raise ConfigurationError("g00 must be positive")
    if np.any(lam <= 0):
        raise ConfigurationError("lambda must be positive")
    before = cosmological_integrand(metric.g00, metric.sqrt_g4)
    after = cosmological_integrand(lam ** 2 * metric.g00, lam ** 4 * metric.sqrt_g4)
    return float(np.max(np.abs(after - before) / np.abs(before)))


def einstein_hilbert_control(metric: MetricSample, lam, curvature=None) -> float:
    """Same measurement for sqrt(-g) * R with a curvature proxy scaling as lambda^-2."""
    lam = np.asarray(lam, float)
    curv = np.ones_like(metric.g00) if curvature is None else np.asarray(curvature)
    before = metric.sqrt_g4 * curv
    after = (lam ** 4 * metric.sqrt_g4) * (lam ** -2 * curv)
    return float(np.max(np.abs(after - before) / np.abs(before)))


# --- sweeps ---------------------------------------------------------------------

SWEEP_COLUMNS = ["p_center", "p_jump", "epsilon", "status", "M_total", "R_surface",
                 "min_compactness", "jump_radius"]


def _sweep_row(pc, eos, kwargs):
    row = {"p_center": pc, "p_jump": eos.p_jump, "epsilon": eos.epsilon}
    try:
        sol = integrate_star(pc, eos, **kwargs)
    except (NumericalError, ConfigurationError) as exc:
        row.update(status=f"failed: {type(exc).__name__}: {exc}".splitlines()[0],
                   M_total=None, R_surface=None, min_compactness=None, jump_radius=None)
        return row
    row.update(status="ok", M_total=sol.M_total, R_surface=sol.R_surface,
               min_compactness=sol.min_compactness, jump_radius=sol.jump_radius)
    return row


def sweep(p_centers, eos_grid, threads: int = 1, **kwargs) -> list[dict]:
    """One row per (eos, p_center); failed runs are flagged and the sweep continues."""
    jobs = [(pc, eos) for eos in eos_grid for pc in p_centers]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda j: _sweep_row(j[0], j[1], kwargs), jobs))
    return [_sweep_row(pc, eos, kwargs) for pc, eos in jobs]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row[k] is None else
                            repr(row[k]) if isinstance(row[k], float) else row[k])
                        for k in SWEEP_COLUMNS})

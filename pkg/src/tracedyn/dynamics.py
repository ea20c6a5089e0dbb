"""Operator Hamilton and Euler-Lagrange dynamics for bosonic trace models.

States hold all coordinates stacked as ``q[r]`` / ``p[r]`` complex arrays of
shape ``(R, N, N)``; the trace polynomial machinery supplies the gradients.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from collections.abc import Mapping

import numpy as np

from .errors import ConfigurationError, NumericalError
from .opmatrix import OperatorMatrix, anticommutator, commutator
from .tracepoly import (OperatorPolynomial, Symbol, SymbolTable, TracePolynomial, TraceWord,
                        canonicalize, check_unitary_invariance, cyclic_derivative, evaluate)


@dataclasses.dataclass(frozen=True)
class PhaseSpaceState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex)
        p = np.asarray(self.p, dtype=complex)
        if q.ndim == 2:
            q, p = q[None], p[None]
        if q.shape != p.shape or q.ndim != 3 or q.shape[1] != q.shape[2]:
            raise ConfigurationError(f"q/p shapes {q.shape} / {p.shape} are not (R, N, N)")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n_dof(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def hermiticity_error(self) -> float:
        err = 0.0
        for x in (self.q, self.p):
            err = max(err, float(np.max(np.abs(x - np.conj(np.swapaxes(x, 1, 2))))))
        return err

    def to_dict(self) -> dict:
        def grid(a):
            return [[[float(z.real), float(z.imag)] for z in row] for row in a]
        return {"t": self.t, "q": [grid(x) for x in self.q], "p": [grid(x) for x in self.p]}


class ModelSpec:
    """A bosonic trace Hamiltonian with precompiled gradients.

    ``constants`` binds the ``constant``-kind symbols to fixed matrices.
    """

    def __init__(self, hamiltonian: TracePolynomial, dim: int, constants: Mapping | None = None,
                 lagrangian: TracePolynomial | None = None, inverse_mass=None):
        symbols = hamiltonian.symbols
        if not symbols.is_bosonic():
            raise ConfigurationError(
                "dynamics integration supports bosonic models only; fermionic content is "
                "handled by the algebraic checks")
        self.symbols = symbols
        self.hamiltonian = canonicalize(hamiltonian)
        self.dim = dim
        self.constants = {k: np.asarray(v, dtype=complex) for k, v in (constants or {}).items()}
        for s in symbols.of_kind("constant"):
            if s.name not in self.constants:
                raise ConfigurationError(f"constant {s.name!r} is not bound")
            if self.constants[s.name].shape != (dim, dim):
                raise ConfigurationError(f"constant {s.name!r} must be {dim}x{dim}")
        self.q_names = [s.name for s in symbols.of_kind("q")]
        self.p_names = [symbols.partner(symbols[q].dof, "p").name for q in self.q_names]
        self.grad_q = [cyclic_derivative(self.hamiltonian, n) for n in self.q_names]
        self.grad_p = [cyclic_derivative(self.hamiltonian, n) for n in self.p_names]
        self.lagrangian = lagrangian
        self.inverse_mass = None if inverse_mass is None else np.asarray(inverse_mass)
        self.unitary_invariant = check_unitary_invariance(
            self.hamiltonian, trials=3, dim=min(dim, 3) if not self.constants else dim,
            constants=self.constants)

    @classmethod
    def from_text(cls, text: str, symbols: SymbolTable, dim: int, params=None, constants=None):
        from .tracepoly import parse
        return cls(parse(text, symbols, params), dim, constants)

    @property
    def n_dof(self) -> int:
        return len(self.q_names)

    def binding(self, q, p) -> dict:
        out = dict(self.constants)
        for r, (qn, pn) in enumerate(zip(self.q_names, self.p_names)):
            out[qn] = q[..., r, :, :]
            out[pn] = p[..., r, :, :]
        return out

    def energy(self, state: PhaseSpaceState) -> complex:
        return complex(evaluate(self.hamiltonian, self.binding(state.q, state.p)))

    def separable_parts(self):
        """``(T(p), V(q))`` if every word is pure-momentum or momentum-free, else ``None``."""
        kinetic, potential = [], []
        for w in self.hamiltonian.words:
            kinds = {self.symbols[x].kind for x in w.letters}
            if kinds <= {"p"} and kinds:
                kinetic.append(w)
            elif "p" not in kinds:
                potential.append(w)
            else:
                return None
        return (TracePolynomial(kinetic, self.symbols), TracePolynomial(potential, self.symbols))

    def is_separable(self) -> bool:
        return self.separable_parts() is not None


def _eval_all(polys, binding, shape):
    out = np.empty(shape, dtype=complex)
    for r, poly in enumerate(polys):
        out[r] = poly.evaluate(binding)
    return out


def hamilton_rhs(state: PhaseSpaceState, model: ModelSpec):
    """``(qdot, pdot)`` with qdot_r = dH/dp_r and pdot_r = -dH/dq_r."""
    if state.q.shape != (model.n_dof, model.dim, model.dim):
        raise ConfigurationError(
            f"state shape {state.q.shape} does not match model ({model.n_dof}, {model.dim})")
    b = model.binding(state.q, state.p)
    qdot = _eval_all(model.grad_p, b, state.q.shape)
    pdot = -_eval_all(model.grad_q, b, state.q.shape)
    return qdot, pdot


def step_rk4(state: PhaseSpaceState, model: ModelSpec, dt: float) -> PhaseSpaceState:
    def f(q, p):
        return hamilton_rhs(PhaseSpaceState(q, p), model)

    q, p = state.q, state.p
    k1q, k1p = f(q, p)
    k2q, k2p = f(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = f(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = f(q + dt * k3q, p + dt * k3p)
    return PhaseSpaceState(q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q),
                           p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p),
                           state.t + dt)


def step_leapfrog(state: PhaseSpaceState, model: ModelSpec, dt: float) -> PhaseSpaceState:
    """Kick-drift-kick; requires H = T(p) + V(q)."""
    if not model.is_separable():
        raise ConfigurationError("leapfrog needs a separable Hamiltonian T(p) + V(q)")
    shape = state.q.shape
    q, p = state.q, state.p
    p = p - 0.5 * dt * _eval_all(model.grad_q, model.binding(q, p), shape)
    q = q + dt * _eval_all(model.grad_p, model.binding(q, p), shape)
    p = p - 0.5 * dt * _eval_all(model.grad_q, model.binding(q, p), shape)
    return PhaseSpaceState(q, p, state.t + dt)


INTEGRATORS = {"rk4": step_rk4, "leapfrog": step_leapfrog}


def compute_tildeC(state, symbols: SymbolTable | None = None):
    """Sum of [q_r, p_r] over bosonic dofs minus {q_r, p_r} over fermionic ones.

    ``state`` is a :class:`PhaseSpaceState` (bosonic, returns an array) or a
    mapping ``symbol name -> OperatorMatrix`` (graded, returns an OperatorMatrix).
    """
    if isinstance(state, PhaseSpaceState):
        q, p = state.q, state.p
        return np.sum(q @ p - p @ q, axis=0)
    if symbols is None:
        raise ConfigurationError("a symbol table is needed for graded bindings")
    total = None
    for qs in symbols.of_kind("q"):
        ps = symbols.partner(qs.dof, "p")
        qm, pm = state[qs.name], state[ps.name]
        if not isinstance(qm, OperatorMatrix):
            qm, pm = OperatorMatrix.from_array(qm), OperatorMatrix.from_array(pm)
        term = -anticommutator(qm, pm) if qs.odd else commutator(qm, pm)
        total = term if total is None else total + term
    return total


# --- Legendre transform and the Lagrangian path -------------------------------

class LegendreError(ConfigurationError):
    pass


def _hamiltonian_table(lag_symbols: SymbolTable) -> SymbolTable:
    syms = []
    for s in lag_symbols.values():
        if s.kind == "qdot":
            name = "p" + s.name[4:] if s.name.startswith("qdot") else f"p_{s.name}"
            syms.append(Symbol(name, "p", s.dof, s.grading))
        else:
            syms.append(s)
    return SymbolTable(syms)


def legendre_transform(lagrangian: TracePolynomial, dim: int, constants=None) -> ModelSpec:
    """H = Tr sum_r p_r qdot_r - L for L = 1/2 sum M_rs Tr(qdot_r qdot_s) - V(q).

    Words mixing velocities with coordinates, or with a velocity degree other
    than 0 or 2, are rejected, as is a singular kinetic matrix M.
    """
    lagrangian = canonicalize(lagrangian)
    symbols = lagrangian.symbols
    if not symbols.is_bosonic():
        raise LegendreError("Legendre transform supports bosonic Lagrangians only")
    vel = symbols.of_kind("qdot")
    index = {s.name: i for i, s in enumerate(vel)}
    kinetic = np.zeros((len(vel), len(vel)))
    potential = []
    for w in lagrangian.words:
        vs = [x for x in w.letters if symbols[x].kind == "qdot"]
        if not vs:
            potential.append(w)
            continue
        if len(vs) != 2 or len(w.letters) != 2:
            raise LegendreError(f"unsupported velocity dependence in Tr({'*'.join(w.letters)})")
        if abs(w.coefficient.imag) > 0:
            raise LegendreError("kinetic coefficients must be real")
        a, b = index[vs[0]], index[vs[1]]
        c = w.coefficient.real
        if a == b:
            kinetic[a, a] += 2 * c
        else:
            kinetic[a, b] += c
            kinetic[b, a] += c
    if not vel or np.linalg.matrix_rank(kinetic) < len(vel) or \
            np.linalg.cond(kinetic) > 1e12:
        raise LegendreError(f"kinetic form is not invertible:\n{kinetic}")
    inv = np.linalg.inv(kinetic)
    htable = _hamiltonian_table(symbols)
    pname = {s.name: htable.partner(s.dof, "p").name for s in vel}
    words = []
    for a, sa in enumerate(vel):
        for b, sb in enumerate(vel):
            if b < a:
                continue
            coef = 0.5 * inv[a, a] if a == b else inv[a, b]
            if coef:
                words.append(TraceWord(coef, (pname[sa.name], pname[sb.name])))
    words += [TraceWord(-w.coefficient, w.letters) for w in potential]
    return ModelSpec(TracePolynomial(words, htable), dim, constants,
                     lagrangian=lagrangian, inverse_mass=inv)


class LagrangianFlow:
    """Direct integration of d/dt dL/dqdot_r = dL/dq_r.

    The acceleration is found by solving the linear system
    sum_s D_{qdot_s}(dL/dqdot_r)[a_s] = dL/dq_r - sum_s D_{q_s}(dL/dqdot_r)[v_s]
    over all complex matrix entries, so no kinetic-form structure is assumed.
    """

    def __init__(self, lagrangian: TracePolynomial, dim: int, constants=None):
        self.lagrangian = canonicalize(lagrangian)
        self.symbols = self.lagrangian.symbols
        self.dim = dim
        self.constants = {k: np.asarray(v, complex) for k, v in (constants or {}).items()}
        self.q_names = [s.name for s in self.symbols.of_kind("q")]
        self.v_names = [self.symbols.partner(self.symbols[q].dof, "qdot").name
                        for q in self.q_names]
        self.momenta = [cyclic_derivative(self.lagrangian, v) for v in self.v_names]
        self.forces = [cyclic_derivative(self.lagrangian, q) for q in self.q_names]

    def binding(self, q, v):
        out = dict(self.constants)
        for r, (qn, vn) in enumerate(zip(self.q_names, self.v_names)):
            out[qn], out[vn] = q[r], v[r]
        return out

    def momentum(self, q, v) -> np.ndarray:
        b = self.binding(q, v)
        return np.array([m.evaluate(b) for m in self.momenta])

    def force(self, q, v) -> np.ndarray:
        b = self.binding(q, v)
        return np.array([f.evaluate(b) for f in self.forces])

    def acceleration(self, q, v) -> np.ndarray:
        R, N = len(self.q_names), self.dim
        b = self.binding(q, v)
        rhs = self.force(q, v)
        for r, m in enumerate(self.momenta):
            for s, qn in enumerate(self.q_names):
                rhs[r] -= m.directional(b, qn, v[s])
        n = R * N * N
        system = np.empty((n, n), dtype=complex)
        col = 0
        for s, vn in enumerate(self.v_names):
            for i in range(N):
                for j in range(N):
                    e = np.zeros((N, N), complex)
                    e[i, j] = 1.0
                    system[:, col] = np.concatenate(
                        [m.directional(b, vn, e).ravel() for m in self.momenta])
                    col += 1
        try:
            a = np.linalg.solve(system, rhs.reshape(-1))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular velocity Hessian in Euler-Lagrange solve") from exc
        return a.reshape(R, N, N)

    def step_rk4(self, q, v, dt):
        def f(q, v):
            return v, self.acceleration(q, v)

        k1q, k1v = f(q, v)
        k2q, k2v = f(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
        k3q, k3v = f(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
        k4q, k4v = f(q + dt * k3q, v + dt * k3v)
        return (q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q),
                v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))

    def integrate(self, q0, v0, T, dt):
        """Positions and velocities at every step, shape ``(steps + 1, R, N, N)``."""
        steps = int(round(T / dt))
        qs, vs = [np.asarray(q0, complex)], [np.asarray(v0, complex)]
        for _ in range(steps):
            q, v = self.step_rk4(qs[-1], vs[-1], dt)
            qs.append(q)
            vs.append(v)
        return np.array(qs), np.array(vs)

    def residual(self, qs, vs, dt) -> float:
        """Max-norm of dL/dq - d/dt dL/dqdot with a central time difference."""
        worst = 0.0
        moms = [self.momentum(q, v) for q, v in zip(qs, vs)]
        for k in range(1, len(qs) - 1):
            ddt = (moms[k + 1] - moms[k - 1]) / (2 * dt)
            worst = max(worst, float(np.max(np.abs(self.force(qs[k], vs[k]) - ddt))))
        return worst


# --- trajectories ---------------------------------------------------------------

@dataclasses.dataclass
class ConservationReport:
    energy0: float
    max_energy_drift: float           # relative
    max_tildeC_drift: float           # Frobenius
    max_commutator_drift: list        # per dof, Frobenius
    max_hermiticity_error: float
    steps: int

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass
class Trajectory:
    t: np.ndarray
    trace_h: np.ndarray
    re_tr_c2: np.ndarray
    dof_drift: np.ndarray             # (samples, R)
    states: list

    def write_csv(self, path):
        R = self.dof_drift.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "TrH", "ReTrC2"] + [f"drift_dof{r + 1}" for r in range(R)])
            for k in range(len(self.t)):
                w.writerow([repr(float(self.t[k])), repr(float(self.trace_h[k])),
                            repr(float(self.re_tr_c2[k]))]
                           + [repr(float(x)) for x in self.dof_drift[k]])

    def write_snapshots(self, path):
        with open(path, "w") as fh:
            json.dump([s.to_dict() for s in self.states], fh)


def evolve(state: PhaseSpaceState, model: ModelSpec, T: float, dt: float,
           integrator: str = "rk4", stride: int = 1, keep_states: bool = False):
    """Integrate for time ``T`` and monitor the trace Hamiltonian and the charge C~.

    Drift statistics use every step; the returned trajectory keeps every
    ``stride``-th sample.
    """
    if T <= 0 or dt <= 0:
        raise ConfigurationError("T and dt must be positive")
    try:
        step = INTEGRATORS[integrator]
    except KeyError:
        raise ConfigurationError(f"unknown integrator {integrator!r}") from None
    steps = int(round(T / dt))
    e0 = model.energy(state).real
    c0 = compute_tildeC(state)
    parts0 = state.q @ state.p - state.p @ state.q
    scale = abs(e0) if e0 != 0 else 1.0

    ts, hs, c2s, drifts, kept = [], [], [], [], []
    max_e = max_c = max_h = 0.0
    max_parts = np.zeros(state.n_dof)
    cur = state
    # blow-ups are reported as NumericalError below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps + 1):
            if k:
                cur = step(cur, model, dt)
            if not (np.all(np.isfinite(cur.q)) and np.all(np.isfinite(cur.p))):
                raise NumericalError(f"non-finite state at step {k} (t={cur.t:.6g})")
            e = model.energy(cur).real
            c = compute_tildeC(cur)
            parts = cur.q @ cur.p - cur.p @ cur.q
            part_drift = np.linalg.norm(parts - parts0, axis=(1, 2))
            max_e = max(max_e, abs(e - e0) / scale)
            max_c = max(max_c, float(np.linalg.norm(c - c0)))
            max_parts = np.maximum(max_parts, part_drift)
            max_h = max(max_h, cur.hermiticity_error())
            if k % stride == 0:
                ts.append(cur.t)
                hs.append(e)
                c2s.append(float(np.trace(c @ c).real))
                drifts.append(part_drift)
                if keep_states:
                    kept.append(cur)
    report = ConservationReport(e0, max_e, max_c, [float(x) for x in max_parts], max_h, steps)
    traj = Trajectory(np.array(ts), np.array(hs), np.array(c2s), np.array(drifts), kept)
    return traj, report

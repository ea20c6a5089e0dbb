"""Canonical-ensemble sampling over the flat matrix phase-space measure.

The chain lives on the real coordinates of Hermitian q_r and p_r: N diagonal
entries plus real and imaginary parts of the N(N-1)/2 upper-triangle entries
per matrix.  The weight is exp(-tau Tr H - Tr(lambda~ C~)).
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import ModelSpec, PhaseSpaceState, step_leapfrog, step_rk4
from .errors import ConfigurationError, InvariantViolation
from .tracepoly import TracePolynomial, cyclic_derivative, evaluate

N_BATCHES = 20


def default_lambda(dim: int, strength: float = 0.2) -> np.ndarray:
    """strength * i * diag(+1, ..., +1, [0,] -1, ..., -1); traceless and anti-Hermitian."""
    half = dim // 2
    signs = [1.0] * half + [0.0] * (dim - 2 * half) + [-1.0] * half
    return 1j * strength * np.diag(signs)


def hermitian_basis(dim: int) -> np.ndarray:
    """Basis ``B`` with ``M = sum_k x_k B_k`` for the N^2 real coordinates of a Hermitian M."""
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), complex)
        e[i, i] = 1
        basis.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), complex)
            e[i, j] = e[j, i] = 1
            basis.append(e)
            e = np.zeros((dim, dim), complex)
            e[i, j], e[j, i] = 1j, -1j
            basis.append(e)
    return np.array(basis)


class Coordinates:
    """Maps between flat real vectors and stacked Hermitian (q, p)."""

    def __init__(self, n_dof: int, dim: int):
        self.n_dof, self.dim = n_dof, dim
        self.basis = hermitian_basis(dim)
        self.per_matrix = dim * dim
        self.size = 2 * n_dof * self.per_matrix

    def to_matrices(self, x):
        x = np.asarray(x, float)
        lead = x.shape[:-1]
        mats = np.einsum("...k,kmn->...mn",
                         x.reshape(lead + (2 * self.n_dof, self.per_matrix)), self.basis)
        return mats[..., :self.n_dof, :, :], mats[..., self.n_dof:, :, :]

    def from_matrices(self, q, p):
        out = []
        for m in list(q) + list(p):
            m = np.asarray(m)
            vals = [m[i, i].real for i in range(self.dim)]
            for i in range(self.dim):
                for j in range(i + 1, self.dim):
                    vals += [m[i, j].real, m[i, j].imag]
            out += vals
        return np.array(out)


@dataclasses.dataclass
class EnsembleParams:
    model: ModelSpec
    tau: float = 1.0
    lambda_tilde: np.ndarray | None = None
    chains: int = 8
    steps: int = 40_000
    burn_in: int = 4_000
    proposal_scale: float | None = None
    seed: int = 0
    block: int = 1000

    def __post_init__(self):
        N = self.model.dim
        if self.lambda_tilde is None:
            self.lambda_tilde = default_lambda(N)
        self.lambda_tilde = np.asarray(self.lambda_tilde, complex)
        if self.lambda_tilde.shape != (N, N):
            raise ConfigurationError(f"lambda_tilde must be {N}x{N}")
        if np.max(np.abs(self.lambda_tilde + self.lambda_tilde.conj().T)) > 1e-12:
            raise ConfigurationError("lambda_tilde must be anti-Hermitian")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if not self.model.symbols.is_bosonic():
            raise ConfigurationError("fermionic ensembles (Berezin integration) are not supported")
        if self.steps <= self.burn_in or (self.steps - self.burn_in) < N_BATCHES:
            raise ConfigurationError("need at least 20 kept samples per chain")
        if self.chains < 1:
            raise ConfigurationError("need at least one chain")
        if self.proposal_scale is None:
            d = 2 * self.model.n_dof * N * N
            self.proposal_scale = 1.5 / np.sqrt(d * self.tau)


@dataclasses.dataclass
class ChainResult:
    mean_traceH: float
    stderr_traceH: float
    avgC: np.ndarray
    stderrC: np.ndarray         # complex: stderr of real part + 1j * stderr of imag part
    acceptance_rate: float
    ess: float
    n_samples: int
    traceH_samples: np.ndarray  # (chains, kept)

    def anti_hermitian_violation(self) -> float:
        """Largest |avgC + avgC^dagger| / 2 in units of its stderr."""
        sym = (self.avgC + self.avgC.conj().T) / 2
        err = np.hypot(self.stderrC.real, self.stderrC.imag)
        err = (err + err.T) / 2
        ratio = np.abs(sym) / np.where(err > 0, err, np.inf)
        return float(np.max(ratio))

    def to_dict(self):
        def grid(a):
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}
        return {
            "mean_traceH": self.mean_traceH, "stderr_traceH": self.stderr_traceH,
            "avgC": grid(self.avgC), "stderrC": grid(self.stderrC),
            "acceptance_rate": self.acceptance_rate, "ess": self.ess,
            "n_samples": self.n_samples,
        }


class _Weight:
    def __init__(self, params: EnsembleParams):
        self.model = params.model
        self.tau = params.tau
        self.lam = params.lambda_tilde
        self.coords = Coordinates(params.model.n_dof, params.model.dim)

    def observables(self, x):
        q, p = self.coords.to_matrices(x)
        h = evaluate(self.model.hamiltonian, self.model.binding(q, p)).real
        c = np.sum(q @ p - p @ q, axis=-3)
        source = np.einsum("mn,...nm->...", self.lam, c).real
        return self.tau * h + source, h, c


def check_bounded_below(params: EnsembleParams, trials: int = 200):
    """Refuse weights whose exponent is not bounded below.

    Quadratic models: the Hessian of the full exponent must be positive
    definite.  Higher degree: the top-degree part of H must be positive in
    random directions (it dominates at large field) and the quadratic
    momentum/source sector must be positive definite.
    """
    w = _Weight(params)
    d = w.coords.size
    degree = max((len(x.letters) for x in params.model.hamiltonian.words), default=0)
    hess = _hessian(lambda x: w.observables(x)[0], d)
    if degree <= 2:
        ev = np.linalg.eigvalsh(hess)
        if ev.min() <= 0:
            raise ConfigurationError(
                f"Boltzmann exponent is unbounded below (min Hessian eigenvalue {ev.min():.3g}); "
                "reduce |lambda_tilde| or check the Hamiltonian")
        return
    top = TracePolynomial([x for x in params.model.hamiltonian.words
                           if len(x.letters) == degree], params.model.symbols)
    rng = np.random.default_rng(12345)
    for _ in range(trials):
        q, p = w.coords.to_matrices(rng.normal(size=d))
        if evaluate(top, params.model.binding(q, p)).real < 0:
            raise ConfigurationError("highest-degree part of H is negative in some direction")
    half = d // 2
    ev = np.linalg.eigvalsh(hess[half:, half:])
    if ev.min() <= 0:
        raise ConfigurationError("momentum sector of the exponent is not positive definite")


def _hessian(f, d):
    """Exact for quadratic f: second differences with unit steps."""
    zero = np.zeros(d)
    f0 = f(zero)
    eye = np.eye(d)
    single = np.array([f(eye[i]) for i in range(d)])
    hess = np.empty((d, d))
    for i in range(d):
        hess[i, i] = 2 * (single[i] - f0)
        for j in range(i + 1, d):
            hess[i, j] = hess[j, i] = f(eye[i] + eye[j]) - single[i] - single[j] + f0
    return hess


def _run_chains(params: EnsembleParams, chain_ids, seeds):
    """Vectorized Metropolis for a group of chains; returns per-chain accumulators."""
    w = _Weight(params)
    d, N = w.coords.size, params.model.dim
    C = len(chain_ids)
    rngs = [np.random.default_rng(s) for s in seeds]
    kept = params.steps - params.burn_in
    bsize = kept // N_BATCHES
    x = np.zeros((C, d))
    e, h, c = w.observables(x)
    h_samples = np.empty((C, kept))
    batch_h = np.zeros((C, N_BATCHES))
    batch_c = np.zeros((C, N_BATCHES, N, N), complex)
    accepted = np.zeros(C)
    step = 0
    while step < params.steps:
        n = min(params.block, params.steps - step)
        z = np.stack([r.normal(size=(n, d)) for r in rngs], axis=1)
        u = np.stack([r.random(n) for r in rngs], axis=1)
        for b in range(n):
            prop = x + params.proposal_scale * z[b]
            e2, h2, c2 = w.observables(prop)
            with np.errstate(over="ignore"):
                ok = np.log(u[b]) < e - e2
            x = np.where(ok[:, None], prop, x)
            e = np.where(ok, e2, e)
            h = np.where(ok, h2, h)
            c = np.where(ok[:, None, None], c2, c)
            k = step - params.burn_in
            if k >= 0:
                accepted += ok
                h_samples[:, k] = h
                bi = k // bsize
                if bi < N_BATCHES:
                    batch_h[:, bi] += h
                    batch_c[:, bi] += c
            step += 1
    used = bsize * N_BATCHES
    return {"h": h_samples, "bh": batch_h / bsize, "bc": batch_c / bsize,
            "acc": accepted / kept, "used": used}


def metropolis_chain(params: EnsembleParams, threads: int = 1) -> ChainResult:
    """Metropolis-Hastings estimate of <Tr H> and <C~> with batch-means error bars.

    Chain ``k`` draws from its own stream spawned from ``params.seed``, so the
    result does not depend on ``threads``.
    """
    check_bounded_below(params)
    seeds = np.random.SeedSequence(params.seed).spawn(params.chains)
    ids = list(range(params.chains))
    groups = [ids[i::max(threads, 1)] for i in range(max(threads, 1))]
    groups = [g for g in groups if g]
    if len(groups) == 1:
        parts = [_run_chains(params, groups[0], [seeds[i] for i in groups[0]])]
    else:
        with ThreadPoolExecutor(len(groups)) as pool:
            parts = list(pool.map(lambda g: _run_chains(params, g, [seeds[i] for i in g]),
                                  groups))
    order = [i for g in groups for i in g]
    perm = np.argsort(order)

    def gather(key):
        return np.concatenate([p[key] for p in parts])[perm]

    h_samples, bh, bc, acc = gather("h"), gather("bh"), gather("bc"), gather("acc")
    nb = bh.size
    bh_flat = bh.reshape(-1)
    bc_flat = bc.reshape(nb, *bc.shape[2:])
    mean_h = float(bh_flat.mean())
    se_h = float(bh_flat.std(ddof=1) / np.sqrt(nb))
    avg_c = bc_flat.mean(axis=0)
    se_c = (bc_flat.real.std(axis=0, ddof=1) + 1j * bc_flat.imag.std(axis=0, ddof=1)) / np.sqrt(nb)
    used = parts[0]["used"]
    var = h_samples[:, :used].var()
    tau_int = (used / N_BATCHES) * bh_flat.var(ddof=1) / var if var > 0 else 1.0
    ess = float(params.chains * used / max(tau_int, 1.0))
    rate = float(acc.mean())
    if not 0.1 <= rate <= 0.9:
        warnings.warn(f"Metropolis acceptance rate {rate:.3f} outside [0.1, 0.9]; "
                      "adjust proposal_scale", RuntimeWarning, stacklevel=2)
    return ChainResult(mean_h, se_h, avg_c, se_c, rate, ess, params.chains * used, h_samples)


def gaussian_moments(params: EnsembleParams):
    """Exact <Tr H> and <C~> for a quadratic exponent via its covariance matrix.

    The exponent, Tr H, and each entry of C~ are read off as quadratic forms by
    second differences; Sigma = (2 Q)^{-1} for exponent x^T Q x.
    """
    w = _Weight(params)
    d, N = w.coords.size, params.model.dim
    if max((len(x.letters) for x in params.model.hamiltonian.words), default=0) > 2:
        raise ConfigurationError("Gaussian moments need a quadratic Hamiltonian")
    q_exp = _hessian(lambda x: w.observables(x)[0], d) / 2
    cov = np.linalg.inv(2 * q_exp)
    h_form = _hessian(lambda x: w.observables(x)[1], d) / 2
    h0 = w.observables(np.zeros(d))[1]
    mean_h = float(np.trace(h_form @ cov) + h0)
    avg_c = np.empty((N, N), complex)
    for m in range(N):
        for n in range(N):
            re = _hessian(lambda x: w.observables(x)[2][m, n].real, d) / 2
            im = _hessian(lambda x: w.observables(x)[2][m, n].imag, d) / 2
            avg_c[m, n] = np.trace(re @ cov) + 1j * np.trace(im @ cov)
    return mean_h, avg_c


# --- i_eff extraction ------------------------------------------------------------

@dataclasses.dataclass
class IeffDecomposition:
    i_eff: np.ndarray
    D: np.ndarray
    residual: float
    defect: int
    D_eigenvalues: np.ndarray
    hbar: float
    spread: float
    is_scalar: bool

    def ieff_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.i_eff)

    def sign_multiplicities(self) -> tuple:
        ev = self.ieff_eigenvalues()
        return int(np.sum(ev.imag > 0.5)), int(np.sum(ev.imag < -0.5))

    def to_dict(self):
        def grid(a):
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}
        ev = np.sort_complex(self.ieff_eigenvalues())
        return {"i_eff": grid(self.i_eff), "D": grid(self.D),
                "D_eigenvalues": self.D_eigenvalues.tolist(), "hbar": self.hbar,
                "spread": self.spread, "is_scalar": self.is_scalar,
                "residual": self.residual, "defect": self.defect,
                "i_eff_eigenvalues": {"re": ev.real.tolist(), "im": ev.imag.tolist()},
                "multiplicities": {"+i": self.sign_multiplicities()[0],
                                   "-i": self.sign_multiplicities()[1]}}


def extract_ieff(avgC, stderr=None, cutoff: float = 1e-8, scalar_tol: float = 0.05,
                 asymmetry_limit: float = 5.0) -> IeffDecomposition:
    """Split an anti-Hermitian average as ``avgC = i_eff D``.

    ``i avgC`` is Hermitian; with ``i avgC = W diag(mu) W^dagger`` one has
    ``D = W |mu| W^dagger`` and ``i_eff = -i W sign(mu) W^dagger``.
    Eigenvalues below ``cutoff * max|mu|`` are defect directions: D and i_eff
    vanish there and ``defect`` counts them.
    """
    a = np.asarray(avgC, complex)
    herm_part = (a + a.conj().T) / 2
    if stderr is not None:
        err = np.hypot(np.real(stderr), np.imag(stderr))
        err = (err + err.T) / 2
        bad = np.abs(herm_part) > asymmetry_limit * np.where(err > 0, err, 0)
        if np.any(bad & (np.abs(herm_part) > 1e-14)):
            raise InvariantViolation(
                f"<C~> is not anti-Hermitian within {asymmetry_limit} standard errors")
    anti = (a - a.conj().T) / 2
    mu, W = np.linalg.eigh(1j * anti)
    scale = np.max(np.abs(mu), initial=0.0)
    keep = np.abs(mu) > cutoff * scale if scale > 0 else np.zeros_like(mu, bool)
    signs = np.where(keep, np.sign(mu), 0.0)
    Wd = W.conj().T
    D = (W * np.where(keep, np.abs(mu), 0.0)) @ Wd
    i_eff = -1j * (W * signs) @ Wd
    resid = float(np.linalg.norm(anti - i_eff @ D))
    d_ev = np.sort(np.abs(mu[keep]))
    hbar = float(d_ev.mean()) if d_ev.size else 0.0
    spread = float((d_ev.max() - d_ev.min()) / hbar) if d_ev.size else 0.0
    return IeffDecomposition(i_eff, D, resid, int(np.sum(~keep)), d_ev, hbar, spread,
                             bool(d_ev.size == len(mu) and spread <= scalar_tol))


# --- measure invariance -------------------------------------------------------------

@dataclasses.dataclass
class JacobianReport:
    det: float
    deviation: float
    dim: int
    step: str
    dt: float

    def to_dict(self):
        return dataclasses.asdict(self)


def _complex_pack(q, p):
    z = np.concatenate([q.ravel(), p.ravel()])
    return np.concatenate([z.real, z.imag])


def _complex_unpack(x, shape):
    n = x.size // 2
    z = x[:n] + 1j * x[n:]
    half = n // 2
    return z[:half].reshape(shape), z[half:].reshape(shape)


def volume_preservation_check(model: ModelSpec, generator: TracePolynomial | None = None,
                              dt: float = 1e-2, step: str = "euler", state=None,
                              seed: int = 0, h: float = 1e-5) -> JacobianReport:
    """|det J - 1| of one phase-space map on the real and imaginary parts of all entries.

    ``step="euler"`` applies delta q = dt dG/dp, delta p = -dt dG/dq for the
    trace generator G; ``"leapfrog"`` and ``"rk4"`` take one Hamiltonian step.
    The Jacobian is I plus a central finite difference of the increment.
    """
    if not model.symbols.is_bosonic():
        raise ConfigurationError("volume check is bosonic-only")
    N, R = model.dim, model.n_dof
    if N > 3:
        raise ConfigurationError(f"Jacobian of dimension {4 * R * N * N} is beyond desk scale (N <= 3)")
    shape = (R, N, N)
    if state is None:
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(2,) + shape) + 1j * rng.normal(size=(2,) + shape)
        state = PhaseSpaceState(0.5 * z[0], 0.5 * z[1])

    if step == "euler":
        if generator is None:
            raise ConfigurationError("euler step needs a generator")
        if generator.symbols != model.symbols:
            raise ConfigurationError("generator must use the model's symbol table")
        gq = [cyclic_derivative(generator, n) for n in model.q_names]
        gp = [cyclic_derivative(generator, n) for n in model.p_names]

        def increment(q, p):
            b = model.binding(q, p)
            dq = np.array([g.evaluate(b) for g in gp]).reshape(shape)
            dp = -np.array([g.evaluate(b) for g in gq]).reshape(shape)
            return dt * dq, dt * dp
    elif step in ("leapfrog", "rk4"):
        stepper = step_leapfrog if step == "leapfrog" else step_rk4

        def increment(q, p):
            s = stepper(PhaseSpaceState(q, p), model, dt)
            return s.q - q, s.p - p
    else:
        raise ConfigurationError(f"unknown step {step!r}")

    x0 = _complex_pack(state.q, state.p)
    n = x0.size
    jac = np.eye(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        plus = _complex_pack(*increment(*_complex_unpack(x0 + e, shape)))
        minus = _complex_pack(*increment(*_complex_unpack(x0 - e, shape)))
        jac[:, k] += (plus - minus) / (2 * h)
    det = float(np.linalg.det(jac))
    return JacobianReport(det, abs(det - 1.0), n, step, dt)


def results_json(result: ChainResult, decomposition: IeffDecomposition | None = None,
                 extra=None) -> str:
    data = {"chain": result.to_dict()}
    if decomposition is not None:
        data["ieff"] = decomposition.to_dict()
    if extra:
        data.update(extra)
    return json.dumps(data, indent=2, sort_keys=True)

"""
Canonical ensemble and the effective imaginary unit
===================================================

Sampling exp(-tau Tr H - Tr(lambda C~)) for the matrix harmonic oscillator
gives an anti-Hermitian average <C~>. Writing <C~> = i_eff D with D positive
and commuting with i_eff gives an i_eff that squares to -1 and is traceless.
"""

import numpy as np

from tracedyn import EnsembleParams, extract_ieff, gaussian_moments, metropolis_chain
from tracedyn import fixtures as fx

N = 2
params = EnsembleParams(fx.harmonic_model(N), tau=1.0, chains=8, steps=20_000, burn_in=2_000,
                        seed=2026)
print("lambda~ =\n", params.lambda_tilde)

res = metropolis_chain(params, threads=4)
mean_h, exact_c = gaussian_moments(params)
print(f"acceptance {res.acceptance_rate:.2f}, effective samples {res.ess:.0f}")
print(f"<Tr H> = {res.mean_traceH:.4f} +- {res.stderr_traceH:.4f}   (exact {mean_h:.4f})")
print("<C~> sampled:\n", np.round(res.avgC, 4))
print("<C~> exact:\n", np.round(exact_c, 4))

dec = extract_ieff(res.avgC, res.stderrC)
print("i_eff =\n", np.round(dec.i_eff, 6))
print("D eigenvalues:", dec.D_eigenvalues, "scalar D:", dec.is_scalar)
print("i_eff^2 + 1 =", np.abs(dec.i_eff @ dec.i_eff + np.eye(N)).max())
print("eigenvalues of i_eff:", np.round(dec.ieff_eigenvalues(), 12))
